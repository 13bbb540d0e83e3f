"""
Custom exceptions and exception handler for the Heston Galerkin lab
"""
from typing import Dict, Optional

from rest_framework.exceptions import ValidationError


EXIT_OK = 0
EXIT_MALFORMED = 1
EXIT_VALIDATION = 2
EXIT_VIOLATION = 3


class HestonError(Exception):
    """Base error; carries a detail message, a machine code and a CLI exit code."""
    default_detail = 'Heston lab error'
    default_code = 'heston_error'
    exit_code = EXIT_MALFORMED

    def __init__(self, detail: Optional[str] = None, code: Optional[str] = None, **context):
        self.detail = detail if detail is not None else self.default_detail
        self.code = code if code is not None else self.default_code
        self.context = context
        super().__init__(self.detail)

    def __str__(self):
        return str(self.detail)


class ConfigError(HestonError):
    default_detail = 'Malformed run configuration'
    default_code = 'malformed_config'
    exit_code = EXIT_MALFORMED


class InvalidParameterError(HestonError):
    default_detail = 'Model parameters violate an invariant'
    default_code = 'invalid_parameter'
    exit_code = EXIT_VALIDATION

    def __init__(self, invariant: str, detail: Optional[str] = None):
        super().__init__(detail or f"Invariant violated: {invariant}", invariant=invariant)
        self.invariant = invariant


class DomainError(HestonError):
    default_detail = 'Argument outside the domain of the weighted half-plane'
    default_code = 'domain_error'


class RankDeficiencyError(HestonError):
    default_detail = 'Gram matrix is numerically singular'
    default_code = 'rank_deficient'

    def __init__(self, condition: float, detail: Optional[str] = None):
        super().__init__(
            detail or f"Gram matrix is numerically singular (condition estimate {condition:.3e})",
            condition=condition,
        )
        self.condition = condition


class ShiftNotAdmissible(HestonError):
    default_detail = 'Complex shift outside the admissible range'
    default_code = 'shift_not_admissible'
    exit_code = EXIT_VALIDATION


class PathNotAdmissible(HestonError):
    default_detail = 'Path parameters violate the domain conditions'
    default_code = 'path_not_admissible'
    exit_code = EXIT_VALIDATION


class PayoffNotAdmissible(HestonError):
    default_detail = 'Payoff does not belong to the weighted space H'
    default_code = 'payoff_not_admissible'
    exit_code = EXIT_VALIDATION


class ParameterMismatchError(HestonError):
    default_detail = 'State and model parameters do not match'
    default_code = 'parameter_mismatch'


class LinearSolveError(HestonError):
    default_detail = 'Linear solve failed'
    default_code = 'linear_solve_failed'
    exit_code = EXIT_VIOLATION

    def __init__(self, condition: float, detail: Optional[str] = None, step: Optional[int] = None):
        super().__init__(
            detail or f"Linear solve failed (condition estimate {condition:.3e})",
            condition=condition, step=step,
        )
        self.condition = condition
        self.step = step


class OracleIntegrationError(HestonError):
    default_detail = 'Characteristic-function integral did not converge'
    default_code = 'oracle_integration_failed'
    exit_code = EXIT_VIOLATION

    def __init__(self, tail: Dict, detail: Optional[str] = None):
        super().__init__(detail, tail=tail)
        self.tail = tail


def _pointer_errors(detail, prefix: str = '') -> Dict[str, list]:
    """Flatten a DRF error tree into JSON-pointer keyed messages."""
    flat = {}
    if isinstance(detail, dict):
        for key, value in detail.items():
            pointer = prefix if key == 'non_field_errors' else f"{prefix}/{key}"
            for sub_key, messages in _pointer_errors(value, pointer).items():
                flat.setdefault(sub_key, []).extend(messages)
    elif isinstance(detail, list):
        if all(not isinstance(item, (dict, list)) for item in detail):
            flat[prefix or '/'] = [str(item) for item in detail]
        else:
            for index, item in enumerate(detail):
                for sub_key, messages in _pointer_errors(item, f"{prefix}/{index}").items():
                    flat.setdefault(sub_key, []).extend(messages)
    else:
        flat[prefix or '/'] = [str(detail)]
    return flat


def custom_exception_handler(exc, context=None):
    """
    Custom exception handler to provide consistent error payload format
    """
    payload = {
        'status': 'error',
        'message': str(exc.detail) if hasattr(exc, 'detail') and not isinstance(exc, ValidationError) else str(exc),
    }

    # Add errors field for validation errors
    if isinstance(exc, ValidationError):
        payload['message'] = 'Run configuration failed validation'
        if isinstance(exc.detail, dict):
            payload['errors'] = _pointer_errors(exc.detail)
        else:
            payload['errors'] = {'/': [str(item) for item in exc.detail]}
        payload['code'] = 'malformed_config'
    elif isinstance(exc, HestonError):
        payload['code'] = exc.code
        if exc.context:
            payload['errors'] = {key: value for key, value in exc.context.items() if value is not None}
    else:
        payload['code'] = 'internal_error'

    return payload


def exit_code_for(exc) -> int:
    """Map an exception to the CLI exit status."""
    if isinstance(exc, ValidationError):
        return EXIT_MALFORMED
    return getattr(exc, 'exit_code', EXIT_MALFORMED)

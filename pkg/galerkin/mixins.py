"""
Payload mixin for a consistent command output format
"""
from rest_framework.renderers import JSONRenderer

from .exceptions import custom_exception_handler
from .exporters import json_safe


class StandardReportMixin:
    """
    Mixin to provide consistent report payloads:
    {
        "status": "success|error",
        "data": {...},
        "message": "..."
    }
    """
    renderer_class = JSONRenderer

    def success_payload(self, data=None, message="Run completed"):
        """Return a success payload"""
        return {
            'status': 'success',
            'data': data,
            'message': message
        }

    def error_payload(self, message="Run failed", errors=None, data=None, code=None):
        """Return an error payload"""
        payload = {
            'status': 'error',
            'message': message
        }
        if code:
            payload['code'] = code
        if errors:
            payload['errors'] = errors
        if data is not None:
            payload['data'] = data
        return payload

    def exception_payload(self, exc):
        """Payload for an exception raised while running"""
        return custom_exception_handler(exc)

    def render(self, payload) -> str:
        return self.renderer_class().render(json_safe(payload), renderer_context={'indent': 2}).decode('utf-8')

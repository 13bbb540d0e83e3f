"""
CSV tables with a metadata sidecar
"""
import csv
import hashlib
import io
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence

import numpy as np
from django.conf import settings
from django.utils import timezone
from rest_framework.renderers import JSONRenderer

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ('step', 't', 'h_norm', 'v_norm', 'envelope', 'slack', 'violated')
SURFACE_COLUMNS = ('x', 'v', 'S', 'p', 'du_dxi')
COMPARISON_COLUMNS = ('method', 'price', 'reference', 'abs_error', 'rel_error', 'std_error')
ENVELOPE_COLUMNS = ('run', 'step', 's', 'h_norm', 'envelope', 'slack', 'violated')
COEFFICIENT_COLUMNS = ('index', 'm', 'n', 're', 'im')
COMPLETENESS_COLUMNS = ('tau', 'x', 'v', 'du_dxi', 'sign')
PAYOFF_COLUMNS = ('sample', 'discounted_payoff')
TRIPLET_COLUMNS = ('row', 'col', 're', 'im')
INEQUALITY_COLUMNS = ('function', 'check', 'lhs', 'rhs', 'passed')


def json_safe(value):
    """Recursively replace NaN and infinities by None."""
    if isinstance(value, dict):
        return {key: json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(item) for item in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _cell(value):
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        # numpy scalars repr as np.float64(...)
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def csv_bytes(columns: Sequence[str], rows: Iterable[Dict]) -> bytes:
    """Header row plus one line per row in column order; floats use repr."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(column)) for column in columns])
    return buffer.getvalue().encode('utf-8')


def write_table(directory: Path, name: str, columns: Sequence[str], rows: Iterable[Dict],
                parameters: Optional[Dict] = None) -> Dict[str, str]:
    """
    Write <name>.csv and <name>.meta.json.

    Args:
        directory: output directory, created if missing
        name: file stem
        columns: fixed column order
        rows: dicts keyed by column
        parameters: run parameters recorded in the sidecar

    Returns:
        Dictionary with the csv and sidecar paths
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload = csv_bytes(columns, list(rows))
    csv_path = directory / f'{name}.csv'
    csv_path.write_bytes(payload)

    meta = {
        'file': csv_path.name,
        'columns': list(columns),
        'parameters': json_safe(parameters or {}),
        'version': settings.HESTON['VERSION'],
        'sha256': hashlib.sha256(payload).hexdigest(),
        # not part of the hash
        'generatedAt': timezone.now().isoformat(),
    }
    meta_path = directory / f'{name}.meta.json'
    meta_path.write_bytes(JSONRenderer().render(meta, renderer_context={'indent': 2}))
    logger.debug("Wrote %s (%d bytes)", csv_path, len(payload))
    return {'csv': str(csv_path), 'meta': str(meta_path)}


def write_json(directory: Path, name: str, data: Dict) -> str:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f'{name}.json'
    path.write_bytes(JSONRenderer().render(json_safe(data), renderer_context={'indent': 2}))
    return str(path)


"""Module with the report emission.

All outputs are CSV or JSON files in one output directory. Floats are
written with 17 significant digits and rows in a fixed order, so reruns with
the same configuration produce byte-identical files.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

_logger = logging.getLogger(__name__)


def _clean(value: Any) -> Any:  # noqa: ANN401
    """Convert a value to plain JSON (NaN and infinities become None)."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    """Write a DataFrame as CSV.

    Args:
        frame: the data.
        path: the file to write.

    Returns:
        The path.
    """
    frame.to_csv(
        path, index=False, float_format='%.17g', lineterminator='\n'
    )
    _logger.debug('Wrote "%s"', path)
    return path


def write_json(data: Any, path: Path) -> Path:  # noqa: ANN401
    """Write data as JSON with sorted keys.

    Args:
        data: JSON-like data; NaN and infinities are written as null.
        path: the file to write.

    Returns:
        The path.
    """
    path.write_text(
        json.dumps(_clean(data), indent=2, sort_keys=True,
                   ensure_ascii=False) + '\n',
        encoding='utf-8',
    )
    _logger.debug('Wrote "%s"', path)
    return path


"""Deterministic JSON: sorted keys, floats rounded to 12 significant digits."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

DIGITS = 12


def _round(x: float):
    if not math.isfinite(x):
        return None
    if x == 0:
        return 0.0
    return float(f"{x:.{DIGITS}g}")


def normalize(obj):
    """Recursively convert numpy types and round floats; non-finite becomes null."""
    if isinstance(obj, dict):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return normalize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round(float(obj))
    return obj


def dumps(obj) -> str:
    return json.dumps(normalize(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def dump(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def load(path):
    with open(path) as fh:
        return json.load(fh)

"""Deterministic JSON artifacts.

Floats are rounded to 12 significant digits before serialization and
keys are sorted, so identical configurations and seeds produce
byte-identical files regardless of dict construction order or last-ulp
jitter in threaded BLAS reductions.
"""

from __future__ import annotations

import json
import math

import numpy as np


def canonical(obj):
    """Recursively convert to plain JSON types with fixed float precision."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if x == 0.0:
            return 0.0
        return float(f"{x:.12g}")
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dump(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(canonical(obj), fh, sort_keys=True, indent=1)
        fh.write("\n")


def dumps(obj) -> str:
    return json.dumps(canonical(obj), sort_keys=True, indent=1) + "\n"

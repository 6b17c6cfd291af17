"""Extended-real helpers.

Infinity is plain IEEE ``inf``. The arithmetic we rely on is exactly IEEE:
``t - inf == -inf``, ``min(inf, x) == x``, ``x <= inf``. The only rule that
IEEE gets wrong for us is ``inf - inf`` (NaN), which never arises because
objectives subtract a rate value from a finite ``t``.
"""

from __future__ import annotations

import math

import numpy as np

INF = math.inf


def is_finite(x) -> bool:
    return math.isfinite(float(x))


def as_array(t) -> tuple[np.ndarray, bool]:
    """Return ``t`` as a float array plus a flag telling whether it was scalar."""
    arr = np.asarray(t, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def unwrap(values: np.ndarray, scalar: bool):
    return float(values[0]) if scalar else values


def fmt(x: float) -> str:
    """Render an extended real for tables and JSON."""
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".10g")


def json_number(x: float | None):
    """JSON has no infinities, so they travel as strings."""
    if x is None:
        return None
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")

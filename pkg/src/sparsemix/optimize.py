"""Deterministic scalar maximisation: coarse scan, then golden-section refinement.

No randomness anywhere, so repeated solves are bit-identical. Objectives may
return ``-inf`` (infeasible points); golden section treats those as walls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Maximum:
    x: float
    value: float
    evaluations: int


def golden_section_max(f: Callable[[float], float], lo: float, hi: float,
                       tol: float = 1e-10, max_iter: int = 200) -> Maximum:
    """Maximise a unimodal ``f`` on ``[lo, hi]``; the endpoints are candidates too."""
    a, b = float(lo), float(hi)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    evals = 2
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        evals += 1
    best = max(((c, fc), (d, fd), (lo, f(lo)), (hi, f(hi))), key=lambda p: p[1])
    return Maximum(float(best[0]), float(best[1]), evals + 2)


def scan_and_refine(f_vec: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                    points: int = 2048, anchors: Iterable[float] = (),
                    tol: float = 1e-10) -> Maximum:
    """Global-ish maximum of ``f`` on ``[lo, hi]``.

    ``f_vec`` evaluates on arrays. The scan grid includes ``anchors`` (kinks,
    isolated domain points) so maxima sitting exactly on a kink are seen;
    golden section then polishes inside the bracket around the best grid point.
    """
    lo, hi = float(lo), float(hi)
    if hi < lo:
        return Maximum(lo, -math.inf, 0)
    extra = [a for a in anchors if lo <= a <= hi]
    grid = np.unique(np.concatenate([np.linspace(lo, hi, points), np.asarray(extra, float)]))
    values = np.asarray(f_vec(grid), dtype=float)
    values = np.where(np.isnan(values), -math.inf, values)
    i = int(np.argmax(values))
    best = Maximum(float(grid[i]), float(values[i]), grid.size)
    if not math.isfinite(best.value) or grid.size < 3:
        return best

    def scalar(x: float) -> float:
        v = float(np.asarray(f_vec(np.array([x])), dtype=float)[0])
        return -math.inf if math.isnan(v) else v

    left = grid[max(i - 1, 0)]
    right = grid[min(i + 1, grid.size - 1)]
    polished = golden_section_max(scalar, left, right, tol=tol)
    if polished.value > best.value:
        return Maximum(polished.x, polished.value, best.evaluations + polished.evaluations)
    return Maximum(best.x, best.value, best.evaluations + polished.evaluations)

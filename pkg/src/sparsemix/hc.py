"""Higher Criticism over likelihood-ratio events, classical HC, and the oracle test.

Between consecutive distinct values the exceedance count is constant while
the null probability of the event moves monotonically. For a fixed count
``|T_n|`` is quasi-convex in that probability, so over each gap it peaks at
one of the two ends. Only thresholds whose null probability lies in the open
interval ``(lo, 1 - lo)`` take part, ``lo = 1/(10 n^2)`` by default; when the
interval cuts a gap, the sup over that gap is the limit at the cut. The
statistic is therefore exact: a max over at most ``2 (n + 1)`` gap ends with
probabilities clipped into ``[lo, 1 - lo]``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .errors import ComputationError, ParameterError
from .extended import json_number

MIN_HC_N = 16


class DegenerateEvent(ComputationError):
    """The event has null probability 0 or 1, so ``T_n`` is undefined."""


@dataclass(frozen=True)
class HCOutcome:
    statistic: float
    argmax_threshold: float
    threshold_scale: str
    cutoff: float
    delta: float
    decision: str | None          # "reject", "retain", or None when n < 16
    evaluation_count: int

    def to_json(self) -> dict:
        doc = asdict(self)
        for key in ("statistic", "argmax_threshold", "cutoff"):
            doc[key] = json_number(doc[key])
        return doc


def t_statistic(count: int, p: float, n: int) -> float:
    """``(count - n p) / sqrt(n p (1 - p))``."""
    if not 0 <= count <= n:
        raise ParameterError(f"count: must lie in [0, n] (got {count}, n={n})")
    if p <= 0 or p >= 1:
        raise DegenerateEvent(f"p: event probability must lie in (0, 1) (got {p})")
    return (count - n * p) / math.sqrt(n * p * (1 - p))


def default_clamp(n: int) -> float:
    return 1.0 / (10.0 * n * n)


def _check_clamp(clamp: float) -> float:
    clamp = float(clamp)
    if not 0 < clamp < 0.5:
        raise ParameterError(f"clamp: must lie in (0, 1/2) (got {clamp})")
    return clamp


def hc_cutoff(n: int, delta: float) -> float:
    """``sqrt(2 (1 + delta) log log n)``."""
    if n < MIN_HC_N:
        raise ParameterError(f"n: the HC cutoff needs n >= {MIN_HC_N} (got {n})")
    if not delta > 0:
        raise ParameterError("delta: must be > 0")
    return math.sqrt(2 * (1 + delta) * math.log(math.log(n)))


def _sup_over_gaps(counts: np.ndarray, p_first: np.ndarray, p_second: np.ndarray,
                   t_first: np.ndarray, t_second: np.ndarray, n: int,
                   clamp: float) -> tuple[float, float, int]:
    """Max of ``|T_n|`` over gaps, each given by its count and the two end probabilities.

    A gap takes part when its probability range meets ``(clamp, 1 - clamp)``.
    The returned threshold is the gap end nearest the sup.
    """
    low = np.minimum(p_first, p_second)
    high = np.maximum(p_first, p_second)
    keep = (high > clamp) & (low < 1 - clamp)
    if not np.any(keep):
        return 0.0, math.nan, 0
    c = counts[keep].astype(float)
    ends = np.concatenate([p_first[keep], p_second[keep]])
    where = np.concatenate([t_first[keep], t_second[keep]])
    p = np.clip(ends, clamp, 1 - clamp)
    cc = np.concatenate([c, c])
    values = np.abs(cc - n * p) / np.sqrt(n * p * (1 - p))
    i = int(np.argmax(values))
    return float(values[i]), float(where[i]), int(values.size)


def _finish(stat: float, where: float, scale: str, n: int, delta: float, evals: int) -> HCOutcome:
    if n >= MIN_HC_N:
        cutoff = hc_cutoff(n, delta)
        decision = "reject" if stat > cutoff else "retain"
    else:
        cutoff, decision = math.nan, None
    return HCOutcome(stat, where, scale, cutoff, delta, decision, evals)


def hc_star(values, tail: Callable[..., np.ndarray], n: int | None = None, delta: float = 0.1,
            clamp: float | None = None, scale: str = "raw") -> HCOutcome:
    """``sup_{t > 0} |T_n({L > t})|`` from per-observation likelihood ratios.

    ``tail(thresholds, inclusive)`` must return the null probability of
    ``{value > threshold}`` (or ``>=`` when ``inclusive``) on the same scale
    as ``values``. Any strictly increasing transform of both leaves the
    statistic unchanged, so log-likelihood ratios work as well as raw ones.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ParameterError("lr_values: empty input")
    if scale not in ("raw", "log"):
        raise ParameterError(f"scale: expected 'raw' or 'log' (got {scale!r})")
    if scale == "raw" and np.any(v <= 0):
        raise ParameterError("lr_values: likelihood ratios must be > 0")
    if np.any(np.isnan(v)):
        raise ParameterError("lr_values: NaN in input")
    n = v.size if n is None else int(n)
    clamp = _check_clamp(default_clamp(n) if clamp is None else clamp)
    ordered = np.sort(v)
    distinct = np.unique(ordered)
    low_end = -math.inf if scale == "log" else 0.0
    # gaps [low_end, w_1), [w_1, w_2), ..., [w_m, inf); on [w_j, w_j+1) the
    # count is #{v > w_j}, the probability falls from P(> w_j) to P(>= w_j+1)
    above = v.size - np.searchsorted(ordered, distinct, side="right")
    counts = np.concatenate([[v.size], above])
    bottom = float(np.asarray(tail(np.array([low_end]), False), dtype=float).ravel()[0])
    p_start = np.concatenate([[bottom], np.asarray(tail(distinct, False), dtype=float)])
    p_end = np.concatenate([np.asarray(tail(distinct, True), dtype=float), [0.0]])
    t_start = np.concatenate([[low_end], distinct])
    t_end = np.concatenate([distinct, [math.inf]])
    stat, where, evals = _sup_over_gaps(counts, p_start, p_end, t_start, t_end, n, clamp)
    return _finish(stat, where, f"likelihood-ratio ({scale})", n, delta, evals)


def hc_classical(p_values, delta: float = 0.1, clamp: float | None = None) -> HCOutcome:
    """``sup_u |#{p_i <= u} - n u| / sqrt(n u (1 - u))`` over ``u`` in ``(lo, 1 - lo)``."""
    p = np.asarray(p_values, dtype=float).ravel()
    if p.size == 0:
        raise ParameterError("p_values: empty input")
    if np.any((p <= 0) | (p >= 1)) or np.any(np.isnan(p)):
        raise ParameterError("p_values: every value must lie strictly inside (0, 1)")
    n = p.size
    clamp = _check_clamp(default_clamp(n) if clamp is None else clamp)
    ordered = np.sort(p)
    distinct = np.unique(ordered)
    # gaps (0, p_1), [p_1, p_2), ..., [p_m, 1) with count #{p <= left end}
    counts = np.concatenate([[0], np.searchsorted(ordered, distinct, side="right")])
    left = np.concatenate([[0.0], distinct])
    right = np.concatenate([distinct, [1.0]])
    stat, where, evals = _sup_over_gaps(counts, left, right, left, right, n, clamp)
    return _finish(stat, where, "p-value", n, delta, evals)


def upper_p_values(x) -> np.ndarray:
    """``1 - Phi(x)``, computed without cancellation."""
    return ndtr(-np.asarray(x, dtype=float))


def hc_test(statistic: float, n: int, delta: float = 0.1) -> HCOutcome:
    """Reject iff ``statistic > sqrt(2 (1 + delta) log log n)`` (strictly)."""
    cutoff = hc_cutoff(n, delta)
    decision = "reject" if statistic > cutoff else "retain"
    return HCOutcome(float(statistic), math.nan, "none", cutoff, delta, decision, 0)


@dataclass(frozen=True)
class OracleOutcome:
    log_mixture_lr: float
    decision: str

    def to_json(self) -> dict:
        return {"log_mixture_lr": json_number(self.log_mixture_lr), "decision": self.decision}


def log_mixture_lr(values, n: int, beta: float, scale: str = "log") -> float:
    """``sum_i log(1 + eps (L_i - 1))`` with ``eps = n^-beta``."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ParameterError("lr_values: empty input")
    if not 0 < beta <= 1:
        raise ParameterError(f"beta: must lie in (0, 1] (got {beta})")
    if scale == "raw":
        if np.any(v <= 0):
            raise ParameterError("lr_values: every likelihood ratio must be > 0")
        with np.errstate(divide="ignore"):
            v = np.log(v)
    elif scale != "log":
        raise ParameterError(f"scale: expected 'log' or 'raw' (got {scale!r})")
    eps = float(n) ** -beta
    log_eps = math.log(eps)
    with np.errstate(over="ignore", divide="ignore"):
        near = np.log1p(eps * np.expm1(np.minimum(v, 30.0)))
        far = np.logaddexp(math.log1p(-eps) if eps < 1 else -math.inf, log_eps + v)
    return float(np.sum(np.where(v < 30.0, near, far)))


def np_oracle_test(values, n: int, beta: float, scale: str = "log") -> OracleOutcome:
    """Mixture likelihood-ratio test with known ``beta``; ties retain."""
    value = log_mixture_lr(values, n, beta, scale)
    return OracleOutcome(value, "reject" if value > 0 else "retain")

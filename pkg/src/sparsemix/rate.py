"""Rate functions for the normalized log-likelihood ratio under the null.

A :class:`RateFunction` is an immutable, vectorised map ``t -> I(t)`` in
``[0, inf]`` together with its effective domain, a declared convexity flag and
the anchor points (kinks, minimisers) that grid-based solvers must not miss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from . import curie_weiss as cw
from .errors import ComputationError, ParameterError, UnsupportedOperation
from .extended import INF, as_array, json_number, unwrap
from .optimize import golden_section_max
from .specs import (IDJ, BrownianDrift, CorrelatedPairs, CurieWeiss, Heteroscedastic, LowRank,
                    MixtureOfMixturesI, MixtureOfMixturesII, ModelSpec, MultivariateGaussian,
                    SBMPair, SBMParity, SideInfo, SparseExponential, parse_spec)

GRID_POINTS = 2048
GRID_HALF_WIDTH = 8.0
POINT_TOL = 1e-12


@dataclass(frozen=True)
class RateFunction:
    """``I : R -> [0, inf]`` with domain ``[domain_lo, domain_hi]``.

    ``func`` works on float arrays and may return anything outside the domain;
    :meth:`__call__` forces ``inf`` there. When ``isolated`` is true the domain
    is the finite set ``breakpoints`` rather than an interval.
    """

    func: Callable[[np.ndarray], np.ndarray]
    domain_lo: float
    domain_hi: float
    is_convex: bool
    family_tag: str
    params: Mapping[str, Any] = field(default_factory=dict)
    breakpoints: tuple[float, ...] = ()
    minimizers: tuple[float, ...] = ()
    isolated: bool = False
    tail_condition: bool | None = None
    note: str = ""

    def __call__(self, t):
        arr, scalar = as_array(t)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            values = np.asarray(self.func(arr), dtype=float)
        inside = (arr >= self.domain_lo) & (arr <= self.domain_hi)
        if self.isolated:
            hit = np.zeros(arr.shape, dtype=bool)
            for b in self.breakpoints:
                hit |= np.abs(arr - b) <= POINT_TOL * max(1.0, abs(b))
            inside &= hit
        values = np.where(inside & ~np.isnan(values), values, INF)
        return unwrap(values, scalar)

    eval = __call__

    @property
    def anchors(self) -> tuple[float, ...]:
        ends = tuple(x for x in (self.domain_lo, self.domain_hi) if math.isfinite(x))
        return tuple(sorted(set(self.breakpoints + self.minimizers + ends)))

    def grid(self, points: int = GRID_POINTS, half_width: float = GRID_HALF_WIDTH) -> np.ndarray:
        """Default evaluation grid over ``D`` clipped to ``[-8, 8]``, plus anchors."""
        lo = max(self.domain_lo, -half_width)
        hi = min(self.domain_hi, half_width)
        if hi < lo:
            return np.asarray(self.anchors, float)
        base = np.linspace(lo, hi, points)
        extra = [a for a in self.anchors if lo <= a <= hi]
        return np.unique(np.concatenate([base, np.asarray(extra, float)]))

    def to_json(self) -> dict[str, Any]:
        return {
            "family_tag": self.family_tag,
            "params": dict(self.params),
            "domain": [json_number(self.domain_lo), json_number(self.domain_hi)],
            "is_convex": self.is_convex,
        }


def rate_from_json(doc: Mapping[str, Any]) -> RateFunction:
    """Rebuild a catalog rate from :meth:`RateFunction.to_json` output."""
    params = dict(doc.get("params", {}))
    return analytic_rate(parse_spec(params))


# --------------------------------------------------------------------------
# analytic catalog
# --------------------------------------------------------------------------

def _gaussian_shift(scale: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda t: (t + scale) ** 2 / (4 * scale)


def _heteroscedastic(r: float, s2: float) -> Callable[[np.ndarray], np.ndarray]:
    center = math.sqrt(r / s2)
    coef = s2 / (s2 - 1) ** 2

    def rate(y):
        arg = (s2 - 1) * y + r
        return np.where(arg >= 0, coef * (np.sqrt(np.maximum(arg, 0)) - center) ** 2, INF)
    return rate


def _correlated_pairs(r: float, rho: float) -> Callable[[np.ndarray], np.ndarray]:
    linear_cut = (1 + rho) * r / 4
    center = math.sqrt(r / (1 + rho))

    def rate(y):
        arg = rho * y + r
        linear = (rho - 1) * (r + 2 * rho * y) / (2 * rho**2)
        curved = (1 + rho) / rho**2 * (np.sqrt(np.maximum(arg, 0)) - center) ** 2
        return np.where(arg <= linear_cut, linear, curved)
    return rate


def _curie_weiss(spec: CurieWeiss) -> RateFunction:
    theta, mu = spec.theta, spec.mu
    if theta <= 0 or mu <= 0:
        raise ParameterError("theta, mu: the composed rate needs theta > 0 and mu > 0")
    top0 = cw.mean_field_max(theta, 0.0)
    shift = top0.value - cw.mean_field_max(theta, mu).value
    slope = theta * mu

    def rate(t):
        m = (t - shift) / slope
        inside = np.abs(m) <= 1
        m = np.clip(m, -1.0, 1.0)
        return np.where(inside, np.maximum(top0.value - cw.mean_field(m, theta, 0.0), 0.0), INF)

    wells = {top0.argmax, -top0.argmax}
    return RateFunction(
        rate, shift - slope, shift + slope, is_convex=theta <= 1, family_tag=spec.family,
        params=spec.to_dict(), minimizers=tuple(sorted(shift + slope * m for m in wells)),
        tail_condition=True)


def analytic_rate(spec: ModelSpec) -> RateFunction:
    """Closed-form rate function of ``spec``'s normalized log-likelihood ratio."""
    params = spec.to_dict()
    tag = spec.family

    def make(func, lo=-INF, hi=INF, convex=True, **kw) -> RateFunction:
        kw.setdefault("tail_condition", True)
        return RateFunction(func, lo, hi, convex, tag, params, **kw)

    if isinstance(spec, (IDJ, BrownianDrift)):
        return make(_gaussian_shift(spec.r), minimizers=(-spec.r,))
    if isinstance(spec, MultivariateGaussian):
        scale = spec.r * spec.whitened_norm_sq
        return make(_gaussian_shift(scale), minimizers=(-scale,))
    if isinstance(spec, Heteroscedastic):
        r, s2 = spec.r, spec.sigma2
        lo, hi = (-r / (s2 - 1), INF) if s2 > 1 else (-INF, r / (1 - s2))
        return make(_heteroscedastic(r, s2), lo, hi, minimizers=(-r / s2,))
    if isinstance(spec, MixtureOfMixturesI):
        r, c = spec.r, spec.overlap

        def mix1(y):
            return np.where(y >= -r, (y + r) ** 2 / (4 * r), (y + r) ** 2 / (2 * r * (1 + c)))
        return make(mix1, breakpoints=(-r,), minimizers=(-r,))
    if isinstance(spec, MixtureOfMixturesII):
        r = spec.r

        def mix2(t):
            outer = (t + 2 * r) ** 2 / (4 * r)
            return np.where(t < -2 * r, outer,
                            np.where(t <= 2 * r, (t + 2 * r) ** 2 / (8 * r), outer - t))
        return make(mix2, breakpoints=(-2 * r, 2 * r), minimizers=(-2 * r,))
    if isinstance(spec, LowRank):
        r = spec.r
        return make(lambda y: (r + 1) * y / r, 0.0, INF, minimizers=(0.0,))
    if isinstance(spec, CorrelatedPairs):
        r, rho = spec.r, spec.rho
        kink = ((1 + rho) * r / 4 - r) / rho
        return make(_correlated_pairs(r, rho), breakpoints=(kink,),
                    minimizers=(-r / (1 + rho),))
    if isinstance(spec, (SBMPair, SBMParity)):
        r = spec.r
        return make(lambda t: np.where(t > 0, r, 0.0), -r, r, convex=False,
                    breakpoints=(-r, r), minimizers=(-r,), isolated=True)
    if isinstance(spec, SideInfo):
        r, rho = spec.r, spec.rho

        def side(t):
            return np.minimum((t - r + rho) ** 2 / (4 * rho) + r, (t + r + rho) ** 2 / (4 * rho))
        # two parabolas crossing at t = 0 leave a concave kink there
        return make(side, convex=False, breakpoints=(0.0,), minimizers=(-r - rho,))
    if isinstance(spec, CurieWeiss):
        return _curie_weiss(spec)
    if isinstance(spec, SparseExponential):
        r = spec.r
        return make(lambda t: t + r, -r, INF, minimizers=(-r,), tail_condition=False,
                    note="known-incorrect boundary: the tail condition fails for this family")
    raise ParameterError(f"family: no analytic rate for {spec.family!r}")


# --------------------------------------------------------------------------
# limiting cumulant generating functions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitCGF:
    """``Lambda(lambda)`` with values in ``(-inf, inf]`` and effective domain ``[lo, hi]``."""

    func: Callable[[float], float]
    domain_lo: float = -INF
    domain_hi: float = INF
    tag: str = "cgf"
    params: Mapping[str, Any] = field(default_factory=dict)

    @property
    def origin_interior(self) -> bool:
        return self.domain_lo < 0 < self.domain_hi

    def __call__(self, lam: float) -> float:
        lam = float(lam)
        if not (self.domain_lo <= lam <= self.domain_hi):
            return INF
        value = float(self.func(lam))
        if math.isnan(value) or value == -INF:
            raise ComputationError(f"malformed CGF: Lambda({lam}) = {value}")
        return value


def _hetero_cgf(r: float, s2: float) -> tuple[Callable[[float], float], float, float]:
    # limit of (1/log n) log E[L^lambda] for N(mu_n, s2) against N(0, 1)
    lo, hi = (-INF, s2 / (s2 - 1)) if s2 > 1 else (-s2 / (1 - s2), INF)

    def cgf(lam):
        denom = s2 - lam * (s2 - 1)
        return r * lam * (lam - 1) / denom if denom > 0 else INF
    return cgf, lo, hi


def analytic_cgf(spec: ModelSpec) -> LimitCGF:
    """Closed-form limiting CGF for the families where it is finite near 0."""
    params = spec.to_dict()
    if isinstance(spec, (IDJ, BrownianDrift, MultivariateGaussian)):
        scale = spec.r * (spec.whitened_norm_sq if isinstance(spec, MultivariateGaussian) else 1)
        return LimitCGF(lambda lam: scale * (lam * lam - lam), tag=spec.family, params=params)
    if isinstance(spec, Heteroscedastic):
        func, lo, hi = _hetero_cgf(spec.r, spec.sigma2)
        return LimitCGF(func, lo, hi, spec.family, params)
    if isinstance(spec, CorrelatedPairs):
        # sum direction is heteroscedastic with variance 1 + rho; the
        # difference direction only contributes the domain restriction
        func, lo, hi = _hetero_cgf(spec.r, 1 + spec.rho)
        _, lo2, hi2 = _hetero_cgf(0.0, 1 - spec.rho)
        return LimitCGF(func, max(lo, lo2), min(hi, hi2), spec.family, params)
    if isinstance(spec, LowRank):
        edge = (spec.r + 1) / spec.r
        return LimitCGF(lambda lam: 0.0 if lam < edge else INF, -INF, edge, spec.family, params)
    raise UnsupportedOperation(f"no closed-form limiting CGF for {spec.family!r}")


def exponential_family_cgf(log_c: Callable[[Any], float], theta_null, theta_n, n: float,
                           domain: tuple[float, float] = (-INF, INF)) -> LimitCGF:
    """Finite-``n`` CGF quotient for an exponential family in natural parameters.

    ``log_c`` returns ``-inf`` outside the natural parameter space, which makes
    ``Lambda = inf`` there. ``theta_n`` may be a value or a callable of ``n``.
    """
    if n < 3:
        raise ParameterError("n: must be >= 3")
    theta0 = np.asarray(theta_null, dtype=float)
    theta1 = np.asarray(theta_n(n) if callable(theta_n) else theta_n, dtype=float)
    log_n = math.log(n)
    c0, c1 = float(log_c(theta0)), float(log_c(theta1))

    def cgf(lam: float) -> float:
        inner = float(log_c(lam * (theta1 - theta0) + theta0))
        if inner == -INF:
            return INF
        return (lam * c1 + (1 - lam) * c0 - inner) / log_n

    return LimitCGF(cgf, domain[0], domain[1], "exponential_family", {"n": n})


def cgf_convergence_gap(log_c, theta_null, theta_n: Callable[[float], Any], n: float,
                        lambdas=np.linspace(-2, 3, 11)) -> float:
    """Cauchy gap ``max |Lambda_{100n} - Lambda_{10n}|`` over ``lambdas``."""
    at = [exponential_family_cgf(log_c, theta_null, theta_n, m) for m in (n, 10 * n, 100 * n)]
    gaps = [abs(at[2](lam) - at[1](lam)) for lam in lambdas
            if math.isfinite(at[2](lam)) and math.isfinite(at[1](lam))]
    return max(gaps, default=0.0)


# --------------------------------------------------------------------------
# numeric Legendre-Fenchel transform
# --------------------------------------------------------------------------

LAMBDA_CAP = 1e8


def _conjugate_at(cgf: LimitCGF, t: float, tol: float) -> float:
    """``sup_lambda (lambda t - Lambda(lambda))`` for one ``t``."""

    def g(lam: float) -> float:
        value = cgf(lam)
        return -INF if value == INF else lam * t - value

    lo_wall, hi_wall = max(cgf.domain_lo, -LAMBDA_CAP), min(cgf.domain_hi, LAMBDA_CAP)
    g0 = g(0.0)
    h = 1e-6 * min(1.0, hi_wall, -lo_wall)
    if g(h) > g0:
        sign, wall = 1.0, hi_wall
    elif g(-h) > g0:
        sign, wall = -1.0, -lo_wall
    else:
        return golden_section_max(g, -h, h, tol=tol).value
    # g is concave and rises from 0 towards sign: double until it stops rising
    prev, b = 0.0, h
    while True:
        nxt = 2 * b
        if nxt >= wall:
            far = wall
            break
        if not g(sign * nxt) > g(sign * b):
            far = nxt
            break
        prev, b = b, nxt
    if far >= LAMBDA_CAP and g(sign * far) > g(sign * far / 2):
        growth = (g(sign * far) - g(sign * far / 2)) / (far / 2)
        if growth > 1e-6:
            return INF
    lo, hi = sorted((sign * prev, sign * far))
    return golden_section_max(g, lo, hi, tol=tol * max(1.0, hi - lo)).value


def _domain_edge(func, outside: float, inside: float, width: float = 1e-12) -> float:
    """Bisect between an infinite and a finite conjugate value; returns the finite side."""
    while abs(inside - outside) > width * max(1.0, abs(inside)):
        mid = 0.5 * (inside + outside)
        if np.isfinite(func(np.array([mid]))[0]):
            inside = mid
        else:
            outside = mid
    return float(inside)


def legendre_transform(cgf: LimitCGF, t_lo: float = -GRID_HALF_WIDTH,
                       t_hi: float = GRID_HALF_WIDTH, points: int = 400,
                       tol: float = 1e-10) -> RateFunction:
    """Numeric convex conjugate ``Lambda*(t)``.

    The returned rate evaluates the supremum on demand for any ``t``. Its
    domain endpoints are read off a ``points``-grid over ``[t_lo, t_hi]``
    augmented with ``Lambda'(0)``; a finite value at a grid edge is taken to
    mean the domain continues past the probed range.
    """
    if not cgf.origin_interior:
        raise UnsupportedOperation("legendre_transform: 0 must lie in the interior of D_Lambda")
    if abs(cgf(0.0)) > 1e-12:
        raise ComputationError(f"malformed CGF: Lambda(0) = {cgf(0.0)}")

    def func(t: np.ndarray) -> np.ndarray:
        return np.array([_conjugate_at(cgf, float(x), tol) for x in t], dtype=float)

    h = 1e-6 * min(1.0, cgf.domain_hi, -cgf.domain_lo)
    mean = (cgf(h) - cgf(-h)) / (2 * h)
    grid = np.unique(np.append(np.linspace(t_lo, t_hi, points), mean))
    values = func(grid)
    ok = np.isfinite(values)
    if not ok.any():
        raise ComputationError("legendre_transform: conjugate is infinite on the whole grid")
    first, last = np.flatnonzero(ok)[[0, -1]]
    lo = -INF if first == 0 else _domain_edge(func, grid[first - 1], grid[first])
    hi = INF if last == grid.size - 1 else _domain_edge(func, grid[last + 1], grid[last])

    return RateFunction(lambda t: np.maximum(func(t), 0.0), lo, hi, True,
                        f"legendre({cgf.tag})", dict(cgf.params), minimizers=(float(mean),),
                        isolated=lo == hi, breakpoints=(float(mean),) if lo == hi else ())


# --------------------------------------------------------------------------
# rates from quantile asymptotics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantileAsymptotics:
    """Continuous limits ``alpha_0``, ``alpha_1`` of the scaled log-LR at tail quantiles."""

    alpha0: Callable[[np.ndarray], np.ndarray]
    alpha1: Callable[[np.ndarray], np.ndarray]


def _first_level_crossing(alpha, s: np.ndarray, values: np.ndarray, t: float,
                          width: float) -> float:
    """Smallest ``s`` on the grid bracket with ``alpha(s) = t``, refined by bisection."""
    diff = values - t
    exact = np.flatnonzero(diff == 0)
    change = np.flatnonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) < 0)
    first_exact = exact[0] if exact.size else None
    first_change = change[0] if change.size else None
    if first_exact is None and first_change is None:
        return INF
    if first_change is None or (first_exact is not None and first_exact <= first_change):
        return float(s[first_exact])
    a, b = s[first_change], s[first_change + 1]
    fa = diff[first_change]
    while b - a > width:
        mid = 0.5 * (a + b)
        fm = float(np.asarray(alpha(np.array([mid])))[0]) - t
        if fm == 0:
            return float(mid)
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b = mid
    return float(0.5 * (a + b))


def rate_from_quantile_asymptotics(qa: QuantileAsymptotics, s_max: float, points: int = 4096,
                                   bracket_width: float = 1e-10,
                                   declared_convex: bool = False) -> RateFunction:
    """``I = I_0 min I_1`` with ``I_j(t) = inf{s >= 0 : alpha_j(s) = t}`` and ``inf {} = inf``."""
    if not (s_max > 0 and points >= 2):
        raise ParameterError("grid: need s_max > 0 and at least 2 points")
    s = np.linspace(0.0, s_max, points)
    table = [(alpha, np.asarray(alpha(s), dtype=float)) for alpha in (qa.alpha0, qa.alpha1)]
    lo = min(float(v.min()) for _, v in table)
    hi = max(float(v.max()) for _, v in table)

    def func(t: np.ndarray) -> np.ndarray:
        out = np.empty(t.shape)
        for i, x in enumerate(t):
            out[i] = min(_first_level_crossing(a, s, v, float(x), bracket_width) for a, v in table)
        return out

    zeros = tuple(sorted({float(v[0]) for _, v in table}))
    return RateFunction(func, lo, hi, declared_convex, "quantile_asymptotics",
                        {"s_max": s_max, "points": points}, minimizers=zeros,
                        isolated=lo == hi, breakpoints=zeros if lo == hi else ())


# --------------------------------------------------------------------------
# left derivative and convexity checks
# --------------------------------------------------------------------------

def left_derivative(rate: RateFunction, t: float, h: float = 1e-3, tol: float = 1e-7,
                    max_halvings: int = 30) -> float:
    """``I'_-(t)``, extended by ``-inf`` left of ``D`` and ``+inf`` right of it.

    Backward differences are combined by Richardson extrapolation over a
    halving step sequence until two successive estimates agree within ``tol``.
    At the left end of ``D`` the backward difference reaches outside ``D`` and
    the value is ``-inf``, matching the one-sided limit identities.
    """
    if not rate.is_convex:
        raise UnsupportedOperation("left_derivative: rate is not convex")
    if h <= 0:
        raise ParameterError("h: must be > 0")
    t = float(t)
    if t < rate.domain_lo:
        return -INF
    if t > rate.domain_hi:
        return INF
    here = rate(t)
    if not math.isfinite(here):
        return -INF if t <= rate.domain_lo else INF
    if t == rate.domain_lo:
        return -INF
    h = min(h, (t - rate.domain_lo) / 2) if math.isfinite(rate.domain_lo) else h

    def backward(step: float) -> float:
        return (here - rate(t - step)) / step

    previous = None
    coarse = backward(h)
    for _ in range(max_halvings):
        h /= 2
        fine = backward(h)
        if not (math.isfinite(fine) and math.isfinite(coarse)):
            return -INF
        estimate = 2 * fine - coarse
        if previous is not None and abs(estimate - previous) < tol:
            return estimate
        previous, coarse = estimate, fine
    return previous


def midpoint_convexity_violations(rate: RateFunction, grid: np.ndarray | None = None,
                                  points: int = 401, tol: float = 1e-9) -> int:
    """Count grid triples ``(a, b, c)`` with ``I(b)`` above the chord from ``a`` to ``c``.

    Triples are ``(t[i-k], t[i], t[i+k])`` with ``k`` a power of two; on a uniform
    grid these are midpoint triples, on any other grid the chord is weighted.
    Infinite chord values never count as violations.
    """
    if grid is None:
        lo = max(rate.domain_lo, -GRID_HALF_WIDTH)
        hi = min(rate.domain_hi, GRID_HALF_WIDTH)
        grid = np.linspace(lo, hi, points)
    t = np.unique(np.asarray(grid, dtype=float))
    values = np.asarray(rate(t), dtype=float)
    count = 0
    k = 1
    while 2 * k < values.size:
        ta, tb, tc = t[: -2 * k], t[k:-k], t[2 * k:]
        va, vb, vc = values[: -2 * k], values[k:-k], values[2 * k:]
        w = (tb - ta) / (tc - ta)
        ok = np.isfinite(va) & np.isfinite(vc)
        chord = (1 - w[ok]) * va[ok] + w[ok] * vc[ok]
        bad = vb[ok] > chord + tol * (1 + np.abs(chord))
        count += int(np.count_nonzero(bad))
        k *= 2
    return count

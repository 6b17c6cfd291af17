"""Null laws of the log-likelihood ratio, one structure per family shape.

Each family's observation reduces to a low-dimensional statistic whose null
law is simple (a standard normal line, a chi-square, an exponential, a finite
set of atoms, or a plane of two independent coordinates). These classes map
that statistic to ``log(q_n/p_n)`` and answer three questions about the null:
the tail ``P(log L > s)`` (or ``>=``), expectations ``E[g(log L)]`` by
quadrature, and the log-moment ``log E[L^gamma]`` where a closed form exists.

Integrands are passed as ``log_g``, the log of a nonnegative ``g``, and
combined with the log-density before exponentiating. That keeps integrals
such as ``E[L]`` finite where ``L`` alone would overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import logsumexp, ndtr
from scipy.stats import chi2

from .errors import ComputationError
from .extended import INF

SQRT_2PI = math.sqrt(2 * math.pi)
LOG_SQRT_2PI = math.log(SQRT_2PI)
TRUNCATION = 12.0


def std_normal_pdf(y):
    return np.exp(-0.5 * np.square(y)) / SQRT_2PI


def normal_sf(y):
    return ndtr(-np.asarray(y, dtype=float))


@dataclass(frozen=True)
class Expectation:
    value: float
    error: float
    method: str


def _weighted(log_g, ell, log_density: float) -> float:
    with np.errstate(divide="ignore", over="ignore"):
        value = float(np.asarray(log_g(np.asarray([ell], dtype=float)))[0]) + log_density
        return math.exp(value) if value < 709 else math.inf


def _quad(f: Callable[[float], float], lo: float, hi: float, points=(), rel: float = 1e-10,
          floor: float = 1e-300) -> tuple[float, float]:
    inner = sorted(p for p in points if lo < p < hi)
    value, err = integrate.quad(f, lo, hi, points=inner or None, limit=500,
                                epsabs=floor, epsrel=rel)
    return float(value), float(err)


# --------------------------------------------------------------------------
# y ~ N(0,1), log L = a y^2 + b y + c
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianLine:
    """Standard normal reduced statistic with a quadratic log-likelihood ratio.

    ``alt_mean`` and ``alt_sd`` describe the law of ``y`` under the signal and
    are used only to place integration ranges.
    """

    a: float
    b: float
    c: float
    alt_mean: float
    alt_sd: float = 1.0

    @classmethod
    def versus(cls, mean: float, var: float) -> "GaussianLine":
        """``log dN(mean, var)/dN(0, 1)``."""
        return cls(a=0.5 * (1 - 1 / var), b=mean / var,
                   c=-0.5 * math.log(var) - mean * mean / (2 * var),
                   alt_mean=mean, alt_sd=math.sqrt(var))

    def ell(self, y):
        y = np.asarray(y, dtype=float)
        return self.a * y * y + self.b * y + self.c

    def tail(self, s, inclusive: bool = False):
        """``P(log L > s)``; the law is continuous so ``inclusive`` is moot."""
        s = np.asarray(s, dtype=float)
        flat = np.atleast_1d(s).ravel()
        out = self._tail(flat).reshape(s.shape)
        return out if out.ndim else float(out)

    def _tail(self, s: np.ndarray) -> np.ndarray:
        a, b = self.a, self.b
        c0 = self.c - s
        with np.errstate(invalid="ignore", divide="ignore"):
            if a == 0.0:
                if b == 0.0:
                    return (c0 > 0).astype(float)
                cut = -c0 / b
                out = normal_sf(cut) if b > 0 else ndtr(cut)
            else:
                disc = b * b - 4 * a * c0
                root = np.sqrt(np.maximum(disc, 0.0))
                q = -0.5 * (b + np.copysign(root, b))
                r1 = q / a
                r2 = np.where(q != 0, c0 / np.where(q != 0, q, 1.0), -q / a)
                lo, hi = np.minimum(r1, r2), np.maximum(r1, r2)
                if a > 0:
                    out = np.where(disc <= 0, 1.0, ndtr(lo) + normal_sf(hi))
                else:
                    # the event is the bounded interval (lo, hi)
                    inside = np.where(lo > 0, normal_sf(lo) - normal_sf(hi), ndtr(hi) - ndtr(lo))
                    out = np.where(disc <= 0, 0.0, inside)
        out = np.where(s == -INF, 1.0, np.where(s == INF, 0.0, out))
        return np.clip(out, 0.0, 1.0)

    def box(self) -> tuple[float, float]:
        lo = min(-TRUNCATION, self.alt_mean - TRUNCATION * self.alt_sd)
        hi = max(TRUNCATION, self.alt_mean + TRUNCATION * self.alt_sd)
        return lo, hi

    def expect(self, log_g: Callable[[np.ndarray], np.ndarray], rel: float = 1e-10
               ) -> Expectation:
        lo, hi = self.box()

        def f(y: float) -> float:
            return _weighted(log_g, self.ell(y), -0.5 * y * y - LOG_SQRT_2PI)

        value, err = _quad(f, lo, hi, (0.0, self.alt_mean), rel)
        return Expectation(value, err, "quadrature")

    def log_moment(self, gamma: float) -> float:
        """``log E[exp(gamma * log L)]``, ``inf`` when the integral diverges."""
        curv = 1 - 2 * gamma * self.a
        if curv <= 0:
            return INF
        return gamma * self.c + (gamma * self.b) ** 2 / (2 * curv) - 0.5 * math.log(curv)


# --------------------------------------------------------------------------
# y ~ chi2_k or Exp(1), log L affine in y
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ChiSquareLine:
    k: int
    slope: float
    offset: float
    alt_scale: float

    def ell(self, y):
        return self.offset + self.slope * np.asarray(y, dtype=float)

    def tail(self, s, inclusive: bool = False):
        cut = (np.asarray(s, dtype=float) - self.offset) / self.slope
        return chi2.sf(np.maximum(cut, 0.0), self.k)

    def expect(self, log_g, rel: float = 1e-10) -> Expectation:
        hi = self.alt_scale * float(chi2.isf(1e-40, self.k))

        def f(y: float) -> float:
            return _weighted(log_g, self.ell(y), float(chi2.logpdf(y, self.k)))

        value, err = _quad(f, 0.0, hi, (float(self.k), self.k * self.alt_scale), rel)
        return Expectation(value, err, "quadrature")

    def log_moment(self, gamma: float) -> float:
        rate = 1 - 2 * gamma * self.slope
        if rate <= 0:
            return INF
        return gamma * self.offset - 0.5 * self.k * math.log(rate)


@dataclass(frozen=True)
class ExponentialLine:
    slope: float
    offset: float
    alt_scale: float

    def ell(self, y):
        return self.offset + self.slope * np.asarray(y, dtype=float)

    def tail(self, s, inclusive: bool = False):
        cut = (np.asarray(s, dtype=float) - self.offset) / self.slope
        return np.exp(-np.maximum(cut, 0.0))

    def expect(self, log_g, rel: float = 1e-10) -> Expectation:
        def f(y: float) -> float:
            return _weighted(log_g, self.ell(y), -y)

        hi = 80.0 * max(1.0, self.alt_scale)
        value, err = _quad(f, 0.0, hi, (1.0, self.alt_scale), rel)
        return Expectation(value, err, "quadrature")

    def log_moment(self, gamma: float) -> float:
        rate = 1 - gamma * self.slope
        if rate <= 0:
            return INF
        return gamma * self.offset - math.log(rate)


# --------------------------------------------------------------------------
# finite support
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Atoms:
    """Finite null law: ``levels[j]`` is log L on atom ``j`` with probability ``probs[j]``."""

    levels: np.ndarray
    probs: np.ndarray
    alt_probs: np.ndarray
    _order: np.ndarray = field(init=False, repr=False)
    _suffix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        order = np.argsort(self.levels, kind="stable")
        suffix = np.append(np.cumsum(self.probs[order][::-1])[::-1], 0.0)
        object.__setattr__(self, "_order", order)
        object.__setattr__(self, "_suffix", suffix)

    def ell(self, index):
        return self.levels[np.asarray(index, dtype=int)]

    def tail(self, s, inclusive: bool = False):
        sorted_levels = self.levels[self._order]
        side = "left" if inclusive else "right"
        pos = np.searchsorted(sorted_levels, np.asarray(s, dtype=float), side=side)
        return np.minimum(self._suffix[pos], 1.0)

    def expect(self, log_g, rel: float = 1e-10) -> Expectation:
        with np.errstate(divide="ignore"):
            value = float(np.sum(np.exp(np.log(self.probs) + log_g(self.levels))))
        return Expectation(value, 0.0, "exact")

    def log_moment(self, gamma: float) -> float:
        with np.errstate(divide="ignore"):
            return float(logsumexp(np.log(self.probs) + gamma * self.levels))


# --------------------------------------------------------------------------
# finite mixture of Gaussian lines (discrete side channel next to a z-score)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LineMixture:
    weights: tuple[float, ...]
    lines: tuple[GaussianLine, ...]

    def ell(self, label, y):
        label = np.asarray(label, dtype=int)
        y = np.asarray(y, dtype=float)
        out = np.empty(np.broadcast(label, y).shape)
        for j, line in enumerate(self.lines):
            hit = label == j
            out[hit] = line.ell(y[hit])
        return out

    def tail(self, s, inclusive: bool = False):
        return sum(w * np.asarray(line.tail(s)) for w, line in zip(self.weights, self.lines))

    def expect(self, log_g, rel: float = 1e-10) -> Expectation:
        parts = [line.expect(log_g, rel) for line in self.lines]
        return Expectation(sum(w * p.value for w, p in zip(self.weights, parts)),
                           sum(w * p.error for w, p in zip(self.weights, parts)), "quadrature")

    def log_moment(self, gamma: float) -> float:
        terms = [math.log(w) + line.log_moment(gamma) for w, line in zip(self.weights, self.lines)]
        return float(logsumexp(terms))


# --------------------------------------------------------------------------
# two independent coordinates
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Plane:
    """Two independent null coordinates ``(outer, inner)``.

    ``inner_tail(outer, s)`` gives ``P(log L > s | outer)`` in closed form, so
    the tail is a single integral over ``outer``. Expectations use composite
    Gauss-Legendre on the box, with the error estimated from a half-resolution
    rule.
    """

    ell: Callable[[np.ndarray, np.ndarray], np.ndarray]
    outer_pdf: Callable[[np.ndarray], np.ndarray]
    inner_pdf: Callable[[np.ndarray], np.ndarray]
    inner_tail: Callable[[float, np.ndarray], np.ndarray]
    outer_box: tuple[float, float]
    inner_box: tuple[float, float]
    moment: Callable[[float], float] | None = None

    def tail(self, s, inclusive: bool = False):
        s = np.atleast_1d(np.asarray(s, dtype=float))

        def f(y: float) -> np.ndarray:
            return float(self.outer_pdf(np.asarray(y))) * np.asarray(self.inner_tail(y, s))

        lo, hi = self.outer_box
        value, _ = integrate.quad_vec(f, lo, hi, epsabs=1e-15, epsrel=1e-10, limit=400,
                                      points=[0.0])
        return np.clip(value, 0.0, 1.0)

    def _rule(self, panels: int, order: int = 8):
        nodes, weights = np.polynomial.legendre.leggauss(order)

        def axis(lo, hi):
            edges = np.linspace(lo, hi, panels + 1)
            half = np.diff(edges)[:, None] / 2
            mid = (edges[:-1] + edges[1:])[:, None] / 2
            return (mid + half * nodes).ravel(), (half * weights).ravel()

        return axis(*self.outer_box), axis(*self.inner_box)

    def expect(self, log_g, rel: float = 1e-10, panels: int = 96) -> Expectation:
        def run(p: int) -> float:
            (xo, wo), (xi, wi) = self._rule(p)
            total = 0.0
            with np.errstate(divide="ignore"):
                log_i = np.log(wi * self.inner_pdf(xi))
                for start in range(0, xo.size, 64):
                    yo = xo[start:start + 64, None]
                    log_o = np.log(wo[start:start + 64] * self.outer_pdf(yo[:, 0]))
                    terms = log_g(self.ell(yo, xi[None, :])) + log_o[:, None] + log_i[None, :]
                    total += float(np.sum(np.exp(terms)))
            return total

        fine, coarse = run(panels), run(panels // 2)
        return Expectation(fine, abs(fine - coarse), "quadrature")

    def log_moment(self, gamma: float) -> float:
        if self.moment is None:
            raise ComputationError("no closed-form moment for this law; use Monte Carlo")
        return self.moment(gamma)

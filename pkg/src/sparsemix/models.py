"""Samplers, exact log-likelihood ratios and null-law summaries for every family.

Observations are stored in each family's natural sample space, or as a
sufficient statistic where the full object is large:

=====================  ==========================  ==========================
family                 observation                 CSV columns
=====================  ==========================  ==========================
idj, heteroscedastic   x                           ``x``
sparse_exponential     x                           ``x``
brownian_drift         Z = sum_k f'_k dX_k         ``z``
multivariate_gaussian  x in R^d                    ``x0 .. x{d-1}``
mixture_of_mixtures_*  x in R^d                    ``x0 .. x{d-1}``
low_rank               x in R^p                    ``x0 .. x{p-1}``
correlated_pairs       (x1, x2)                    ``x0, x1``
sbm_pair               edge pair (a, b)            ``a, b``
sbm_parity             u = a + b mod 2             ``u``
side_info              (a, w)                      ``a, w``
curie_weiss            total spin S                ``total``
=====================  ==========================  ==========================

All formulas take ``n`` as a real number, so ``log n`` need not come from an
integer sample size.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any

import numpy as np
from scipy.special import logsumexp
from scipy.stats import chi2

from . import curie_weiss as cw
from .errors import ComputationError, ParameterError, UnsupportedOperation
from .extended import INF
from .laws import (Atoms, ChiSquareLine, ExponentialLine, GaussianLine, LineMixture, Plane,
                   normal_sf, std_normal_pdf)
from .rng import stream
from .specs import (IDJ, BrownianDrift, CorrelatedPairs, CurieWeiss, Heteroscedastic, LowRank,
                    MixtureOfMixturesI, MixtureOfMixturesII, ModelSpec, MultivariateGaussian,
                    SBMPair, SBMParity, SideInfo, SparseExponential)

MONTE_CARLO_DRAWS = 10**6
CHUNK = 8192
LOG2 = math.log(2.0)

VECTOR_FAMILIES = (MultivariateGaussian, MixtureOfMixturesI, MixtureOfMixturesII, LowRank,
                   CorrelatedPairs, SBMPair, SideInfo)


def signal_strength(r: float, n: float) -> float:
    """``sqrt(2 r log n)``."""
    return math.sqrt(2 * r * math.log(n))


def _check_n(n: float, least: float = 3) -> float:
    n = float(n)
    if not (math.isfinite(n) and n >= least):
        raise ParameterError(f"n: must be >= {least:g} (got {n})")
    return n


def _check_beta(beta: float) -> float:
    if not (0 < beta < 1):
        raise ParameterError(f"beta: must lie in (0, 1) (got {beta})")
    return float(beta)


def columns(spec: ModelSpec) -> tuple[str, ...]:
    if isinstance(spec, (IDJ, Heteroscedastic, SparseExponential)):
        return ("x",)
    if isinstance(spec, BrownianDrift):
        return ("z",)
    if isinstance(spec, MultivariateGaussian):
        return tuple(f"x{i}" for i in range(len(spec.u)))
    if isinstance(spec, MixtureOfMixturesI):
        return tuple(f"x{i}" for i in range(len(spec.u1)))
    if isinstance(spec, MixtureOfMixturesII):
        return tuple(f"x{i}" for i in range(len(spec.u)))
    if isinstance(spec, LowRank):
        return tuple(f"x{i}" for i in range(spec.p))
    if isinstance(spec, CorrelatedPairs):
        return ("x0", "x1")
    if isinstance(spec, SBMPair):
        return ("a", "b")
    if isinstance(spec, SBMParity):
        return ("u",)
    if isinstance(spec, SideInfo):
        return ("a", "w")
    if isinstance(spec, CurieWeiss):
        return ("total",)
    raise ParameterError(f"family: unsupported {spec.family!r}")


# --------------------------------------------------------------------------
# exact laws of the log-likelihood ratio under the null
# --------------------------------------------------------------------------

def _sbm_pieces(r: float, n: float) -> tuple[float, float, float]:
    """``(pq, (p^2 + q^2)/2, log of the discordant likelihood ratio)``."""
    rl = r * math.log(n)
    pq = math.exp(rl - 2 * np.logaddexp(0.0, rl))
    discordant = float(np.logaddexp(2 * rl, 0.0)) - LOG2 - rl   # log((n^2r + 1) / (2 n^r))
    return pq, pq * math.exp(discordant), discordant


def _logcosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2 * x)) - LOG2


@lru_cache(maxsize=512)
def null_law(spec: ModelSpec, n: float):
    """Reduced-statistic law of ``log(q_n/p_n)`` under ``P_n``."""
    n = _check_n(n)
    log_n = math.log(n)
    if isinstance(spec, IDJ):
        m = signal_strength(spec.r, n)
        return GaussianLine(0.0, m, -m * m / 2, alt_mean=m)
    if isinstance(spec, MultivariateGaussian):
        s = signal_strength(spec.r, n) * math.sqrt(spec.whitened_norm_sq)
        return GaussianLine(0.0, s, -s * s / 2, alt_mean=s)
    if isinstance(spec, BrownianDrift):
        f = spec.drift_derivative()
        s = signal_strength(spec.r, n) * math.sqrt(float(np.mean(f * f)))
        return GaussianLine(0.0, s, -s * s / 2, alt_mean=s)
    if isinstance(spec, Heteroscedastic):
        return GaussianLine.versus(signal_strength(spec.r, n), spec.sigma2)
    if isinstance(spec, MixtureOfMixturesI):
        return _mixture_one_law(signal_strength(spec.r, n), spec.overlap)
    if isinstance(spec, MixtureOfMixturesII):
        return _mixture_two_law(signal_strength(spec.r, n))
    if isinstance(spec, LowRank):
        r = spec.r
        return ChiSquareLine(spec.k, r / (2 * (r + 1)), -0.5 * spec.k * math.log1p(r), 1 + r)
    if isinstance(spec, CorrelatedPairs):
        return _correlated_law(signal_strength(spec.r, n), spec.rho)
    if isinstance(spec, SBMPair):
        pq, concordant, level = _sbm_pieces(spec.r, n)
        # cells indexed by 2a + b: (0,0), (0,1), (1,0), (1,1)
        levels = np.array([-level, level, level, -level])
        return Atoms(levels, np.array([concordant, pq, pq, concordant]),
                     np.array([pq, concordant, concordant, pq]))
    if isinstance(spec, SBMParity):
        pq, concordant, level = _sbm_pieces(spec.r, n)
        return Atoms(np.array([-level, level]), np.array([2 * concordant, 2 * pq]),
                     np.array([2 * pq, 2 * concordant]))
    if isinstance(spec, SideInfo):
        mu = signal_strength(spec.rho, n)
        rl = spec.r * log_n
        p = math.exp(-float(np.logaddexp(0.0, -rl)))     # n^r / (1 + n^r)
        lines = tuple(GaussianLine(0.0, mu, -mu * mu / 2 + sign * rl, alt_mean=mu)
                      for sign in (-1.0, 1.0))
        return LineMixture((p, 1 - p), lines)
    if isinstance(spec, CurieWeiss):
        spins = spec.spin_count(n)
        null = cw.magnetization_law(spec.theta, 0.0, spins)
        alt = cw.magnetization_law(spec.theta, spec.mu, spins)
        levels = (null.log_partition - alt.log_partition
                  + spec.theta * spec.mu * null.totals.astype(float))
        return Atoms(levels, null.pmf, alt.pmf)
    if isinstance(spec, SparseExponential):
        rl = spec.r * log_n
        slope = math.exp(-float(np.logaddexp(0.0, -rl)))   # n^r / (1 + n^r)
        return ExponentialLine(slope, -float(np.logaddexp(0.0, rl)), 1 + math.exp(rl))
    raise ParameterError(f"family: unsupported {spec.family!r}")


def _mixture_one_law(m: float, c: float) -> Plane:
    sd = math.sqrt(1 - c * c)

    def ell(y1, e):
        return np.logaddexp(m * y1, m * (c * y1 + sd * e)) - LOG2 - m * m / 2

    def inner_tail(y1, s):
        top = s + m * m / 2 + LOG2
        here = m * y1
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            level = top + np.log1p(-np.exp(np.minimum(here - top, 0.0)))
            cut = (level / m - c * y1) / sd
            return np.where(here >= top, 1.0, normal_sf(cut))

    return Plane(ell, std_normal_pdf, std_normal_pdf, inner_tail,
                 (min(-12.0, c * m - 12), max(12.0, m + 12)), (-12.0, max(12.0, m * sd + 12)))


def _mixture_two_law(m: float) -> Plane:
    def ell(b, a):
        return _logcosh(m * a) - _logcosh(m * b)

    def outer_pdf(b):
        return 0.5 * (std_normal_pdf(b - m) + std_normal_pdf(b + m))

    def inner_tail(b, s):
        k = s + _logcosh(m * b)
        with np.errstate(invalid="ignore", over="ignore"):
            reach = k + np.log1p(np.sqrt(np.maximum(1 - np.exp(-2 * k), 0.0)))  # acosh(e^k)
            return np.where(k <= 0, 1.0, 2 * normal_sf(reach / m))

    box = (-m - 12.0, m + 12.0)
    return Plane(ell, outer_pdf, std_normal_pdf, inner_tail, box, box)


def _correlated_law(m: float, rho: float) -> Plane:
    along = GaussianLine.versus(m, 1 + rho)     # z1 = (x1 + x2)/sqrt 2
    across = GaussianLine.versus(0.0, 1 - rho)  # z2 = (x1 - x2)/sqrt 2

    def ell(z2, z1):
        return along.ell(z1) + across.ell(z2)

    def inner_tail(z2, s):
        return along.tail(s - across.ell(z2))

    return Plane(ell, std_normal_pdf, std_normal_pdf, inner_tail, across.box(), along.box(),
                 moment=lambda gamma: along.log_moment(gamma) + across.log_moment(gamma))


def reduce_observations(spec: ModelSpec, obs: np.ndarray, n: float) -> tuple[np.ndarray, ...]:
    """Map raw observations (rows) to the arguments of ``null_law(spec, n).ell``."""
    if isinstance(spec, (IDJ, Heteroscedastic, SparseExponential)):
        return (obs,)
    if isinstance(spec, BrownianDrift):
        f = spec.drift_derivative()
        return (obs / math.sqrt(float(np.mean(f * f))),)
    if isinstance(spec, MultivariateGaussian):
        u = np.asarray(spec.u)
        direction = np.linalg.solve(np.asarray(spec.sigma), u)
        return (obs @ direction / math.sqrt(spec.whitened_norm_sq),)
    if isinstance(spec, MixtureOfMixturesI):
        c = spec.overlap
        y1 = obs @ np.asarray(spec.u1)
        return (y1, (obs @ np.asarray(spec.u2) - c * y1) / math.sqrt(1 - c * c))
    if isinstance(spec, MixtureOfMixturesII):
        return (obs @ np.asarray(spec.u), obs @ np.asarray(spec.v))
    if isinstance(spec, LowRank):
        proj = obs @ spec.basis()
        return (np.sum(proj * proj, axis=-1),)
    if isinstance(spec, CorrelatedPairs):
        root2 = math.sqrt(2.0)
        return ((obs[..., 0] - obs[..., 1]) / root2, (obs[..., 0] + obs[..., 1]) / root2)
    if isinstance(spec, SBMPair):
        cells = np.asarray(obs, dtype=int)
        if np.any((cells != 0) & (cells != 1)):
            raise ParameterError("observation: edge indicators must be 0 or 1")
        return (2 * cells[..., 0] + cells[..., 1],)
    if isinstance(spec, SBMParity):
        u = np.asarray(obs, dtype=int)
        if np.any((u != 0) & (u != 1)):
            raise ParameterError("observation: parity must be 0 or 1")
        return (u,)
    if isinstance(spec, SideInfo):
        a = np.asarray(obs[..., 0])
        if np.any((a != 0) & (a != 1)):
            raise ParameterError("observation: side channel a must be 0 or 1")
        return (a.astype(int), obs[..., 1])
    if isinstance(spec, CurieWeiss):
        spins = spec.spin_count(n)
        totals = np.asarray(obs, dtype=int)
        if np.any((np.abs(totals) > spins) | ((spins - totals) % 2 != 0)):
            raise ParameterError(f"observation: total spin must be one of -N, -N+2, .., N (N={spins})")
        return ((spins - totals) // 2,)
    raise ParameterError(f"family: unsupported {spec.family!r}")


def _as_rows(spec: ModelSpec, observation) -> tuple[np.ndarray, bool]:
    arr = np.asarray(observation, dtype=float)
    width = len(columns(spec))
    if isinstance(spec, VECTOR_FAMILIES):
        if arr.ndim == 1 and arr.shape[0] == width:
            return arr[None, :], True
        if arr.ndim == 2 and arr.shape[1] == width:
            return arr, False
        raise ParameterError(f"observation: expected length-{width} rows, got shape {arr.shape}")
    if arr.ndim == 0:
        return arr[None], True
    if arr.ndim == 1:
        return arr, False
    if arr.ndim == 2 and arr.shape[1] == 1:
        return arr[:, 0], False
    raise ParameterError(f"observation: expected scalars, got shape {arr.shape}")


def log_lr(spec: ModelSpec, observation, n: float):
    """Exact ``log(q_n/p_n)`` of one observation (float) or of a batch of rows (array)."""
    rows, single = _as_rows(spec, observation)
    law = null_law(spec, n)
    values = np.asarray(law.ell(*reduce_observations(spec, rows, n)), dtype=float)
    return float(values[0]) if single else values


def classical_p_values(spec: ModelSpec, observation, n: float) -> np.ndarray:
    """Upper-tail null p-values of the scalar statistic the log-LR increases in.

    Only families whose likelihood ratio is a strictly increasing function of
    one statistic with a known null law have them; the rest raise.
    """
    rows, _ = _as_rows(spec, observation)
    if isinstance(spec, (IDJ, MultivariateGaussian, BrownianDrift)):
        (z,) = reduce_observations(spec, rows, n)
        return normal_sf(np.asarray(z, dtype=float))
    if isinstance(spec, LowRank):
        (q,) = reduce_observations(spec, rows, n)
        return chi2.sf(q, spec.k)
    if isinstance(spec, SparseExponential):
        return np.exp(-np.asarray(rows, dtype=float))
    raise UnsupportedOperation(
        f"{spec.family}: log-LR is not monotone in a scalar statistic with a known null law")


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SampleBatch:
    family: str
    observations: np.ndarray
    n: int
    hypothesis: str                 # "null" or "alternative"
    seed: int
    beta: float | None = None
    signal: np.ndarray | None = None  # diagnostics only; never used by tests

    @property
    def columns(self) -> tuple[str, ...]:
        return _column_names(self.family, self.observations)

    def to_csv(self, target=None) -> str:
        """Write one observation per row; returns the CSV text."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        head = list(self.columns)
        if self.signal is not None:
            head.append("signal")
        writer.writerow(head)
        rows = self.observations.reshape(self.observations.shape[0], -1)
        integral = np.issubdtype(self.observations.dtype, np.integer)
        for i, row in enumerate(rows):
            cells = [str(int(v)) if integral else format(float(v), ".17g") for v in row]
            if self.signal is not None:
                cells.append(str(int(self.signal[i])))
            writer.writerow(cells)
        text = buffer.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text


def _column_names(family: str, observations: np.ndarray) -> tuple[str, ...]:
    named = {"idj": ("x",), "heteroscedastic": ("x",), "sparse_exponential": ("x",),
             "brownian_drift": ("z",), "sbm_pair": ("a", "b"), "sbm_parity": ("u",),
             "side_info": ("a", "w"), "curie_weiss": ("total",)}
    if family in named:
        return named[family]
    return tuple(f"x{i}" for i in range(observations.shape[1]))


def read_observations(spec: ModelSpec, path) -> np.ndarray:
    """Load a CSV written by :meth:`SampleBatch.to_csv` (extra columns are ignored)."""
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        wanted = columns(spec)
        missing = [c for c in wanted if c not in (reader.fieldnames or [])]
        if missing:
            raise ParameterError(f"{missing[0]}: column missing from observation CSV")
        rows = [[float(rec[c]) for c in wanted] for rec in reader]
    arr = np.asarray(rows, dtype=float).reshape(-1, len(wanted))
    return arr if len(wanted) > 1 else arr[:, 0]


def _gaussian_rows(rng: np.random.Generator, size: int, dim: int) -> np.ndarray:
    return rng.standard_normal((size, dim))


def _brownian_statistic(spec: BrownianDrift, n: float, size: int, rng, signal: bool) -> np.ndarray:
    """Left-point Euler sums ``sum_k f'_k dX_k`` over ``steps`` increments."""
    f = spec.drift_derivative()
    steps = spec.steps
    drift = signal_strength(spec.r, n) * f / steps if signal else np.zeros(steps)
    out = np.empty(size)
    for start in range(0, size, CHUNK):
        rows = min(CHUNK, size - start)
        increments = rng.standard_normal((rows, steps)) / math.sqrt(steps) + drift
        out[start:start + rows] = increments @ f
    return out


def draw(spec: ModelSpec, n: float, size: int, rng: np.random.Generator,
         signal: bool = False) -> np.ndarray:
    """``size`` iid draws from ``P_n`` (or ``Q_n`` when ``signal``)."""
    n = float(n)
    log_n = math.log(n) if n > 1 else 0.0
    if isinstance(spec, IDJ):
        shift = math.sqrt(2 * spec.r * log_n) if signal else 0.0
        return rng.standard_normal(size) + shift
    if isinstance(spec, Heteroscedastic):
        z = rng.standard_normal(size)
        return math.sqrt(spec.sigma2) * z + math.sqrt(2 * spec.r * log_n) if signal else z
    if isinstance(spec, SparseExponential):
        scale = 1 + math.exp(spec.r * log_n) if signal else 1.0
        return rng.exponential(scale, size)
    if isinstance(spec, BrownianDrift):
        return _brownian_statistic(spec, n, size, rng, signal)
    if isinstance(spec, MultivariateGaussian):
        chol = np.linalg.cholesky(np.asarray(spec.sigma))
        x = _gaussian_rows(rng, size, len(spec.u)) @ chol.T
        return x + math.sqrt(2 * spec.r * log_n) * np.asarray(spec.u) if signal else x
    if isinstance(spec, MixtureOfMixturesI):
        x = _gaussian_rows(rng, size, len(spec.u1))
        if not signal:
            return x
        pick = rng.random(size) < 0.5
        centers = np.where(pick[:, None], np.asarray(spec.u1), np.asarray(spec.u2))
        return x + math.sqrt(2 * spec.r * log_n) * centers
    if isinstance(spec, MixtureOfMixturesII):
        x = _gaussian_rows(rng, size, len(spec.u))
        sign = np.where(rng.random(size) < 0.5, 1.0, -1.0)[:, None]
        axis = np.asarray(spec.v if signal else spec.u)
        return x + math.sqrt(2 * spec.r * log_n) * sign * axis
    if isinstance(spec, LowRank):
        z = _gaussian_rows(rng, size, spec.p)
        if not signal:
            return z
        basis = spec.basis()
        return z + (math.sqrt(1 + spec.r) - 1) * (z @ basis) @ basis.T
    if isinstance(spec, CorrelatedPairs):
        z = _gaussian_rows(rng, size, 2)
        if not signal:
            return z
        rho = spec.rho
        chol = np.array([[1.0, 0.0], [rho, math.sqrt(1 - rho * rho)]])
        return z @ chol.T + math.sqrt(spec.r * log_n)
    if isinstance(spec, (SBMPair, SBMParity)):
        p = 1 / (1 + math.exp(-spec.r * log_n))
        q = 1 - p
        first_p = rng.random(size) < 0.5
        if signal:
            # one neighbour in each community: one edge at rate p, the other at rate q
            pa, pb = np.where(first_p, p, q), np.where(first_p, q, p)
        else:
            pa = pb = np.where(first_p, p, q)
        a = (rng.random(size) < pa).astype(np.int64)
        b = (rng.random(size) < pb).astype(np.int64)
        if isinstance(spec, SBMParity):
            return (a + b) % 2
        return np.stack([a, b], axis=1)
    if isinstance(spec, SideInfo):
        p = 1 / (1 + math.exp(-spec.r * log_n))
        a = (rng.random(size) < (p if signal else 1 - p)).astype(float)
        w = rng.standard_normal(size) + (math.sqrt(2 * spec.rho * log_n) if signal else 0.0)
        return np.stack([a, w], axis=1)
    if isinstance(spec, CurieWeiss):
        law = cw.magnetization_law(spec.theta, spec.mu if signal else 0.0, spec.spin_count(n))
        return rng.choice(law.totals, size=size, p=law.pmf / law.pmf.sum())
    raise ParameterError(f"family: unsupported {spec.family!r}")


def expand_spins(totals: np.ndarray, spins: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random spin vectors with the given totals, one row per total."""
    totals = np.asarray(totals, dtype=int)
    out = np.ones((totals.size, spins), dtype=np.int8)
    for i, total in enumerate(totals):
        down = (spins - total) // 2
        out[i, rng.choice(spins, size=down, replace=False)] = -1
    return out


def sample_null(spec: ModelSpec, n: int, seed: int) -> SampleBatch:
    """``n`` iid draws from ``P_n``."""
    n = int(_check_n(n, least=1))
    obs = draw(spec, n, n, stream(seed, "sample", "null"))
    return SampleBatch(spec.family, obs, n, "null", int(seed))


def sample_alternative(spec: ModelSpec, n: int, beta: float, seed: int) -> SampleBatch:
    """``n`` iid draws from ``(1 - eps) P_n + eps Q_n`` with ``eps = n^-beta``."""
    n = int(_check_n(n, least=1))
    beta = _check_beta(beta)
    rng = stream(seed, "sample", "alternative")
    mask = rng.random(n) < n ** -beta
    obs = draw(spec, n, n, rng)
    count = int(mask.sum())
    if count:
        obs[mask] = draw(spec, n, count, rng, signal=True)
    return SampleBatch(spec.family, obs, n, "alternative", int(seed), beta, mask)


# --------------------------------------------------------------------------
# null tails
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NullTail:
    """``P(log L > s)`` (or ``>=`` with ``inclusive``) under ``P_n``, on the log-LR scale."""

    spec: ModelSpec
    n: float
    method: str                      # "analytic", "quadrature", "exact" or "monte_carlo"
    samples: np.ndarray | None = None

    def __call__(self, s, inclusive: bool = False):
        s = np.asarray(s, dtype=float)
        if self.samples is None:
            out = np.asarray(null_law(self.spec, self.n).tail(s, inclusive), dtype=float)
            out = out.reshape(s.shape)
        else:
            side = "left" if inclusive else "right"
            below = np.searchsorted(self.samples, s, side=side)
            out = 1.0 - below / self.samples.size
        return out if out.ndim else float(out)

    def stderr(self, s, inclusive: bool = False):
        """Monte Carlo standard error; zero for exact methods."""
        p = np.asarray(self(s, inclusive), dtype=float)
        if self.samples is None:
            return np.zeros_like(p)
        return np.sqrt(p * (1 - p) / self.samples.size)


_TAIL_METHOD = {GaussianLine: "analytic", ChiSquareLine: "analytic", ExponentialLine: "analytic",
                LineMixture: "analytic", Atoms: "exact", Plane: "quadrature"}


def null_log_lr_tail(spec: ModelSpec, n: float, method: str = "auto",
                     draws: int = MONTE_CARLO_DRAWS, seed: int = 0) -> NullTail:
    """Null tail of ``log L``; ``method="monte_carlo"`` forces the sampling fallback."""
    if method == "auto":
        return NullTail(spec, float(n), _TAIL_METHOD[type(null_law(spec, n))])
    if method != "monte_carlo":
        raise ParameterError(f"method: expected 'auto' or 'monte_carlo' (got {method!r})")
    values = np.sort(null_log_lr_draws(spec, n, draws, seed))
    return NullTail(spec, float(n), "monte_carlo", values)


def null_lr_tail(spec: ModelSpec, t, n: float):
    """``P(q_n/p_n(Y) > t)`` for ``Y ~ P_n`` and ``t > 0``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ParameterError("t: thresholds on the likelihood-ratio scale must be > 0")
    return null_log_lr_tail(spec, n)(np.log(t))


def null_log_lr_draws(spec: ModelSpec, n: float, draws: int, seed: int) -> np.ndarray:
    rng = stream(seed, "null-draws", spec.family)
    out = np.empty(draws)
    for start in range(0, draws, 1 << 17):
        size = min(1 << 17, draws - start)
        out[start:start + size] = log_lr(spec, draw(spec, n, size, rng), n)
    return out


# --------------------------------------------------------------------------
# tail condition
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentEstimate:
    value: float           # (1/log n) log E[L^gamma]
    method: str
    stderr: float = 0.0


def log_lr_moment(spec: ModelSpec, n: float, gamma: float, draws: int = MONTE_CARLO_DRAWS,
                  seed: int = 0) -> MomentEstimate:
    """``(1/log n) log E_P[(q_n/p_n)^gamma]``, closed form where the law allows it."""
    law = null_law(spec, n)
    log_n = math.log(n)
    try:
        value = law.log_moment(gamma)
    except ComputationError:
        value = None
    if value is not None:
        return MomentEstimate(value / log_n, "analytic" if not isinstance(law, Atoms) else "exact")
    samples = gamma * null_log_lr_draws(spec, n, draws, seed)
    top = float(logsumexp(samples)) - math.log(draws)
    # delta-method standard error of the log of a sample mean
    weights = np.exp(samples - samples.max())
    rel = float(np.std(weights) / (np.mean(weights) * math.sqrt(draws)))
    return MomentEstimate(top / log_n, "monte_carlo", rel / log_n)


@dataclass(frozen=True)
class TailConditionReport:
    gamma: float
    n_values: tuple[float, ...]
    estimates: tuple[float, ...]
    methods: tuple[str, ...]
    slope: float
    verdict: str           # "bounded" or "diverging"

    def to_json(self) -> dict[str, Any]:
        from .extended import json_number
        return {"gamma": self.gamma, "n_values": list(self.n_values),
                "estimates": [json_number(v) for v in self.estimates],
                "methods": list(self.methods), "slope": json_number(self.slope),
                "verdict": self.verdict}


def tail_condition_estimate(spec: ModelSpec, gamma: float, n_list, slope_tol: float = 0.05,
                            draws: int = MONTE_CARLO_DRAWS, seed: int = 0) -> TailConditionReport:
    """Trend of ``(1/log n) log E[L^gamma]`` over ``n_list``.

    ``diverging`` when any estimate is infinite or the least-squares slope
    against ``log n`` exceeds ``slope_tol``; ``bounded`` otherwise.
    """
    if not gamma > 1:
        raise ParameterError("gamma: must be > 1")
    ns = [float(v) for v in n_list]
    if len(ns) < 3 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ParameterError("n_list: need at least 3 increasing values")
    estimates = [log_lr_moment(spec, v, gamma, draws, seed) for v in ns]
    values = np.array([e.value for e in estimates])
    if not np.all(np.isfinite(values)):
        slope, verdict = INF, "diverging"
    else:
        slope = float(np.polyfit(np.log(ns), values, 1)[0])
        verdict = "diverging" if slope > slope_tol else "bounded"
    return TailConditionReport(float(gamma), tuple(ns), tuple(float(v) for v in values),
                               tuple(e.method for e in estimates), slope, verdict)


def curie_weiss_magnetization_law(theta: float, mu: float, spins: int) -> cw.MagnetizationLaw:
    return cw.magnetization_law(theta, mu, spins)


def density_ratio_mean(spec: ModelSpec, n: float):
    """``E_P[q_n/p_n]`` by the law's own integrator; should be 1."""
    return null_law(spec, n).expect(lambda ell: ell)

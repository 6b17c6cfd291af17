"""Model specifications: one frozen dataclass per detection problem.

Every spec validates its own parameters on construction and round-trips through
a plain JSON mapping ``{"family": <name>, <param>: <value>, ...}``.
"""

from __future__ import annotations

import math
from dataclasses import MISSING, dataclass, fields
from typing import Any, ClassVar

import numpy as np

from .errors import ConfigError, ParameterError

UNIT_TOL = 1e-10
MATRIX_TOL = 1e-8


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ParameterError(message)


def _positive_r(r: float) -> None:
    _require(math.isfinite(r) and r > 0, f"r: must be > 0 (got {r})")


def _unit(name: str, vec: tuple[float, ...]) -> np.ndarray:
    arr = np.asarray(vec, dtype=float)
    _require(arr.ndim == 1 and arr.size >= 1, f"{name}: must be a nonempty vector")
    _require(abs(np.linalg.norm(arr) - 1.0) <= UNIT_TOL, f"{name}: must have unit norm")
    return arr


def _vector(value) -> tuple[float, ...]:
    return tuple(float(x) for x in np.asarray(value, dtype=float).ravel())


def _matrix(value) -> tuple[tuple[float, ...], ...]:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2:
        raise ParameterError("matrix parameters must be row-major nested arrays")
    return tuple(tuple(float(x) for x in row) for row in arr)


@dataclass(frozen=True)
class ModelSpec:
    """Base class. Subclasses set ``family`` and validate in ``__post_init__``."""

    family: ClassVar[str] = ""

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"family": self.family}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = [list(v) if isinstance(v, tuple) else v for v in value]
            out[f.name] = value
        return out

    def max_parameter(self) -> float:
        """Largest real parameter magnitude, used to size search ranges.

        Integer fields (sizes, step counts) are structural and do not count.
        """
        values = [abs(getattr(self, f.name)) for f in fields(self)
                  if isinstance(getattr(self, f.name), float)]
        return max(values, default=1.0)


@dataclass(frozen=True)
class IDJ(ModelSpec):
    """N(0,1) null against N(sqrt(2 r log n), 1) signals."""

    family: ClassVar[str] = "idj"
    r: float

    def __post_init__(self):
        _positive_r(self.r)


@dataclass(frozen=True)
class MultivariateGaussian(ModelSpec):
    family: ClassVar[str] = "multivariate_gaussian"
    r: float
    u: tuple[float, ...]
    sigma: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        _positive_r(self.r)
        object.__setattr__(self, "u", _vector(self.u))
        object.__setattr__(self, "sigma", _matrix(self.sigma))
        u = _unit("u", self.u)
        cov = np.asarray(self.sigma)
        _require(cov.shape == (u.size, u.size), "sigma: must be d x d with d = len(u)")
        _require(np.allclose(cov, cov.T, atol=MATRIX_TOL), "sigma: must be symmetric")
        _require(np.linalg.eigvalsh(cov).min() > MATRIX_TOL, "sigma: must be positive definite")

    @property
    def whitened_norm_sq(self) -> float:
        """<u, Sigma^{-1} u>."""
        u = np.asarray(self.u)
        return float(u @ np.linalg.solve(np.asarray(self.sigma), u))

    def max_parameter(self) -> float:
        return max(self.r, self.r * self.whitened_norm_sq)


@dataclass(frozen=True)
class BrownianDrift(ModelSpec):
    """Brownian paths on [0,1] with drift sqrt(2 r log n) f(t), ``f'`` sampled on ``steps`` points."""

    family: ClassVar[str] = "brownian_drift"
    r: float
    fprime: tuple[float, ...] | None = None
    steps: int = 1024

    def __post_init__(self):
        _positive_r(self.r)
        _require(int(self.steps) >= 2, "steps: must be >= 2")
        object.__setattr__(self, "steps", int(self.steps))
        if self.fprime is not None:
            object.__setattr__(self, "fprime", _vector(self.fprime))
            _require(len(self.fprime) == self.steps, "fprime: length must equal steps")
            energy = float(np.sum(np.square(self.fprime)) / self.steps)
            _require(abs(energy - 1.0) <= MATRIX_TOL, "fprime: mean square must equal 1")

    def drift_derivative(self) -> np.ndarray:
        if self.fprime is None:
            return np.ones(self.steps)
        return np.asarray(self.fprime)


@dataclass(frozen=True)
class Heteroscedastic(ModelSpec):
    """N(0,1) null against N(sqrt(2 r log n), sigma2) signals."""

    family: ClassVar[str] = "heteroscedastic"
    r: float
    sigma2: float

    def __post_init__(self):
        _positive_r(self.r)
        _require(self.sigma2 > 0, "sigma2: must be > 0")
        _require(self.sigma2 != 1, "sigma2: must differ from 1 (sigma2 = 1 is the idj family)")


@dataclass(frozen=True)
class MixtureOfMixturesI(ModelSpec):
    """N(0, I) null against an equal mixture of two shifted Gaussians."""

    family: ClassVar[str] = "mixture_of_mixtures_1"
    r: float
    u1: tuple[float, ...]
    u2: tuple[float, ...]

    def __post_init__(self):
        _positive_r(self.r)
        object.__setattr__(self, "u1", _vector(self.u1))
        object.__setattr__(self, "u2", _vector(self.u2))
        a, b = _unit("u1", self.u1), _unit("u2", self.u2)
        _require(a.size == b.size, "u2: must have the same dimension as u1")
        _require(abs(abs(a @ b) - 1.0) > UNIT_TOL, "u1, u2: must be linearly independent")

    @property
    def overlap(self) -> float:
        return float(np.dot(self.u1, self.u2))


@dataclass(frozen=True)
class MixtureOfMixturesII(ModelSpec):
    """Symmetric two-cluster null along ``u`` against the same along ``v``."""

    family: ClassVar[str] = "mixture_of_mixtures_2"
    r: float
    u: tuple[float, ...]
    v: tuple[float, ...]

    def __post_init__(self):
        _positive_r(self.r)
        _require(self.r <= 1, "r: must lie in (0, 1]")
        object.__setattr__(self, "u", _vector(self.u))
        object.__setattr__(self, "v", _vector(self.v))
        a, b = _unit("u", self.u), _unit("v", self.v)
        _require(a.size == b.size, "v: must have the same dimension as u")
        _require(abs(a @ b) <= UNIT_TOL, "u, v: must be orthogonal")


@dataclass(frozen=True)
class LowRank(ModelSpec):
    """N(0, I_p) null against N(0, I_p + H), H of rank k with eigenvalues r."""

    family: ClassVar[str] = "low_rank"
    r: float
    k: int
    p: int
    q_matrix: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        _positive_r(self.r)
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "p", int(self.p))
        _require(1 <= self.k < self.p, "k: must satisfy 1 <= k < p")
        if self.q_matrix is not None:
            object.__setattr__(self, "q_matrix", _matrix(self.q_matrix))
            q = np.asarray(self.q_matrix)
            _require(q.shape == (self.p, self.p), "q_matrix: must be p x p")
            _require(np.allclose(q.T @ q, np.eye(self.p), atol=MATRIX_TOL),
                     "q_matrix: must be orthogonal")

    def basis(self) -> np.ndarray:
        """The first ``k`` columns of Q, spanning the perturbed subspace."""
        q = np.eye(self.p) if self.q_matrix is None else np.asarray(self.q_matrix)
        return q[:, : self.k]

    def max_parameter(self) -> float:
        return self.r


@dataclass(frozen=True)
class CorrelatedPairs(ModelSpec):
    """N(0, I_2) null against N(sqrt(r log n) 1_2, [[1, rho], [rho, 1]])."""

    family: ClassVar[str] = "correlated_pairs"
    r: float
    rho: float

    def __post_init__(self):
        _positive_r(self.r)
        _require(-1 < self.rho < 1, "rho: must lie in (-1, 1)")
        _require(self.rho != 0, "rho: must be nonzero (rho = 0 is a multivariate_gaussian case)")


@dataclass(frozen=True)
class SBMPair(ModelSpec):
    """Edge pair (A, B) from a node to two others: same community under the null."""

    family: ClassVar[str] = "sbm_pair"
    r: float

    def __post_init__(self):
        _positive_r(self.r)


@dataclass(frozen=True)
class SBMParity(ModelSpec):
    """The pair model reduced to U = A + B mod 2."""

    family: ClassVar[str] = "sbm_parity"
    r: float

    def __post_init__(self):
        _positive_r(self.r)


@dataclass(frozen=True)
class SideInfo(ModelSpec):
    """Bernoulli side channel (accuracy n^r / (1 + n^r)) next to a Gaussian z-score."""

    family: ClassVar[str] = "side_info"
    r: float
    rho: float

    def __post_init__(self):
        _positive_r(self.r)
        _require(0 < self.rho <= 1, "rho: must lie in (0, 1]")


@dataclass(frozen=True)
class CurieWeiss(ModelSpec):
    """Curie-Weiss spins without (null) and with (signal) an external field.

    ``spins`` overrides the default N = ceil(log n).
    """

    family: ClassVar[str] = "curie_weiss"
    theta: float
    mu: float
    spins: int | None = None

    def __post_init__(self):
        _require(math.isfinite(self.theta) and self.theta >= 0, "theta: must be >= 0")
        _require(math.isfinite(self.mu) and self.mu >= 0, "mu: must be >= 0")
        if self.spins is not None:
            object.__setattr__(self, "spins", int(self.spins))
            _require(1 <= self.spins <= 20000, "spins: must lie in [1, 20000]")

    def spin_count(self, n: float) -> int:
        if self.spins is not None:
            return self.spins
        return max(1, math.ceil(math.log(n)))

    def max_parameter(self) -> float:
        return max(self.theta, self.theta * self.mu, 1.0)


@dataclass(frozen=True)
class SparseExponential(ModelSpec):
    """Exp(1) null against exponential signals of mean 1 + n^r (tail condition fails)."""

    family: ClassVar[str] = "sparse_exponential"
    r: float

    def __post_init__(self):
        _positive_r(self.r)


FAMILIES: dict[str, type[ModelSpec]] = {
    cls.family: cls
    for cls in (IDJ, MultivariateGaussian, BrownianDrift, Heteroscedastic, MixtureOfMixturesI,
                MixtureOfMixturesII, LowRank, CorrelatedPairs, SBMPair, SBMParity, SideInfo,
                CurieWeiss, SparseExponential)
}


def parse_spec(doc: dict[str, Any]) -> ModelSpec:
    """Build a spec from its JSON mapping, naming the offending field on failure."""
    if not isinstance(doc, dict):
        raise ConfigError("model: must be a JSON object")
    name = doc.get("family")
    if name is None:
        raise ConfigError("family: missing")
    cls = FAMILIES.get(name)
    if cls is None:
        raise ConfigError(f"family: unknown model family {name!r}")
    known = {f.name: f for f in fields(cls)}
    extra = sorted(set(doc) - set(known) - {"family"})
    if extra:
        raise ConfigError(f"{extra[0]}: unknown parameter for family {name!r}")
    missing = [n for n, f in known.items() if n not in doc and _is_required(f)]
    if missing:
        raise ConfigError(f"{missing[0]}: missing parameter for family {name!r}")
    kwargs = {n: doc[n] for n in known if n in doc}
    try:
        return cls(**kwargs)
    except ParameterError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc


def _is_required(f) -> bool:
    return f.default is MISSING and f.default_factory is MISSING

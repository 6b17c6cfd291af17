"""Exact Curie-Weiss magnetization law and the mean-field free energy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

from .errors import ParameterError
from .optimize import golden_section_max

MAX_SPINS = 20000


@dataclass(frozen=True)
class MagnetizationLaw:
    """Law of the total spin ``S = N - 2j`` where ``j`` counts the -1 spins."""

    spins: int
    totals: np.ndarray      # S for j = 0..N
    log_pmf: np.ndarray
    log_partition: float    # log Z_N(theta, mu)

    @property
    def pmf(self) -> np.ndarray:
        return np.exp(self.log_pmf)


def _log_weights(theta: float, mu: float, spins: int) -> tuple[np.ndarray, np.ndarray]:
    j = np.arange(spins + 1)
    totals = spins - 2 * j
    log_binom = gammaln(spins + 1) - gammaln(j + 1) - gammaln(spins - j + 1)
    # sum_{i<j} x_i x_j = (S^2 - N) / 2
    energy = theta * (totals.astype(float) ** 2 - spins) / (2 * spins) + theta * mu * totals
    return totals, log_binom + energy


@lru_cache(maxsize=256)
def _law(theta: float, mu: float, spins: int) -> MagnetizationLaw:
    totals, logw = _log_weights(theta, mu, spins)
    log_z = float(logsumexp(logw))
    law = MagnetizationLaw(spins, totals, logw - log_z, log_z)
    law.totals.setflags(write=False)
    law.log_pmf.setflags(write=False)
    return law


def magnetization_law(theta: float, mu: float, spins: int) -> MagnetizationLaw:
    """Exact pmf of the total spin, normalised in log space, plus ``log Z_N``."""
    if not (isinstance(spins, (int, np.integer)) and 1 <= spins <= MAX_SPINS):
        raise ParameterError(f"spins: must be an integer in [1, {MAX_SPINS}]")
    return _law(float(theta), float(mu), int(spins))


def log_partition(theta: float, mu: float, spins: int) -> float:
    return magnetization_law(theta, mu, spins).log_partition


def mean_field(m, theta: float, mu: float):
    """phi_mf(m; theta, mu), with x log x -> 0 at m = +-1."""
    m = np.asarray(m, dtype=float)
    plus, minus = (1 + m) / 2, (1 - m) / 2
    value = -theta / 2 * (1 - m**2) + theta * mu * m - xlogy(plus, plus) - xlogy(minus, minus)
    return value if value.ndim else float(value)


@dataclass(frozen=True)
class MeanFieldMax:
    value: float
    argmax: float


@lru_cache(maxsize=256)
def mean_field_max(theta: float, mu: float) -> MeanFieldMax:
    """M*(theta, mu): 1001-point scan of [-1, 1] then golden section.

    For mu = 0 and theta > 1 the maximum is attained at two symmetric points;
    the nonnegative one is reported.
    """
    grid = np.linspace(-1.0, 1.0, 1001)
    values = mean_field(grid, theta, mu)
    best = int(np.argmax(values))
    if mu == 0:
        best = int(np.argmax(np.where(grid >= 0, values, -np.inf)))
    lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, grid.size - 1)]
    refined = golden_section_max(lambda m: mean_field(m, theta, mu), lo, hi, tol=1e-12)
    if refined.value >= values[best]:
        return MeanFieldMax(refined.value, refined.x)
    return MeanFieldMax(float(values[best]), float(grid[best]))


def free_energy_offset(theta: float) -> float:
    """Constant gap between ``(1/N) log Z_N`` and ``M*`` under the pair-sum Hamiltonian.

    Writing the interaction over pairs ``i < j`` drops the diagonal term, so
    ``(1/N) log Z_N -> M* + theta/2``. The shift cancels in the rate because
    only differences of ``M*`` appear there.
    """
    return theta / 2

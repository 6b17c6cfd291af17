"""Monte Carlo risk, Hellinger asymptotics and reproducible phase sweeps.

Every replication draws from its own counter-based stream keyed by
``(master_seed, n, beta, replication, hypothesis)``, so a sweep's output does
not depend on how its work is split between processes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .boundary import solve_beta_star
from .errors import ComputationError, ConfigError, ParameterError, SparsemixError
from .extended import json_number
from .hc import hc_classical, hc_star, np_oracle_test
from .laws import Expectation
from .models import (classical_p_values, log_lr, null_law, null_log_lr_draws, null_log_lr_tail,
                     sample_alternative, sample_null)
from .rate import analytic_rate
from .rng import derive_seed
from .specs import ModelSpec, parse_spec

TEST_KINDS = ("hc_star", "hc_classical", "np_oracle")
CSV_COLUMNS = ("n", "beta", "test", "type_i", "type_ii", "risk", "hw95", "seed", "beta_star",
               "status")
Z95 = 1.96
TREND_TOL = 0.05
HELLINGER_ABS_TOL = 1e-12
HELLINGER_REL_TOL = 1e-3
HELLINGER_DRAWS = 10**6
LOWER_ENVELOPE = (math.sqrt(2.0) - 1.0) ** 2


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def _float_list(doc: dict, key: str) -> tuple[float, ...]:
    raw = doc.get(key)
    if raw is None:
        raise ConfigError(f"{key}: missing")
    if not isinstance(raw, list):
        raise ConfigError(f"{key}: must be a list")
    if not raw:
        raise ConfigError(f"{key}: must be nonempty")
    try:
        return tuple(float(v) for v in raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: entries must be numbers") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    spec: ModelSpec
    n_values: tuple[int, ...]
    beta_grid: tuple[float, ...]
    test_kind: str = "np_oracle"
    delta: float = 0.1
    replications: int = 200
    master_seed: int = 0
    output_path: str | None = None
    workers: int = 1
    tail_method: str = "auto"       # null tail used by hc_star: "auto" or "monte_carlo"

    def __post_init__(self):
        if not self.n_values:
            raise ConfigError("n_values: must be nonempty")
        if not self.beta_grid:
            raise ConfigError("beta_grid: must be nonempty")
        if self.test_kind not in TEST_KINDS:
            raise ConfigError(f"test_kind: expected one of {', '.join(TEST_KINDS)}")
        least = 16 if self.test_kind != "np_oracle" else 3
        for n in self.n_values:
            if int(n) != n or n < least:
                raise ConfigError(f"n_values: entries must be integers >= {least} (got {n})")
        for b in self.beta_grid:
            if not 0 < b < 1:
                raise ConfigError(f"beta_grid: entries must lie in (0, 1) (got {b})")
        if not self.delta > 0:
            raise ConfigError("delta: must be > 0")
        if int(self.replications) != self.replications or self.replications < 1:
            raise ConfigError("replications: must be an integer >= 1")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ConfigError("workers: must be an integer >= 1")
        if self.tail_method not in ("auto", "monte_carlo"):
            raise ConfigError("tail_method: expected 'auto' or 'monte_carlo'")

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config: must be a JSON object")
        known = {"model", "n_values", "beta_grid", "test_kind", "delta", "replications",
                 "master_seed", "output_path", "workers", "tail_method"}
        extra = sorted(set(doc) - known)
        if extra:
            raise ConfigError(f"{extra[0]}: unknown config field")
        if "model" not in doc:
            raise ConfigError("model: missing")
        n_values = _float_list(doc, "n_values")
        kwargs: dict[str, Any] = {
            "spec": parse_spec(doc["model"]),
            "n_values": tuple(int(n) if float(n).is_integer() else n for n in n_values),
            "beta_grid": _float_list(doc, "beta_grid"),
        }
        for key, kind in (("test_kind", str), ("delta", float), ("replications", int),
                          ("master_seed", int), ("output_path", str), ("workers", int),
                          ("tail_method", str)):
            if key in doc and doc[key] is not None:
                value = doc[key]
                if kind is int and not (isinstance(value, int) and not isinstance(value, bool)):
                    raise ConfigError(f"{key}: must be an integer")
                if kind is float and not isinstance(value, (int, float)):
                    raise ConfigError(f"{key}: must be a number")
                if kind is str and not isinstance(value, str):
                    raise ConfigError(f"{key}: must be a string")
                kwargs[key] = kind(value)
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        return {"model": self.spec.to_dict(), "n_values": list(self.n_values),
                "beta_grid": list(self.beta_grid), "test_kind": self.test_kind,
                "delta": self.delta, "replications": self.replications,
                "master_seed": self.master_seed, "output_path": self.output_path,
                "workers": self.workers, "tail_method": self.tail_method}


# --------------------------------------------------------------------------
# risk
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RiskEstimate:
    type_i_rate: float
    type_ii_rate: float
    risk: float
    half_width_95: float
    replications: int

    @classmethod
    def from_counts(cls, false_rejections: int, misses: int, reps: int) -> "RiskEstimate":
        p1, p2 = false_rejections / reps, misses / reps
        hw = Z95 * (math.sqrt(p1 * (1 - p1) / reps) + math.sqrt(p2 * (1 - p2) / reps))
        return cls(p1, p2, p1 + p2, hw, reps)


def cell_seed(master_seed: int, n: int, beta: float) -> int:
    return derive_seed(master_seed, "cell", int(n), float(beta))


def replication_seed(cell: int, rep: int, hypothesis: str) -> int:
    return derive_seed(cell, "replication", int(rep), hypothesis)


def _decider(config: ExperimentConfig, n: int, beta: float) -> Callable[[np.ndarray], bool]:
    """Map a batch of observations to ``True`` (reject) or ``False``."""
    spec = config.spec
    if config.test_kind == "np_oracle":
        return lambda obs: np_oracle_test(log_lr(spec, obs, n), n, beta).decision == "reject"
    if config.test_kind == "hc_classical":
        return lambda obs: hc_classical(classical_p_values(spec, obs, n),
                                        config.delta).decision == "reject"
    tail = null_log_lr_tail(spec, n, config.tail_method,
                            seed=derive_seed(config.master_seed, "tail", int(n)))
    return lambda obs: hc_star(log_lr(spec, obs, n), tail, n, config.delta,
                               scale="log").decision == "reject"


def _count_block(config: ExperimentConfig, n: int, beta: float, reps: range) -> tuple[int, int]:
    decide = _decider(config, n, beta)
    seed = cell_seed(config.master_seed, n, beta)
    false_rejections = misses = 0
    for rep in reps:
        null = sample_null(config.spec, n, replication_seed(seed, rep, "null"))
        alt = sample_alternative(config.spec, n, beta, replication_seed(seed, rep, "alternative"))
        false_rejections += decide(null.observations)
        misses += not decide(alt.observations)
    return false_rejections, misses


def estimate_risk(config: ExperimentConfig, n: int | None = None, beta: float | None = None
                  ) -> RiskEstimate:
    """Type I + Type II error of ``config.test_kind`` at one ``(n, beta)`` cell.

    ``n`` and ``beta`` default to the first grid entries.
    """
    n = int(config.n_values[0] if n is None else n)
    beta = float(config.beta_grid[0] if beta is None else beta)
    fr, miss = _count_block(config, n, beta, range(config.replications))
    return RiskEstimate.from_counts(fr, miss, config.replications)


# --------------------------------------------------------------------------
# Hellinger distance
# --------------------------------------------------------------------------

def _log_abs_expm1(ell: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore"):
        pos = ell + np.log(-np.expm1(-np.abs(ell)))
        neg = np.log(-np.expm1(-np.abs(ell)))
    return np.where(ell > 0, pos, neg)


def _log_mixture(ell: np.ndarray, eps: float) -> np.ndarray:
    """``log(1 + eps (e^ell - 1))``."""
    with np.errstate(over="ignore", divide="ignore"):
        near = np.log1p(eps * np.expm1(np.minimum(ell, 30.0)))
        far = np.logaddexp(math.log1p(-eps), math.log(eps) + ell)
    return np.where(ell < 30.0, near, far)


def hellinger_log_integrand(eps: float) -> Callable[[np.ndarray], np.ndarray]:
    """``log (sqrt(1 + a) - 1)^2`` as a function of ``ell = log L``, ``a = eps (L - 1)``.

    Written as ``a^2 / (sqrt(1 + a) + 1)^2`` to avoid cancellation near ``a = 0``.
    """
    log_eps = math.log(eps)

    def log_g(ell):
        ell = np.asarray(ell, dtype=float)
        log_a = log_eps + _log_abs_expm1(ell)
        denom = np.logaddexp(0.5 * _log_mixture(ell, eps), 0.0)
        return 2 * log_a - 2 * denom

    return log_g


def envelope_log_integrand(eps: float) -> Callable[[np.ndarray], np.ndarray]:
    """``log min(|a|, a^2)`` with ``a = eps (L - 1)``."""
    log_eps = math.log(eps)

    def log_g(ell):
        log_a = log_eps + _log_abs_expm1(np.asarray(ell, dtype=float))
        return np.minimum(log_a, 2 * log_a)

    return log_g


@dataclass(frozen=True)
class HellingerEstimate:
    n: float
    beta: float
    h2: float
    n_times_h2: float
    method: str                  # "quadrature" or "monte_carlo" ("exact" for atoms)
    error_bound: float
    lower_envelope: float
    upper_envelope: float

    def to_json(self) -> dict[str, Any]:
        return {k: (json_number(v) if isinstance(v, float) else v)
                for k, v in self.__dict__.items()}


def hellinger_tolerance(h2: float) -> float:
    return max(HELLINGER_ABS_TOL, HELLINGER_REL_TOL * h2)


def hellinger_from_law(law, n: float, beta: float) -> HellingerEstimate:
    """Quadrature (or exact sum) of ``E_P[(sqrt(1 + eps (L - 1)) - 1)^2]`` over a null law."""
    eps = float(n) ** -beta
    main: Expectation = law.expect(hellinger_log_integrand(eps))
    env: Expectation = law.expect(envelope_log_integrand(eps))
    h2 = max(0.0, main.value)
    if main.error > hellinger_tolerance(h2):
        raise ComputationError(f"hellinger: quadrature error {main.error:.3g} above tolerance")
    return HellingerEstimate(float(n), float(beta), h2, float(n) * h2, main.method, main.error,
                             LOWER_ENVELOPE * env.value, env.value)


def hellinger_sq(spec: ModelSpec, beta: float, n: float, method: str = "quadrature",
                 draws: int = HELLINGER_DRAWS, seed: int = 0) -> HellingerEstimate:
    """``H^2(P_n, (1 - n^-beta) P_n + n^-beta Q_n)``.

    ``method="monte_carlo"`` averages the integrand over ``draws`` null samples.
    """
    if not 0 < beta < 1:
        raise ParameterError(f"beta: must lie in (0, 1) (got {beta})")
    if method == "quadrature":
        return hellinger_from_law(null_law(spec, float(n)), n, beta)
    if method != "monte_carlo":
        raise ParameterError(f"method: expected 'quadrature' or 'monte_carlo' (got {method!r})")
    eps = float(n) ** -beta
    ell = null_log_lr_draws(spec, n, draws, seed)
    terms = np.exp(hellinger_log_integrand(eps)(ell))
    env = np.exp(envelope_log_integrand(eps)(ell))
    h2 = float(terms.mean())
    err = Z95 * float(terms.std()) / math.sqrt(draws)
    return HellingerEstimate(float(n), float(beta), h2, float(n) * h2, "monte_carlo", err,
                             LOWER_ENVELOPE * float(env.mean()), float(env.mean()))


@dataclass(frozen=True)
class HellingerTrend:
    beta: float
    estimates: tuple[HellingerEstimate, ...]
    slope: float
    verdict: str     # "supercritical", "subcritical", "inconclusive" or "degenerate-zero"

    def to_json(self) -> dict[str, Any]:
        return {"beta": self.beta, "slope": json_number(self.slope), "verdict": self.verdict,
                "estimates": [e.to_json() for e in self.estimates]}


def _check_geometric(n_list: Sequence[float]) -> list[float]:
    ns = [float(v) for v in n_list]
    if len(ns) < 4:
        raise ParameterError("n_list: need at least 4 points")
    if any(v <= 1 for v in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ParameterError("n_list: must be increasing and > 1")
    ratios = np.diff(np.log(ns))
    if np.ptp(ratios) > 1e-6 * float(np.mean(ratios)):
        raise ParameterError("n_list: must be a geometric sequence")
    return ns


def trend_verdict(log_n: np.ndarray, n_h2: np.ndarray, tol: float = TREND_TOL) -> tuple[float, str]:
    """Least-squares slope of ``log(n h2)`` against ``log n`` and its reading."""
    if np.all(n_h2 == 0):
        return math.nan, "degenerate-zero"
    if np.any(n_h2 <= 0):
        return math.nan, "inconclusive"
    slope = float(np.polyfit(log_n, np.log(n_h2), 1)[0])
    if slope > tol:
        return slope, "supercritical"
    if slope < -tol:
        return slope, "subcritical"
    return slope, "inconclusive"


def hellinger_trend(spec: ModelSpec, beta: float, n_list: Sequence[float],
                    method: str = "quadrature") -> HellingerTrend:
    """Direction of ``n H_n^2(beta)`` along a geometric ``n`` sequence.

    A growing product means ``beta`` sits below the boundary, a shrinking one
    means above.
    """
    ns = _check_geometric(n_list)
    estimates = tuple(hellinger_sq(spec, beta, n, method) for n in ns)
    slope, verdict = trend_verdict(np.log(ns), np.array([e.n_times_h2 for e in estimates]))
    return HellingerTrend(float(beta), estimates, slope, verdict)


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    n: int
    beta: float
    test: str
    seed: int
    beta_star: float
    estimate: RiskEstimate | None
    status: str = "ok"

    def cells(self) -> list[str]:
        def num(x: float) -> str:
            return format(float(x), ".17g")
        e = self.estimate
        values = ([num(e.type_i_rate), num(e.type_ii_rate), num(e.risk), num(e.half_width_95)]
                  if e is not None else ["nan"] * 4)
        return [str(self.n), num(self.beta), self.test, *values, str(self.seed),
                num(self.beta_star), self.status]


@dataclass(frozen=True)
class SweepResult:
    config: ExperimentConfig
    rows: tuple[SweepRow, ...]
    csv_text: str
    summary: dict[str, Any] = field(default_factory=dict)

    @property
    def failures(self) -> int:
        return sum(row.status != "ok" for row in self.rows)


def _sweep_beta_star(spec: ModelSpec) -> float:
    try:
        value = solve_beta_star(analytic_rate(spec)).beta_star
    except SparsemixError:
        return math.nan
    return math.nan if value is None else float(value)


def _blocks(reps: int, workers: int) -> list[range]:
    size = max(1, math.ceil(reps / workers))
    return [range(lo, min(reps, lo + size)) for lo in range(0, reps, size)]


def _run_block(task: tuple[ExperimentConfig, int, float, range]) -> tuple[int, int] | str:
    config, n, beta, reps = task
    try:
        return _count_block(config, n, beta, reps)
    except SparsemixError as exc:
        return f"error: {type(exc).__name__}: {exc}"


def render_csv(rows: Sequence[SweepRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.cells())
    return buffer.getvalue()


def content_hashes(text: str) -> dict[str, str]:
    data = text.encode()
    blob = hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()
    return {"sha256": hashlib.sha256(data).hexdigest(), "git_blob_sha1": blob}


def summary_path(output_path: str | Path) -> Path:
    path = Path(output_path)
    return path.with_name(path.stem + ".summary.json")


def phase_sweep(config: ExperimentConfig, workers: int | None = None,
                write: bool = True) -> SweepResult:
    """Risk over every ``(n, beta)`` cell, with the model's boundary beside it.

    Replications are split into blocks that may run in separate processes;
    counts are merged in grid order, so the table is the same for any
    ``workers``. A cell whose evaluation fails is recorded with its error and
    ``nan`` values, and the sweep moves on.
    """
    workers = config.workers if workers is None else int(workers)
    if workers < 1:
        raise ConfigError("workers: must be an integer >= 1")
    beta_star = _sweep_beta_star(config.spec)
    cells = [(int(n), float(b)) for n in config.n_values for b in config.beta_grid]
    tasks, owners = [], []
    for index, (n, b) in enumerate(cells):
        for block in _blocks(config.replications, workers):
            tasks.append((config, n, b, block))
            owners.append(index)
    if workers == 1:
        outcomes = [_run_block(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_block, tasks))

    tallies: list[list[int] | str] = [[0, 0] for _ in cells]
    for index, outcome in zip(owners, outcomes):
        if isinstance(tallies[index], str):
            continue
        if isinstance(outcome, str):
            tallies[index] = outcome
        else:
            tallies[index][0] += outcome[0]
            tallies[index][1] += outcome[1]

    rows = []
    for (n, b), tally in zip(cells, tallies):
        seed = cell_seed(config.master_seed, n, b)
        if isinstance(tally, str):
            rows.append(SweepRow(n, b, config.test_kind, seed, beta_star, None,
                                 tally.replace("\n", " ")))
        else:
            est = RiskEstimate.from_counts(tally[0], tally[1], config.replications)
            rows.append(SweepRow(n, b, config.test_kind, seed, beta_star, est))
    text = render_csv(rows)
    summary = {"config": config.to_dict(), "columns": list(CSV_COLUMNS), "rows": len(rows),
               "failures": sum(r.status != "ok" for r in rows),
               "beta_star": json_number(beta_star), "content_hash": content_hashes(text)}
    if write and config.output_path:
        Path(config.output_path).write_text(text)
        summary_path(config.output_path).write_text(json.dumps(summary, indent=2) + "\n")
    return SweepResult(config, tuple(rows), text, summary)

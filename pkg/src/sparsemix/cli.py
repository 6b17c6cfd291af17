"""``sparsemix`` command line.

Each subcommand reads one JSON config. Model parameters live in the config,
and flags only override the seed, the output path and how chatty we are.

Exit status: 0 success, 1 bad input (config, file, parameter), 2 a numeric
routine could not produce an answer.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import boundary, experiments, hc, models
from .errors import ConfigError, SparsemixError
from .extended import json_number
from .rate import analytic_rate
from .specs import parse_spec

SUBCOMMANDS = ("rate", "boundary", "hc", "simulate", "hellinger", "sweep", "tailcheck")


class Output:
    """Collects stdout lines; warnings go to stderr unless ``quiet``."""

    def __init__(self, quiet: bool, timestamp: bool, out_path: str | None):
        self.quiet = quiet
        self.timestamp = timestamp
        self.out_path = out_path

    def header(self, command: str) -> None:
        if self.timestamp and not self.quiet:
            now = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
            print(f"# sparsemix {command} {now}")

    def warn(self, message: str) -> None:
        if not self.quiet:
            print(f"warning: {message}", file=sys.stderr)

    def emit(self, text: str) -> None:
        if self.out_path:
            Path(self.out_path).write_text(text if text.endswith("\n") else text + "\n")
            if not self.quiet:
                print(f"wrote {self.out_path}")
        else:
            print(text.rstrip("\n"))

    def emit_json(self, doc: dict[str, Any]) -> None:
        self.emit(json.dumps(doc, indent=2, sort_keys=False))


# --------------------------------------------------------------------------
# config helpers
# --------------------------------------------------------------------------

def load_config(path: str) -> dict[str, Any]:
    file = Path(path)
    if not file.is_file():
        raise ConfigError(f"config_path: no such file {path!r}")
    try:
        doc = json.loads(file.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config_path: malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config_path: top level must be a JSON object")
    return doc


def model_of(doc: dict[str, Any]):
    """The config is either a bare model mapping or carries one under ``model``."""
    if "model" in doc:
        return parse_spec(doc["model"])
    if "family" in doc:
        return parse_spec(doc)
    raise ConfigError("model: missing")


def _number(doc: dict, key: str, default=None, kind: Callable = float):
    if key not in doc:
        if default is None:
            raise ConfigError(f"{key}: missing")
        return default
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: must be a number")
    if kind is int and int(value) != value:
        raise ConfigError(f"{key}: must be an integer")
    return kind(value)


def _numbers(doc: dict, key: str, default=None) -> list[float]:
    if key not in doc:
        if default is None:
            raise ConfigError(f"{key}: missing")
        return list(default)
    value = doc[key]
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{key}: must be a nonempty list")
    if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
        raise ConfigError(f"{key}: entries must be numbers")
    return [float(v) for v in value]


def _with_model(doc: dict[str, Any], spec) -> dict[str, Any]:
    """Config echo with the model in its canonical form."""
    echo = dict(doc) if "model" in doc else {}
    echo["model"] = spec.to_dict()
    return echo


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_rate(doc, args, out: Output) -> int:
    spec = model_of(doc)
    rate = analytic_rate(spec)
    if "grid" in doc:
        grid = doc["grid"]
        if not isinstance(grid, dict):
            raise ConfigError("grid: must be an object with lo, hi, points")
        lo, hi = _number(grid, "lo"), _number(grid, "hi")
        points = _number(grid, "points", 401, int)
        if not hi > lo or points < 2:
            raise ConfigError("grid: need hi > lo and points >= 2")
        t = np.linspace(lo, hi, points)
    else:
        t = rate.grid(_number(doc, "points", 401, int))
    values = np.atleast_1d(rate(t))
    lines = ["t,rate"] + [f"{format(float(a), '.17g')},{format(float(b), '.17g')}"
                          for a, b in zip(t, values)]
    out.emit("\n".join(lines))
    return 0


def cmd_boundary(doc, args, out: Output) -> int:
    spec = model_of(doc)
    report = boundary.boundary_report(analytic_rate(spec), spec)
    for w in report.warnings:
        out.warn(w)
    out.emit_json({"config": _with_model(doc, spec), "report": report.to_json()})
    return 0


def _observations_path(doc: dict, config_path: str) -> Path:
    raw = doc.get("observations")
    if not isinstance(raw, str):
        raise ConfigError("observations: missing path to an observation CSV")
    path = Path(raw)
    if not path.is_absolute():
        path = Path(config_path).parent / path
    if not path.is_file():
        raise ConfigError(f"observations: no such file {raw!r}")
    return path


def cmd_hc(doc, args, out: Output) -> int:
    spec = model_of(doc)
    obs = models.read_observations(spec, _observations_path(doc, args.config))
    n = obs.shape[0]
    if n < 3:
        raise ConfigError("observations: need at least 3 rows")
    delta = _number(doc, "delta", 0.1)
    which = doc.get("statistic", "both")
    if which not in ("hc_star", "hc_classical", "both"):
        raise ConfigError("statistic: expected hc_star, hc_classical or both")
    result: dict[str, Any] = {"config": _with_model(doc, spec), "n": n}
    if which in ("hc_star", "both"):
        method = doc.get("tail_method", "auto")
        tail = models.null_log_lr_tail(spec, n, method, seed=args.seed or 0)
        result["hc_star"] = hc.hc_star(models.log_lr(spec, obs, n), tail, n, delta,
                                       scale="log").to_json()
    if which in ("hc_classical", "both"):
        try:
            p = models.classical_p_values(spec, obs, n)
        except SparsemixError as exc:
            if which == "hc_classical":
                raise
            out.warn(f"hc_classical skipped: {exc}")
        else:
            result["hc_classical"] = hc.hc_classical(p, delta).to_json()
    if n < hc.MIN_HC_N:
        out.warn(f"n={n} < {hc.MIN_HC_N}: no cutoff, statistic only")
    out.emit_json(result)
    return 0


def cmd_simulate(doc, args, out: Output) -> int:
    spec = model_of(doc)
    n = _number(doc, "n", kind=int)
    seed = args.seed if args.seed is not None else _number(doc, "seed", 0, int)
    hypothesis = doc.get("hypothesis", "null")
    if hypothesis == "null":
        batch = models.sample_null(spec, n, seed)
    elif hypothesis == "alternative":
        batch = models.sample_alternative(spec, n, _number(doc, "beta"), seed)
    else:
        raise ConfigError("hypothesis: expected 'null' or 'alternative'")
    if out.out_path is None and isinstance(doc.get("output_path"), str):
        out.out_path = doc["output_path"]
    out.emit(batch.to_csv())
    return 0


def cmd_hellinger(doc, args, out: Output) -> int:
    spec = model_of(doc)
    beta = _number(doc, "beta")
    ns = _numbers(doc, "n_values", [1e3, 1e4, 1e5, 1e6])
    method = doc.get("method", "quadrature")
    trend = experiments.hellinger_trend(spec, beta, ns, method)
    out.emit_json({"config": _with_model(doc, spec), "trend": trend.to_json()})
    return 0


def cmd_sweep(doc, args, out: Output) -> int:
    doc = dict(doc)
    if args.seed is not None:
        doc["master_seed"] = args.seed
    if args.out is not None:
        doc["output_path"] = args.out
    config = experiments.ExperimentConfig.from_dict(doc)
    result = experiments.phase_sweep(config)
    for row in result.rows:
        if row.status != "ok":
            out.warn(f"cell n={row.n} beta={row.beta:g}: {row.status}")
    if config.output_path:
        if not out.quiet:
            print(f"wrote {config.output_path}")
            print(f"wrote {experiments.summary_path(config.output_path)}")
        print(json.dumps(result.summary["content_hash"]))
    else:
        print(result.csv_text.rstrip("\n"))
    return 0


def cmd_tailcheck(doc, args, out: Output) -> int:
    spec = model_of(doc)
    gamma = _number(doc, "gamma")
    ns = _numbers(doc, "n_values", [1e2, 1e3, 1e4, 1e5, 1e6])
    draws = _number(doc, "draws", models.MONTE_CARLO_DRAWS, int)
    seed = args.seed if args.seed is not None else _number(doc, "seed", 0, int)
    report = models.tail_condition_estimate(spec, gamma, ns, draws=draws, seed=seed)
    if report.verdict == "diverging":
        out.warn(f"tail condition fails at gamma={gamma:g}: "
                 f"(1/log n) log E[L^gamma] grows with n (slope {json_number(report.slope)})")
    out.emit_json({"config": _with_model(doc, spec), "report": report.to_json()})
    return 0


COMMANDS: dict[str, Callable] = {
    "rate": cmd_rate, "boundary": cmd_boundary, "hc": cmd_hc, "simulate": cmd_simulate,
    "hellinger": cmd_hellinger, "sweep": cmd_sweep, "tailcheck": cmd_tailcheck,
}

HELP = {
    "rate": "print I(t) over a grid",
    "boundary": "boundary report with closed form and condition checks",
    "hc": "HC* and classical HC on an observation CSV",
    "simulate": "write a sample batch as CSV",
    "hellinger": "trend of n H_n^2 along a geometric n sequence",
    "sweep": "risk over an (n, beta) grid",
    "tailcheck": "growth of (1/log n) log E[L^gamma]",
}


class _Parser(argparse.ArgumentParser):
    # usage mistakes are input errors, so they share exit status 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparsemix", description="Sparse-mixture detection boundaries.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("config", help="path to a JSON config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="write the result here instead of stdout")
        p.add_argument("--quiet", action="store_true", help="results only, no warnings")
        p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp line")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = Output(args.quiet, not args.no_timestamp, args.out)
    try:
        doc = load_config(args.config)
        out.header(args.command)
        return COMMANDS[args.command](doc, args, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SparsemixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head); not our failure
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Every subcommand reads one JSON config document with a strict schema::

    {
      "drift": {"breakpoints": [0.0], "pieces": [[0.0], [1.0]]},
      "seed": 7,
      "x0": 0.0,
      "scheme": "milstein",
      "ladder": [16, 32, 64, 128, 256, 512],
      "reps": 2000,
      "refine_factor": 64,
      "p": 1.0,
      "workers": 1,
      "output": "errors.csv",
      "slope_band": [0.6, 0.9]
    }

Optional sections: ``"sigma"`` (a positive diffusion coefficient, same
format as ``"drift"``; experiments then run on the Lamperti-reduced
equation started at ``phi(x0)``), ``"n"`` and ``"reps"`` for ``simulate``,
and ``"table": {"lo": -2, "hi": 2, "points": 401}`` for ``transform-table``.

Exit codes: 0 success, 1 check failed (slope band violated, rate fit refused,
drift without a genuine jump), 2 invalid config or arguments.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .drift import DriftSpec, DriftSpecError, validate
from .experiments import (
    DEFAULT_LADDER,
    ExperimentError,
    coupling_ladder,
    fit_rate,
    strong_errors,
)
from .lamperti import EllipticityError, LampertiSpec, reduced_drift
from .paths import TimeGrid, brownian_batch
from .rng import stream
from .solvers import SCHEMES, run_scheme
from .transform import TransformError, build_transform

WORKERS_ENV = "DISCDRIFT_WORKERS"
EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    drift: DriftSpec
    seed: Optional[int] = None
    x0: float = 0.0
    scheme: str = "milstein"
    ladder: tuple = DEFAULT_LADDER
    reps: int = 2000
    refine_factor: int = 64
    p: float = 1.0
    workers: Optional[int] = None
    output: Optional[str] = None
    slope_band: Optional[tuple] = None
    sigma: Optional[DriftSpec] = None
    n: int = 64
    table: dict = field(default_factory=lambda: {"lo": -2.0, "hi": 2.0, "points": 401})


# parsing ---------------------------------------------------------------------

def _int(name, v, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(name, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(name, f"must be >= {lo}, got {v}")
    return v


def _num(name, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        raise ConfigError(name, f"expected a finite number, got {v!r}")
    return float(v)


def _pow2(name, v):
    v = _int(name, v, 1)
    if v & (v - 1):
        raise ConfigError(name, f"must be a power of 2, got {v}")
    return v


def _drift(name, v):
    try:
        return DriftSpec.from_dict(v)
    except DriftSpecError as e:
        raise ConfigError(f"{name}.{e.field}", str(e).split(": ", 1)[1]) from None


def _ladder(name, v):
    if not isinstance(v, list) or not v:
        raise ConfigError(name, "expected a non-empty list of powers of 2")
    out = tuple(_pow2(f"{name}[{i}]", n) for i, n in enumerate(v))
    if len(set(out)) != len(out):
        raise ConfigError(name, "duplicate entries")
    return out


def _band(name, v):
    if not (isinstance(v, list) and len(v) == 2):
        raise ConfigError(name, "expected [low, high]")
    lo, hi = _num(f"{name}[0]", v[0]), _num(f"{name}[1]", v[1])
    if not lo <= hi:
        raise ConfigError(name, f"low {lo!r} exceeds high {hi!r}")
    return (lo, hi)


def _scheme(name, v):
    if v not in SCHEMES:
        raise ConfigError(name, f"expected one of {list(SCHEMES)}, got {v!r}")
    return v


def _p(name, v):
    v = _num(name, v)
    if v < 1.0:
        raise ConfigError(name, f"must be >= 1, got {v!r}")
    return v


def _output(name, v):
    if not isinstance(v, str) or not v:
        raise ConfigError(name, "expected a non-empty path string")
    return v


def _table(name, v):
    if not isinstance(v, dict):
        raise ConfigError(name, "expected an object with lo, hi, points")
    extra = set(v) - {"lo", "hi", "points"}
    if extra:
        raise ConfigError(f"{name}.{sorted(extra)[0]}", "unknown field")
    lo = _num(f"{name}.lo", v.get("lo", -2.0))
    hi = _num(f"{name}.hi", v.get("hi", 2.0))
    pts = _int(f"{name}.points", v.get("points", 401), 2)
    if not lo < hi:
        raise ConfigError(name, "lo must be below hi")
    return {"lo": lo, "hi": hi, "points": pts}


_FIELDS = {
    "drift": _drift,
    "seed": lambda n, v: _int(n, v, 0),
    "x0": _num,
    "scheme": _scheme,
    "ladder": _ladder,
    "reps": lambda n, v: _int(n, v, 2),
    "refine_factor": lambda n, v: _int(n, v, 1),
    "p": _p,
    "workers": lambda n, v: _int(n, v, 1),
    "output": _output,
    "slope_band": _band,
    "sigma": _drift,
    "n": _pow2,
    "table": _table,
}


def parse_config(doc) -> ExperimentConfig:
    """Validate a decoded config document; unknown keys are errors."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a JSON object")
    unknown = sorted(set(doc) - set(_FIELDS))
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    if "drift" not in doc:
        raise ConfigError("drift", "missing required field")
    return ExperimentConfig(**{k: _FIELDS[k](k, v) for k, v in doc.items()})


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError("--config", f"cannot read {path!r}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ConfigError("--config", f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    return parse_config(doc)


def resolve_workers(cli_value, cfg_value) -> int:
    if cli_value is not None:
        return cli_value
    if cfg_value is not None:
        return cfg_value
    env = os.environ.get(WORKERS_ENV)
    if env is None:
        return 1
    try:
        w = int(env)
    except ValueError:
        raise ConfigError(WORKERS_ENV, f"expected an integer, got {env!r}") from None
    if w < 1:
        raise ConfigError(WORKERS_ENV, f"must be >= 1, got {w}")
    return w


# CSV -------------------------------------------------------------------------

def _cell(v) -> str:
    # repr gives the shortest string that parses back to the same float
    return str(v) if isinstance(v, (int, np.integer)) else repr(float(v))


def format_csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(_cell(v) for v in r) + "\n")
    return buf.getvalue()


def ladder_csv(points) -> str:
    """CSV with columns n, error, stderr for ``(n, ErrorEstimate)`` pairs."""
    return format_csv(("n", "error", "stderr"), [(int(n), e.mean, e.stderr) for n, e in points])


# subcommands -----------------------------------------------------------------

def _problem(cfg: ExperimentConfig):
    """Drift and start value of the unit-diffusion equation actually simulated."""
    if cfg.sigma is None:
        return cfg.drift, cfg.x0
    lam = LampertiSpec(cfg.sigma)
    return reduced_drift(lam, cfg.drift), float(lam.phi(cfg.x0))


def _emit(text: str, out: Optional[str]):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _say(msg: str, out: Optional[str]):
    # keep stdout clean for the CSV when no output path is given
    print(msg, file=sys.stdout if out is not None else sys.stderr)


def cmd_validate_drift(cfg, args) -> int:
    report = validate(cfg.drift)
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_CHECK


def cmd_transform_table(cfg, args) -> int:
    t = build_transform(cfg.drift)
    tb = cfg.table
    x = np.linspace(tb["lo"], tb["hi"], tb["points"])
    g = np.asarray(t.g(x))
    gp, gpp = t.derivatives(x)
    back = np.asarray(t.g_inverse(g))
    rows = zip(x, g, gp, gpp, back)
    _emit(format_csv(("x", "G", "G_prime", "G_second", "G_inverse_of_G"), rows), args.out)
    _say(f"half_width={t.half_width!r} derivative_floor={t.derivative_floor!r}", args.out)
    return EXIT_OK


def cmd_simulate(cfg, args) -> int:
    drift, x0 = _problem(cfg)
    t = build_transform(drift)
    grid = TimeGrid.uniform(cfg.n)
    W = brownian_batch(grid.times, [stream(cfg.seed, r, "simulate") for r in range(cfg.reps)])
    xN = run_scheme(cfg.scheme, t, x0, grid.times, W)
    _emit(format_csv(("rep", "terminal"), zip(range(cfg.reps), xN)), args.out)
    return EXIT_OK


def _report_rate(points, cfg, args) -> int:
    _emit(ladder_csv(points), args.out)
    try:
        fit = fit_rate(points)
    except ExperimentError as e:
        print(f"rate fit refused: {e}", file=sys.stderr)
        return EXIT_CHECK
    lo, hi = fit.ci
    _say(f"slope={fit.slope!r} ci=[{lo!r}, {hi!r}]", args.out)
    if cfg.slope_band is not None:
        blo, bhi = cfg.slope_band
        if not blo <= fit.slope <= bhi:
            print(f"slope {fit.slope!r} outside band [{blo!r}, {bhi!r}]", file=sys.stderr)
            return EXIT_CHECK
    return EXIT_OK


def cmd_rate(cfg, args) -> int:
    drift, x0 = _problem(cfg)
    t = build_transform(drift)
    points = [
        (n, strong_errors([cfg.scheme], t, x0, n, cfg.refine_factor, cfg.p, cfg.reps,
                          cfg.seed, args.workers)[cfg.scheme])
        for n in cfg.ladder
    ]
    return _report_rate(points, cfg, args)


def cmd_couple(cfg, args) -> int:
    drift, x0 = _problem(cfg)
    points = coupling_ladder(
        build_transform(drift), x0, cfg.ladder, refine_factor=cfg.refine_factor, p=cfg.p,
        reps=cfg.reps, seed=cfg.seed, workers=args.workers,
    )
    return _report_rate(points, cfg, args)


COMMANDS = {
    "validate-drift": (cmd_validate_drift, "report the piecewise smoothness conditions of the drift"),
    "transform-table": (cmd_transform_table, "tabulate G, G', G'' and the round trip G^-1(G(x))"),
    "simulate": (cmd_simulate, "terminal values of one scheme on n steps, one row per replication"),
    "rate": (cmd_rate, "strong error ladder against the fine reference and its fitted rate"),
    "couple": (cmd_couple, "coupling distance ladder and its fitted rate"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="JSON experiment config")
    common.add_argument("--seed", type=int, metavar="U64", help="master seed (overrides the config)")
    common.add_argument("--workers", type=int, metavar="N",
                        help=f"worker processes (default: config, then ${WORKERS_ENV}, then 1)")
    common.add_argument("--out", metavar="PATH", help="CSV output path (overrides the config)")
    parser = argparse.ArgumentParser(prog="discdrift", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, helptext) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=helptext, description=helptext)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed", f"must be in [0, 2^64), got {args.seed}")
            cfg = replace(cfg, seed=args.seed)
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers", f"must be >= 1, got {args.workers}")
        args.workers = resolve_workers(args.workers, cfg.workers)
        args.out = args.out if args.out is not None else cfg.output
        needs_seed = args.command in ("simulate", "rate", "couple")
        if needs_seed and cfg.seed is None:
            raise ConfigError("seed", "missing required field (or pass --seed)")
        fn = COMMANDS[args.command][0]
        return fn(cfg, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ExperimentError, EllipticityError, TransformError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Monte Carlo error estimates for schemes and couplings, with rate regression.

Replications are split into fixed-size chunks, each replication drawing from
its own counter-based stream, and aggregated with exactly rounded sums.  The
estimates are therefore bit-identical for any number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .paths import TimeGrid, brownian_batch, bridge_fill
from .rng import stream
from .solvers import MIN_REFINE_FACTOR, SCHEMES, SolverError, run_scheme
from .transform import TransformSpec, build_transform

CHUNK = 250
DEFAULT_LADDER = tuple(2**j for j in range(4, 10))


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class ErrorEstimate:
    """L^p error ``(mean |e|^p)^(1/p)`` with its delta-method standard error."""

    p: float
    mean: float
    stderr: float
    reps: int
    n: int

    @classmethod
    def from_samples(cls, values, p: float, n: int) -> "ErrorEstimate":
        v = np.abs(np.asarray(values, dtype=float)) ** p
        M = v.size
        if M < 2:
            raise ExperimentError("need at least 2 replications")
        s = math.fsum(v) / M
        var = math.fsum((v - s) ** 2) / (M - 1)
        se_s = math.sqrt(var / M)
        if s > 0:
            mean = s ** (1.0 / p)
            stderr = se_s * s ** (1.0 / p - 1.0) / p
        else:
            mean, stderr = 0.0, 0.0
        return cls(float(p), mean, stderr, M, int(n))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    ci_half_width: float
    points: tuple

    @property
    def ci(self):
        return self.slope - self.ci_half_width, self.slope + self.ci_half_width


def _check_common(n, refine_factor, reps, check_refinement=True):
    if n < 1 or n & (n - 1):
        raise ExperimentError(f"n must be a power of 2, got {n}")
    if check_refinement and refine_factor < MIN_REFINE_FACTOR:
        raise ExperimentError(f"refine_factor must be >= {MIN_REFINE_FACTOR}, got {refine_factor}")
    if reps < 2:
        raise ExperimentError("reps must be >= 2")


def _transform(drift) -> TransformSpec:
    return drift if isinstance(drift, TransformSpec) else build_transform(drift)


def _chunks(reps):
    return [range(a, min(a + CHUNK, reps)) for a in range(0, reps, CHUNK)]


def _run(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


# per-chunk work ------------------------------------------------------------

def _strong_chunk(task):
    schemes, t, x0, n, R, seed, reps = task
    coarse = TimeGrid.uniform(n)
    fine = coarse.refined(R)
    W = brownian_batch(fine.times, [stream(seed, r, "path") for r in reps])
    ref = run_scheme("milstein", t, x0, fine.times, W)
    Wc = W[fine.positions_of(coarse)]
    return {s: np.abs(run_scheme(s, t, x0, coarse.times, Wc) - ref) for s in schemes}


def _coupling_chunk(task):
    t, x0, coarse_times, R, seed, reps = task
    coarse = TimeGrid(coarse_times)
    fine = coarse.refined(R)
    idx = fine.positions_of(coarse)
    W = brownian_batch(fine.times, [stream(seed, r, "path") for r in reps])
    Wt = bridge_fill(fine.times, idx, W[idx], [stream(seed, r, "fresh_bridge") for r in reps])
    x = run_scheme("milstein", t, x0, fine.times, W)
    xt = run_scheme("milstein", t, x0, fine.times, Wt)
    return np.abs(x - xt)


# public operations ----------------------------------------------------------

def strong_errors(schemes: Sequence[str], drift, x0: float, n: int, refine_factor: int = 64,
                  p: float = 1.0, reps: int = 2000, seed: int = 0, workers: int = 1) -> dict:
    """Strong L^p errors of several schemes against one shared fine reference.

    Per replication a Brownian path with ``n * refine_factor`` steps is
    sampled; the schemes see its restriction to the ``n``-point grid.
    """
    for s in schemes:
        if s not in SCHEMES:
            raise ExperimentError(f"unknown scheme {s!r}; expected one of {SCHEMES}")
    _check_common(n, refine_factor, reps)
    t = _transform(drift)
    tasks = [(tuple(schemes), t, float(x0), n, refine_factor, seed, ch) for ch in _chunks(reps)]
    parts = _run(_strong_chunk, tasks, workers)
    return {
        s: ErrorEstimate.from_samples(np.concatenate([d[s] for d in parts]), p, n) for s in schemes
    }


def strong_error(scheme: str, drift, x0: float, n: int, refine_factor: int = 64, p: float = 1.0,
                 reps: int = 2000, seed: int = 0, workers: int = 1) -> ErrorEstimate:
    return strong_errors([scheme], drift, x0, n, refine_factor, p, reps, seed, workers)[scheme]


def coupling_distance(drift, x0: float, coarse, refine_factor: int = 64, p: float = 1.0,
                      reps: int = 2000, seed: int = 0, workers: int = 1,
                      check_refinement: bool = True) -> ErrorEstimate:
    """Estimate ``(E |X_1 - X~_1|^p)^(1/p)``.

    ``X~`` is driven by the path whose bridges between the ``coarse`` times
    are resampled independently; both solutions come from the fine reference.
    ``coarse`` is a TimeGrid or an integer for the equidistant grid.
    """
    if not isinstance(coarse, TimeGrid):
        coarse = TimeGrid.uniform(int(coarse))
        _check_common(coarse.n, refine_factor, reps, check_refinement)
    else:
        if reps < 2:
            raise ExperimentError("reps must be >= 2")
        if check_refinement and refine_factor < MIN_REFINE_FACTOR:
            raise ExperimentError(f"refine_factor must be >= {MIN_REFINE_FACTOR}, got {refine_factor}")
    t = _transform(drift)
    tasks = [(t, float(x0), coarse.times, refine_factor, seed, ch) for ch in _chunks(reps)]
    vals = np.concatenate(_run(_coupling_chunk, tasks, workers))
    return ErrorEstimate.from_samples(vals, p, coarse.n)


def lower_bound_certificate(est: ErrorEstimate) -> float:
    """Half the coupling distance: bounds the error of any method using those times."""
    return est.mean / 2.0


def fit_rate(points: Iterable) -> RateFit:
    """Least squares fit of ``log2(error)`` against ``log2(n)``.

    ``points`` holds ``(n, ErrorEstimate)`` or ``(n, float)`` pairs.  The
    slope is reported as a positive decay exponent with a 95% interval.
    """
    pts = [(int(n), e.mean if isinstance(e, ErrorEstimate) else float(e)) for n, e in points]
    if len({n for n, _ in pts}) < 4:
        raise ExperimentError("need at least 4 distinct n values")
    bad = [n for n, e in pts if not e > 0]
    if bad:
        raise ExperimentError(f"nonpositive error values at n = {bad}; cannot fit a rate")
    x = np.log2([n for n, _ in pts])
    y = np.log2([e for _, e in pts])
    res = stats.linregress(x, y)
    half = float(stats.t.ppf(0.975, len(pts) - 2) * res.stderr)
    return RateFit(-float(res.slope), float(res.intercept), half, tuple(pts))


def rate_ladder(scheme, drift, x0, ns=DEFAULT_LADDER, **kw):
    return [(n, strong_error(scheme, drift, x0, n, **kw)) for n in ns]


def coupling_ladder(drift, x0, ns=DEFAULT_LADDER, **kw):
    return [(n, coupling_distance(drift, x0, n, **kw)) for n in ns]


__all__ = [
    "ErrorEstimate", "RateFit", "strong_error", "strong_errors", "coupling_distance",
    "lower_bound_certificate", "fit_rate", "rate_ladder", "coupling_ladder", "SolverError",
]

"""Pathwise schemes for ``dX = mu(X) dt + dW`` on ``[0, 1]``.

Both schemes are written in offset form: they carry ``V = Y - W`` instead of
``Y`` so that the noise enters through ``W_{t_i}`` directly.  This is the
same recursion, but with zero drift it reproduces ``x0 + W_1`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .drift import DriftSpec
from .paths import BrownianPath, TimeGrid
from .transform import TransformSpec, build_transform

MIN_REFINE_FACTOR = 64
SCHEMES = ("euler", "milstein")


class SolverError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SolveResult:
    terminal: float
    trajectory: Optional[np.ndarray]
    scheme_id: str
    grid: TimeGrid


def euler_batch(drift, x0, times, W, keep_path=False):
    """Euler-Maruyama on a time-major batch ``W`` of shape ``(len(times), m)``."""
    dt = np.diff(times)
    v = np.full(W.shape[1], float(x0)) - W[0]
    traj = [v + W[0]] if keep_path else None
    for i in range(dt.size):
        x = v + W[i]
        v = v + np.asarray(drift(x)) * dt[i]
        if keep_path:
            traj.append(v + W[i + 1])
    xN = v + W[-1]
    return xN, (np.array(traj) if keep_path else None)


def milstein_batch(t: TransformSpec, x0, times, W, keep_path=False):
    """Milstein scheme for ``Y = G(X)`` mapped back through ``G^-1``.

    ``y' = y + mu~ dt + sigma~ dW + 1/2 sigma~ sigma~' (dW^2 - dt)`` with
    ``sigma~ sigma~' = G''`` at ``x = G^-1(y)``.
    """
    dt = np.diff(times)
    m = W.shape[1]
    y0 = np.full(m, float(t.g(x0)))
    x = np.full(m, float(x0))
    v = y0 - W[0]
    traj = [x] if keep_path else None
    for i in range(dt.size):
        gp, gpp = t.derivatives(x)
        mu_t = gp * np.asarray(t.source(x)) + 0.5 * gpp
        dw = W[i + 1] - W[i]
        v = v + mu_t * dt[i] + (gp - 1.0) * dw + 0.5 * gpp * (dw * dw - dt[i])
        x = np.asarray(t.g_inverse(v + W[i + 1], guess=x), dtype=float).reshape(m)
        if keep_path:
            traj.append(x)
    return x, (np.array(traj) if keep_path else None)


def _as_transform(obj) -> TransformSpec:
    return obj if isinstance(obj, TransformSpec) else build_transform(obj)


def euler_maruyama(drift, x0: float, path: BrownianPath, keep_path: bool = False) -> SolveResult:
    """``X_{i+1} = X_i + mu(X_i) (t_{i+1} - t_i) + (W_{t_{i+1}} - W_{t_i})``."""
    xN, traj = euler_batch(drift, x0, path.times, path.values[:, None], keep_path)
    return SolveResult(float(xN[0]), None if traj is None else traj[:, 0], "euler", path.grid)


def quasi_milstein_transformed(t, x0: float, path: BrownianPath, keep_path: bool = False) -> SolveResult:
    """Transformed Milstein scheme; ``t`` is a TransformSpec or a drift."""
    xN, traj = milstein_batch(_as_transform(t), x0, path.times, path.values[:, None], keep_path)
    return SolveResult(float(xN[0]), None if traj is None else traj[:, 0], "milstein", path.grid)


def reference_solution(t, x0: float, path: BrownianPath, coarse: Optional[TimeGrid] = None,
                       min_factor: int = MIN_REFINE_FACTOR) -> SolveResult:
    """Transformed Milstein on the fine path, standing in for the exact solution.

    When ``coarse`` is given the fine grid must refine it by at least ``min_factor``.
    """
    if coarse is not None:
        path.grid.positions_of(coarse)
        if path.grid.n < min_factor * coarse.n:
            raise SolverError(
                f"reference grid refines the scheme grid by {path.grid.n / coarse.n:g} < {min_factor}"
            )
    res = quasi_milstein_transformed(t, x0, path)
    return SolveResult(res.terminal, None, "reference", path.grid)


def run_scheme(scheme: str, transform: TransformSpec, x0, times, W) -> np.ndarray:
    """Terminal values of ``scheme`` for every column of ``W``.

    Polynomial drifts go through the compiled kernels; callable drifts use
    the numpy batch loops.
    """
    drift = transform.source
    if scheme not in SCHEMES:
        raise SolverError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    W = np.ascontiguousarray(W)
    if isinstance(drift, DriftSpec):
        enc = _kernels.encode_drift(drift)
        if scheme == "euler":
            return _kernels.euler_terminal(float(x0), times, W, *enc)
        y0 = float(transform.g(x0))
        return _kernels.milstein_terminal(float(x0), y0, times, W, *enc, *_kernels.encode_transform(transform))
    if scheme == "euler":
        return euler_batch(drift, x0, times, W)[0]
    return milstein_batch(transform, x0, times, W)[0]

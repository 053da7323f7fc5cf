"""Vectorized safeguarded Newton iteration for increasing functions."""

from __future__ import annotations

import numpy as np


class RootFindError(RuntimeError):
    pass


def expand_bracket(f, y, x0, step=1.0, grow=2.0, maxiter=200):
    """Widen ``[x0 - s, x0 + s]`` geometrically until it brackets ``f(x) = y``.

    ``f`` must be increasing.  Returns ``(lo, hi)`` arrays.
    """
    y = np.asarray(y, dtype=float)
    lo = np.asarray(x0, dtype=float) - step
    hi = np.asarray(x0, dtype=float) + step
    s = np.full_like(y, float(step))
    for _ in range(maxiter):
        bad_lo = f(lo) > y
        bad_hi = f(hi) < y
        if not (np.any(bad_lo) or np.any(bad_hi)):
            return lo, hi
        s = np.where(bad_lo | bad_hi, s * grow, s)
        lo = np.where(bad_lo, lo - s, lo)
        hi = np.where(bad_hi, hi + s, hi)
    raise RootFindError("could not bracket root")


def safeguarded_newton(f, fprime, y, lo, hi, x0=None, rtol=1e-12, maxiter=200):
    """Solve ``f(x) = y`` elementwise for increasing ``f`` with ``f(lo) <= y <= f(hi)``.

    Newton steps that leave the current bracket are replaced by bisection.
    Each element stops independently once ``|f(x) - y| <= rtol * max(1, |y|)``,
    so the result for one element never depends on the others in the batch.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    lo = np.array(np.broadcast_to(lo, y.shape), dtype=float)
    hi = np.array(np.broadcast_to(hi, y.shape), dtype=float)
    if x0 is None:
        x = 0.5 * (lo + hi)
    else:
        x = np.clip(np.broadcast_to(np.asarray(x0, dtype=float), y.shape), lo, hi)
    tol = rtol * np.maximum(1.0, np.abs(y))
    active = np.arange(y.size)
    for _ in range(maxiter):
        xa = x[active]
        r = f(xa) - y[active]
        done = (np.abs(r) <= tol[active]) | (hi[active] - lo[active] <= 4e-16 * np.maximum(1.0, np.abs(xa)))
        if np.all(done):
            return x
        keep = ~done
        active, xa, r = active[keep], xa[keep], r[keep]
        neg = r < 0
        lo[active] = np.where(neg, xa, lo[active])
        hi[active] = np.where(neg, hi[active], xa)
        xn = xa - r / fprime(xa)
        inside = (xn > lo[active]) & (xn < hi[active])
        x[active] = np.where(inside, xn, 0.5 * (lo[active] + hi[active]))
    raise RootFindError(f"no convergence after {maxiter} iterations")

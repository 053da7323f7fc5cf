"""Compiled batch loops for polynomial drifts.

These mirror ``euler_batch``/``milstein_batch`` and the ``TransformSpec``
evaluators operation by operation, so both routes give identical bits.
"""

import numpy as np
from numba import njit


def encode_drift(spec):
    k = spec.k
    deg = np.array([len(p) - 1 for p in spec.pieces], dtype=np.int64)
    coef = np.zeros((k + 1, int(deg.max()) + 1))
    for j, p in enumerate(spec.pieces):
        coef[j, : len(p)] = p
    has_pv = np.zeros(k, dtype=np.bool_)
    pv = np.zeros(k)
    for i, v in spec.point_values.items():
        has_pv[i] = True
        pv[i] = v
    return np.array(spec.breakpoints, dtype=float), coef, deg, has_pv, pv


def encode_transform(t):
    k = t.source.k
    ext = np.array([t.extended_second(i) for i in range(k)], dtype=float)
    return np.asarray(t.amplitudes, dtype=float), float(t.half_width), ext


@njit(cache=True)
def _piece(xi, x):
    # index of the piece containing x; breakpoints belong to the right piece
    lo, hi = 0, xi.size
    while lo < hi:
        mid = (lo + hi) // 2
        if xi[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True)
def _drift(x, xi, coef, deg, has_pv, pv):
    j = _piece(xi, x)
    if j > 0 and x == xi[j - 1] and has_pv[j - 1]:
        return pv[j - 1]
    d = deg[j]
    out = 0.0 + coef[j, d]
    for q in range(d - 1, -1, -1):
        out = out * x + coef[j, q]
    return out


@njit(cache=True)
def _derivs(x, xi, nu, c, ext):
    gp = 1.0
    gpp = 0.0
    for i in range(xi.size):
        if nu[i] != 0.0:
            u = (x - xi[i]) / c
            au = abs(u)
            if au < 1.0:
                w = 1.0 - u * u
                bump = w * w * w
                dbump = -6.0 * u * w * w
                ddbump = (30.0 * u * u - 6.0) * w
                gp = gp + nu[i] * c * (2.0 * au * bump + u * au * dbump)
                gpp = gpp + nu[i] * (2.0 * np.sign(u) * bump + 4.0 * au * dbump + u * au * ddbump)
        if x == xi[i]:
            gpp = ext[i]
    return gp, gpp


@njit(cache=True)
def _ginv(y, guess, xi, nu, c):
    for i in range(xi.size):
        if nu[i] == 0.0 or not abs(y - xi[i]) < c:
            continue
        n = nu[i]
        lo = xi[i] - c
        hi = xi[i] + c
        x = min(max(guess, lo), hi)
        tol = 1e-12 * max(1.0, abs(y))
        for _ in range(200):
            u = (x - xi[i]) / c
            w = 1.0 - u * u
            r = (x + n * c * c * u * abs(u) * w * w * w) - y
            if abs(r) <= tol or hi - lo <= 4e-16 * max(1.0, abs(x)):
                return x
            if r < 0:
                lo = x
            else:
                hi = x
            au = abs(u)
            xn = x - r / (1.0 + n * c * (2.0 * au * w * w * w - 6.0 * u * au * u * w * w))
            if xn > lo and xn < hi:
                x = xn
            else:
                x = 0.5 * (lo + hi)
        raise RuntimeError("g_inverse did not converge")
    return y


@njit(cache=True)
def euler_terminal(x0, times, W, xi, coef, deg, has_pv, pv):
    N, m = W.shape[0] - 1, W.shape[1]
    v = np.empty(m)
    for j in range(m):
        v[j] = x0 - W[0, j]
    for i in range(N):
        dt = times[i + 1] - times[i]
        for j in range(m):
            x = v[j] + W[i, j]
            v[j] = v[j] + _drift(x, xi, coef, deg, has_pv, pv) * dt
    return v + W[N]


@njit(cache=True)
def milstein_terminal(x0, y0, times, W, xi, coef, deg, has_pv, pv, nu, c, ext):
    N, m = W.shape[0] - 1, W.shape[1]
    x = np.empty(m)
    v = np.empty(m)
    for j in range(m):
        x[j] = x0
        v[j] = y0 - W[0, j]
    for i in range(N):
        dt = times[i + 1] - times[i]
        for j in range(m):
            gp, gpp = _derivs(x[j], xi, nu, c, ext)
            mu_t = gp * _drift(x[j], xi, coef, deg, has_pv, pv) + 0.5 * gpp
            dw = W[i + 1, j] - W[i, j]
            v[j] = v[j] + mu_t * dt + (gp - 1.0) * dw + 0.5 * gpp * (dw * dw - dt)
            x[j] = _ginv(v[j] + W[i + 1, j], x[j], xi, nu, c)
    return x

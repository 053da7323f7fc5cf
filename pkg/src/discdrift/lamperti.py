"""Lamperti reduction of ``dX = mu(X) dt + sigma(X) dW`` to unit diffusion.

With ``phi(x) = int_0^x du / sigma(u)`` the process ``Z = phi(X)`` solves
``dZ = mu_phi(Z) dt + dW`` where ``mu_phi = (mu / sigma - sigma' / 2) o phi^-1``.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate

from .drift import DriftSpec, FunctionDrift
from .rootfind import expand_bracket, safeguarded_newton

TABLE_NODES = 4096
QUAD_EPSABS = 1e-12


class EllipticityError(ValueError):
    pass


def _min_abs_on(coeffs, a, b):
    """Exact ``inf |p|`` over ``[a, b]`` (0 if ``p`` has a root there)."""
    P = np.polynomial.polynomial
    if len(coeffs) > 1:
        for r in P.polyroots(coeffs):
            if abs(r.imag) < 1e-12 and a <= r.real <= b:
                return 0.0
    cands = [a, b]
    if len(coeffs) > 2:
        for r in P.polyroots(P.polyder(coeffs)):
            if abs(r.imag) < 1e-12 and a <= r.real <= b:
                cands.append(r.real)
    return float(np.min(np.abs(P.polyval(np.array(cands), coeffs))))


def _ray_inf(coeffs, x_end, direction):
    """``inf |a + b x|`` over the ray starting at ``x_end`` towards ``direction * inf``."""
    a = coeffs[0]
    b = coeffs[1] if len(coeffs) > 1 else 0.0
    v = a + b * x_end
    if b == 0.0:
        return abs(v)
    # moving along the ray changes v at rate direction * b
    if v == 0.0 or np.sign(v) != np.sign(direction * b):
        return 0.0
    return abs(v)


class LampertiSpec:
    """Elliptic piecewise polynomial diffusion coefficient with a cached ``phi`` table.

    Parameters
    ----------
    sigma : DriftSpec
        Continuous, strictly positive diffusion coefficient.
    floor : float
        Required lower bound on ``inf sigma``.
    span : (float, float)
        State range covered by the antiderivative table.
    nodes : int
        Table size.
    """

    def __init__(self, sigma: DriftSpec, floor: float = 1e-8, span=(-10.0, 10.0), nodes: int = TABLE_NODES):
        self.sigma = sigma
        self.floor = float(floor)
        self._check_ellipticity()
        self.constant = sigma.k == 0 and len(sigma.pieces[0]) == 1
        lo, hi = float(span[0]), float(span[1])
        if not lo < 0.0 < hi:
            raise ValueError("table span must contain 0")
        self.nodes = np.linspace(lo, hi, int(nodes))
        self.table = self._build_table()

    def _check_ellipticity(self):
        s = self.sigma
        k = s.k
        if k == 0:
            c = s.pieces[0]
            if len(c) > 1:
                raise EllipticityError("a nonconstant affine sigma vanishes somewhere")
            inf = abs(c[0])
            sign_ok = c[0] > 0
        else:
            infs = [_ray_inf(s.pieces[0], s.breakpoints[0], -1), _ray_inf(s.pieces[k], s.breakpoints[-1], 1)]
            infs += [_min_abs_on(s.pieces[j], s.breakpoints[j - 1], s.breakpoints[j]) for j in range(1, k)]
            inf = min(infs)
            sign_ok = s.right_limit(0) > 0
            for i in range(k):
                lv, rv = s.left_limit(i), s.right_limit(i)
                if abs(lv - rv) > 1e-12 * max(1.0, abs(lv)):
                    raise EllipticityError(f"sigma is discontinuous at {s.breakpoints[i]!r}")
        if inf < self.floor:
            raise EllipticityError(f"inf |sigma| = {inf!r} below floor {self.floor!r}")
        if not sign_ok:
            raise EllipticityError("sigma must be positive (flip the sign of W instead)")

    def _quad(self, a, b):
        if a == b:
            return 0.0
        pts = [p for p in self.sigma.breakpoints if min(a, b) < p < max(a, b)]
        val, err = integrate.quad(
            lambda u: 1.0 / float(self.sigma(u)), a, b, epsabs=QUAD_EPSABS, epsrel=1e-13,
            points=pts or None, limit=200,
        )
        return val

    def _build_table(self):
        x = self.nodes
        if self.constant:
            return x / self.sigma.pieces[0][0]
        panels = np.array([self._quad(a, b) for a, b in zip(x[:-1], x[1:])])
        vals = np.concatenate([[0.0], np.cumsum(panels)])
        j = np.searchsorted(x, 0.0, side="right") - 1
        return vals - (vals[j] + self._quad(x[j], 0.0))

    # phi and its inverse ------------------------------------------------

    def phi(self, x):
        """``int_0^x 1 / sigma`` to absolute accuracy ~1e-12."""
        x = np.asarray(x, dtype=float)
        if self.constant:
            return x / self.sigma.pieces[0][0]
        flat = np.atleast_1d(x).ravel()
        out = np.empty_like(flat)
        lo, hi = self.nodes[0], self.nodes[-1]
        for n, v in enumerate(flat):
            if lo <= v <= hi:
                j = min(int(np.searchsorted(self.nodes, v, side="right")) - 1, len(self.nodes) - 2)
                out[n] = self.table[j] + self._quad(self.nodes[j], v)
            else:
                out[n] = self._quad(0.0, v)
        out = out.reshape(x.shape)
        return float(out) if out.ndim == 0 else out

    def phi_fast(self, x):
        """Table interpolation of ``phi``; exact quadrature outside the table."""
        x = np.asarray(x, dtype=float)
        if self.constant:
            return x / self.sigma.pieces[0][0]
        out = np.interp(x, self.nodes, self.table)
        outside = (x < self.nodes[0]) | (x > self.nodes[-1])
        if np.any(outside):
            out = np.where(outside, self.phi(np.where(outside, x, 0.0)), out)
        return out

    def phi_inverse(self, y, fast=False):
        y = np.asarray(y, dtype=float)
        if self.constant:
            return y * self.sigma.pieces[0][0]
        flat = np.atleast_1d(y).ravel()
        guess = np.interp(flat, self.table, self.nodes)
        if fast:
            inside = (flat >= self.table[0]) & (flat <= self.table[-1])
            if np.all(inside):
                return guess.reshape(y.shape)
            flat_out = guess.copy()
            rest = ~inside
            flat_out[rest] = self.phi_inverse(flat[rest])
            return flat_out.reshape(y.shape)
        f = self.phi
        fp = lambda z: 1.0 / np.asarray(self.sigma(z), dtype=float)  # noqa: E731
        lo, hi = expand_bracket(f, flat, guess, step=1e-3)
        out = safeguarded_newton(f, fp, flat, lo, hi, x0=guess).reshape(y.shape)
        return float(out) if out.ndim == 0 else out


def lamperti_phi(l: LampertiSpec, x):
    return l.phi(x)


def lamperti_drift(l: LampertiSpec, mu, y):
    """``mu_phi(y) = mu(x) / sigma(x) - sigma'(x) / 2`` at ``x = phi^-1(y)``."""
    x = l.phi_inverse(y)
    out = np.asarray(mu(x)) / np.asarray(l.sigma(x)) - 0.5 * np.asarray(l.sigma.derivative(x))
    return float(out) if np.ndim(out) == 0 else out


class _ReducedPiece:
    def __init__(self, l, mu, j_mu, j_sigma):
        self.l, self.mu, self.j_mu, self.j_sigma = l, mu, j_mu, j_sigma

    def __call__(self, y):
        x = self.l.phi_inverse(y, fast=True)
        s = self.l.sigma
        return (
            np.asarray(self.mu.piece_value(self.j_mu, x)) / s.piece_value(self.j_sigma, x)
            - 0.5 * s.piece_derivative(self.j_sigma, x)
        )


def reduced_drift(l: LampertiSpec, mu):
    """Drift of the unit-diffusion SDE for ``Z = phi(X)``.

    Exact ``DriftSpec`` for constant ``sigma``; otherwise a ``FunctionDrift``
    whose ``phi^-1`` uses the cached table.
    """
    if l.constant:
        s = float(l.sigma.pieces[0][0])
        pieces = [np.asarray(p) * s ** np.arange(len(p)) / s for p in mu.pieces]
        pv = {i: v / s for i, v in mu.point_values.items()}
        return DriftSpec(tuple(np.asarray(mu.breakpoints) / s), tuple(pieces), pv)
    xs = sorted(set(mu.breakpoints) | set(l.sigma.breakpoints))
    mid = [xs[0] - 1.0] + [0.5 * (a + b) for a, b in zip(xs[:-1], xs[1:])] + [xs[-1] + 1.0] if xs else [0.0]
    pieces = []
    for m in mid:
        j_mu = int(np.searchsorted(mu.xi, m, side="right"))
        j_s = int(np.searchsorted(l.sigma.xi, m, side="right"))
        pieces.append(_ReducedPiece(l, mu, j_mu, j_s))
    pv = {}
    for i, xi in enumerate(xs):
        if xi in mu.breakpoints:
            im = mu.breakpoints.index(xi)
            if im in mu.point_values:
                pv[i] = float(lamperti_drift(l, mu, l.phi(xi)))
    return FunctionDrift([float(l.phi(x)) for x in xs], pieces, pv)

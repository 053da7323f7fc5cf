"""Monotone transform removing the drift discontinuities.

For a drift with jumps at ``xi_i`` the map

    G(x) = x + sum_i nu_i (x - xi_i) |x - xi_i| bump((x - xi_i) / c),
    nu_i = (mu(xi_i-) - mu(xi_i+)) / 2,   bump(u) = (1 - u^2)^3 on [-1, 1],

is bi-Lipschitz, C^1 with a piecewise Lipschitz second derivative whose
one-sided limits at ``xi_i`` are ``-/+ 2 nu_i``.  The bump vanishes with its
first two derivatives at u = +-1, so G'' is continuous at the support edges.
``G(X)`` solves an SDE with Lipschitz coefficients ``mu_tilde`` and
``sigma_tilde``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rootfind import safeguarded_newton

MAX_HALVINGS = 60


def _bump_slope_bound() -> float:
    """Exact ``sup |d/du [u |u| bump(u)]| = sup_[0,1] |2u (1 - u^2)^2 (1 - 4u^2)|``."""
    P = np.polynomial.Polynomial
    u = P([0.0, 1.0])
    q = 2 * u * (1 - u**2) ** 2 * (1 - 4 * u**2)
    r = q.deriv().roots()
    r = r[(np.abs(r.imag) < 1e-12) & (r.real >= 0) & (r.real <= 1)].real
    return float(np.max(np.abs(q(np.concatenate([r, [0.0, 1.0]])))))


# G'(x) >= 1 - c * BUMP_SLOPE_BOUND * sum |nu_i|
BUMP_SLOPE_BOUND = _bump_slope_bound()


class TransformError(RuntimeError):
    pass


def _out(a):
    return float(a) if np.ndim(a) == 0 else a


@dataclass(frozen=True, eq=False)
class TransformSpec:
    """Precomputed transform for a drift.

    Attributes
    ----------
    source : DriftSpec or FunctionDrift
    amplitudes : ndarray
        ``nu_i`` per breakpoint.
    half_width : float
        Bump support radius ``c``.
    derivative_floor : float
        Certified lower bound on ``G'``.
    """

    source: object
    amplitudes: np.ndarray
    half_width: float
    derivative_floor: float

    @property
    def xi(self) -> np.ndarray:
        return self.source.xi

    @property
    def is_identity(self) -> bool:
        return not np.any(self.amplitudes)

    def _active(self):
        return [(x, nu) for x, nu in zip(self.source.breakpoints, self.amplitudes) if nu != 0.0]

    # G, G', G'' ---------------------------------------------------------

    def g(self, x):
        x = np.asarray(x, dtype=float)
        out = x.copy()
        c = self.half_width
        for xi, nu in self._active():
            u = (x - xi) / c
            w = 1.0 - u * u
            out = out + np.where(np.abs(u) < 1.0, nu * c * c * u * np.abs(u) * w * w * w, 0.0)
        return _out(out)

    def derivatives(self, x):
        """Return ``(G'(x), G''(x))``; ``G''`` at a breakpoint is the extended value."""
        x = np.asarray(x, dtype=float)
        gp = np.ones_like(x)
        gpp = np.zeros_like(x)
        c = self.half_width
        for i, (xi, nu) in enumerate(zip(self.source.breakpoints, self.amplitudes)):
            if nu != 0.0:
                u = (x - xi) / c
                au = np.abs(u)
                inside = au < 1.0
                w = 1.0 - u * u
                bump = w * w * w
                dbump = -6.0 * u * w * w
                ddbump = (30.0 * u * u - 6.0) * w
                gp = gp + np.where(inside, nu * c * (2.0 * au * bump + u * au * dbump), 0.0)
                gpp = gpp + np.where(
                    inside, nu * (2.0 * np.sign(u) * bump + 4.0 * au * dbump + u * au * ddbump), 0.0
                )
            # point values give a nonzero extension even where nu == 0
            at = x == xi
            if np.any(at):
                gpp = np.where(at, self.extended_second(i), gpp)
        return gp, gpp

    def extended_second(self, i: int) -> float:
        """``G''(xi_i) := (mu(xi-) - mu(xi+)) + 2 (mu(xi+) - mu(xi))`` (0-based ``i``)."""
        s = self.source
        return (s.left_limit(i) - s.right_limit(i)) + 2.0 * (s.right_limit(i) - s.value_at_breakpoint(i))

    def g_prime(self, x):
        return _out(self.derivatives(x)[0])

    def g_second(self, x):
        return _out(self.derivatives(x)[1])

    # inverse ------------------------------------------------------------

    def g_inverse(self, y, guess=None):
        """Solve ``G(x) = y``.

        ``G`` is the identity off the bump supports and maps each support
        ``[xi - c, xi + c]`` onto itself, which gives both the fast path and
        the Newton bracket.
        """
        y = np.asarray(y, dtype=float)
        yf = y.ravel()
        x = yf.copy()
        c = self.half_width
        g1 = None if guess is None else np.broadcast_to(np.asarray(guess, dtype=float), y.shape).ravel()
        for xi, nu in self._active():
            m = np.flatnonzero(np.abs(yf - xi) < c)
            if m.size == 0:
                continue

            def f(z, xi=xi, nu=nu):
                u = (z - xi) / c
                w = 1.0 - u * u
                return z + nu * c * c * u * np.abs(u) * w * w * w

            def fp(z, xi=xi, nu=nu):
                u = (z - xi) / c
                au = np.abs(u)
                w = 1.0 - u * u
                return 1.0 + nu * c * (2.0 * au * w * w * w - 6.0 * u * au * u * w * w)

            x0 = None if g1 is None else g1[m]
            x[m] = safeguarded_newton(f, fp, yf[m], xi - c, xi + c, x0=x0)
        return _out(x.reshape(y.shape))

    def g_inverse_prime(self, y):
        return _out(1.0 / self.derivatives(self.g_inverse(y))[0])

    def g_inverse_second(self, y):
        gp, gpp = self.derivatives(self.g_inverse(y))
        return _out(-gpp / gp**3)

    # transformed coefficients ------------------------------------------

    def coefficients_at(self, x):
        """``(mu_tilde, sigma_tilde, sigma_tilde')`` evaluated at original-space ``x``."""
        gp, gpp = self.derivatives(x)
        mu = np.asarray(self.source(x), dtype=float)
        return gp * mu + 0.5 * gpp, gp, gpp / gp

    def mu_tilde(self, y):
        x = self.g_inverse(y)
        gp, gpp = self.derivatives(x)
        return _out(gp * np.asarray(self.source(x)) + 0.5 * gpp)

    def sigma_tilde(self, y):
        return _out(self.derivatives(self.g_inverse(y))[0])


def build_transform(spec) -> TransformSpec:
    """Build ``G`` for a drift, choosing the bump half-width so that ``G' >= 1/2``.

    Starting from ``c = min(1, half the smallest breakpoint gap)`` the width is
    halved until ``c * BUMP_SLOPE_BOUND * sum |nu_i| <= 1/2``.
    """
    k = spec.k
    nu = np.array([(spec.left_limit(i) - spec.right_limit(i)) / 2.0 for i in range(k)], dtype=float)
    if k == 0:
        return TransformSpec(spec, nu, 1.0, 1.0)
    gaps = np.diff(spec.xi)
    c = min(1.0, 0.5 * float(gaps.min())) if gaps.size else 1.0
    total = float(np.abs(nu).sum())
    for _ in range(MAX_HALVINGS + 1):
        if c * BUMP_SLOPE_BOUND * total <= 0.5:
            return TransformSpec(spec, nu, c, 1.0 - c * BUMP_SLOPE_BOUND * total)
        c *= 0.5
    raise TransformError(f"could not certify G' >= 1/2 within {MAX_HALVINGS} halvings")


# functional aliases -----------------------------------------------------

def g_eval(t: TransformSpec, x):
    return t.g(x)


def g_prime(t: TransformSpec, x):
    return t.g_prime(x)


def g_second(t: TransformSpec, x):
    return t.g_second(x)


def g_inverse(t: TransformSpec, y):
    return t.g_inverse(y)


def mu_tilde(t: TransformSpec, y):
    return t.mu_tilde(y)


def sigma_tilde(t: TransformSpec, y):
    return t.sigma_tilde(y)

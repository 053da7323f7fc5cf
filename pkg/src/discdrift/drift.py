"""Piecewise Lipschitz drift coefficients.

A drift is stored as a piecewise polynomial: ``k`` ordered breakpoints and
``k + 1`` coefficient arrays (ascending degree), piece ``i`` living on the
open interval between breakpoints ``i - 1`` and ``i``.  The two unbounded end
pieces must be affine, which makes every piece Lipschitz with a Lipschitz
derivative.  At a breakpoint the drift takes the right limit unless an
explicit point value is given.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

MAX_BREAKPOINTS = 64
MIN_BREAKPOINT_GAP = 1e-9


class DriftSpecError(ValueError):
    """Raised for structurally invalid drift documents.

    ``field`` names the offending entry of the serialized document.
    """

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _trim(coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float).ravel()
    if c.size == 0:
        c = np.zeros(1)
    nz = np.flatnonzero(c)
    return c[: nz[-1] + 1] if nz.size else c[:1] * 0.0


def _horner(coeffs: np.ndarray, x):
    out = np.zeros_like(x, dtype=float) + coeffs[-1]
    for a in coeffs[-2::-1]:
        out = out * x + a
    return out


@dataclass(frozen=True, eq=False)
class DriftSpec:
    """Piecewise polynomial on the real line.

    Parameters
    ----------
    breakpoints : sequence of float
        Strictly increasing breakpoints, at most ``MAX_BREAKPOINTS`` of them.
    pieces : sequence of sequences of float
        ``len(breakpoints) + 1`` coefficient lists in ascending degree.
    point_values : mapping int -> float, optional
        Value at breakpoint ``i`` when it differs from the right limit.

    Also used for diffusion coefficients in the Lamperti reduction.
    """

    breakpoints: tuple
    pieces: tuple
    point_values: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        pieces = tuple(_trim(p) for p in self.pieces)
        pv = {int(i): float(v) for i, v in dict(self.point_values).items()}
        k = len(bps)
        if k > MAX_BREAKPOINTS:
            raise DriftSpecError("breakpoints", f"at most {MAX_BREAKPOINTS} breakpoints allowed, got {k}")
        if not all(math.isfinite(b) for b in bps):
            raise DriftSpecError("breakpoints", "breakpoints must be finite")
        for i in range(k - 1):
            if not bps[i + 1] > bps[i]:
                raise DriftSpecError("breakpoints", f"not strictly increasing at index {i + 1}")
            if bps[i + 1] - bps[i] < MIN_BREAKPOINT_GAP:
                raise DriftSpecError(
                    "breakpoints", f"breakpoints {i} and {i + 1} closer than {MIN_BREAKPOINT_GAP:g}"
                )
        if len(pieces) != k + 1:
            raise DriftSpecError("pieces", f"expected {k + 1} pieces for {k} breakpoints, got {len(pieces)}")
        for j, p in enumerate(pieces):
            if not np.all(np.isfinite(p)):
                raise DriftSpecError(f"pieces[{j}]", "coefficients must be finite")
        for j in (0, k):
            if len(pieces[j]) > 2:
                raise DriftSpecError(
                    f"pieces[{j}]", "unbounded end pieces must be affine (degree <= 1)"
                )
        for i, v in pv.items():
            if not 0 <= i < k:
                raise DriftSpecError("point_values", f"breakpoint index {i} out of range")
            if not math.isfinite(v):
                raise DriftSpecError("point_values", f"value at index {i} must be finite")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "point_values", pv)
        object.__setattr__(self, "_xi", np.array(bps, dtype=float))

    # -- construction helpers ---------------------------------------------

    @classmethod
    def polynomial(cls, coeffs) -> "DriftSpec":
        """Breakpoint-free drift, e.g. ``DriftSpec.polynomial([0, -1])`` for -x."""
        return cls((), (coeffs,))

    @classmethod
    def step(cls, at: float = 0.0, height: float = 1.0) -> "DriftSpec":
        """``height * 1_[at, inf)``."""
        return cls((at,), ([0.0], [height]))

    # -- evaluation ------------------------------------------------------

    @property
    def k(self) -> int:
        return len(self.breakpoints)

    @property
    def xi(self) -> np.ndarray:
        return self._xi

    def __call__(self, x):
        return evaluate(self, x)

    def piece_value(self, j: int, x):
        return _horner(self.pieces[j], np.asarray(x, dtype=float))

    def piece_derivative(self, j: int, x):
        c = self.pieces[j]
        if len(c) == 1:
            return np.zeros_like(np.asarray(x, dtype=float))
        return _horner(c[1:] * np.arange(1, len(c)), np.asarray(x, dtype=float))

    def derivative(self, x):
        """Piecewise derivative; at breakpoints the right piece is used."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self._xi, x, side="right")
        out = np.zeros_like(x)
        for j in range(self.k + 1):
            m = idx == j
            if np.any(m):
                out[m] = self.piece_derivative(j, x[m])
        return out[()] if out.ndim == 0 else out

    def left_limit(self, i: int) -> float:
        return float(self.piece_value(i, self.breakpoints[i]))

    def right_limit(self, i: int) -> float:
        return float(self.piece_value(i + 1, self.breakpoints[i]))

    def value_at_breakpoint(self, i: int) -> float:
        if i in self.point_values:
            return self.point_values[i]
        return self.right_limit(i)

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "breakpoints": list(self.breakpoints),
            "pieces": [[float(a) for a in p] for p in self.pieces],
            "point_values": [[self.breakpoints[i], v] for i, v in sorted(self.point_values.items())],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "DriftSpec":
        if not isinstance(doc, Mapping):
            raise DriftSpecError("drift", "expected an object")
        unknown = set(doc) - {"breakpoints", "pieces", "point_values"}
        if unknown:
            raise DriftSpecError(sorted(unknown)[0], "unknown field")
        if "pieces" not in doc:
            raise DriftSpecError("pieces", "missing required field")
        bps = doc.get("breakpoints", [])
        if not isinstance(bps, list) or not all(_is_number(b) for b in bps):
            raise DriftSpecError("breakpoints", "expected a list of numbers")
        pieces = doc["pieces"]
        if not isinstance(pieces, list) or not all(
            isinstance(p, list) and p and all(_is_number(a) for a in p) for p in pieces
        ):
            raise DriftSpecError("pieces", "expected a list of non-empty coefficient lists")
        pv = {}
        for entry in doc.get("point_values", []):
            if not (isinstance(entry, list) and len(entry) == 2 and all(_is_number(a) for a in entry)):
                raise DriftSpecError("point_values", "expected [breakpoint, value] pairs")
            try:
                pv[bps.index(entry[0])] = entry[1]
            except ValueError:
                raise DriftSpecError("point_values", f"{entry[0]!r} is not a breakpoint") from None
        return cls(tuple(bps), tuple(pieces), pv)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "DriftSpec":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, DriftSpec):
            return NotImplemented
        return (
            self.breakpoints == other.breakpoints
            and len(self.pieces) == len(other.pieces)
            and all(np.array_equal(a, b) for a, b in zip(self.pieces, other.pieces))
            and self.point_values == other.point_values
        )

    __hash__ = None

    def __repr__(self):
        return f"DriftSpec({self.to_dict()!r})"


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


class FunctionDrift:
    """Drift given by opaque per-piece callables.

    Carries the same evaluation interface as :class:`DriftSpec` so the
    transform and the solvers accept it, but it cannot be serialized and its
    Lipschitz properties are the caller's responsibility.
    """

    def __init__(self, breakpoints: Sequence[float], pieces: Sequence[Callable], point_values=None):
        self.breakpoints = tuple(float(b) for b in breakpoints)
        if len(pieces) != len(self.breakpoints) + 1:
            raise ValueError("need one callable per piece")
        self.pieces = tuple(pieces)
        self.point_values = dict(point_values or {})
        self._xi = np.array(self.breakpoints, dtype=float)

    k = DriftSpec.k
    xi = DriftSpec.xi
    __call__ = DriftSpec.__call__
    left_limit = DriftSpec.left_limit
    right_limit = DriftSpec.right_limit
    value_at_breakpoint = DriftSpec.value_at_breakpoint

    def piece_value(self, j, x):
        return np.asarray(self.pieces[j](np.asarray(x, dtype=float)), dtype=float)


def evaluate(spec, x):
    """Evaluate the drift at ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=float)
    idx = np.searchsorted(spec.xi, x, side="right")
    if spec.k == 0:
        out = np.asarray(spec.piece_value(0, x), dtype=float) + np.zeros_like(x)
    else:
        out = np.empty_like(x)
        for j in range(spec.k + 1):
            m = idx == j
            if np.any(m):
                out[m] = spec.piece_value(j, x[m])
        for i, v in spec.point_values.items():
            out[x == spec.breakpoints[i]] = v
    return float(out) if out.ndim == 0 else out


def one_sided_limits(spec, i: int) -> tuple[float, float]:
    """``(mu(xi_i-), mu(xi_i+))`` for the 1-based breakpoint index ``i``."""
    if not 1 <= i <= spec.k:
        raise IndexError(f"breakpoint index {i} out of range 1..{spec.k}")
    return spec.left_limit(i - 1), spec.right_limit(i - 1)


@dataclass(frozen=True)
class Decomposition:
    """Lipschitz part plus step and point corrections."""

    cont: DriftSpec
    step_jumps: tuple  # ((xi_i, alpha_i), ...)
    point_jumps: tuple  # ((xi_i, gamma_i), ...)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.cont(x), dtype=float)
        for xi, a in self.step_jumps:
            out = out + a * (x >= xi)
        for xi, g in self.point_jumps:
            out = out + g * (x == xi)
        return float(out) if out.ndim == 0 else out


def decompose(spec: DriftSpec) -> Decomposition:
    """Split the drift into a Lipschitz function plus step and point corrections.

    The continuous part subtracts, on every piece, all jumps located to its
    left, so one-sided limits match at each breakpoint.
    """
    alphas = [spec.right_limit(i) - spec.left_limit(i) for i in range(spec.k)]
    gammas = [spec.value_at_breakpoint(i) - spec.right_limit(i) for i in range(spec.k)]
    pieces = [spec.pieces[0].copy()]
    shift = 0.0
    for j in range(1, spec.k + 1):
        shift += alphas[j - 1]
        c = spec.pieces[j].copy()
        c[0] -= shift
        pieces.append(c)
    cont = DriftSpec(spec.breakpoints, tuple(pieces))
    return Decomposition(
        cont,
        tuple(zip(spec.breakpoints, alphas)),
        tuple(zip(spec.breakpoints, gammas)),
    )


@dataclass(frozen=True)
class ValidationReport:
    mu1: bool
    mu2: bool
    mu3: bool
    discontinuities: tuple  # ((xi, alpha), ...) with alpha != 0
    messages: tuple = ()

    @property
    def ok(self) -> bool:
        return self.mu1 and self.mu2 and self.mu3

    def summary(self) -> str:
        lines = [
            f"(\u03bc1): {'satisfied' if self.mu1 else 'violated'}",
            f"(\u03bc2): {'satisfied' if self.mu2 else 'violated'}",
        ]
        if self.mu3:
            where = ", ".join(f"\u03be={_fmt(xi)}" for xi, _ in self.discontinuities)
            lines.append(f"(\u03bc3): satisfied at {where}")
        else:
            lines.append("(\u03bc3): violated (no genuine discontinuity)")
        lines.extend(self.messages)
        return "\n".join(lines)


def _fmt(x: float) -> str:
    # integral breakpoints print as "0", everything else round-trips
    return str(int(x)) if float(x).is_integer() and abs(x) < 2**53 else repr(float(x))


def validate(spec: DriftSpec) -> ValidationReport:
    """Check the piecewise smoothness conditions and locate genuine jumps.

    (mu1)/(mu2) are guaranteed by construction of a ``DriftSpec``; they are
    re-checked here so that hand-built or callable drifts get a report too.
    """
    msgs = []
    structural = True
    if isinstance(spec, DriftSpec):
        for j in (0, spec.k):
            if len(spec.pieces[j]) > 2:
                structural = False
                msgs.append(f"pieces[{j}] is not affine")
    else:
        msgs.append("callable drift: (mu1)/(mu2) not verifiable")
    jumps = tuple(
        (xi, a) for xi, a in decompose_alphas(spec) if a != 0.0
    )
    return ValidationReport(structural, structural, bool(jumps), jumps, tuple(msgs))


def decompose_alphas(spec):
    return [(spec.breakpoints[i], spec.right_limit(i) - spec.left_limit(i)) for i in range(spec.k)]


def _max_abs_on(coeffs: np.ndarray, a: float, b: float) -> float:
    cands = [a, b]
    if len(coeffs) > 2:
        dp = np.polynomial.polynomial.polyder(coeffs)
        for r in np.polynomial.polynomial.polyroots(dp):
            if abs(r.imag) < 1e-12 and a <= r.real <= b:
                cands.append(r.real)
    return float(np.max(np.abs(_horner(coeffs, np.array(cands)))))


def linear_growth_constant(spec: DriftSpec) -> float:
    """Return ``K`` with ``|mu(x)| <= K (1 + |x|)`` for every real ``x``."""
    k = spec.k
    K = 0.0
    for j in (0, k):
        c = spec.pieces[j]
        K = max(K, abs(c[0]), abs(c[1]) if len(c) > 1 else 0.0)
    for j in range(1, k):
        K = max(K, _max_abs_on(spec.pieces[j], spec.breakpoints[j - 1], spec.breakpoints[j]))
    for i in range(k):
        K = max(K, abs(spec.left_limit(i)), abs(spec.right_limit(i)), abs(spec.value_at_breakpoint(i)))
    return K

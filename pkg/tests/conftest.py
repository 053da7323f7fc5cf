import numpy as np
import pytest
from hypothesis import strategies as st

from discdrift import DriftSpec

# lines collected by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES = []


def step():
    """1 on [0, inf), 0 left of it."""
    return DriftSpec.step()


def unbounded():
    """2x - 3 * 1[0, inf): neither bounded nor monotone."""
    return DriftSpec((0.0,), ([0.0, 2.0], [-3.0, 2.0]))


def battery():
    """Drifts with k = 0..3, point values, interior polynomials and close breakpoints."""
    return {
        "zero": DriftSpec.polynomial([0.0]),
        "ou": DriftSpec.polynomial([0.0, -1.0]),
        "step": step(),
        "unbounded": unbounded(),
        "two_jumps": DriftSpec((-0.5, 0.3), ([1.0], [0.0, -1.0, 0.5], [2.0]), {0: 0.7}),
        "three_jumps": DriftSpec(
            (-1.0, 0.25, 0.5),
            ([0.5, -0.5], [1.0, 0.0, -2.0, 1.0], [-4.0, 3.0], [3.0, 1.0]),
            {2: -7.0},
        ),
        "removable": DriftSpec((1.0,), ([1.0, 1.0], [2.0, 0.0]), {0: 5.0}),
        "big_jump": DriftSpec((0.0,), ([40.0], [-40.0])),
    }


@pytest.fixture(params=sorted(battery()))
def drift(request):
    return battery()[request.param]


_coef = st.floats(-5.0, 5.0, allow_nan=False, allow_infinity=False)


@st.composite
def drift_specs(draw, max_k=3):
    k = draw(st.integers(0, max_k))
    xs = sorted(draw(st.lists(st.floats(-3.0, 3.0), min_size=k, max_size=k, unique=True)))
    if any(b - a < 0.05 for a, b in zip(xs[:-1], xs[1:])):
        xs = [-3.0 + 1.5 * i for i in range(k)]
    pieces = []
    for j in range(k + 1):
        deg = 1 if j in (0, k) else draw(st.integers(0, 3))
        pieces.append(draw(st.lists(_coef, min_size=deg + 1, max_size=deg + 1)))
    pv = {}
    for i in range(k):
        if draw(st.booleans()):
            pv[i] = draw(_coef)
    return DriftSpec(tuple(xs), tuple(pieces), pv)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def close_points(spec, n=10_000, lo=-50.0, hi=50.0):
    """Dense sample plus every breakpoint and its nearest neighbours."""
    x = np.linspace(lo, hi, n)
    bp = np.asarray(spec.breakpoints, dtype=float)
    return np.sort(np.concatenate([x, bp, np.nextafter(bp, -np.inf), np.nextafter(bp, np.inf)]))

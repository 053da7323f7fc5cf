"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Monte Carlo runs are cached per (experiment, worker count) so that the
certificate check and the reproducibility check reuse the main runs.
Run directly with ``python tests/test_acceptance.py`` or through pytest; the
lines are echoed in the pytest terminal summary.
"""

import json
import math
import os
import sys
import tempfile
import time
from functools import lru_cache

import numpy as np
import pytest

from discdrift import DriftSpec, LampertiSpec, TimeGrid, build_transform, decompose, lamperti_drift, reduced_drift
from discdrift.cli import ladder_csv, main as cli_main
from discdrift.experiments import DEFAULT_LADDER, ErrorEstimate, fit_rate, lower_bound_certificate, strong_errors
from discdrift.paths import bridge_fill, brownian_batch
from discdrift.rng import stream

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from tests.conftest import ACCEPTANCE_LINES, battery, close_points, step, unbounded  # noqa: E402
from tests.test_lamperti import midpoint_riemann, quad_sigma  # noqa: E402

SEED = 1
REPS = 2000
R = 64
BAND = (0.6, 0.9)
WORKER_COUNTS = (1, 4, 8)
DRIFTS = {"step": step, "unbounded": unbounded}
TIMINGS = {}


def report(num, ok, detail):
    line = f"criterion {num} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# cached Monte Carlo runs ---------------------------------------------------------

@lru_cache(maxsize=None)
def couple_csv(name, workers):
    """Coupling ladder through the CLI; returns (exit code, CSV text)."""
    doc = {"drift": DRIFTS["step" if name == "lamperti" else name]().to_dict(), "seed": SEED,
           "ladder": list(DEFAULT_LADDER), "reps": REPS, "refine_factor": R, "p": 1.0,
           "slope_band": list(BAND)}
    if name == "lamperti":
        doc["sigma"] = {"pieces": [[2.0]]}
    t0 = time.time()
    with tempfile.TemporaryDirectory() as d:
        cfg, out = os.path.join(d, "cfg.json"), os.path.join(d, "out.csv")
        with open(cfg, "w") as fh:
            json.dump(doc, fh)
        code = cli_main(["couple", "--config", cfg, "--out", out, "--workers", str(workers)])
        with open(out) as fh:
            text = fh.read()
    TIMINGS[("couple", name, workers)] = time.time() - t0
    return code, text


@lru_cache(maxsize=None)
def strong_csv(name, workers):
    """Strong L1 errors of both schemes; returns {scheme: CSV text}."""
    t0 = time.time()
    t = build_transform(DRIFTS[name]())
    res = {n: strong_errors(["euler", "milstein"], t, 0.0, n, R, 1.0, REPS, SEED, workers) for n in DEFAULT_LADDER}
    TIMINGS[("strong", name, workers)] = time.time() - t0
    return {s: ladder_csv([(n, res[n][s]) for n in DEFAULT_LADDER]) for s in ("euler", "milstein")}


def parse(text):
    rows = text.splitlines()
    assert rows[0] == "n,error,stderr"
    out = []
    for r in rows[1:]:
        n, e, s = r.split(",")
        out.append((int(n), ErrorEstimate(1.0, float(e), float(s), REPS, int(n))))
    return out


def _coupling_criterion(num, name):
    code, text = couple_csv(name, 1)
    pts = parse(text)
    fit = fit_rate(pts)
    width = 2 * fit.ci_half_width
    ok = code == 0 and len(pts) == 6 and BAND[0] <= fit.slope <= BAND[1] and width <= 0.2
    report(num, ok, f"{name} coupling slope {fit.slope:.3f} (band {BAND}), CI width {width:.3f} <= 0.2, "
                    f"exit {code}, {len(pts)} rows ({TIMINGS.get(('couple', name, 1), 0):.0f} s)")


# criteria ------------------------------------------------------------------------

def test_criterion_1_sharp_rate():
    _coupling_criterion(1, "step")


def test_criterion_2_unbounded_nonmonotone():
    _coupling_criterion(2, "unbounded")


def test_criterion_3_upper_rate():
    csv = strong_csv("step", 1)
    m = fit_rate(parse(csv["milstein"])).slope
    e = fit_rate(parse(csv["euler"])).slope
    ok = m >= 0.6 and e >= 0.45
    report(3, ok, f"Milstein slope {m:.3f} >= 0.6, Euler slope {e:.3f} >= 0.45 "
                  f"({TIMINGS.get(('strong', 'step', 1), 0):.0f} s)")


def test_criterion_4_certificate_consistency():
    worst = -np.inf
    checks = 0
    for name in DRIFTS:
        cert = dict(parse(couple_csv(name, 1)[1]))
        for scheme, text in strong_csv(name, 1).items():
            for n, err in parse(text):
                c = cert[n]
                margin = lower_bound_certificate(c) - err.mean - 3 * math.hypot(c.stderr / 2, err.stderr)
                worst = max(worst, margin)
                checks += 1
    report(4, worst <= 0, f"{checks} (drift, scheme, n) checks, max certificate excess {worst:.4g} <= 0")


def test_criterion_5_transform_properties():
    t0 = time.time()
    lim = rt = ident1 = ident2 = 0.0
    floor_ok = mono_ok = lip_ok = True
    h = 1e-6
    for name, mu in battery().items():
        t = build_transform(mu)
        for i, xi in enumerate(mu.breakpoints):
            jump = mu.left_limit(i) - mu.right_limit(i)
            right = (t.g_prime(xi + h) - t.g_prime(xi)) / h
            left = (t.g_prime(xi) - t.g_prime(xi - h)) / h
            lim = max(lim, abs(right - jump), abs(left + jump))
        x = np.linspace(-20, 20, 100_001)
        rt = max(rt, np.max(np.abs(t.g_inverse(t.g(x)) - x)))
        mono_ok &= bool(np.all(np.diff(t.g(x)) > 0))
        floor_ok &= bool(np.min(t.g_prime(x)) >= t.derivative_floor >= 0.5)
        y = np.random.default_rng(5).uniform(-3, 3, 10_000)
        y = y[~np.isin(y, t.xi)]
        ip, st = t.g_inverse_prime(y), t.sigma_tilde(y)
        ident1 = max(ident1, np.max(np.abs(ip * st - 1)))
        lhs = ip * t.mu_tilde(y) + 0.5 * t.g_inverse_second(y) * st**2
        ident2 = max(ident2, np.max(np.abs(lhs - mu(t.g_inverse(y)))))
        # Lipschitz certificate of mu~ and sigma~, spacing tied to c
        lo, hi = (mu.breakpoints[0] - 1, mu.breakpoints[-1] + 1) if mu.k else (-1.0, 1.0)
        n = int((hi - lo) / (t.half_width / 2500)) + 1
        for f in (t.mu_tilde, t.sigma_tilde):
            q = []
            for m in (n, 10 * n):
                yy = np.linspace(lo, hi, m)
                q.append(np.max(np.abs(np.diff(f(yy))) / np.diff(yy)))
            lip_ok &= bool(q[1] <= 1.05 * q[0])
    k0 = build_transform(DriftSpec.polynomial([0.5, -1.0]))
    z = np.linspace(-5, 5, 101)
    k0_ok = (np.array_equal(k0.g(z), z) and np.array_equal(k0.g_inverse(z), z)
             and np.array_equal(k0.mu_tilde(z), 0.5 - z) and np.all(k0.sigma_tilde(z) == 1.0))
    dt = time.time() - t0
    ok = (lim <= 1e-4 and rt <= 1e-9 and ident1 <= 1e-10 and ident2 <= 1e-8 and floor_ok and mono_ok
          and lip_ok and k0_ok and dt <= 30)
    report(5, ok, f"G'' limits {lim:.2e} <= 1e-4, round trip {rt:.2e} <= 1e-9, identities {ident1:.2e} / "
                  f"{ident2:.2e} <= 1e-8, floor {floor_ok}, monotone {mono_ok}, Lipschitz {lip_ok}, "
                  f"k = 0 identity {k0_ok} ({dt:.1f} s <= 30 s)")


def test_criterion_6_decomposition():
    t0 = time.time()
    drifts = battery()
    ks = sorted({mu.k for mu in drifts.values()})
    worst = 0.0
    for mu in drifts.values():
        x = close_points(mu)
        worst = max(worst, np.max(np.abs(decompose(mu)(x) - mu(x))))
    dt = time.time() - t0
    ok = worst <= 1e-12 and len(drifts) >= 5 and {0, 1, 2, 3} <= set(ks) and dt <= 5
    report(6, ok, f"{len(drifts)} drifts, k in {ks}, max round-trip error {worst:.2e} <= 1e-12 ({dt:.1f} s <= 5 s)")


def test_criterion_7_coupling_construction():
    t0 = time.time()
    # bitwise coarse agreement on the experiment layout
    coarse = TimeGrid.uniform(16)
    fine = coarse.refined(R)
    idx = fine.positions_of(coarse)
    W = brownian_batch(fine.times, [stream(SEED, r, "path") for r in range(50)])
    Wt = bridge_fill(fine.times, idx, W[idx], [stream(SEED, r, "fresh_bridge") for r in range(50)])
    agree = np.array_equal(W[idx], Wt[idx]) and not np.array_equal(W, Wt)
    # bridge variance and cross-bridge correlation at u = 1/2 on {0, 1}
    M = 100_000
    t = np.array([0.0, 0.5, 1.0])
    W = brownian_batch(t, [stream(SEED, r, "path") for r in range(M)])
    Wt = bridge_fill(t, np.array([0, 2]), W[[0, 2]], [stream(SEED, r, "fresh_bridge") for r in range(M)])
    b, bt = W[1] - 0.5 * W[2], Wt[1] - 0.5 * W[2]
    var = bt.var(ddof=1)
    se = math.sqrt((np.mean((bt - bt.mean()) ** 4) - var**2) / M)
    z = abs(var - 0.25) / se
    rho = float(np.corrcoef(b, bt)[0, 1])
    dt = time.time() - t0
    ok = agree and z <= 3 and abs(rho) <= 3 / math.sqrt(M) and dt <= 60
    report(7, ok, f"coarse agreement bitwise {agree}, bridge variance {var:.5f} vs 0.25 ({z:.2f} stderr <= 3), "
                  f"correlation {rho:+.5f} within +-{3 / math.sqrt(M):.5f} ({dt:.1f} s)")


def test_criterion_8_lamperti():
    t0 = time.time()
    # constant sigma: phi(x) = x / s and mu_phi(y) = mu(s y) / s
    worst = 0.0
    y = np.linspace(-4, 4, 801)
    for s in (1.0, 2.0, 0.3):
        lam = LampertiSpec(DriftSpec.polynomial([s]))
        worst = max(worst, np.max(np.abs(lam.phi(y) - y / s)))
        for mu in (step(), unbounded()):
            worst = max(worst, np.max(np.abs(lamperti_drift(lam, mu, y) - mu(s * y) / s)))
            worst = max(worst, np.max(np.abs(reduced_drift(lam, mu)(y) - mu(s * y) / s)))
    lam = LampertiSpec(quad_sigma())
    oracle = midpoint_riemann(lambda u: 1.0 / (2.0 + u * u), 0.0, 1.0, 10_000_000)
    quad_err = abs(lam.phi(1.0) - oracle)
    code, text = couple_csv("lamperti", 1)
    pts = parse(text)
    fit = fit_rate(pts)
    dt = time.time() - t0
    ok = worst <= 1e-12 and quad_err <= 1e-9 and code == 0 and BAND[0] <= fit.slope <= BAND[1]
    report(8, ok, f"constant-sigma error {worst:.2e} <= 1e-12, phi(1) vs 10^7-panel oracle {quad_err:.2e} <= 1e-9, "
                  f"reduced coupling slope {fit.slope:.3f} in {BAND} ({dt:.0f} s)")


def test_criterion_9_reproducibility():
    t0 = time.time()
    diffs = []
    runs = 0
    for w in WORKER_COUNTS[1:]:
        for name in ("step", "unbounded", "lamperti"):
            runs += 1
            if couple_csv(name, w)[1] != couple_csv(name, 1)[1]:
                diffs.append(f"couple/{name}/w{w}")
        for name in DRIFTS:
            runs += 1
            if strong_csv(name, w) != strong_csv(name, 1):
                diffs.append(f"strong/{name}/w{w}")
    dt = time.time() - t0
    report(9, not diffs, f"{runs} re-runs under workers {WORKER_COUNTS[1:]} byte-identical to workers=1"
                         f"{'; differing: ' + ', '.join(diffs) if diffs else ''} ({dt:.0f} s)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))

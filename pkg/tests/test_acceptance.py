"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (shown in the pytest terminal summary)
before asserting, so the full table is printed even when a check fails.
"""

import math

import numpy as np
import pytest

from centercut.cuts import FeasibleRegion
from centercut.experiments import (SharpnessConfig, centerpoint_bound_run, centroid_depth,
                                   convergence_run, euclidean_grunbaum_check,
                                   quasiconvexity_run, sharpness_run)
from centercut.manifold import SPD, Euclidean, KleinHyperbolic
from centercut.optimizer import builtin_oracles
from centercut.sampling import estimate_volume, proposal_for, sample_region


def test_sharpness_of_the_centerpoint_level(report):
    cfg = SharpnessConfig(n=2, delta=0.05, eps_list=(0.1, 0.05, 0.02, 0.01, 0.005), m=10 ** 6)
    rows = sharpness_run(cfg)
    masses = [r["mass_single_vertex_halfspace"] for r in rows]
    ses = [r["mass_stderr"] for r in rows]
    monotone = all(b <= a + 3 * math.hypot(sa, sb)
                   for a, b, sa, sb in zip(masses, masses[1:], ses, ses[1:]))
    final = masses[-1]
    in_band = abs(final - 1 / 3) <= 0.02
    report(1, monotone and in_band,
           f"mass(eps=0.005)={final:.4f} (band 1/3+-0.02: {in_band}); "
           f"masses {[round(m, 4) for m in masses]} monotone within 3 sigma: {monotone}")
    assert monotone, masses
    assert in_band, f"single-vertex mass {final:.4f} outside 1/3 +- 0.02"


def test_centerpoint_bound_on_random_regions(report):
    worst = {}
    for kind in ("euclidean", "klein"):
        rows = centerpoint_bound_run(kind, instances=20, m=10 ** 5, seed=0)
        worst[kind] = min(r["depth"] for r in rows)
    ok = all(d >= 1 / 3 - 0.03 for d in worst.values())
    report(2, ok, "min depth over 20 regions: " +
           ", ".join(f"{k} {v:.4f}" for k, v in worst.items()) + f" (need >= {1 / 3 - 0.03:.4f})")
    assert ok


def test_euclidean_triangle_grunbaum(report):
    depth = euclidean_grunbaum_check(10 ** 5, seed=0, shape="triangle")
    cen = centroid_depth(10 ** 5, seed=0)
    ok = depth >= 1 / 3 and abs(cen - 4 / 9) <= 0.02
    report(3, ok, f"centerpoint depth {depth:.4f} (>= 1/3), centroid depth {cen:.4f} "
                  f"(4/9 +- 0.02)")
    assert ok


@pytest.mark.parametrize("label", ["euclidean-quadratic", "klein-fermat-weber"])
def test_stopping_rule_and_complexity(label, report):
    eps_list = [0.1, 0.03, 0.01]
    bundle = convergence_run(label, eps_list, seed=0)
    lo, hi = 0.5 / math.log(1.5), 2.0 / math.log(1.5)
    checks = []
    for r in bundle.rows:
        checks.append(r["termination"] == "volume_threshold"
                      and r["suboptimality"] <= r["eps"]
                      and r["cuts_used"] <= 3 * r["budget"])
    slope_ok = lo <= bundle.slope <= hi
    ok = all(checks) and slope_ok
    detail = "; ".join(f"eps={r['eps']}: {r['termination']}, cuts {r['cuts_used']}/"
                       f"{r['budget']}, gap {r['suboptimality']:.2e}" for r in bundle.rows)
    report(4, ok, f"{label}: {detail}; slope {bundle.slope:.3f} in [{lo:.3f}, {hi:.3f}]")
    assert ok


def _domain_samples(oracle, k, seed):
    c, R = oracle.domain
    return sample_region(oracle.manifold, FeasibleRegion(c, R), k, seed).points


def test_subgradient_inequality_and_log_det_gradient(report):
    worst = {}
    for idx, oracle in enumerate(builtin_oracles()):
        M = oracle.manifold
        xs = _domain_samples(oracle, 1000, 100 + idx)
        ys = _domain_samples(oracle, 1000, 200 + idx)
        slack = math.inf
        for x, y in zip(xs, ys):
            lhs = oracle.evaluate(y)
            rhs = oracle.evaluate(x) + float(M.inner(x, oracle.subgrad(x), M.log(x, y)))
            slack = min(slack, lhs - rhs)
        worst[oracle.name] = slack
    ineq_ok = all(s >= -1e-8 for s in worst.values())

    S = SPD(2)
    logdet = builtin_oracles()[3]
    rng = np.random.default_rng(5)
    rel = 0.0
    for _ in range(100):
        X = S.random_point(rng, 1.0)
        V = S.random_tangent(rng, X)
        h = 1e-5
        fd = (logdet.evaluate(S.exp(X, h * V)) - logdet.evaluate(S.exp(X, -h * V))) / (2 * h)
        an = float(S.inner(X, logdet.subgrad(X), V))
        rel = max(rel, abs(fd - an) / max(abs(an), 1e-12))
    fd_ok = rel <= 1e-5
    report(5, ineq_ok and fd_ok,
           "min slack " + ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
           + f"; log-det finite-difference max rel err {rel:.2e}")
    assert ineq_ok and fd_ok


def test_geometry_kernel(report):
    rng = np.random.default_rng(6)
    worst_rt = 0.0
    for M in (Euclidean(2), KleinHyperbolic(2), SPD(2), KleinHyperbolic(3), SPD(3)):
        for _ in range(1000):
            x = M.random_point(rng, 1.5)
            v = M.random_tangent(rng, x, rng.uniform(0.05, 2.0))
            w = M.log(x, M.exp(x, v))
            worst_rt = max(worst_rt, float(M.norm(x, w - v)) / float(M.norm(x, v)))
    K = KleinHyperbolic(2)
    straight = 0.0
    for _ in range(1000):
        x, y = K.random_point(rng, 2.0), K.random_point(rng, 2.0)
        d = (y - x) / np.linalg.norm(y - x)
        pts = K.geodesic(x, y, np.linspace(0, 1, 9)) - x
        straight = max(straight, float(np.max(np.abs(pts[:, 0] * d[1] - pts[:, 1] * d[0]))))
    region = FeasibleRegion(np.zeros(2), 1.0)
    vol, se = estimate_volume(K, region, 10 ** 5, 0, proposal_for(K, region, "chart"))
    exact = 2 * math.pi * (math.cosh(1.0) - 1.0)
    vol_ok = abs(vol - exact) <= 3 * se and vol >= math.pi
    ok = worst_rt <= 1e-9 and straight <= 1e-9 and vol_ok
    report(6, ok, f"roundtrip rel err {worst_rt:.1e}, chart-straightness {straight:.1e}, "
                  f"ball volume {vol:.4f} +- {se:.4f} vs {exact:.4f} (>= pi)")
    assert ok


def test_quasiconvexity_probe(report):
    passed = {}
    for kind in ("euclidean", "klein"):
        rows = quasiconvexity_run(kind, instances=50, m=10 ** 5, k=9, seed=0)
        passed[kind] = sum(r["passed"] for r in rows)
    ok = all(v == 50 for v in passed.values())
    report(7, ok, "segments passing: " + ", ".join(f"{k} {v}/50" for k, v in passed.items()))
    assert ok

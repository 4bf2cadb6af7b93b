import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from centercut.cuts import (FeasibleRegion, HalfspaceCut, ZeroSubgradient, chart_halfspace,
                            cut_from_subgradient, halfspace_contains, region_contains, separate)
from centercut.manifold import SPD, Euclidean, KleinHyperbolic, make_manifold
from centercut.optimizer import squared_distance
from centercut.sampling import sample_region

seeds = st.integers(0, 2 ** 32 - 1)


def test_membership_is_strict():
    E = Euclidean(2)
    cut = HalfspaceCut.make(E, np.zeros(2), [1.0, 0.0])
    assert not halfspace_contains(E, cut, np.array([0.0, 5.0]))
    assert halfspace_contains(E, cut, np.array([-1e-9, 5.0]))
    assert not halfspace_contains(E, cut, np.array([1e-9, 5.0]))


def test_normal_is_normalized_and_symmetrized():
    S = SPD(2)
    X = np.array([[2.0, 0.1], [0.1, 1.0]])
    cut = HalfspaceCut.make(S, X, np.array([[1.0, 2.0], [0.0, 1.0]]))
    assert np.allclose(cut.normal, cut.normal.T)
    assert float(S.norm(X, cut.normal)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        HalfspaceCut.make(S, X, np.zeros((2, 2)))


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(["euclidean", "klein"]), seeds)
def test_halfspaces_are_chart_halfspaces(kind, seed):
    M = make_manifold(kind, 3)
    rng = np.random.default_rng(seed)
    x = M.random_point(rng, 2.0)
    cut = HalfspaceCut.make(M, x, M.random_tangent(rng, x))
    a, b = cut.linear_constraint(M)
    ys = np.array([M.random_point(rng, 3.0) for _ in range(50)])
    lin = ys @ a < b
    gap = np.abs(ys @ a - b) > 1e-9 * (1 + np.abs(b))
    assert np.array_equal(halfspace_contains(M, cut, ys)[gap], lin[gap])


def test_chart_halfspace_roundtrip(rng):
    K = KleinHyperbolic(2)
    cut = chart_halfspace(K, [1.0, 2.0], 0.4)
    a, b = cut.linear_constraint(K)
    ratio = a / np.array([1.0, 2.0])
    assert np.allclose(ratio, ratio[0]) and ratio[0] > 0
    assert b / ratio[0] == pytest.approx(0.4)
    with pytest.raises(TypeError):
        chart_halfspace(SPD(2), [1, 0, 0], 0.0)


@pytest.mark.parametrize("kind", ["euclidean", "klein", "spd"])
def test_separating_halfspace_misses_the_ball(kind, rng):
    M = make_manifold(kind, 2)
    for trial in range(10):
        c = M.random_point(rng, 1.0)
        R = rng.uniform(0.2, 0.8)
        p = M.exp(c, M.random_tangent(rng, c, R * rng.uniform(1.05, 3.0)))
        cut = separate(M, c, R, p)
        ball = sample_region(M, FeasibleRegion(c, R), 5000, trial).points
        assert not np.any(halfspace_contains(M, cut, ball))


def test_separate_rejects_points_inside():
    E = Euclidean(2)
    with pytest.raises(ValueError):
        separate(E, np.zeros(2), 1.0, np.array([0.5, 0.0]))


def test_subgradient_cut_keeps_the_minimizer(manifold, rng):
    M = manifold
    p = M.random_point(rng, 1.0)
    oracle = squared_distance(M, p)
    for _ in range(20):
        x = M.random_point(rng, 2.0)
        cut = cut_from_subgradient(M, oracle, x)
        # the minimizer lies strictly inside, at angle pi from the subgradient
        assert halfspace_contains(M, cut, p)
    with pytest.raises(ZeroSubgradient) as info:
        cut_from_subgradient(M, oracle, p)
    assert np.allclose(info.value.point, p)


def test_region_membership(rng):
    K = KleinHyperbolic(2)
    region = FeasibleRegion(np.zeros(2), 1.0, (chart_halfspace(K, [1.0, 0.0], 0.0),))
    assert region.contains(K, np.array([-0.3, 0.0]))
    assert not region.contains(K, np.array([0.3, 0.0]))
    assert not region.contains(K, np.array([-0.9, 0.0]))
    pts = rng.uniform(-0.9, 0.9, size=(1000, 2))
    pts = pts[K.is_valid(pts)]
    expect = (K.dist(np.zeros(2), pts) < 1.0) & (pts[:, 0] < 0)
    assert np.array_equal(region_contains(K, region, pts), expect)


def test_region_radius_validation():
    with pytest.raises(ValueError):
        FeasibleRegion(np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        FeasibleRegion(np.zeros(2), float("inf"))


@pytest.mark.parametrize("kind", ["euclidean", "klein", "spd"])
def test_region_record_roundtrip(kind, rng):
    M = make_manifold(kind, 2)
    c = M.random_point(rng, 0.5)
    region = FeasibleRegion(c, 0.7)
    for _ in range(3):
        x = M.random_point(rng, 0.5)
        region = region.with_cut(HalfspaceCut.make(M, x, M.random_tangent(rng, x)))
    M2, back = FeasibleRegion.from_record(json.loads(region.dumps(M)))
    assert M2 == M
    assert back.radius == region.radius and len(back.cuts) == 3
    pts = M.random_point(rng, 1.0)[None]
    pts = np.concatenate([pts, [M.random_point(rng, 1.0) for _ in range(200)]])
    assert np.array_equal(region_contains(M, region, pts), region_contains(M, back, pts))
    assert back.dumps(M) == region.dumps(M)


def test_region_record_version_check():
    rec = FeasibleRegion(np.zeros(2), 1.0).to_record(Euclidean(2))
    rec["schema_version"] = 99
    with pytest.raises(ValueError):
        FeasibleRegion.from_record(rec)

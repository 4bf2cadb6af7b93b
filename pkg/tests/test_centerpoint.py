import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import sqrtm

from centercut.centerpoint import (NonConvergenceError, centrality, depth_profile,
                                   find_centerpoint, karcher_mean, quasiconvexity_probe)
from centercut.cuts import FeasibleRegion
from centercut.experiments import euclidean_triangle
from centercut.manifold import SPD, Euclidean, KleinHyperbolic
from centercut.sampling import sample_region


@pytest.fixture(scope="module")
def triangle_samples():
    E, region = euclidean_triangle()
    return E, sample_region(E, region, 100000, 21)


def _brute_force_depth(W, k=20000):
    # heaviest open half-plane over a dense set of directions plus the
    # critical directions just beside every sample direction
    t = np.linspace(0, 2 * np.pi, k, endpoint=False)
    ang = np.arctan2(W[:, 1], W[:, 0])
    crit = np.concatenate([ang + np.pi / 2 + 1e-9, ang - np.pi / 2 - 1e-9])
    t = np.concatenate([t, crit])
    dirs = np.stack([np.cos(t), np.sin(t)], axis=1)
    counts = np.count_nonzero(W @ dirs.T < 0, axis=0)
    return counts.max()


@settings(max_examples=40)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 60))
def test_sweep_matches_brute_force(seed, m):
    rng = np.random.default_rng(seed)
    E = Euclidean(2)
    W = rng.standard_normal((m, 2))
    est = centrality(E, np.zeros(2), W, method="sweep")
    best = _brute_force_depth(W)
    assert round(est.g_value * m) == best
    # the returned direction attains the reported mass
    assert np.count_nonzero(W @ est.worst_direction < 0) == best


def test_triangle_centroid_depth_is_four_ninths(triangle_samples):
    E, s = triangle_samples
    est = centrality(E, np.array([1 / 3, 1 / 3]), s)
    assert abs(est.depth - 4 / 9) <= 0.02
    # the heaviest halfspace is bounded by a line parallel to an edge
    w = est.worst_direction / np.linalg.norm(est.worst_direction)
    edges = np.array([[1, 0], [0, 1], [1, 1]]) / np.array([[1], [1], [math.sqrt(2)]])
    assert np.max(np.abs(edges @ w)) > 0.99


def test_vertex_has_zero_depth(triangle_samples):
    E, s = triangle_samples
    assert centrality(E, np.zeros(2), s).depth == 0.0


def test_direction_search_agrees_with_sweep(triangle_samples):
    E, s = triangle_samples
    y = np.array([0.3, 0.3])
    exact = centrality(E, y, s.points[:20000], method="sweep").depth
    approx = centrality(E, y, s.points[:20000], method="directions", directions=10000).depth
    assert exact <= approx <= exact + 0.005


def test_more_directions_never_raise_depth():
    K = KleinHyperbolic(3)
    s = sample_region(K, FeasibleRegion(np.zeros(3), 1.0), 5000, 1)
    y = np.array([0.1, -0.2, 0.05])
    depths = [centrality(K, y, s, directions=d, seed=4).depth for d in (16, 128, 1024, 4096)]
    assert all(a >= b for a, b in zip(depths, depths[1:]))


def test_depth_is_invariant_under_spd_congruence():
    S = SPD(2)
    rng = np.random.default_rng(0)
    pts = np.array([S.random_point(rng, 1.0) for _ in range(300)])
    y = S.random_point(rng, 0.3)
    A = np.array([[1.5, 0.2], [-0.4, 0.9]])
    moved = A @ pts @ A.T
    d0 = centrality(S, y, pts, seed=1).depth
    d1 = centrality(S, A @ y @ A.T, moved, seed=1).depth
    assert d0 == pytest.approx(d1, abs=0.02)


def test_karcher_mean_euclidean_is_arithmetic_mean(rng):
    pts = rng.standard_normal((200, 3))
    assert np.allclose(karcher_mean(Euclidean(3), pts), pts.mean(axis=0), atol=1e-12)


def test_karcher_mean_of_symmetric_klein_points_is_origin():
    K = KleinHyperbolic(2)
    a = 2 * np.pi * np.arange(5) / 5 + 0.3
    pts = 0.7 * np.stack([np.cos(a), np.sin(a)], axis=1)
    assert np.allclose(karcher_mean(K, pts), 0.0, atol=1e-9)


def test_karcher_mean_of_two_spd_matrices_is_geodesic_midpoint():
    S = SPD(2)
    X = np.array([[2.0, 0.5], [0.5, 1.0]])
    Y = np.array([[1.0, -0.2], [-0.2, 3.0]])
    Xh = sqrtm(X).real
    Xih = np.linalg.inv(Xh)
    mid = Xh @ sqrtm(Xih @ Y @ Xih).real @ Xh
    assert np.allclose(karcher_mean(S, np.stack([X, Y])), mid, atol=1e-8)


def test_karcher_mean_reports_non_convergence():
    K = KleinHyperbolic(2)
    pts = np.array([[0.9, 0.0], [-0.9, 0.0], [0.0, 0.9]])
    with pytest.raises(NonConvergenceError) as info:
        karcher_mean(K, pts, max_iter=1, tol=1e-300)
    assert K.is_valid(info.value.last)


def test_find_centerpoint_reaches_the_bound(triangle_samples):
    E, s = triangle_samples
    point, est = find_centerpoint(E, s.points[:20000], seed=3)
    assert est.depth >= 1 / 3
    km = karcher_mean(E, s.points[:20000])
    assert est.depth >= centrality(E, km, s.points[:20000]).depth


def test_find_centerpoint_on_spd():
    S = SPD(2)
    s = sample_region(S, FeasibleRegion(np.eye(2), 0.5), 4000, 2)
    point, est = find_centerpoint(S, s, seed=0)
    assert S.is_valid(point)
    assert est.depth >= 1 / 4 - 0.05


def test_quasiconvexity_probe(triangle_samples):
    E, s = triangle_samples
    ok, values = quasiconvexity_probe(E, s.points[:20000], [0.05, 0.05], [0.6, 0.3],
                                      return_values=True)
    assert ok and len(values) == 11
    with pytest.raises(TypeError):
        quasiconvexity_probe(SPD(2), np.eye(2)[None], np.eye(2), np.eye(2))


def test_depth_profile_csv(tmp_path, triangle_samples):
    E, s = triangle_samples
    grid = np.array([[0.2, 0.2], [1 / 3, 1 / 3], [0.9, 0.9]])
    rows = depth_profile(E, s.points[:5000], grid, path=tmp_path / "d.csv")
    text = (tmp_path / "d.csv").read_text().splitlines()
    assert text[0] == "# schema_version=1 manifold=euclidean n=2"
    assert text[1] == "x0,x1,g_value"
    assert rows[1][1] < rows[0][1] < rows[2][1]


def test_empty_samples_rejected():
    with pytest.raises(ValueError):
        centrality(Euclidean(2), np.zeros(2), np.empty((0, 2)))

"""Reproducible experiments: sharpness of the 1/(n+1) centerpoint level,
the planar Grünbaum check, and convergence studies of the cutting-plane
method.  Each returns plain rows (lists of dicts) and can write CSV."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .centerpoint import centrality, find_centerpoint, quasiconvexity_probe
from .cuts import FeasibleRegion, HalfspaceCut, chart_halfspace
from .manifold import SPD, Euclidean, KleinHyperbolic, make_manifold
from .optimizer import (OptimizerConfig, builtin_oracles, fermat_weber, log_det, max_distance,
                        minimize, projected_descent, squared_distance)
from .sampling import CSV_SCHEMA_VERSION, empirical_mass, mass_stderr, sample_region

__all__ = [
    "SharpnessConfig",
    "simplex_vertices",
    "build_truncated_simplex",
    "vertex_halfspaces",
    "sharpness_run",
    "ideal_triangle_halfspace_area",
    "euclidean_grunbaum_check",
    "euclidean_triangle",
    "random_region",
    "centerpoint_bound_run",
    "quasiconvexity_run",
    "convergence_run",
    "ConvergenceBundle",
    "write_rows",
    "substream",
]


def substream(seed, name):
    """Named, deterministic child seed of a master seed."""
    words = [int(seed)] + [ord(ch) for ch in name]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def write_rows(path, rows):
    """CSV with a schema-version comment line; float cells use ``repr``."""
    if not rows:
        raise ValueError("nothing to write")
    keys = list(rows[0])
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version={CSV_SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for r in rows:
            w.writerow([repr(r[k]) if isinstance(r[k], float) else r[k] for k in keys])


@dataclass
class SharpnessConfig:
    n: int = 2
    delta: float = 0.05
    eps_list: tuple = (0.1, 0.05, 0.02, 0.01, 0.005)
    m: int = 10 ** 6
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("the simplex construction needs n >= 2")
        if not self.delta > 0:
            raise ValueError("delta must be positive (vertices outside the unit ball)")
        # inradius of T(1 + delta) is (1 + delta) / n; B(1) must not be inscribed
        if not (1.0 + self.delta) / self.n < 1.0:
            raise ValueError(f"delta={self.delta} too large: the unit ball fits inside the simplex")
        for eps in self.eps_list:
            if not 0.0 < eps < 1.0:
                raise ValueError(f"truncation eps must lie in (0, 1), got {eps}")
        if self.m < 1:
            raise ValueError("sample count must be positive")


def simplex_vertices(n, circumradius=1.0):
    """Vertices of a regular n-simplex centred at the origin, first vertex on +e1."""
    if n == 2:
        a = 2 * np.pi * np.arange(3) / 3
        return circumradius * np.stack([np.cos(a), np.sin(a)], axis=1)
    E = np.eye(n + 1) - 1.0 / (n + 1)
    # orthonormal basis of the sum-zero hyperplane, rotated so vertex 0 is +e1
    q, _ = np.linalg.qr(E[:, :n])
    V = E @ q
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    u = V[0]
    h = u - np.eye(n)[0]
    if np.linalg.norm(h) > 1e-12:
        h /= np.linalg.norm(h)
        V = V - 2.0 * np.outer(V @ h, h)
    return circumradius * V


def build_truncated_simplex(cfg, eps):
    """``S_eps = T(1 + delta) cap B(1 - eps)`` in the Klein model.

    Facets are chart hyperplanes at distance ``(1 + delta) / n`` from the
    origin; the ball is the geodesic ball of radius ``artanh(1 - eps)``.
    Returns ``(manifold, region)``.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"truncation eps must lie in (0, 1), got {eps}")
    K = KleinHyperbolic(cfg.n)
    verts = simplex_vertices(cfg.n)
    inr = (1.0 + cfg.delta) / cfg.n
    cuts = tuple(chart_halfspace(K, -v, inr) for v in verts)
    return K, FeasibleRegion(np.zeros(cfg.n), math.atanh(1.0 - eps), cuts)


def vertex_halfspaces(K):
    """The n+1 halfspaces through the origin parallel to a facet, each holding
    one vertex: ``{x : x . v_i > 0}``."""
    return [HalfspaceCut.make(K, np.zeros(K.n), -v) for v in simplex_vertices(K.n)]


def sharpness_run(cfg):
    """Volume and single-vertex halfspace masses of ``S_eps`` per truncation.

    Rows are sorted by decreasing ``eps``.
    """
    rows = []
    for eps in sorted(cfg.eps_list, reverse=True):
        K, region = build_truncated_simplex(cfg, eps)
        samples = sample_region(K, region, cfg.m, substream(cfg.seed, f"sharpness-{eps!r}"))
        masses = [empirical_mass(K, h, samples) for h in vertex_halfspaces(K)]
        row = {
            "eps": float(eps),
            "vol_estimate": float(samples.volume),
            "vol_stderr": float(samples.volume_stderr),
            "mass_single_vertex_halfspace": masses[0],
            "mass_stderr": mass_stderr(masses[0], cfg.m),
        }
        for i, mass in enumerate(masses):
            row[f"mass_vertex_{i}"] = mass
        rows.append(row)
    return rows


def ideal_triangle_halfspace_area():
    """Hyperbolic area of the part of the ideal triangle T(1) on the vertex
    side of a line through the origin parallel to the opposite edge.

    The piece is a triangle with one ideal vertex and two finite vertices of
    interior angle ``arccos(1/sqrt 3)``, so Gauss-Bonnet gives
    ``pi - 2 arccos(1/sqrt 3)`` (~1.2310); the remainder has area
    ``pi`` minus that.
    """
    single = math.pi - 2.0 * math.acos(1.0 / math.sqrt(3.0))
    return single, math.pi - single


def euclidean_triangle():
    """Right triangle (0,0), (1,0), (0,1) as a feasible region of the plane."""
    E = Euclidean(2)
    cuts = (chart_halfspace(E, [-1.0, 0.0], 0.0),
            chart_halfspace(E, [0.0, -1.0], 0.0),
            chart_halfspace(E, [1.0, 1.0], 1.0))
    return E, FeasibleRegion(np.array([0.5, 0.5]), 0.75, cuts)


def euclidean_square():
    E = Euclidean(2)
    cuts = tuple(chart_halfspace(E, a, 0.5) for a in ([1, 0], [-1, 0], [0, 1], [0, -1]))
    return E, FeasibleRegion(np.zeros(2), 0.75, cuts)


def euclidean_grunbaum_check(m=10 ** 5, seed=0, shape="triangle", budget=16):
    """Depth reached by :func:`find_centerpoint` on a uniform planar shape."""
    E, region = euclidean_triangle() if shape == "triangle" else euclidean_square()
    samples = sample_region(E, region, m, substream(seed, "grunbaum-samples"))
    _, est = find_centerpoint(E, samples, budget=budget, seed=substream(seed, "grunbaum-search"))
    return est.depth


def centroid_depth(m=10 ** 5, seed=0):
    E, region = euclidean_triangle()
    samples = sample_region(E, region, m, substream(seed, "grunbaum-samples"))
    return centrality(E, np.array([1.0, 1.0]) / 3.0, samples).depth


def random_region(M, seed, max_cuts=3):
    """Seeded random region: a geodesic ball with 0 to ``max_cuts`` cuts.

    Each cut is based at a point of the current region, so the result always
    has positive volume.
    """
    rng = np.random.default_rng(seed)
    center = M.random_point(rng, scale=0.3)
    region = FeasibleRegion(center, float(rng.uniform(0.5, 1.5)))
    for j in range(int(rng.integers(0, max_cuts + 1))):
        base = sample_region(M, region, 1, int(rng.integers(2 ** 32))).points[0]
        normal = M.random_tangent(rng, base)
        region = region.with_cut(HalfspaceCut.make(M, base, normal))
    return region


def centerpoint_bound_run(kind, instances=20, m=10 ** 5, seed=0, budget=16):
    """Depth returned by :func:`find_centerpoint` on seeded random regions."""
    M = make_manifold(kind, 2)
    rows = []
    for i in range(instances):
        region = random_region(M, substream(seed, f"{kind}-region-{i}"))
        samples = sample_region(M, region, m, substream(seed, f"{kind}-samples-{i}"))
        _, est = find_centerpoint(M, samples, budget=budget,
                                  seed=substream(seed, f"{kind}-search-{i}"))
        rows.append({"instance": i, "cuts": len(region.cuts), "depth": float(est.depth)})
    return rows


def quasiconvexity_run(kind, instances=50, m=10 ** 5, k=9, seed=0):
    """Quasi-convexity probe on seeded random regions; the segment endpoints
    are two sample points of the region."""
    M = make_manifold(kind, 2)
    rows = []
    for i in range(instances):
        region = random_region(M, substream(seed, f"{kind}-qc-region-{i}"))
        samples = sample_region(M, region, m, substream(seed, f"{kind}-qc-samples-{i}"))
        rng = np.random.default_rng(substream(seed, f"{kind}-qc-ends-{i}"))
        a, b = rng.choice(m, size=2, replace=False)
        ok, values = quasiconvexity_probe(M, samples, samples.points[a], samples.points[b], k=k,
                                          return_values=True)
        rows.append({"instance": i, "passed": ok, "max_interior": max(values[1:-1]),
                     "endpoint_max": max(values[0], values[-1])})
    return rows


PROBLEMS = {
    "euclidean-quadratic": 0,
    "klein-fermat-weber": 1,
    "klein-max-distance": 2,
    "spd-logdet": 3,
}


DEFAULT_PROBLEM = {
    "euclidean": "euclidean-quadratic",
    "klein": "klein-fermat-weber",
    "spd": "spd-logdet",
}


def make_oracle(label, n=2):
    """Built-in problem ``label`` in dimension ``n`` (``n`` is the matrix size
    for SPD).  ``n = 2`` gives exactly the :func:`builtin_oracles` instances."""
    if label not in PROBLEMS:
        raise ValueError(f"unknown problem {label!r}; choose from {sorted(PROBLEMS)}")
    if n == 2:
        return builtin_oracles()[PROBLEMS[label]]
    if label == "euclidean-quadratic":
        E = Euclidean(n)
        p = np.zeros(n)
        p[:2] = [0.3, 0.2] if n > 1 else [0.3]
        return squared_distance(E, p, domain=(np.zeros(n), 1.0))
    if label == "spd-logdet":
        S = SPD(n)
        A = np.eye(n) + 0.3 * np.tril(np.ones((n, n)), -1) - 0.2 * np.triu(np.ones((n, n)), 1)
        return log_det(S, [np.eye(n), A], domain=(np.eye(n), 0.3))
    K = KleinHyperbolic(n)
    pts = 0.5 * simplex_vertices(n) if n >= 2 else np.array([[0.5], [-0.5]])
    if label == "klein-fermat-weber":
        return fermat_weber(K, pts, domain=(np.zeros(n), 1.0), minimizer=np.zeros(n))
    return max_distance(K, pts, domain=(np.zeros(n), 1.0))


def problem(label, n=2):
    """``(oracle, region, f_star)`` for a named built-in problem."""
    oracle = make_oracle(label, n)
    M = oracle.manifold
    region = FeasibleRegion(*oracle.domain)
    if oracle.minimum is not None:
        f_star = oracle.minimum
    elif label == "spd-logdet":
        f_star = projected_descent(M, oracle, *oracle.domain)[1]
    elif label == "klein-max-distance":
        # symmetric configuration: the origin minimizes the max distance
        f_star = oracle.evaluate(np.zeros(M.n))
    else:
        f_star = None
    return oracle, region, f_star


@dataclass
class ConvergenceBundle:
    problem: str
    rows: list = field(default_factory=list)
    slope: float = math.nan
    traces: dict = field(default_factory=dict)

    def write(self, out_dir):
        from pathlib import Path

        out = Path(out_dir)
        write_rows(out / f"convergence_{self.problem}.csv", self.rows)
        oracle = builtin_oracles()[PROBLEMS[self.problem]]
        for eps, tr in self.traces.items():
            tr.write_jsonl(out / f"trace_{self.problem}_eps{eps!r}.jsonl", oracle.manifold)


def convergence_run(label, eps_list, config=None, seed=0):
    """Cut counts and suboptimality per ``eps``; fits cuts against log(1/eps)."""
    oracle, region, f_star = problem(label)
    M = oracle.manifold
    bundle = ConvergenceBundle(label)
    for eps in eps_list:
        base = config or OptimizerConfig()
        cfg = OptimizerConfig(**{**base.__dict__, "seed": substream(seed, f"{label}-{eps!r}")})
        tr = minimize(M, oracle, region, eps, cfg)
        bundle.traces[eps] = tr
        bundle.rows.append({
            "eps": float(eps),
            "cuts_used": tr.cuts_used,
            "budget": tr.budget,
            "termination": tr.termination,
            "best_value": float(tr.best_value),
            "f_star": math.nan if f_star is None else float(f_star),
            "suboptimality": math.nan if f_star is None else float(tr.best_value - f_star),
        })
    if len(eps_list) >= 2:
        x = np.log(1.0 / np.asarray(eps_list, dtype=float))
        y = np.array([r["cuts_used"] for r in bundle.rows], dtype=float)
        bundle.slope = float(np.polyfit(x, y, 1)[0])
    return bundle

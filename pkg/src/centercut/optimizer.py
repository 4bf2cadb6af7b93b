"""Centerpoint cutting-plane minimization of geodesically convex functions.

Each iteration samples the current feasible region, queries the subgradient
oracle at an approximate centerpoint ``c`` and keeps ``H_c(w)``.  The run
stops once the Monte Carlo volume of the region (plus three standard errors)
drops below ``(eps / L)^n / n^n``; at that point one of the queried points is
``eps``-optimal provided the minimizer sits ``eps``-deep inside the initial
ball.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .centerpoint import find_centerpoint
from .cuts import FeasibleRegion, ZeroSubgradient, cut_from_subgradient, halfspace_contains
from .manifold import SPD, Euclidean, KleinHyperbolic
from .sampling import (CSV_SCHEMA_VERSION, DegenerateRegionError, empirical_mass, estimate_volume,
                       proposal_for, sample_region)

log = logging.getLogger(__name__)

TRACE_SCHEMA_VERSION = 1


@dataclass
class SubgradientOracle:
    """A convex function with a subgradient map and a Lipschitz constant.

    ``domain`` is an optional ``(center, radius)`` geodesic ball on which the
    Lipschitz constant holds; ``minimizer``/``minimum`` are filled in when
    known in closed form.
    """

    name: str
    manifold: object
    evaluate: Callable
    subgrad: Callable
    lipschitz: float
    domain: Optional[tuple] = None
    minimizer: Optional[np.ndarray] = None
    minimum: Optional[float] = None


def squared_distance(M, p, domain=None):
    """``f(x) = d(x, p)^2`` with subgradient ``-2 log_x(p)``."""
    p = M.check(p)
    L = math.inf
    if domain is not None:
        L = 2.0 * (float(M.dist(domain[0], p)) + domain[1])
    return SubgradientOracle(
        "squared-distance", M,
        lambda x: float(M.dist(x, p)) ** 2,
        lambda x: -2.0 * M.log(x, p),
        L, domain, p, 0.0)


def fermat_weber(M, points, domain=None, minimizer=None):
    """``f(x) = sum_i d(x, p_i)``; 1-Lipschitz per term.

    At ``x = p_i`` that term's unit vector is undefined and is dropped, which
    still leaves a valid subgradient.
    """
    pts = M.check(points)

    def f(x):
        return float(np.sum(M.dist(x, pts)))

    def grad(x):
        d = M.dist(x, pts)
        logs = M.log(x, pts)
        keep = d > 0
        shape = (-1,) + (1,) * (logs.ndim - 1)
        return -np.sum(logs[keep] / d[keep].reshape(shape), axis=0)

    minimum = f(minimizer) if minimizer is not None else None
    return SubgradientOracle("fermat-weber", M, f, grad, float(len(pts)), domain,
                             minimizer, minimum)


def max_distance(M, points, domain=None):
    """``f(x) = max_i d(x, p_i)``; subgradient from one active term."""
    pts = M.check(points)

    def f(x):
        return float(np.max(M.dist(x, pts)))

    def grad(x):
        d = M.dist(x, pts)
        i = int(np.argmax(d))
        if d[i] == 0.0:
            return np.zeros_like(np.asarray(x, dtype=float))
        return -M.log(x, pts[i]) / d[i]

    return SubgradientOracle("max-distance", M, f, grad, 1.0, domain)


def log_det(M, Bs, domain=None):
    """``f(X) = log det(sum_i B_i^T X B_i)`` on the SPD cone.

    Riemannian gradient ``X (sum_i B_i S^-1 B_i^T) X`` with
    ``S = sum_i B_i^T X B_i``.  Its metric norm is the Frobenius norm of a PSD
    matrix of trace ``n``, so ``L = n`` everywhere.
    """
    if M.kind != "spd":
        raise TypeError("log-det objective lives on the SPD manifold")
    Bs = [np.asarray(B, dtype=float) for B in Bs]

    def S_of(X):
        return sum(B.T @ X @ B for B in Bs)

    def f(X):
        sign, val = np.linalg.slogdet(S_of(np.asarray(X, dtype=float)))
        return float(val) if sign > 0 else math.inf

    def grad(X):
        X = np.asarray(X, dtype=float)
        Si = np.linalg.inv(S_of(X))
        G = X @ sum(B @ Si @ B.T for B in Bs) @ X
        return 0.5 * (G + G.T)

    return SubgradientOracle("log-det", M, f, grad, float(M.n), domain)


def builtin_oracles():
    """Default test problems, one per built-in objective family."""
    E = Euclidean(2)
    K = KleinHyperbolic(2)
    S = SPD(2)
    angles = np.pi / 2 + 2 * np.pi * np.arange(3) / 3
    tri = 0.5 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    A = np.array([[1.0, 0.5], [-0.3, 0.8]])
    return [
        squared_distance(E, np.array([0.3, 0.2]), domain=(np.zeros(2), 1.0)),
        fermat_weber(K, tri, domain=(np.zeros(2), 1.0), minimizer=np.zeros(2)),
        max_distance(K, tri, domain=(np.zeros(2), 1.0)),
        log_det(S, [np.eye(2), A], domain=(np.eye(2), 0.3)),
    ]


def stopping_threshold(n, eps, L):
    """Volume below which some cut base is ``eps``-optimal: ``(eps/L)^n / n^n``."""
    if n < 1 or not eps > 0 or not L > 0:
        raise ValueError("need n >= 1, eps > 0 and L > 0")
    return (eps / L) ** n / n ** n


def iteration_budget(n, L, vol, eps):
    """Cuts needed at a guaranteed per-cut volume factor ``n/(n+1)``."""
    if not vol > 0:
        raise ValueError("volume must be positive")
    thr = stopping_threshold(n, eps, L)
    if vol < thr:
        return 0
    return int(math.ceil(math.log(vol / thr) / math.log((n + 1) / n)))


@dataclass
class OptimizerConfig:
    samples: int = 4096
    volume_samples: int = 100_000
    centerpoint_budget: int = 16
    directions: int = 2048
    max_cuts: Optional[int] = None
    seed: int = 0
    lipschitz: Optional[float] = None
    depth_margin: float = 0.05
    #: estimate the per-cut volume factor with this many extra samples (0: off)
    reduction_samples: int = 0


@dataclass
class Iterate:
    point: np.ndarray
    value: float
    depth: float
    volume: float
    volume_stderr: float
    flagged: bool = False
    reduction: Optional[float] = None


@dataclass
class OptimizerTrace:
    iterates: list = field(default_factory=list)
    best_point: Optional[np.ndarray] = None
    best_value: float = math.inf
    cuts_used: int = 0
    termination: str = "budget"
    threshold: float = math.nan
    budget: int = 0
    final_volume: float = math.nan
    final_volume_stderr: float = math.nan
    regions: list = field(default_factory=list)
    message: str = ""

    def records(self, M):
        for k, it in enumerate(self.iterates):
            yield {
                "schema_version": TRACE_SCHEMA_VERSION,
                "iteration": k,
                "point": M.flatten(it.point).tolist(),
                "value": it.value,
                "depth": it.depth,
                "volume": it.volume,
                "volume_stderr": it.volume_stderr,
                "flagged": it.flagged,
                "reduction": it.reduction,
            }

    def summary(self, M):
        return {
            "schema_version": TRACE_SCHEMA_VERSION,
            "termination": self.termination,
            "cuts_used": self.cuts_used,
            "budget": self.budget,
            "threshold": self.threshold,
            "best_value": self.best_value,
            "best_point": None if self.best_point is None else M.flatten(self.best_point).tolist(),
            "final_volume": self.final_volume,
            "final_volume_stderr": self.final_volume_stderr,
        }

    def write_jsonl(self, path, M):
        with open(path, "w") as fh:
            for rec in self.records(M):
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def write_csv(self, path, M):
        import csv

        with open(path, "w", newline="") as fh:
            fh.write(f"# schema_version={CSV_SCHEMA_VERSION}\n")
            w = csv.writer(fh, lineterminator="\n")
            s = self.summary(M)
            keys = [k for k in s if k != "schema_version"]
            w.writerow(keys)
            w.writerow([json.dumps(s[k]) if isinstance(s[k], list) else repr(s[k]) for k in keys])


def _seed(seed, *keys):
    return int(np.random.SeedSequence([int(seed), *keys]).generate_state(1)[0])


def _pca_axes(M, pts):
    flat = M.flatten(pts)
    if len(flat) < M.chart_dim + 1:
        return np.eye(M.chart_dim)
    _, vecs = np.linalg.eigh(np.cov(flat.T))
    return vecs


def minimize(M, oracle, region, eps, config=None, keep_regions=False):
    """Centerpoint cutting-plane method started from ``region`` (a geodesic
    ball, or a region carrying cuts from an earlier run).

    Returns an :class:`OptimizerTrace`; ``termination`` is one of
    ``volume_threshold``, ``budget``, ``zero_subgradient`` or ``degenerate``.
    """
    cfg = config or OptimizerConfig()
    if not eps > 0:
        raise ValueError("eps must be positive")
    L = cfg.lipschitz if cfg.lipschitz is not None else oracle.lipschitz
    if not (L > 0 and math.isfinite(L)):
        raise ValueError("a finite positive Lipschitz constant is required")
    n = M.dim
    trace = OptimizerTrace(threshold=stopping_threshold(n, eps, L))
    ball = FeasibleRegion(region.center, region.radius)
    vol0, _ = estimate_volume(M, ball, cfg.volume_samples, _seed(cfg.seed, 0, 0))
    trace.budget = iteration_budget(n, L, vol0, eps)
    max_cuts = cfg.max_cuts if cfg.max_cuts is not None else 3 * trace.budget
    target_depth = 1.0 / (n + 1) - cfg.depth_margin
    axes = None
    k = 0
    while True:
        if keep_regions:
            trace.regions.append(region)
        try:
            proposal = proposal_for(M, region, axes=axes)
            vol, se = estimate_volume(M, region, cfg.volume_samples, _seed(cfg.seed, k, 0), proposal)
        except DegenerateRegionError as exc:
            trace.termination, trace.message = "degenerate", str(exc)
            break
        trace.final_volume, trace.final_volume_stderr = vol, se
        if vol + 3.0 * se < trace.threshold:
            trace.termination = "volume_threshold"
            break
        if trace.cuts_used >= max_cuts:
            trace.termination = "budget"
            break
        try:
            samples = sample_region(M, region, cfg.samples, _seed(cfg.seed, k, 1), proposal)
        except DegenerateRegionError as exc:
            trace.termination, trace.message = "degenerate", str(exc)
            break
        c, est = find_centerpoint(M, samples, budget=cfg.centerpoint_budget,
                                  seed=_seed(cfg.seed, k, 2), directions=cfg.directions)
        value = float(oracle.evaluate(c))
        it = Iterate(c, value, est.depth, vol, se, flagged=est.depth < target_depth)
        trace.iterates.append(it)
        if it.flagged:
            log.warning("iteration %d: centerpoint depth %.3f below %.3f", k, est.depth, target_depth)
        if value < trace.best_value:
            trace.best_value, trace.best_point = value, c
        try:
            cut = cut_from_subgradient(M, oracle, c)
        except ZeroSubgradient:
            trace.termination = "zero_subgradient"
            break
        if cfg.reduction_samples:
            check = sample_region(M, region, cfg.reduction_samples, _seed(cfg.seed, k, 3), proposal)
            it.reduction = empirical_mass(M, cut, check)
        kept = samples.points[halfspace_contains(M, cut, samples.points)]
        axes = _pca_axes(M, kept) if M.chart_linear else None
        region = region.with_cut(cut)
        trace.cuts_used += 1
        k += 1
    if trace.best_point is None:
        trace.best_point = np.asarray(region.center, dtype=float)
        trace.best_value = float(oracle.evaluate(trace.best_point))
    return trace


def projected_descent(M, oracle, center, radius, tol=1e-12, max_iter=20_000):
    """Riemannian gradient descent with backtracking, projected onto the
    geodesic ball ``B(center, radius)`` along the radial geodesic.  An
    independent reference for smooth objectives."""
    def project(x):
        d = float(M.dist(center, x))
        if d <= radius:
            return x
        return M.exp(center, M.log(center, x) * (radius / d))

    x = np.asarray(center, dtype=float)
    fx = oracle.evaluate(x)
    step = 1.0
    for _ in range(max_iter):
        g = oracle.subgrad(x)
        while True:
            y = project(M.exp(x, -step * g))
            fy = oracle.evaluate(y)
            move = float(M.dist(x, y))
            if fy <= fx - 0.5 * move * move / step or move < 1e-15:
                break
            step *= 0.5
        if move < tol:
            return y, fy
        x, fx = y, fy
        step *= 2.0
    return x, fx

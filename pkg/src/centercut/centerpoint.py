"""Centrality (halfspace depth) and approximate centerpoint search.

The depth of ``y`` with respect to a sample set is computed in the tangent
space at ``y``: samples are mapped by ``log_y`` and expressed in a
metric-orthonormal basis, where a geodesic halfspace based at ``y`` is an
ordinary linear halfspace through the origin.  Depth is one minus the largest
fraction of samples found in an open halfspace.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .sampling import CSV_SCHEMA_VERSION, SampleSet, mass_stderr

__all__ = [
    "DepthEstimate",
    "NonConvergenceError",
    "centrality",
    "karcher_mean",
    "find_centerpoint",
    "quasiconvexity_probe",
    "depth_profile",
]

MAX_SAMPLE_DIRECTIONS = 512


@dataclass
class DepthEstimate:
    """``depth`` is the empirical centerpoint level; ``g_value = 1 - depth`` is
    the heaviest halfspace mass, attained by ``worst_direction`` (a unit
    tangent at the query point)."""

    depth: float
    worst_direction: np.ndarray
    g_value: float


class NonConvergenceError(RuntimeError):
    def __init__(self, message, last):
        super().__init__(message)
        self.last = last


def _points(samples):
    pts = samples.points if isinstance(samples, SampleSet) else np.asarray(samples, dtype=float)
    if len(pts) == 0:
        raise ValueError("empty sample set")
    return pts


def _sweep(W):
    """Exact heaviest open half-plane through the origin for 2-D vectors ``W``.

    Returns ``(count, normal)`` where ``normal`` is a unit vector and the
    half-plane is ``{w : w . normal < 0}``.
    """
    nz = np.any(W != 0.0, axis=1)
    theta = np.sort(np.arctan2(W[nz, 1], W[nz, 0]))
    k = len(theta)
    if k == 0:
        return 0, np.array([1.0, 0.0])
    ext = np.concatenate([theta, theta + 2.0 * np.pi])
    # points with angle in [theta_i, theta_i + pi)
    counts = np.searchsorted(ext, theta + np.pi, side="left") - np.arange(k)
    i = int(np.argmax(counts))
    count = int(counts[i])
    gap = theta[i] - (theta[i - 1] if i > 0 else theta[-1] - 2.0 * np.pi)
    last = ext[i + count - 1]
    # open arc (theta_i - eta, theta_i - eta + pi) holds exactly those points
    eta = 0.5 * min(gap if k > 1 else np.pi, np.pi - (last - theta[i]))
    mid = theta[i] - eta + 0.5 * np.pi
    return count, -np.array([math.cos(mid), math.sin(mid)])


def _direction_search(W, directions, seed):
    d = W.shape[1]
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((int(directions), d)) if directions else np.empty((0, d))
    norms = np.linalg.norm(W, axis=1)
    sample_dirs = W[norms > 0][:MAX_SAMPLE_DIRECTIONS]
    dirs = np.concatenate([dirs, sample_dirs], axis=0)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    best = -1
    best_dir = dirs[0]
    for start in range(0, len(dirs), 256):
        chunk = dirs[start:start + 256]
        counts = np.count_nonzero(W @ chunk.T < 0.0, axis=0)
        j = int(np.argmax(counts))
        if counts[j] > best:
            best = int(counts[j])
            best_dir = chunk[j]
    return best, best_dir


def centrality(M, y, samples, directions=2048, method="auto", seed=0):
    """Empirical depth of ``y``: ``1 - max_v fraction of samples in H_y(v)``.

    ``method="sweep"`` (2-D only) is exact; ``method="directions"`` maximizes
    over ``directions`` random unit directions plus the sample directions and
    so over-estimates depth.  ``"auto"`` sweeps when the manifold is 2-D.
    """
    pts = _points(samples)
    y = M.check(y)
    W = M.to_orthonormal(y, M.log(y, pts)).reshape(len(pts), -1)
    if method == "auto":
        method = "sweep" if W.shape[1] == 2 else "directions"
    if method == "sweep":
        if W.shape[1] != 2:
            raise ValueError("the exact sweep needs a 2-dimensional tangent space")
        count, normal = _sweep(W)
    elif method == "directions":
        count, normal = _direction_search(W, directions, seed)
    else:
        raise ValueError(f"unknown centrality method {method!r}")
    g = count / len(pts)
    return DepthEstimate(1.0 - g, M.from_orthonormal(y, normal), g)


def karcher_mean(M, samples, tol=1e-10, max_iter=500, init=None):
    """Intrinsic mean by the fixed-point iteration ``x <- exp_x(mean log_x p_i)``."""
    pts = _points(samples)
    x = M.check(pts[0] if init is None else init)
    if init is None and M.kind != "spd":
        x = np.mean(pts, axis=0)
        if not M.is_valid(x):
            x = pts[0]
    for _ in range(max_iter):
        step = np.mean(M.log(x, pts), axis=0)
        x_new = M.exp(x, step)
        if float(M.norm(x, step)) < tol:
            return x_new
        x = x_new
    raise NonConvergenceError(f"Karcher mean did not converge in {max_iter} iterations", x)


def _chart_diameter(M, pts):
    flat = M.flatten(pts)
    return float(np.linalg.norm(flat.max(axis=0) - flat.min(axis=0)))


def find_centerpoint(M, samples, budget=16, seed=0, directions=2048, halvings=6,
                     max_evals=400):
    """Best empirical centerpoint found by candidate screening and pattern search.

    Candidates are the Karcher mean and ``budget`` sample points; the best is
    refined by a chart-coordinate pattern search (moves against the heaviest
    halfspace normal and along the coordinate axes; initial step a tenth of
    the sample chart diameter, halved ``halvings`` times).  Returns
    ``(point, DepthEstimate)``; the depth is never below that of the Karcher
    mean.
    """
    pts = _points(samples)
    rng = np.random.default_rng(seed)
    km = karcher_mean(M, pts, tol=1e-8)
    km_flat = M.flatten(km)
    evals = 0

    def score(p):
        nonlocal evals
        evals += 1
        return centrality(M, p, pts, directions=directions, seed=seed + 1)

    def key(p, est):
        return (est.depth, -float(np.linalg.norm(M.flatten(p) - km_flat)))

    best, best_est = km, score(km)
    if budget > 0:
        for i in rng.choice(len(pts), size=min(budget, len(pts)), replace=False):
            est = score(pts[i])
            if key(pts[i], est) > key(best, best_est):
                best, best_est = pts[i], est

    step = 0.1 * _chart_diameter(M, pts)
    eye = np.eye(M.chart_dim)
    for _ in range(halvings + 1):
        improved = True
        while improved and evals < max_evals:
            improved = False
            w = -M.flatten(best_est.worst_direction)
            wn = np.linalg.norm(w)
            moves = ([w / wn] if wn > 0 else []) + list(eye) + list(-eye)
            base = M.flatten(best)
            for mv in moves:
                cand = M.unflatten(base + step * mv)
                if not M.is_valid(cand):
                    continue
                est = score(cand)
                if est.depth > best_est.depth:
                    best, best_est = cand, est
                    improved = True
                    break
        step *= 0.5
    return np.asarray(best, dtype=float), best_est


def quasiconvexity_probe(M, samples, y0, y1, k=9, return_values=False):
    """Check ``G(y_t) <= max(G(y0), G(y1)) + 3 sigma`` at ``k`` interior points
    of the chart segment from ``y0`` to ``y1``.

    Only meaningful where chart segments are geodesics (Euclidean, Klein).
    """
    if not M.chart_linear:
        raise TypeError("the probe needs chart-straight geodesics")
    pts = _points(samples)
    m = len(pts)
    y0 = M.check(y0)
    y1 = M.check(y1)
    g0 = centrality(M, y0, pts).g_value
    g1 = centrality(M, y1, pts).g_value
    top = max(g0, g1)
    limit = top + 3.0 * mass_stderr(top, m)
    values = []
    for t in np.arange(1, k + 1) / (k + 1):
        values.append(centrality(M, (1 - t) * y0 + t * y1, pts).g_value)
    ok = bool(all(v <= limit for v in values))
    return (ok, [g0, *values, g1]) if return_values else ok


def depth_profile(M, samples, grid, path=None):
    """``(point, g_value)`` rows over ``grid`` (chart points); optionally
    written as CSV."""
    pts = _points(samples)
    rows = []
    for p in np.asarray(grid, dtype=float):
        g = centrality(M, p, pts).g_value if M.is_valid(p) else float("nan")
        rows.append((M.flatten(p), g))
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# schema_version={CSV_SCHEMA_VERSION} manifold={M.kind} n={M.n}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{i}" for i in range(M.chart_dim)] + ["g_value"])
            for flat, g in rows:
                w.writerow([repr(float(v)) for v in flat] + [repr(float(g))])
    return rows

"""Geodesic halfspaces, feasible regions and separation.

A halfspace based at ``x`` with normal ``v`` is the image under ``exp_x`` of
the open tangent halfspace ``{w : <w, v>_x < 0}``; membership of ``y`` is
decided by the sign of ``<log_x(y), v>_x``.  On a Hadamard manifold these sets
need not be geodesically convex, but a subgradient ``v`` of a convex ``f`` at
``x`` always keeps the minimizer inside ``H_x(v)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .manifold import make_manifold

REGION_SCHEMA_VERSION = 1

# subgradients shorter than this (metric norm) count as zero
ZERO_SUBGRADIENT_TOL = 1e-14


class ZeroSubgradient(Exception):
    """The oracle returned a zero subgradient: ``point`` is a global minimizer."""

    def __init__(self, point, value=None):
        super().__init__("zero subgradient: the query point is a global minimizer")
        self.point = point
        self.value = value


@dataclass(frozen=True, eq=False)
class HalfspaceCut:
    """Open geodesic halfspace ``H_base(normal)``; ``normal`` has unit metric norm."""

    base: np.ndarray
    normal: np.ndarray

    @classmethod
    def make(cls, M, base, normal):
        base = M.check(base)
        normal = np.asarray(normal, dtype=float)
        if M.kind == "spd":
            normal = 0.5 * (normal + normal.T)
        nrm = float(M.norm(base, normal))
        if not np.isfinite(nrm) or nrm <= 0.0:
            raise ValueError("halfspace normal must be a nonzero tangent vector")
        return cls(base.copy(), normal / nrm)

    def linear_constraint(self, M):
        """Chart form ``a . y < b`` of the halfspace (chart-linear manifolds only)."""
        if not M.chart_linear:
            raise TypeError(f"{M!r} halfspaces are not chart-linear")
        a = M.metric_tensor(self.base) @ self.normal
        return a, float(a @ self.base)


def halfspace_contains(M, cut, y):
    """Whether ``y`` (a point or a batch) lies in the open halfspace ``cut``."""
    w = M.log(cut.base, y)
    return M.inner(cut.base, w, cut.normal) < 0.0


def chart_halfspace(M, a, b):
    """The geodesic halfspace whose chart image is ``{y : a . y < b}``.

    Valid for chart-linear manifolds (Euclidean, Klein), where a chart
    hyperplane through the base point is a geodesic hyperplane.  The base is
    the foot of the perpendicular from the chart origin.
    """
    if not M.chart_linear:
        raise TypeError(f"{M!r} halfspaces are not chart-linear")
    a = np.asarray(a, dtype=float)
    base = b * a / float(a @ a)
    return HalfspaceCut.make(M, base, M.metric_dual(base, a))


@dataclass(frozen=True, eq=False)
class FeasibleRegion:
    """Open geodesic ball intersected with a list of halfspace cuts."""

    center: np.ndarray
    radius: float
    cuts: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not (self.radius > 0 and np.isfinite(self.radius)):
            raise ValueError(f"ambient radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "cuts", tuple(self.cuts))

    def with_cut(self, cut):
        return FeasibleRegion(self.center, self.radius, self.cuts + (cut,))

    def contains(self, M, y):
        return region_contains(M, self, y)

    def to_record(self, M):
        return {
            "schema_version": REGION_SCHEMA_VERSION,
            "manifold": M.kind,
            "n": M.n,
            "center": np.asarray(self.center).tolist(),
            "radius": float(self.radius),
            "cuts": [
                {"base": np.asarray(c.base).tolist(), "normal": np.asarray(c.normal).tolist()}
                for c in self.cuts
            ],
        }

    @classmethod
    def from_record(cls, record):
        """Inverse of :meth:`to_record`; returns ``(manifold, region)``."""
        version = record.get("schema_version")
        if version != REGION_SCHEMA_VERSION:
            raise ValueError(f"unsupported region schema version {version!r}")
        M = make_manifold(record["manifold"], record["n"])
        cuts = tuple(
            HalfspaceCut(np.asarray(c["base"], dtype=float), np.asarray(c["normal"], dtype=float))
            for c in record["cuts"]
        )
        return M, cls(np.asarray(record["center"], dtype=float), float(record["radius"]), cuts)

    def dumps(self, M):
        return json.dumps(self.to_record(M), sort_keys=True)


def region_contains(M, region, y):
    """Ball membership and membership in every cut (batched over ``y``)."""
    y = np.asarray(y, dtype=float)
    inside = np.asarray(M.dist(region.center, y) < region.radius)
    if inside.ndim == 0:
        return bool(inside) and all(bool(halfspace_contains(M, c, y)) for c in region.cuts)
    # later cuts only see points that survived the earlier ones
    idx = np.flatnonzero(inside)
    for cut in region.cuts:
        if idx.size == 0:
            break
        idx = idx[halfspace_contains(M, cut, y[idx])]
    out = np.zeros(len(y), dtype=bool)
    out[idx] = True
    return out


def cut_from_subgradient(M, oracle, x):
    """Cut ``H_x(w)`` from a subgradient ``w`` of ``oracle`` at ``x``.

    Every point outside the returned halfspace has ``f >= f(x)``.  Raises
    :class:`ZeroSubgradient` when ``w`` vanishes.
    """
    w = np.asarray(oracle.subgrad(x), dtype=float)
    if float(M.norm(x, w)) <= ZERO_SUBGRADIENT_TOL:
        raise ZeroSubgradient(x)
    return HalfspaceCut.make(M, x, w)


def separate(M, ball_center, ball_radius, p):
    """A halfspace based at ``p`` that misses the closed ball ``B(center, radius)``.

    The normal points from ``p`` toward the ball center, so the halfspace
    opens away from the ball: for ``y`` in the ball the angle at ``p``
    between ``log_p(y)`` and ``log_p(center)`` is at most pi/2.
    """
    d = float(M.dist(ball_center, p))
    if not d > ball_radius:
        raise ValueError(f"point is not outside the ball (distance {d:.6g} <= {ball_radius:.6g})")
    return HalfspaceCut.make(M, p, M.log(p, ball_center))

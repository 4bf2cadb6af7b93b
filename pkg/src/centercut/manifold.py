"""Hadamard manifolds in a fixed global chart.

Three manifolds share one interface:

* :class:`Euclidean` -- flat ``R^n``.
* :class:`KleinHyperbolic` -- hyperbolic space ``H^n`` in the Klein (projective)
  ball model.  Geodesics are straight chords of the unit ball, which the
  halfspace and centrality code relies on.
* :class:`SPD` -- the cone of ``n x n`` symmetric positive-definite matrices
  with the affine-invariant metric ``<U, V>_X = tr(X^-1 U X^-1 V)``.

Points and tangent vectors are plain numpy arrays in chart coordinates
(vectors for the ball models, symmetric matrices for SPD).  Tangent vectors
at ``x`` are expressed in the chart basis at ``x``; their length is always
measured with the metric at ``x``.  Most methods accept a batch of points or
tangents stacked along a leading axis, with a single base point ``x``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

__all__ = [
    "ChartError",
    "Manifold",
    "Euclidean",
    "KleinHyperbolic",
    "SPD",
    "make_manifold",
    "unit_ball_volume",
]

# squared chart radius beyond which Klein points are rejected
KLEIN_BOUNDARY = 1.0 - 1e-12


class ChartError(ValueError):
    """Raised when coordinates do not describe a point of the manifold."""


def unit_ball_volume(n):
    """Lebesgue volume of the Euclidean unit ball in ``R^n``."""
    return math.exp(0.5 * n * math.log(math.pi) - gammaln(0.5 * n + 1.0))


def unit_sphere_area(n):
    """Surface area of the unit sphere ``S^(n-1)`` in ``R^n``."""
    return n * unit_ball_volume(n)


class Manifold:
    """Common interface.  Subclasses set ``kind``, ``n``, ``dim`` and
    ``point_shape`` and implement the geometry."""

    kind = "abstract"
    #: whether geodesic halfspaces are chart halfspaces
    chart_linear = False

    def __init__(self, n):
        n = int(n)
        if n < 1:
            raise ValueError(f"dimension must be >= 1, got {n}")
        self.n = n

    def __repr__(self):
        return f"{type(self).__name__}({self.n})"

    def __eq__(self, other):
        return type(self) is type(other) and self.n == other.n

    def __hash__(self):
        return hash((self.kind, self.n))

    # -- chart helpers -----------------------------------------------------
    @property
    def chart_dim(self):
        """Number of free chart coordinates (equals ``dim``)."""
        return self.dim

    def flatten(self, x):
        """Chart coordinates as flat vectors, shape ``(..., chart_dim)``."""
        return np.asarray(x, dtype=float)

    def unflatten(self, z):
        return np.asarray(z, dtype=float)

    def origin(self):
        raise NotImplementedError

    def is_valid(self, x):
        """Boolean mask of chart-valid points (batched)."""
        raise NotImplementedError

    def check(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(self.is_valid(x)):
            raise ChartError(f"coordinates are not a valid point of {self!r}")
        return x

    # -- geometry ------------------------------------------------------------
    def norm(self, x, v):
        return np.sqrt(np.maximum(self.inner(x, v, v), 0.0))

    def geodesic(self, x, y, t):
        """Point at parameter ``t`` of the geodesic from ``x`` to ``y``."""
        v = self.log(x, y)
        t = np.asarray(t, dtype=float)
        return self.exp(x, v * t.reshape(t.shape + (1,) * v.ndim))

    def exp(self, x, v):
        raise NotImplementedError

    def log(self, x, y):
        raise NotImplementedError

    def inner(self, x, u, v):
        raise NotImplementedError

    def dist(self, x, y):
        raise NotImplementedError

    def volume_density(self, x):
        raise NotImplementedError

    def to_orthonormal(self, x, v):
        """Coordinates of tangent(s) ``v`` at ``x`` in a metric-orthonormal
        basis; the Euclidean dot product of the result equals ``inner``."""
        raise NotImplementedError

    def from_orthonormal(self, x, c):
        raise NotImplementedError

    def metric_matrix(self, x):
        """Gram matrix of the metric at ``x`` in flattened chart coordinates."""
        basis = np.eye(self.chart_dim)
        vecs = self.unflatten(basis)
        return self.inner(x, vecs[:, None], vecs[None, :])

    def random_point(self, rng, scale=1.0):
        """A random point within geodesic distance ~``scale`` of the origin."""
        v = rng.standard_normal(self.point_shape)
        v = self._symmetrize(v) if self.kind == "spd" else v
        r = scale * rng.uniform() ** (1.0 / self.dim)
        nv = self.norm(self.origin(), v)
        return self.exp(self.origin(), v * (r / nv))

    def random_tangent(self, rng, x, scale=1.0):
        c = rng.standard_normal(self.dim)
        return self.from_orthonormal(x, c / np.linalg.norm(c) * scale)

    @staticmethod
    def _symmetrize(a):
        return 0.5 * (a + np.swapaxes(a, -1, -2))


class Euclidean(Manifold):
    """Flat space ``R^n`` with the standard inner product."""

    kind = "euclidean"
    chart_linear = True

    @property
    def dim(self):
        return self.n

    @property
    def point_shape(self):
        return (self.n,)

    def origin(self):
        return np.zeros(self.n)

    def is_valid(self, x):
        x = np.asarray(x, dtype=float)
        return np.all(np.isfinite(x), axis=-1)

    def exp(self, x, v):
        return self.check(x) + np.asarray(v, dtype=float)

    def log(self, x, y):
        return self.check(y) - self.check(x)

    def inner(self, x, u, v):
        return np.sum(np.asarray(u) * np.asarray(v), axis=-1)

    def dist(self, x, y):
        return np.linalg.norm(self.check(y) - self.check(x), axis=-1)

    def volume_density(self, x):
        x = self.check(x)
        return np.ones(x.shape[:-1])

    def to_orthonormal(self, x, v):
        return np.asarray(v, dtype=float)

    def from_orthonormal(self, x, c):
        return np.asarray(c, dtype=float)

    def metric_tensor(self, x):
        return np.eye(self.n)

    def metric_dual(self, x, a):
        """Tangent ``v`` with ``inner(x, w, v) == a . w`` for all ``w``."""
        return np.asarray(a, dtype=float)


class KleinHyperbolic(Manifold):
    """Hyperbolic space of curvature -1 in the Klein ball model.

    The metric at ``x`` (with ``a = 1 - |x|^2``) is

        g_x(u, v) = (u . v) / a + (x . u)(x . v) / a^2,

    so ``dist(0, r e1) = artanh(r)`` and the volume density relative to the
    chart Lebesgue measure is ``a^(-(n+1)/2)``.  Geodesics are chart-straight,
    so ``log_x(y)`` is a positive multiple of ``y - x``.
    """

    kind = "klein"
    chart_linear = True

    @property
    def dim(self):
        return self.n

    @property
    def point_shape(self):
        return (self.n,)

    def origin(self):
        return np.zeros(self.n)

    def is_valid(self, x):
        x = np.asarray(x, dtype=float)
        sq = np.sum(x * x, axis=-1)
        return np.isfinite(sq) & (sq <= KLEIN_BOUNDARY)

    def _conformal(self, x):
        return 1.0 - np.sum(x * x, axis=-1)

    def inner(self, x, u, v):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        a = self._conformal(x)
        xu = np.sum(x * u, axis=-1)
        xv = np.sum(x * v, axis=-1)
        return np.sum(u * v, axis=-1) / a + xu * xv / (a * a)

    def metric_tensor(self, x):
        x = self.check(x)
        a = self._conformal(x)
        return np.eye(self.n) / a + np.outer(x, x) / (a * a)

    def metric_dual(self, x, a_vec):
        """Tangent ``v`` with ``inner(x, w, v) == a_vec . w`` for all ``w``."""
        return np.linalg.solve(self.metric_tensor(x), np.asarray(a_vec, dtype=float))

    def _sinh_sq(self, x, y):
        # sinh^2 d(x, y) = g_x(y - x, y - x) * (1 - |x|^2) / (1 - |y|^2), free of
        # the cancellation in the textbook arccosh form.
        d = y - x
        a = self._conformal(x)
        b = self._conformal(y)
        xd = np.sum(x * d, axis=-1)
        num = a * np.sum(d * d, axis=-1) + xd * xd
        return num / (a * b), num

    def dist(self, x, y):
        x = self.check(x)
        y = self.check(y)
        s2, _ = self._sinh_sq(x, y)
        return np.arcsinh(np.sqrt(s2))

    def log(self, x, y):
        x = self.check(x)
        y = self.check(y)
        d = y - x
        s2, num = self._sinh_sq(x, y)
        a = self._conformal(x)
        gnorm = np.sqrt(num) / a  # metric length of the chart vector y - x
        dist = np.arcsinh(np.sqrt(s2))
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(gnorm > 0, dist / np.where(gnorm > 0, gnorm, 1.0), 0.0)
        return d * scale[..., None]

    def exp(self, x, v):
        x = self.check(x)
        v = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("tangent vector must be finite")
        rho = self.norm(x, v)
        safe = np.where(rho > 0, rho, 1.0)
        u = v / safe[..., None]
        a = self._conformal(x)
        b = np.sum(x * u, axis=-1)
        c = np.sum(u * u, axis=-1)
        s = np.sinh(rho)
        # chart step t along u with dist(x, x + t u) = rho
        t = a * s / (b * s + np.sqrt(b * b * s * s + a * (a + c * s * s)))
        t = np.where(rho > 0, t, 0.0)
        y = x + t[..., None] * u
        if not np.all(self.is_valid(y)):
            raise ChartError("exp left the representable part of the Klein chart")
        return y

    def volume_density(self, x):
        x = self.check(x)
        return self._conformal(x) ** (-(self.n + 1) / 2.0)

    def to_orthonormal(self, x, v):
        # G^(1/2) v = v / sqrt(a) + (x . v) x / (a (1 + sqrt(a)))
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        a = self._conformal(x)
        sa = np.sqrt(a)
        xv = np.sum(x * v, axis=-1)
        return v / sa + (xv / (a * (1.0 + sa)))[..., None] * x

    def from_orthonormal(self, x, c):
        x = np.asarray(x, dtype=float)
        c = np.asarray(c, dtype=float)
        a = self._conformal(x)
        sa = np.sqrt(a)
        xc = np.sum(x * c, axis=-1)
        return sa * c - (xc * sa / (1.0 + sa))[..., None] * x

    def ball_chart_radius(self, radius):
        """Chart radius of the geodesic ball of ``radius`` about the origin."""
        return math.tanh(radius)

    def ball_volume(self, radius):
        """Exact volume of a geodesic ball: area(S^(n-1)) * int_0^R sinh^(n-1)."""
        return unit_sphere_area(self.n) * sinh_power_integral(self.n - 1, radius)

    def ball_ellipsoid(self, center, radius):
        """Chart image of a geodesic ball: ``{x : (x - c0)^T A (x - c0) < 1}``.

        Returns ``(c0, A)``.  Derived from
        ``(1 - c.x)^2 < cosh^2(R) (1 - |c|^2)(1 - |x|^2)``.
        """
        c = self.check(center)
        k = math.cosh(radius) ** 2 * (1.0 - float(c @ c))
        A = np.outer(c, c) + k * np.eye(self.n)
        c0 = np.linalg.solve(A, c)
        rho = float(c @ c0) - 1.0 + k
        return c0, A / rho


def sinh_power_integral(k, r):
    """``int_0^r sinh(s)^k ds`` (vectorised in ``r``) via the reduction
    ``I_k = sinh^(k-1) cosh / k - (k-1)/k I_(k-2)``."""
    r = np.asarray(r, dtype=float)
    if k == 0:
        return r.copy()
    if k == 1:
        return np.cosh(r) - 1.0
    return (np.sinh(r) ** (k - 1) * np.cosh(r)) / k - (k - 1) / k * sinh_power_integral(k - 2, r)


class SPD(Manifold):
    """Symmetric positive-definite ``n x n`` matrices, affine-invariant metric.

    The chart is the matrix itself; flattened chart coordinates are the
    upper-triangular entries (row-major, diagonal included), and volumes are
    taken relative to Lebesgue measure on those coordinates.
    """

    kind = "spd"

    def __init__(self, n):
        super().__init__(n)
        self._iu = np.triu_indices(self.n)

    @property
    def dim(self):
        return self.n * (self.n + 1) // 2

    @property
    def point_shape(self):
        return (self.n, self.n)

    def origin(self):
        return np.eye(self.n)

    def flatten(self, x):
        x = np.asarray(x, dtype=float)
        return x[..., self._iu[0], self._iu[1]]

    def unflatten(self, z):
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape[:-1] + (self.n, self.n))
        out[..., self._iu[0], self._iu[1]] = z
        out[..., self._iu[1], self._iu[0]] = z
        return out

    def is_valid(self, x):
        x = np.asarray(x, dtype=float)
        finite = np.all(np.isfinite(x), axis=(-2, -1))
        xs = np.where(finite[..., None, None], x, 0.0)
        sym = np.all(np.abs(xs - np.swapaxes(xs, -1, -2))
                     <= 1e-10 * (1.0 + np.abs(xs)), axis=(-2, -1))
        w = np.linalg.eigvalsh(self._symmetrize(xs))
        return finite & sym & (w[..., 0] > 0)

    # matrix functions on symmetric input, eigendecomposition based
    def _eig_apply(self, a, fn):
        w, q = np.linalg.eigh(self._symmetrize(a))
        return self._symmetrize((q * fn(w)[..., None, :]) @ np.swapaxes(q, -1, -2))

    def _sqrt_pair(self, x):
        w, q = np.linalg.eigh(self._symmetrize(x))
        qt = np.swapaxes(q, -1, -2)
        s = np.sqrt(w)
        return (q * s[..., None, :]) @ qt, (q / s[..., None, :]) @ qt

    def exp(self, x, v):
        x = self.check(x)
        v = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("tangent vector must be finite")
        s, si = self._sqrt_pair(x)
        inner = self._eig_apply(si @ self._symmetrize(v) @ si, np.exp)
        return self._symmetrize(s @ inner @ s)

    def log(self, x, y):
        x = self.check(x)
        y = self.check(y)
        s, si = self._sqrt_pair(x)
        inner = self._eig_apply(si @ y @ si, np.log)
        return self._symmetrize(s @ inner @ s)

    def inner(self, x, u, v):
        x = np.asarray(x, dtype=float)
        xi = np.linalg.inv(x)
        a = xi @ np.asarray(u, dtype=float)
        b = xi @ np.asarray(v, dtype=float)
        return np.einsum("...ij,...ji->...", a, b)

    def dist(self, x, y):
        x = self.check(x)
        y = self.check(y)
        _, si = self._sqrt_pair(x)
        w = np.linalg.eigvalsh(self._symmetrize(si @ y @ si))
        return np.sqrt(np.sum(np.log(w) ** 2, axis=-1))

    def volume_density(self, x):
        """``2^(n(n-1)/4) det(X)^(-(n+1)/2)`` relative to upper-triangle coordinates."""
        x = self.check(x)
        _, logdet = np.linalg.slogdet(x)
        const = 0.25 * self.n * (self.n - 1) * math.log(2.0)
        return np.exp(const - 0.5 * (self.n + 1) * logdet)

    def _scaled_vec(self, w):
        i, j = self._iu
        scale = np.where(i == j, 1.0, math.sqrt(2.0))
        return w[..., i, j] * scale

    def to_orthonormal(self, x, v):
        _, si = self._sqrt_pair(np.asarray(x, dtype=float))
        return self._scaled_vec(si @ np.asarray(v, dtype=float) @ si)

    def from_orthonormal(self, x, c):
        s, _ = self._sqrt_pair(np.asarray(x, dtype=float))
        i, j = self._iu
        c = np.asarray(c, dtype=float)
        c = c / np.where(i == j, 1.0, math.sqrt(2.0))
        return self._symmetrize(s @ self.unflatten(c) @ s)

    def ball_eigen_bounds(self, center, radius):
        """Eigenvalue interval containing every point of the geodesic ball."""
        w = np.linalg.eigvalsh(self.check(center))
        return w[0] * math.exp(-radius), w[-1] * math.exp(radius)

    def ball_density_bound(self, center, radius):
        # log det X >= log det C - sqrt(n) R on the ball (Cauchy-Schwarz)
        _, logdet = np.linalg.slogdet(self.check(center))
        const = 0.25 * self.n * (self.n - 1) * math.log(2.0)
        return math.exp(const - 0.5 * (self.n + 1) * (logdet - math.sqrt(self.n) * radius))


_KINDS = {"euclidean": Euclidean, "klein": KleinHyperbolic, "spd": SPD}


def make_manifold(kind, n):
    """Build a manifold from its kind label (``euclidean``, ``klein``, ``spd``)."""
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown manifold kind {kind!r}; expected one of {sorted(_KINDS)}")
    return cls(n)

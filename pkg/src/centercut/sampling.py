"""Monte Carlo representation of the uniform measure on a feasible region.

Points are drawn by exact rejection sampling: a proposal set in the chart that
contains the region is sampled uniformly (w.r.t. chart Lebesgue measure) and a
proposal ``x`` is kept with probability ``density(x) / density_bound`` when it
lies in the region.  The accepted points are i.i.d. from ``vol_g`` restricted
to the region, and the same draws give an unbiased volume estimate

    vol_g(region) ~= envelope_volume * mean(weight * indicator),

where ``envelope_volume = chart_volume * density_bound``.

Three proposal families are available:

* :class:`EllipsoidProposal` -- the exact chart image of the ambient geodesic
  ball (Euclidean and Klein).
* :class:`BoxProposal` -- an oriented box in flattened chart coordinates; used
  for SPD balls and for LP-tightened boxes around cut regions of chart-linear
  manifolds.
* :class:`GeodesicBallProposal` -- exact ``vol_g``-uniform draws from a Klein
  geodesic ball about the chart origin (radial inverse-CDF), so only the
  region indicator is rejected.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .cuts import halfspace_contains, region_contains
from .manifold import sinh_power_integral, unit_ball_volume, unit_sphere_area

__all__ = [
    "DegenerateRegionError",
    "SampleSet",
    "EllipsoidProposal",
    "BoxProposal",
    "GeodesicBallProposal",
    "proposal_for",
    "sample_region",
    "estimate_volume",
    "volume_by_density",
    "empirical_mass",
    "mass_stderr",
    "CSV_SCHEMA_VERSION",
]

CSV_SCHEMA_VERSION = 1
MIN_ACCEPTANCE = 1e-6
DEFAULT_BATCH = 1 << 16


class DegenerateRegionError(RuntimeError):
    """The region is (numerically) empty: acceptance collapsed."""

    def __init__(self, message, acceptance_rate=0.0, n_proposals=0):
        super().__init__(message)
        self.acceptance_rate = acceptance_rate
        self.n_proposals = n_proposals


def batch_rng(seed, index):
    """Generator for proposal batch ``index``; a pure function of both."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def _uniform_ball(rng, k, d):
    g = rng.standard_normal((k, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = rng.uniform(size=k) ** (1.0 / d)
    return g * r[:, None]


def _klein_density_bound(M, rmax):
    return (1.0 - min(rmax, math.sqrt(1.0 - 1e-12)) ** 2) ** (-(M.n + 1) / 2.0)


def _ambient_density_bound(M, region):
    """Upper bound of the volume density over the ambient ball."""
    if M.kind == "euclidean":
        return 1.0
    if M.kind == "klein":
        d0 = float(M.dist(M.origin(), region.center))
        return _klein_density_bound(M, math.tanh(d0 + region.radius))
    return M.ball_density_bound(region.center, region.radius)


class _LebesgueProposal:
    """Shared weighting for proposals uniform w.r.t. chart Lebesgue measure."""

    exact = False

    @property
    def envelope_volume(self):
        return self.chart_volume * self.density_bound

    def draw(self, M, rng, k):
        """Return ``(points, valid, weight, density)`` for ``k`` proposals."""
        flat = self._draw_flat(rng, k)
        pts = M.unflatten(flat)
        valid = M.is_valid(pts)
        density = np.zeros(k)
        if np.any(valid):
            density[valid] = M.volume_density(pts[valid])
        return pts, valid, density / self.density_bound, density


@dataclass
class EllipsoidProposal(_LebesgueProposal):
    """Uniform on ``{center + L z : |z| < 1}`` in flattened chart coordinates."""

    center: np.ndarray
    L: np.ndarray
    density_bound: float

    @property
    def chart_volume(self):
        d = len(self.center)
        return unit_ball_volume(d) * abs(float(np.linalg.det(self.L)))

    def max_chart_norm(self):
        return float(np.linalg.norm(self.center) + np.linalg.norm(self.L, 2))

    def _draw_flat(self, rng, k):
        return self.center + _uniform_ball(rng, k, len(self.center)) @ self.L.T


@dataclass
class BoxProposal(_LebesgueProposal):
    """Uniform on the oriented box ``{axes @ s : lo <= s <= hi}`` (columns of
    ``axes`` orthonormal) in flattened chart coordinates."""

    axes: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    density_bound: float

    @property
    def chart_volume(self):
        return float(np.prod(self.hi - self.lo))

    def max_chart_norm(self):
        mid = self.axes @ (0.5 * (self.lo + self.hi))
        return float(np.linalg.norm(mid) + 0.5 * np.linalg.norm(self.hi - self.lo))

    def _draw_flat(self, rng, k):
        s = self.lo + (self.hi - self.lo) * rng.uniform(size=(k, len(self.lo)))
        return s @ self.axes.T


@dataclass
class GeodesicBallProposal:
    """Exact ``vol_g``-uniform draws from the Klein geodesic ball ``B(0, radius)``."""

    n: int
    radius: float

    exact = True
    density_bound = 1.0

    @property
    def envelope_volume(self):
        return unit_sphere_area(self.n) * float(sinh_power_integral(self.n - 1, self.radius))

    @property
    def chart_volume(self):
        return unit_ball_volume(self.n) * math.tanh(self.radius) ** self.n

    def _radii(self, u):
        k = self.n - 1
        target = u * float(sinh_power_integral(k, self.radius))
        if k == 1:
            # cosh(rho) - 1 = 2 sinh^2(rho / 2) = target
            return 2.0 * np.arcsinh(np.sqrt(0.5 * target))
        # Newton from a bisection-safe start; F is convex increasing in rho
        rho = np.full_like(u, self.radius)
        lo = np.zeros_like(u)
        hi = np.full_like(u, self.radius)
        for _ in range(100):
            f = sinh_power_integral(k, rho) - target
            lo = np.where(f < 0, rho, lo)
            hi = np.where(f >= 0, rho, hi)
            step = f / np.maximum(np.sinh(rho) ** k, 1e-300)
            new = rho - step
            new = np.where((new <= lo) | (new >= hi), 0.5 * (lo + hi), new)
            if np.max(np.abs(new - rho)) < 1e-15:
                rho = new
                break
            rho = new
        return rho

    def draw(self, M, rng, k):
        u = rng.uniform(size=k)
        g = rng.standard_normal((k, self.n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        pts = np.tanh(self._radii(u))[:, None] * g
        valid = M.is_valid(pts)
        density = np.zeros(k)
        if np.any(valid):
            density[valid] = M.volume_density(pts[valid])
        return pts, valid, valid.astype(float), density


def _ambient_proposal(M, region):
    bound = _ambient_density_bound(M, region)
    if M.kind == "euclidean":
        L = region.radius * np.eye(M.n)
        return EllipsoidProposal(np.array(region.center, dtype=float), L, bound)
    if M.kind == "klein":
        c0, A = M.ball_ellipsoid(region.center, region.radius)
        w, q = np.linalg.eigh(A)
        L = q / np.sqrt(w)[None, :]
        prop = EllipsoidProposal(c0, L, bound)
        prop.density_bound = min(bound, _klein_density_bound(M, prop.max_chart_norm()))
        return prop
    lam_lo, lam_hi = M.ball_eigen_bounds(region.center, region.radius)
    i, j = np.triu_indices(M.n)
    diag = i == j
    lo = np.where(diag, lam_lo, -(lam_hi - lam_lo) / 2.0)
    hi = np.where(diag, lam_hi, (lam_hi - lam_lo) / 2.0)
    return BoxProposal(np.eye(M.dim), lo, hi, bound)


def _support_directions(d, axes):
    dirs = [np.eye(d), -np.eye(d), axes.T, -axes.T]
    if d == 2:
        t = np.linspace(0.0, 2 * np.pi, 16, endpoint=False)
        dirs.append(np.stack([np.cos(t), np.sin(t)], axis=1))
    return np.concatenate(dirs, axis=0)


def _lp_box(M, region, axes):
    """Oriented bounding box of (ambient ellipsoid support planes) cap (cut planes)."""
    d = M.n
    if M.kind == "euclidean":
        c0 = np.asarray(region.center, dtype=float)
        Ainv = region.radius ** 2 * np.eye(d)
    else:
        c0, A = M.ball_ellipsoid(region.center, region.radius)
        Ainv = np.linalg.inv(A)
    U = _support_directions(d, axes)
    h = U @ c0 + np.sqrt(np.einsum("ij,jk,ik->i", U, Ainv, U))
    rows = [U]
    rhs = [h]
    for cut in region.cuts:
        a, b = cut.linear_constraint(M)
        rows.append(a[None, :])
        rhs.append(np.array([b]))
    A_ub = np.concatenate(rows, axis=0)
    b_ub = np.concatenate(rhs)
    lo = np.empty(d)
    hi = np.empty(d)
    for k in range(d):
        q = axes[:, k]
        for sign, out in ((1.0, lo), (-1.0, hi)):
            res = linprog(sign * q, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * d,
                          method="highs")
            if res.status == 2:
                raise DegenerateRegionError("feasible region is empty")
            if res.status != 0:
                return None
            out[k] = sign * res.fun
    pad = 1e-12 * (1.0 + np.abs(lo) + np.abs(hi))
    return lo - pad, hi + pad


def proposal_for(M, region, kind="auto", axes=None):
    """Choose a proposal set containing ``region``.

    ``kind`` is ``"chart"`` (ambient ball image), ``"geodesic"`` (exact
    radial draws, Klein ball about the origin only), ``"lp"`` (LP-tightened
    oriented box, chart-linear manifolds only) or ``"auto"``: the candidate
    with the smallest envelope volume.  ``axes`` (orthonormal columns) orients
    the LP box; the identity by default.
    """
    centered = M.kind == "klein" and float(np.linalg.norm(region.center)) == 0.0
    if kind == "chart":
        return _ambient_proposal(M, region)
    if kind == "geodesic":
        if not centered:
            raise ValueError("geodesic proposal needs a Klein ball centered at the chart origin")
        return GeodesicBallProposal(M.n, region.radius)
    if kind == "lp":
        if not (M.chart_linear and region.cuts):
            raise ValueError("lp proposal needs a chart-linear manifold and at least one cut")
    elif kind != "auto":
        raise ValueError(f"unknown proposal kind {kind!r}")

    candidates = []
    if kind == "auto":
        candidates.append(GeodesicBallProposal(M.n, region.radius) if centered
                          else _ambient_proposal(M, region))
    if M.chart_linear and region.cuts:
        ax = np.eye(M.n) if axes is None else np.asarray(axes, dtype=float)
        box = _lp_box(M, region, ax)
        if box is not None:
            prop = BoxProposal(ax, box[0], box[1], _ambient_density_bound(M, region))
            if M.kind == "klein":
                prop.density_bound = min(prop.density_bound,
                                         _klein_density_bound(M, prop.max_chart_norm()))
            candidates.append(prop)
    if not candidates:
        return _ambient_proposal(M, region)
    return min(candidates, key=lambda p: p.envelope_volume)


@dataclass
class SampleSet:
    """Accepted points representing the uniform measure on ``region``."""

    points: np.ndarray
    region: object
    seed: int
    proposal_volume: float
    acceptance_rate: float
    envelope_volume: float = float("nan")
    n_proposals: int = 0
    volume: float = float("nan")
    volume_stderr: float = float("nan")

    def __len__(self):
        return len(self.points)

    def to_csv(self, path, M):
        flat = M.flatten(self.points)
        with open(path, "w", newline="") as fh:
            fh.write(f"# schema_version={CSV_SCHEMA_VERSION} manifold={M.kind} n={M.n}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{i}" for i in range(flat.shape[1])])
            for row in flat:
                w.writerow([repr(float(v)) for v in row])


def _evaluate_batch(M, region, proposal, seed, index, size):
    rng = batch_rng(seed, index)
    pts, valid, weight, density = proposal.draw(M, rng, size)
    inside = np.zeros(size, dtype=bool)
    if np.any(valid):
        inside[valid] = region_contains(M, region, pts[valid])
    u = rng.uniform(size=size)
    accept = inside & (u < weight)
    return pts, weight * inside, density * inside, accept


def sample_region(M, region, m, seed, proposal=None, batch=DEFAULT_BATCH,
                  max_proposals=2 * 10 ** 8, workers=1):
    """Draw ``m`` points i.i.d. from ``vol_g`` restricted to ``region``.

    Deterministic given ``seed``: batch ``k`` uses its own generator derived
    from ``(seed, k)``, so ``workers > 1`` evaluates batches concurrently
    without changing the result.
    """
    if m < 1:
        raise ValueError("sample count must be >= 1")
    if proposal is None:
        proposal = proposal_for(M, region)
    accepted = []
    n_acc = 0
    n_prop = 0
    s1 = 0.0
    s2 = 0.0
    index = 0
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        while n_acc < m:
            idx = range(index, index + max(1, workers))
            index += len(idx)
            if pool is None:
                results = [_evaluate_batch(M, region, proposal, seed, i, batch) for i in idx]
            else:
                results = list(pool.map(
                    lambda i: _evaluate_batch(M, region, proposal, seed, i, batch), idx))
            for pts, terms, _, accept in results:
                n_prop += len(terms)
                s1 += float(terms.sum())
                s2 += float(terms @ terms)
                if np.any(accept):
                    accepted.append(pts[accept])
                    n_acc += int(accept.sum())
            rate = n_acc / n_prop
            if (n_prop >= 10 ** 6 and rate < MIN_ACCEPTANCE) or (n_prop >= max_proposals and n_acc < m):
                raise DegenerateRegionError(
                    f"degenerate region: acceptance rate {rate:.3g} after {n_prop} proposals",
                    rate, n_prop)
    finally:
        if pool is not None:
            pool.shutdown()
    points = np.concatenate(accepted, axis=0)[:m]
    mean = s1 / n_prop
    var = max(s2 / n_prop - mean * mean, 0.0) * n_prop / max(n_prop - 1, 1)
    env = proposal.envelope_volume
    return SampleSet(points, region, seed, proposal.chart_volume, n_acc / n_prop, env, n_prop,
                     env * mean, env * math.sqrt(var / n_prop))


def _volume_draw(M, region, m, seed, proposal, batch=DEFAULT_BATCH):
    weights = []
    densities = []
    done = 0
    index = 0
    while done < m:
        size = min(batch, m - done)
        _, w, dens, _ = _evaluate_batch(M, region, proposal, seed, index, size)
        weights.append(w)
        densities.append(dens)
        done += size
        index += 1
    return np.concatenate(weights), np.concatenate(densities)


def estimate_volume(M, region, m, seed, proposal=None):
    """Unbiased Monte Carlo estimate of ``vol_g(region)`` from ``m`` proposals.

    Returns ``(value, stderr)``.
    """
    if m < 1:
        raise ValueError("proposal count must be >= 1")
    if proposal is None:
        proposal = proposal_for(M, region)
    terms, _ = _volume_draw(M, region, m, seed, proposal)
    env = proposal.envelope_volume
    value = env * float(terms.mean())
    stderr = env * float(terms.std(ddof=1)) / math.sqrt(m) if m > 1 else float("inf")
    return value, stderr


def volume_by_density(M, region, m, seed, proposal):
    """Same draw as :func:`estimate_volume`, computed as
    ``chart_volume * mean(density * indicator)`` (or, for exact geodesic
    proposals, ``envelope_volume * mean(indicator)``)."""
    _, dens = _volume_draw(M, region, m, seed, proposal)
    if proposal.exact:
        return proposal.envelope_volume * float(np.mean(dens > 0))
    return proposal.chart_volume * float(dens.mean())


def empirical_mass(M, cut, samples):
    """Fraction of sample points inside the open halfspace ``cut``."""
    pts = samples.points if isinstance(samples, SampleSet) else np.asarray(samples)
    if len(pts) == 0:
        raise ValueError("empty sample set")
    return float(np.mean(halfspace_contains(M, cut, pts)))


def mass_stderr(p, m):
    """Binomial standard error of an empirical fraction."""
    return math.sqrt(max(p * (1.0 - p), 0.0) / m)

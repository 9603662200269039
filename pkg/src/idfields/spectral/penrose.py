"""Penrose-type min-i.d. fields X(t) = min_i |U_i + xi_i(t)| on a finite index grid.

U_i is Lebesgue-Poisson with rate lambda on R^k and xi_i are independent storm
paths with xi(0) = 0: Brownian motion in R^k (d = 1) or a scalar fBm field
(k = 1, d = 2).  Generic code sees the max form g_t = exp(-|u + xi(t)|), so
X = -log(max_i g_t) and every level set {g_t >= a} is a ball of radius -log a
around -xi(t), whose mass does not depend on xi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
from scipy import integrate as si
from scipy.special import chdtrc
from scipy.stats import ncx2, norm

from ..gaussian import MAX_NODES, FbmParams, brownian_increments, fbm_covariance, fbm_samples
from ..point_process import IntensityMeasure, MarkLaw, Window, register_mark
from ..quad import DEFAULT_QUAD, Estimate, QuadratureError, quad1d_pieces, union_length
from ..rng import stream
from .base import SpectralModel, WindowChoice, box_window, grid_lookup
from .storms import ball_volume


def _augment(grid: np.ndarray):
    """Grid with the origin added if missing, and the rows of the original nodes."""
    origin = np.all(grid == 0.0, axis=1)
    if origin.any():
        return grid, np.arange(len(grid))
    full = np.vstack([np.zeros((1, grid.shape[1])), grid])
    return full, np.arange(1, len(full))


@register_mark
@dataclass(frozen=True)
class GaussianPathMark(MarkLaw):
    """Law of a storm path sampled on a fixed grid; one column per (node, coordinate)."""

    storm: str
    k: int
    H: float
    sigma2: float
    grid: tuple = field(repr=False)
    max_nodes: int = MAX_NODES
    name: ClassVar[str] = "gaussian_path"

    def __post_init__(self):
        if self.storm not in ("brownian", "fbm"):
            raise ValueError(f"unknown storm path kind {self.storm!r}")
        if not (0.0 < self.H <= 1.0):
            raise ValueError(f"Hurst exponent must lie in (0, 1], got {self.H}")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be >= 0")

    @property
    def points(self) -> np.ndarray:
        return np.asarray(self.grid, float)

    @property
    def ncols(self) -> int:
        return len(self.grid) * self.k

    @property
    def mass(self):
        return 1.0

    def sample(self, n, rng):
        pts = self.points
        if self.sigma2 == 0:
            return np.zeros((n, self.ncols))
        full, rows = _augment(pts)
        if self.storm == "brownian":
            order = np.argsort(full[:, 0])
            paths = brownian_increments(self.k, full[order, 0], n, rng) * math.sqrt(self.sigma2)
            back = np.empty_like(order)
            back[order] = np.arange(len(order))
            paths = paths[:, back, :]
        else:
            paths = fbm_samples(FbmParams(self.H, self.sigma2), full, n, rng, self.max_nodes)[:, :, None]
        return paths[:, rows, :].reshape(n, -1)

    def stdev(self) -> np.ndarray:
        """Per-coordinate standard deviation of xi(t) at each node."""
        r = np.linalg.norm(self.points, axis=1)
        return np.sqrt(self.sigma2 * r ** (2 * self.H))

    def covariance(self, pts) -> np.ndarray:
        """Per-coordinate covariance of xi at the given nodes."""
        if self.sigma2 == 0:
            return np.zeros((len(pts), len(pts)))
        return fbm_covariance(FbmParams(self.H, self.sigma2), pts)

    def describe(self):
        return {"law": self.name, "storm": self.storm, "k": self.k, "H": self.H,
                "sigma2": self.sigma2, "nodes": len(self.grid)}

    def columns(self):
        return [f"xi_{j}_{c}" for j in range(len(self.grid)) for c in range(self.k)]

    @classmethod
    def from_dict(cls, d):
        raise ValueError("gaussian path marks are rebuilt from the model config, not from a window record")


def _outside_interval_mass(r, s, lo, hi):
    """E |[-r - xi, r - xi] minus [lo, hi]| for xi ~ N(0, s^2)."""
    if s == 0:
        inside = max(0.0, min(r, hi) - max(-r, lo))
        return 2 * r - inside

    def tail_int(c):
        # int_c^inf P(xi > v) dv
        z = c / s
        return s * (norm.pdf(z) - z * norm.sf(z))

    right = tail_int(hi - r) - tail_int(hi + r)
    left = tail_int(-lo - r) - tail_int(-lo + r)
    return max(right + left, 0.0)


class PenroseField(SpectralModel):
    kind = "penrose"
    orientation = "min"

    def __init__(self, storm: str, lam: float, grid, k: int = 1, H: float = 0.5, sigma2: float = 1.0,
                 max_nodes: int = MAX_NODES):
        if not lam > 0:
            raise ValueError("lambda must be > 0")
        grid = np.asarray(grid, float)
        if storm == "brownian":
            if k < 1:
                raise ValueError("dimension k must be >= 1")
            grid = grid.reshape(-1, 1)
            H = 0.5
        elif storm == "fbm":
            k = 1
            if grid.ndim != 2 or grid.shape[1] != 2:
                raise ValueError("fBm storms need a 2-D grid of shape (n, 2)")
        else:
            raise ValueError(f"unknown storm kind {storm!r}; expected 'brownian' or 'fbm'")
        if len(np.unique(grid, axis=0)) != len(grid):
            raise ValueError("grid contains duplicate nodes")
        if storm == "fbm" and len(_augment(grid)[0]) > max_nodes:
            raise ValueError(f"grid has {len(grid)} nodes, above the dense-factorization guard of {max_nodes}")
        self.storm = storm
        self.lam = float(lam)
        self.k = int(k)
        self.points = grid
        self.dim = grid.shape[1]
        self.mark = GaussianPathMark(storm, self.k, float(H), float(sigma2), tuple(map(tuple, grid)), max_nodes)
        self.intensity = IntensityMeasure(self.lam)
        self._vk = float(ball_volume(self.k, 1.0))

    @property
    def loc_dim(self):
        return self.k

    @property
    def H(self):
        return self.mark.H

    @property
    def sigma2(self):
        return self.mark.sigma2

    def _idx(self, t):
        return grid_lookup(self.points, self.index_points(t), "Penrose grid")

    def _paths(self, marks):
        return np.asarray(marks, float).reshape(len(marks), len(self.points), self.k)

    def distances(self, t, locs, marks) -> np.ndarray:
        """|u_i + xi_i(t)|, shape (len(t), n)."""
        idx = self._idx(t)
        locs = np.asarray(locs, float).reshape(-1, self.k)
        xi = self._paths(marks)[:, idx, :]
        return np.sqrt(((locs[:, None, :] + xi) ** 2).sum(-1)).T

    def eval(self, t, locs, marks):
        return np.exp(-self.distances(t, locs, marks))

    def field_transform(self, m):
        m = np.asarray(m, float)
        with np.errstate(divide="ignore"):
            return -np.log(m)

    def shift(self, s, locs, marks):
        s = np.asarray(s, float).reshape(1, self.dim)
        j = int(grid_lookup(self.points, s, "Penrose grid")[0])
        paths = self._paths(marks)
        xs = paths[:, j, :]
        out = np.full_like(paths, np.nan)
        tgt = self.points + s
        for i, p in enumerate(tgt):
            d = np.abs(self.points - p).max(1)
            m = int(np.argmin(d))
            if d[m] <= 1e-9 * max(1.0, float(np.abs(self.points).max())):
                out[:, i, :] = paths[:, m, :] - xs
        return np.asarray(locs, float).reshape(-1, self.k) + xs, out.reshape(len(marks), -1)

    def sup_value(self):
        return 1.0

    def level_mass(self, t, a):
        if a > 1:
            return 0.0
        if a <= 0:
            return math.inf
        return self.lam * self._vk * (-math.log(a)) ** self.k

    # ---- truncation -------------------------------------------------------
    def _off_window(self, R, x_star, sd):
        """Union bound on the mass of atoms with |u| > R reaching distance x_star at some node."""
        sd = sd[sd > 0]
        if len(sd) == 0:
            return 0.0 if R >= x_star else math.inf
        # nodes at equal distance from the origin share a term; on large grids the
        # spreads are rounded up to 512 levels, which keeps the bound an upper bound
        if len(sd) > 512:
            edges = np.quantile(sd, np.linspace(0, 1, 513)[1:])
            sd = edges[np.minimum(np.searchsorted(edges, sd), 511)]
        sd, count = np.unique(sd, return_counts=True)

        def f(rho):
            y = rho - x_star
            if y <= 0:
                return math.inf
            p = min(1.0, float(count @ chdtrc(self.k, (y / sd) ** 2)))
            return self.k * self._vk * rho ** (self.k - 1) * p

        if R <= x_star:
            return math.inf
        val, _ = si.quad(f, R, math.inf, limit=200)
        return self.lam * val

    def _window_for(self, pts, budget):
        if self.sigma2 == 0:
            a = self.threshold_for(pts, budget)
            x_star = -math.log(a)
            miss = self.miss_prob(pts, a)
            return WindowChoice(box_window(np.full(self.k, -x_star), np.full(self.k, x_star), self.mark), a, miss,
                                exact=True)
        a = self.threshold_for(pts, budget / 2)
        x_star = -math.log(a)
        sd = self.mark.stdev()[self._idx(pts)]
        lo, hi = x_star, x_star + 1.0
        while self._off_window(hi, x_star, sd) > budget / 2:
            lo, hi = hi, x_star + 2 * (hi - x_star)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self._off_window(mid, x_star, sd) > budget / 2:
                lo = mid
            else:
                hi = mid
        miss = self.miss_prob(pts, a)
        bound = miss + self._off_window(hi, x_star, sd)
        return WindowChoice(box_window(np.full(self.k, -hi), np.full(self.k, hi), self.mark), a, bound, exact=False)

    def check_window(self, window: Window):
        super().check_window(window)
        if window.mark != self.mark:
            raise ValueError("window mark law does not match the model's storm paths")

    def tail_mass(self, t, a, window):
        """Off-window mass of {g_t >= a}: exact for k = 1, an upper envelope otherwise."""
        self.check_window(window)
        if a > 1:
            return 0.0, True
        if a <= 0:
            return math.inf, True
        r = -math.log(a)
        j = int(self._idx(t)[0])
        s = float(self.mark.stdev()[j])
        lo, hi = np.asarray(window.lower), np.asarray(window.upper)
        if self.k == 1:
            return self.lam * _outside_interval_mass(r, s, lo[0], hi[0]), True
        inner = float(min((-lo).min(), hi.min()))
        if inner <= 0:
            return self.level_mass(t, a), False
        if s == 0:
            return (0.0 if r <= inner else self.level_mass(t, a)), False

        def f(rho):
            return self.k * self._vk * rho ** (self.k - 1) * float(ncx2.cdf((r / s) ** 2, self.k, (rho / s) ** 2))

        val, _ = si.quad(f, inner, inner + r + 40 * s, limit=200)
        return min(self.lam * val, self.level_mass(t, a)), False

    def union_mass(self, points, thresholds, quad=DEFAULT_QUAD):
        pts = self.index_points(points)
        x = np.asarray(thresholds, float)
        if np.any(x <= 0):
            return Estimate(math.inf, 0.0)
        keep = x <= 1
        pts, r = pts[keep], -np.log(x[keep])
        if len(r) == 0:
            return Estimate(0.0, 0.0)
        if len(r) == 1:
            return Estimate(self.lam * self._vk * float(r[0]) ** self.k, 0.0)
        cov = self.mark.covariance(pts)
        n = quad.mc_samples
        rng = stream(quad.seed, "penrose-union", len(r))
        w, v = np.linalg.eigh(cov)
        root = v * np.sqrt(np.clip(w, 0, None))
        if self.k == 1:
            xi = rng.standard_normal((n, len(r))) @ root.T
            vals = union_length(-xi - r, -xi + r)
        elif len(r) == 2 and self.k in (2, 3):
            xi = np.einsum("ij,njc->nic", root, rng.standard_normal((n, 2, self.k)))
            dist = np.linalg.norm(xi[:, 0] - xi[:, 1], axis=1)
            vals = _two_ball_union(r[0], r[1], dist, self.k)
        else:
            raise QuadratureError("Penrose union masses are available for k = 1, or two points with k in {2, 3}")
        return Estimate(self.lam * float(vals.mean()), self.lam * float(vals.std()) / math.sqrt(n))

    def integrate(self, h, points, quad=DEFAULT_QUAD):
        pts = self.index_points(points)
        if len(pts) != 1:
            raise QuadratureError("Penrose integrals are available for a single index point only")

        def f(rho):
            return self.k * self._vk * rho ** (self.k - 1) * h(np.array([math.exp(-rho)]))

        return self.lam * quad1d_pieces(f, [0.0, 1.0, 10.0, math.inf], tol=quad.tolerance * 1e-2)

    # ---- flow classification ----------------------------------------------
    def sample_core(self, n, rng):
        # atoms with |u| <= 1
        z = rng.standard_normal((n, self.k))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        locs = z * rng.uniform(size=(n, 1)) ** (1.0 / self.k)
        return locs, self.mark.sample(n, rng), self.lam * self._vk

    def growth_curves(self, locs, marks, radii, psi, centers=None):
        if self.dim != 1:
            raise ValueError("Penrose growth curves need a 1-D time grid")
        t = self.points[:, 0]
        order = np.argsort(t)
        ts = t[order]
        d = self.distances(self.points, locs, marks)[order].T
        vals = psi(np.exp(-d))
        cum = si.cumulative_trapezoid(vals, ts, axis=1, initial=0.0)
        c = np.zeros(len(vals)) if centers is None else np.asarray(centers, float).reshape(-1)
        radii = np.asarray(radii, float)
        if ts[-1] - ts[0] < 2 * radii.max() - 1e-9:
            raise ValueError("time grid is shorter than the largest box")
        # divergence does not depend on the centre; keep every box on the grid
        c = np.clip(c, ts[0] + radii.max(), ts[-1] - radii.max())
        out = np.empty((len(vals), len(radii)))
        for i in range(len(vals)):
            out[i] = np.interp(c[i] + radii, ts, cum[i]) - np.interp(c[i] - radii, ts, cum[i])
        return out

    def anchors(self, locs, marks):
        d = self.distances(self.points, locs, marks)
        return self.points[np.argmin(d, axis=0)]

    def scaled(self, factor):
        m = self.mark
        return PenroseField(self.storm, self.lam * factor, self.points, self.k, m.H, m.sigma2, m.max_nodes)

    def describe(self):
        m = self.mark
        out = {"kind": self.kind, "lambda": self.lam, "storm": self.storm, "sigma2": m.sigma2,
               "grid_nodes": len(self.points)}
        if self.storm == "brownian":
            out["k"] = self.k
        else:
            out["H"] = m.H
        return out


def _two_ball_union(r1, r2, dist, k):
    """Volume of the union of two balls in R^k (k = 2, 3) at centre distance ``dist``."""
    dist = np.asarray(dist, float)
    v1, v2 = ball_volume(k, r1), ball_volume(k, r2)
    small = min(r1, r2)
    out = np.empty_like(dist)
    apart = dist >= r1 + r2
    nested = dist <= abs(r1 - r2)
    out[apart] = v1 + v2
    out[nested] = max(v1, v2)
    mid = ~(apart | nested)
    d = dist[mid]
    if k == 2:
        a1 = r1 * r1 * np.arccos(np.clip((d * d + r1 * r1 - r2 * r2) / (2 * d * r1), -1, 1))
        a2 = r2 * r2 * np.arccos(np.clip((d * d + r2 * r2 - r1 * r1) / (2 * d * r2), -1, 1))
        lens = a1 + a2 - 0.5 * np.sqrt(np.clip((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2), 0, None))
    else:
        lens = math.pi * (r1 + r2 - d) ** 2 * (d * d + 2 * d * (r1 + r2) - 3 * (r1 - r2) ** 2) / (12 * d)
    out[mid] = v1 + v2 - np.minimum(lens, ball_volume(k, small))
    return out


def make_penrose(storm_kind: str, lam: float, grid, k: int = 1, H: float = 0.5, sigma2: float = 1.0,
                 max_nodes: int = MAX_NODES) -> PenroseField:
    return PenroseField(storm_kind, lam, grid, k, H, sigma2, max_nodes)

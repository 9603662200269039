"""Models whose base space is a finite set of cells.

``IIDModel``     independent margins; atoms (cell t, value x) with
                 mu({t} x [x, inf)) = -log F(x).
``FrechetLift``  f_t(c, u) = u g_t(c) with mu = alpha u^(-alpha-1) du mu'(dc).
``CellFamily``   piecewise-constant functions on a finite atomic measure;
                 exact integrals, used for the metric suites and
                 compound-Poisson checks.
"""
from __future__ import annotations

import math

import numpy as np

from ..point_process import FrechetMark, IntensityMeasure, NoMark, TableMark, Window
from ..quad import DEFAULT_QUAD, Estimate, improper_power_integral
from .base import SpectralModel, WindowChoice, grid_lookup


def _index_array(index_set, m=None) -> np.ndarray:
    if index_set is None:
        index_set = np.arange(m, dtype=float)
    pts = np.asarray(index_set, float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or len(pts) == 0:
        raise ValueError("index set must be a non-empty list of points")
    if len(np.unique(pts, axis=0)) != len(pts):
        raise ValueError("index set contains duplicates")
    return pts


class _CellBase(SpectralModel):
    stationary = False
    loc_dim = 1

    def _idx(self, t):
        return grid_lookup(self.points, self.index_points(t), "index set")

    def _cell_window(self, mark) -> Window:
        return Window((-0.5,), (self.n_cells - 0.5,), mark)

    def _cells_inside(self, window: Window) -> np.ndarray:
        c = np.arange(self.n_cells)
        return (c >= window.lower[0]) & (c <= window.upper[0])

    def check_window(self, window):
        if window.dim != 1:
            raise ValueError("cell models use a 1-D cell-index window")


class IIDModel(_CellBase):
    kind = "iid"

    def __init__(self, x, cdf, index_set):
        x = np.asarray(x, float)
        cdf = np.asarray(cdf, float)
        TableMark(tuple(x), tuple(cdf), float(x[-1]))  # validates the table
        if x[0] != 0:
            raise ValueError("CDF table must start at x = 0 (values are non-negative with essential infimum 0)")
        if cdf[0] >= 1 or cdf[1] <= 0:
            raise ValueError("CDF table needs P[X = 0] < 1 and F(x) > 0 for x > 0")
        self.x, self.cdf = x, cdf
        self.points = _index_array(index_set)
        self.dim = self.points.shape[1]
        self.n_cells = len(self.points)
        self.lam = 1.0
        self.intensity = IntensityMeasure(1.0, cells=np.ones(self.n_cells))

    def F(self, v):
        return np.interp(v, self.x, self.cdf, left=0.0, right=1.0)

    def mark_for(self, x_min):
        return TableMark(tuple(self.x), tuple(self.cdf), float(x_min))

    def eval(self, t, locs, marks):
        idx = self._idx(t)
        cell = np.asarray(locs, float).reshape(-1)
        val = np.asarray(marks, float).reshape(-1)
        return np.where(cell[None, :] == idx[:, None], val[None, :], 0.0)

    def sup_value(self):
        return float(self.x[-1])

    def level_mass(self, t, a):
        if a <= 0:
            return math.inf
        F = float(self.F(a))
        return -math.log(F) if F > 0 else math.inf

    def _window_for(self, pts, budget):
        if self.cdf[0] > 0:
            # an atom at 0 leaves the whole exponent measure finite: simulate it exactly
            return WindowChoice(self._cell_window(self.mark_for(0.0)), 0.0, 0.0, exact=True)
        a = self.threshold_for(pts, budget)
        miss = self.miss_prob(pts, a)
        return WindowChoice(self._cell_window(self.mark_for(a)), a, miss)

    def tail_mass(self, t, a, window):
        self.check_window(window)
        x_min = window.mark.x_min
        j = int(self._idx(t)[0])
        if a <= 0:
            return math.inf, True
        if not self._cells_inside(window)[j]:
            return self.level_mass(t, a), True
        if a >= x_min:
            return 0.0, True
        return max(0.0, math.log(self.F(x_min)) - math.log(self.F(a))), True

    def union_mass(self, points, thresholds, quad=DEFAULT_QUAD):
        idx = self._idx(points)
        x = np.asarray(thresholds, float)
        tot = 0.0
        for c in np.unique(idx):
            tot += self.level_mass(None, float(x[idx == c].min()))
        return Estimate(tot, 0.0)

    def integrate(self, h, points, quad=DEFAULT_QUAD):
        # d mu = dF / F on each linear piece of the table; Gauss-Legendre per piece
        idx = self._idx(points)
        slope = np.diff(self.cdf) / np.diff(self.x)
        live = slope > 0

        def run(n):
            nodes, weights = np.polynomial.legendre.leggauss(n)
            lo, hi = self.x[:-1][live], self.x[1:][live]
            v = 0.5 * (hi - lo)[:, None] * nodes[None, :] + 0.5 * (hi + lo)[:, None]
            w = 0.5 * (hi - lo)[:, None] * weights[None, :] * slope[live][:, None] / self.F(v)
            tot = 0.0
            for c in np.unique(idx):
                sel = (idx == c).astype(float)
                tot += float((h(v[..., None] * sel) * w).sum())
            return tot

        fine, coarse = run(8), run(4)
        return Estimate(fine, abs(fine - coarse))

    def describe(self):
        return {"kind": self.kind, "cdf": {"x": self.x.tolist(), "F": self.cdf.tolist()},
                "index_set": self.points.tolist()}

    def scaled(self, factor):
        # mu -> factor * mu turns F into F**factor
        return IIDModel(self.x, self.cdf ** factor, self.points)


class FrechetLift(_CellBase):
    kind = "frechet_lift"

    def __init__(self, g, alpha: float, base_masses=None, index_set=None):
        g = np.atleast_2d(np.asarray(g, float))
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ValueError("base functions must be finite and non-negative")
        if not alpha > 0:
            raise ValueError("alpha must be > 0")
        masses = np.ones(g.shape[1]) if base_masses is None else np.asarray(base_masses, float)
        if masses.shape != (g.shape[1],) or np.any(masses < 0):
            raise ValueError("base masses must be one non-negative weight per base cell")
        moments = (masses[None, :] * g ** alpha).sum(1)
        if not np.all(np.isfinite(moments)):
            raise ValueError("divergent alpha-moment of a base function")
        self.g = g
        self.alpha = float(alpha)
        self.masses = masses
        self.points = _index_array(index_set, g.shape[0])
        if len(self.points) != g.shape[0]:
            raise ValueError("index set length must match the number of base functions")
        self.dim = self.points.shape[1]
        self.n_cells = g.shape[1]
        self.lam = 1.0
        self.intensity = IntensityMeasure(1.0, cells=masses)
        self._moments = moments

    def sigma(self, t) -> float:
        j = int(self._idx(t)[0])
        return float(self._moments[j] ** (1.0 / self.alpha))

    def mark_for(self, u_min):
        return FrechetMark(self.alpha, float(u_min))

    def eval(self, t, locs, marks):
        idx = self._idx(t)
        cell = np.asarray(locs, float).reshape(-1).astype(int)
        u = np.asarray(marks, float).reshape(-1)
        return self.g[idx][:, cell] * u[None, :]

    def sup_value(self):
        return float(self._moments.max() ** (1.0 / self.alpha))

    def level_mass(self, t, a):
        if a <= 0:
            return math.inf
        j = int(self._idx(t)[0])
        return float(self._moments[j]) * a ** (-self.alpha)

    def _window_for(self, pts, budget):
        a = self.threshold_for(pts, budget)
        u_min = a / max(float(self.g.max()), 1e-300)
        miss = self.miss_prob(pts, a)
        return WindowChoice(self._cell_window(self.mark_for(u_min)), a, miss)

    def tail_mass(self, t, a, window):
        self.check_window(window)
        if a <= 0:
            return math.inf, True
        u_min = window.mark.z_min
        gj = self.g[int(self._idx(t)[0])]
        full = self.masses * (gj / a) ** self.alpha
        inside = self._cells_inside(window)
        below = np.clip(full - self.masses * u_min ** (-self.alpha), 0, None)
        return float(np.where(inside, below, full).sum()), True

    def union_mass(self, points, thresholds, quad=DEFAULT_QUAD):
        idx = self._idx(points)
        x = np.asarray(thresholds, float)
        if np.any(x <= 0):
            return Estimate(math.inf, 0.0)
        ratio = (self.g[idx] / x[:, None]) ** self.alpha
        return Estimate(float((self.masses * ratio.max(0)).sum()), 0.0)

    def integrate(self, h, points, quad=DEFAULT_QUAD):
        idx = self._idx(points)
        out = Estimate(0.0, 0.0)
        for c in range(self.n_cells):
            if self.masses[c] == 0:
                continue
            gc = self.g[idx, c]
            if not gc.any():
                continue
            est = improper_power_integral(lambda u: float(h(u * gc)), self.alpha, tol=quad.tolerance * 1e-3)
            out = out + est * self.masses[c]
        return out

    def describe(self):
        return {"kind": self.kind, "alpha": self.alpha, "g": self.g.tolist(),
                "base_masses": self.masses.tolist(), "index_set": self.points.tolist()}

    def scaled(self, factor):
        return FrechetLift(self.g, self.alpha, self.masses * factor, self.points)


class CellFamily(_CellBase):
    kind = "cells"
    compact = True

    def __init__(self, masses, values, index_set=None):
        masses = np.asarray(masses, float)
        values = np.atleast_2d(np.asarray(values, float))
        if masses.ndim != 1 or values.shape[1] != len(masses):
            raise ValueError("values must have one column per cell")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)) or not np.all(np.isfinite(values)):
            raise ValueError("cell masses must be finite and non-negative, values finite")
        self.masses = masses
        self.values = values
        self.points = _index_array(index_set, values.shape[0])
        if len(self.points) != values.shape[0]:
            raise ValueError("index set length must match the number of functions")
        self.dim = self.points.shape[1]
        self.n_cells = len(masses)
        self.lam = 1.0
        self.mark = NoMark()
        self.intensity = IntensityMeasure(1.0, cells=masses)

    def eval(self, t, locs, marks):
        idx = self._idx(t)
        cell = np.asarray(locs, float).reshape(-1).astype(int)
        return self.values[idx][:, cell]

    def sup_value(self):
        return float(self.values.max())

    def level_mass(self, t, a):
        j = int(self._idx(t)[0])
        return float(self.masses[self.values[j] >= a].sum())

    def cover_window(self, points, a):
        return self._cell_window(self.mark)

    def tail_mass(self, t, a, window):
        self.check_window(window)
        j = int(self._idx(t)[0])
        out = ~self._cells_inside(window)
        return float(self.masses[out & (self.values[j] >= a)].sum()), True

    def union_mass(self, points, thresholds, quad=DEFAULT_QUAD):
        idx = self._idx(points)
        x = np.asarray(thresholds, float)
        hit = (self.values[idx] >= x[:, None]).any(0)
        return Estimate(float(self.masses[hit].sum()), 0.0)

    def integrate(self, h, points, quad=DEFAULT_QUAD):
        idx = self._idx(points)
        tot = (self.masses * h(self.values[idx].T)).sum()
        return Estimate(complex(tot) if np.iscomplexobj(tot) else float(tot), 0.0)

    def describe(self):
        return {"kind": self.kind, "masses": self.masses.tolist(), "values": self.values.tolist(),
                "index_set": self.points.tolist()}

    def scaled(self, factor):
        return CellFamily(self.masses * factor, self.values, self.points)


def make_iid(x, cdf, index_set) -> IIDModel:
    return IIDModel(x, cdf, index_set)


def make_frechet_lift(base_functions, alpha: float, base_masses=None, index_set=None) -> FrechetLift:
    return FrechetLift(base_functions, alpha, base_masses, index_set)


def make_cells(masses, values, index_set=None) -> CellFamily:
    return CellFamily(masses, values, index_set)


def frechet_table(alpha: float = 1.0, sigma: float = 1.0, n: int = 20001, top_q: float = 1e-7):
    """CDF table of the alpha-Frechet law exp(-(sigma/x)^alpha), cut at its 1 - top_q quantile."""
    x_top = sigma * (-math.log(1 - top_q)) ** (-1 / alpha)
    # below x_lo the CDF is under 1e-300
    x_lo = sigma * 690.0 ** (-1 / alpha)
    x = np.concatenate([[0.0], np.geomspace(x_lo, x_top, n - 1)])
    F = np.concatenate([[0.0], np.exp(-(sigma / x[1:]) ** alpha)])
    F[-1] = 1.0
    return x, F

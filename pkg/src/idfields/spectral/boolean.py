"""Boolean model S = union_i (U_i - A) with a fixed grain, as a {0, 1}-valued field."""
from __future__ import annotations

import math

import numpy as np

from ..point_process import IntensityMeasure, NoMark, Window
from ..quad import DEFAULT_QUAD, Estimate, gauss_legendre, union_length
from .base import SpectralModel, arc_angle_in_box, bbox, box_window, circle_intersection_heights, radial_panels
from .storms import GrainSet, section_union_area


class BooleanSet(SpectralModel):
    kind = "boolean_set"
    compact = True

    def __init__(self, grain: GrainSet, lam: float, d: int | None = None):
        if not lam > 0:
            raise ValueError("lambda must be > 0")
        d = grain.d if d is None else d
        if d != grain.d:
            raise ValueError("grain dimension does not match d")
        self.grain = grain
        self.lam = float(lam)
        self.dim = d
        self.mark = NoMark()
        self.intensity = IntensityMeasure(self.lam)

    def eval(self, t, locs, marks):
        t = self.index_points(t)
        locs = np.asarray(locs, float).reshape(-1, self.dim)
        return self.grain.contains(locs[None, :, :] - t[:, None, :]).astype(float)

    def shift(self, s, locs, marks):
        return np.asarray(locs, float) - np.asarray(s, float).reshape(1, -1), marks

    def sup_value(self):
        return 1.0

    def level_mass(self, t, a):
        if a > 1:
            return 0.0
        return self.lam * self.grain.measure if a > 0 else math.inf

    def cover_window(self, points, a):
        lo, hi = bbox(self.index_points(points))
        e = self.grain.half_extent
        return box_window(lo - e, hi + e, self.mark)

    def check_window(self, window: Window):
        super().check_window(window)
        if window.mark != self.mark:
            raise ValueError("window mark law does not match the model's mark space")

    def _inside_area(self, t, lo, hi):
        """|(t + A) intersected with the box [lo, hi]|."""
        g = self.grain
        if self.dim == 1 or g.shape == "box":
            e = g.half_extent
            return float(np.prod(np.clip(np.minimum(t + e, hi) - np.maximum(t - e, lo), 0, None)))
        r = g.size[0]
        rr, w = radial_panels(r, 128, 8)
        return float((w * rr * arc_angle_in_box(rr, lo - t, hi - t)).sum())

    def tail_mass(self, t, a, window):
        self.check_window(window)
        if a > 1:
            return 0.0, True
        if a <= 0:
            return math.inf, True
        t = self.index_points(t)[0]
        inside = self._inside_area(t, np.asarray(window.lower), np.asarray(window.upper))
        return self.lam * max(self.grain.measure - inside, 0.0), True

    def _sets(self, pts):
        """Per-point (lo, hi) x-intervals at height y, as a function."""
        g = self.grain

        def chord(j, y):
            c = g.chord(y - pts[j, 1])
            return c
        return chord

    def _breaks(self, pts):
        e = self.grain.half_extent
        br = list(pts[:, 1] - e[1]) + list(pts[:, 1] + e[1])
        if self.grain.shape == "disk":
            br += circle_intersection_heights(pts, np.full(len(pts), self.grain.size[0]))
        return br

    def union_mass(self, points, thresholds, quad=DEFAULT_QUAD):
        pts = self.index_points(points)
        x = np.asarray(thresholds, float)
        if np.any(x <= 0):
            return Estimate(math.inf, 0.0)
        pts = pts[x <= 1]
        if len(pts) == 0:
            return Estimate(0.0, 0.0)
        if len(pts) == 1:
            return Estimate(self.lam * self.grain.measure, 0.0)
        if self.dim == 1:
            e = self.grain.half_extent[0]
            return Estimate(self.lam * float(union_length(pts[:, 0] - e, pts[:, 0] + e)), 0.0)
        chord = self._sets(pts)
        fine = section_union_area(pts, chord, self._breaks(pts), 64)
        coarse = section_union_area(pts, chord, self._breaks(pts), 32)
        return Estimate(self.lam * fine, self.lam * abs(fine - coarse))

    def _row_integral(self, h, pts, y=None):
        """int over x of h(indicator vector) on one row, exact (piecewise constant)."""
        if y is None:
            e = np.full(len(pts), self.grain.half_extent[0])
            lo, hi = pts[:, 0] - e, pts[:, 0] + e
        else:
            c = self.grain.chord(y - pts[:, 1])
            lo, hi = np.where(c >= 0, pts[:, 0] - c, np.inf), np.where(c >= 0, pts[:, 0] + c, -np.inf)
        ok = hi > lo
        if not ok.any():
            return 0.0
        cuts = np.unique(np.concatenate([lo[ok], hi[ok]]))
        mids = 0.5 * (cuts[1:] + cuts[:-1])
        member = ((mids[:, None] >= lo[None, :]) & (mids[:, None] <= hi[None, :])).astype(float)
        return float((h(member) * np.diff(cuts)).sum())

    def integrate(self, h, points, quad=DEFAULT_QUAD):
        pts = self.index_points(points)
        if self.dim == 1:
            return Estimate(self.lam * self._row_integral(h, pts), 0.0)
        breaks = np.unique(self._breaks(pts))

        def run(n):
            tot = 0.0
            for lo, hi in zip(breaks[:-1], breaks[1:]):
                ys, ws = gauss_legendre(lo, hi, n)
                tot += sum(w * self._row_integral(h, pts, y) for y, w in zip(ys, ws))
            return tot

        fine, coarse = run(32), run(16)
        return Estimate(self.lam * fine, self.lam * abs(fine - coarse))

    def sample_core(self, n, rng):
        g = self.grain
        e = g.half_extent
        out = np.empty((0, self.dim))
        while len(out) < n:
            u = rng.uniform(-e, e, size=(2 * n, self.dim))
            out = np.vstack([out, u[g.contains(u)]])
        return out[:n], np.empty((n, 0)), self.lam * g.measure

    def growth_curves(self, locs, marks, radii, psi, centers=None):
        locs = np.asarray(locs, float).reshape(-1, self.dim)
        c = np.zeros_like(locs) if centers is None else np.asarray(centers, float).reshape(locs.shape)
        p1 = float(psi(np.array([1.0]))[0])
        out = np.zeros((len(locs), len(radii)))
        for j, R in enumerate(radii):
            for i in range(len(locs)):
                # {t : u - t in A} is the grain (symmetric) translated to u
                out[i, j] = p1 * self._inside_area(locs[i], c[i] - R, c[i] + R)
        return out

    def anchors(self, locs, marks):
        return np.asarray(locs, float).reshape(-1, self.dim)

    def scaled(self, factor):
        return BooleanSet(self.grain, self.lam * factor, self.dim)

    def describe(self):
        return {"kind": self.kind, "lambda": self.lam, "d": self.dim, "grain": self.grain.describe()}


def make_boolean(grain: GrainSet, lam: float = 1.0, d: int | None = None) -> BooleanSet:
    return BooleanSet(grain, lam, d)

"""Mixed moving maxima X(t) = sup_i F(t - U_i) on R^d, d in {1, 2}."""
from __future__ import annotations

import math

import numpy as np

from ..point_process import IntensityMeasure, UniformMark, Window
from ..quad import DEFAULT_QUAD, Estimate, QuadratureError, gauss_legendre, quad1d, quad1d_pieces, union_length
from ..rng import stream
from .base import (SpectralModel, arc_angle_in_box, bbox, box_window, circle_intersection_heights,
                   effective_reach, radial_panels)
from .storms import StormProfile, ball_volume, section_union_area


class MovingMaxima(SpectralModel):
    kind = "moving_maxima"

    def __init__(self, storm: StormProfile, lam: float, d: int = 1):
        if not lam > 0:
            raise ValueError("lambda must be > 0")
        if d not in (1, 2):
            raise ValueError("moving maxima are supported for d = 1 or 2")
        self.storm = storm
        self.lam = float(lam)
        self.dim = d
        self.mark = UniformMark(0.0, 1.0)
        self.intensity = IntensityMeasure(self.lam)
        self.compact = math.isfinite(storm.support_radius)

    def eval(self, t, locs, marks):
        t = self.index_points(t)
        locs = np.asarray(locs, float).reshape(-1, self.dim)
        dist = np.sqrt(((t[:, None, :] - locs[None, :, :]) ** 2).sum(-1))
        return self.storm(dist)

    def shift(self, s, locs, marks):
        return np.asarray(locs, float) - np.asarray(s, float).reshape(1, -1), marks

    def sup_value(self):
        return self.storm.sup

    def _radius(self, a):
        if a <= 0:
            return self.storm.support_radius
        return float(self.storm.level_radius(a))

    def level_mass(self, t, a):
        r = self._radius(a)
        if r < 0:
            return 0.0
        return self.lam * float(ball_volume(self.dim, r)) if math.isfinite(r) else math.inf

    def cover_window(self, points, a):
        lo, hi = bbox(self.index_points(points))
        r = max(self._radius(a), 0.0)
        if not math.isfinite(r):
            raise ValueError("level set at threshold 0 is unbounded; a positive threshold is needed")
        return box_window(lo - r, hi + r, self.mark)

    def check_window(self, window: Window):
        super().check_window(window)
        if window.mark != self.mark:
            raise ValueError("window mark law does not match the model's mark space")

    def tail_mass(self, t, a, window):
        self.check_window(window)
        t = self.index_points(t)[0]
        r = self._radius(a)
        if r < 0:
            return 0.0, True
        if not math.isfinite(r):
            return math.inf, True
        lo, hi = np.asarray(window.lower), np.asarray(window.upper)
        if np.all(t - r >= lo) and np.all(t + r <= hi):
            return 0.0, True
        if self.dim == 1:
            # the parts of [t - r, t + r] beyond each end of the window
            out = max(0.0, lo[0] - (t[0] - r)) + max(0.0, (t[0] + r) - hi[0])
            return self.lam * min(out, 2 * r), True
        rr, w = radial_panels(r, 128, 8)
        inside = float((w * rr * arc_angle_in_box(rr, lo - t, hi - t)).sum())
        return self.lam * max(math.pi * r * r - inside, 0.0), True

    def union_mass(self, points, thresholds, quad=DEFAULT_QUAD):
        pts = self.index_points(points)
        x = np.asarray(thresholds, float)
        if np.any(x <= 0) and not self.compact:
            return Estimate(math.inf, 0.0)
        r = np.array([self._radius(v) for v in x])
        keep = r >= 0
        pts, r = pts[keep], r[keep]
        if len(r) == 0:
            return Estimate(0.0, 0.0)
        if self.dim == 1:
            return Estimate(self.lam * float(union_length(pts[:, 0] - r, pts[:, 0] + r)), 0.0)
        if len(r) == 1:
            return Estimate(self.lam * math.pi * r[0] ** 2, 0.0)
        if quad.method == "mc":
            return self._mc_union(pts, r, quad)
        breaks = list(pts[:, 1] - r) + list(pts[:, 1] + r) + circle_intersection_heights(pts, r)

        def chord(j, y):
            dy = y - pts[j, 1]
            return np.where(np.abs(dy) <= r[j], np.sqrt(np.clip(r[j] ** 2 - dy ** 2, 0, None)), -1.0)

        fine = section_union_area(pts, chord, breaks, 64)
        coarse = section_union_area(pts, chord, breaks, 32)
        return Estimate(self.lam * fine, self.lam * abs(fine - coarse))

    def _mc_union(self, pts, r, quad):
        lo, hi = (pts - r[:, None]).min(0), (pts + r[:, None]).max(0)
        rng = stream(quad.seed, "mc-union")
        u = rng.uniform(lo, hi, size=(quad.mc_samples, 2))
        hit = np.zeros(len(u), bool)
        for p, rj in zip(pts, r):
            hit |= ((u - p) ** 2).sum(1) <= rj * rj
        vol = float(np.prod(hi - lo))
        p = hit.mean()
        return Estimate(self.lam * vol * p, self.lam * vol * math.sqrt(p * (1 - p) / len(u)))

    def integrate(self, h, points, quad=DEFAULT_QUAD):
        pts = self.index_points(points)
        R = self.storm.support_radius
        if self.dim == 1:
            def f(u):
                return float(h(self.storm(pts[:, 0] - u)))
            breaks = [-math.inf, math.inf] + list(pts[:, 0])
            if math.isfinite(R):
                breaks += list(pts[:, 0] - R) + list(pts[:, 0] + R)
            return self.lam * quad1d_pieces(f, breaks, tol=quad.tolerance * 1e-2)
        if len(pts) == 1:
            area = lambda rho: 2 * math.pi * rho * float(h(np.array([self.storm(rho)])))
            est = quad1d(area, 0.0, R, tol=quad.tolerance * 1e-2) if math.isfinite(R) else \
                quad1d_pieces(area, [0.0, self.storm.s * 40, math.inf], tol=quad.tolerance * 1e-2)
            return self.lam * est
        reach = effective_reach(self.storm, lambda v: v, rel=1e-13)
        lo, hi = pts.min(0) - reach, pts.max(0) + reach
        if quad.method == "mc":
            rng = stream(quad.seed, "mc-integrate")
            u = rng.uniform(lo, hi, size=(quad.mc_samples, 2))
            vals = h(self.eval(pts, u, None).T)
            vol = float(np.prod(hi - lo))
            return Estimate(self.lam * vol * vals.mean(), self.lam * vol * vals.std() / math.sqrt(len(u)))

        def tensor(n_panels):
            edges_x = np.linspace(lo[0], hi[0], n_panels + 1)
            edges_y = np.linspace(lo[1], hi[1], n_panels + 1)
            xs, wx = map(np.concatenate, zip(*(gauss_legendre(a, b, 6) for a, b in zip(edges_x[:-1], edges_x[1:]))))
            ys, wy = map(np.concatenate, zip(*(gauss_legendre(a, b, 6) for a, b in zip(edges_y[:-1], edges_y[1:]))))
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            W = np.outer(wx, wy).ravel()
            u = np.column_stack([X.ravel(), Y.ravel()])
            tot = 0.0
            for i in range(0, len(u), 200_000):
                tot += float((h(self.eval(pts, u[i:i + 200_000], None).T) * W[i:i + 200_000]).sum())
            return tot

        fine, coarse = tensor(96), tensor(48)
        if abs(fine - coarse) > max(1e-6, 1e-4 * abs(fine)):
            raise QuadratureError(f"2-D quadrature did not settle: {fine} vs {coarse}")
        return Estimate(self.lam * fine, self.lam * abs(fine - coarse))

    def sample_core(self, n, rng):
        r0 = float(self.storm.level_radius(math.exp(-1.0) * self.storm.sup))
        if self.dim == 1:
            locs = rng.uniform(-r0, r0, size=(n, 1))
        else:
            rad = r0 * np.sqrt(rng.uniform(size=n))
            ang = rng.uniform(0, 2 * math.pi, size=n)
            locs = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        marks = self.mark.sample(n, rng)
        return locs, marks, self.lam * float(ball_volume(self.dim, r0))

    def growth_curves(self, locs, marks, radii, psi, centers=None):
        locs = np.asarray(locs, float).reshape(-1, self.dim)
        c = np.zeros_like(locs) if centers is None else np.asarray(centers, float).reshape(locs.shape)
        radii = np.asarray(radii, float)
        reach = effective_reach(self.storm, psi)
        out = np.zeros((len(locs), len(radii)))
        if self.dim == 1:
            tau, G = self.storm.cumulative(psi, reach, reach / 4096)
            rel = (c - locs)[:, 0]
            for j, R in enumerate(radii):
                out[:, j] = np.interp(rel + R, tau, G) - np.interp(rel - R, tau, G)
            return out
        rr, w = radial_panels(reach, 128, 8)
        base = w * rr * psi(self.storm(rr))
        for i in range(len(locs)):
            rel = c[i] - locs[i]
            for j, R in enumerate(radii):
                out[i, j] = (base * arc_angle_in_box(rr, rel - R, rel + R)).sum()
        return out

    def anchors(self, locs, marks):
        return np.asarray(locs, float).reshape(-1, self.dim)

    def scaled(self, factor):
        return MovingMaxima(self.storm, self.lam * factor, self.dim)

    def describe(self):
        return {"kind": self.kind, "lambda": self.lam, "d": self.dim, "storm": self.storm.describe()}


def make_moving_maxima(storm: StormProfile, lam: float = 1.0, d: int = 1) -> MovingMaxima:
    return MovingMaxima(storm, lam, d)

"""Storms carried by oriented Poisson lines in the plane.

An atom (r, phi, mark) is the line {x : <x, e_phi> = r}; the field at t
feels it through F(<t, e_phi> - r).  phi ranges over [0, 2 pi) (oriented
lines), so the location coordinate is r alone.
"""
from __future__ import annotations

import math

import numpy as np

from ..point_process import AngleMark, FrechetMark, IntensityMeasure, ProductMark, UniformMark, Window
from ..quad import DEFAULT_QUAD, Estimate, QuadratureError, gauss_legendre, improper_power_integral, union_length
from .base import SpectralModel, WindowChoice, box_window, effective_reach
from .storms import StormProfile

N_PHI = 512


def _phi_nodes(n_panels=N_PHI // 8, n_nodes=8):
    edges = np.linspace(0.0, 2 * math.pi, n_panels + 1)
    xs, ws = zip(*(gauss_legendre(a, b, n_nodes) for a, b in zip(edges[:-1], edges[1:])))
    return np.concatenate(xs), np.concatenate(ws)


def square_chord(q, c, s, R):
    """Length of {x in [-R, R]^2 : <x, (c, s)> = q}, vectorized over q."""
    q = np.asarray(q, float)
    big = 1e300
    if abs(s) > 1e-12:
        a, b = (q * c - R) / s, (q * c + R) / s
        lo1, hi1 = np.minimum(a, b), np.maximum(a, b)
    else:
        ok = np.abs(q * c) <= R
        lo1, hi1 = np.where(ok, -big, 1.0), np.where(ok, big, 0.0)
    if abs(c) > 1e-12:
        a, b = (-R - q * s) / c, (R - q * s) / c
        lo2, hi2 = np.minimum(a, b), np.maximum(a, b)
    else:
        ok = np.abs(q * s) <= R
        lo2, hi2 = np.where(ok, -big, 1.0), np.where(ok, big, 0.0)
    return np.clip(np.minimum(hi1, hi2) - np.maximum(lo1, lo2), 0.0, None)


def _projections(t, phi):
    t = np.asarray(t, float).reshape(-1, 2)
    return t[:, 0:1] * np.cos(phi)[None, :] + t[:, 1:2] * np.sin(phi)[None, :]


class _LineBase(SpectralModel):
    dim = 2
    loc_dim = 1

    def _line_eval(self, t, locs, marks):
        t = self.index_points(t)
        r = np.asarray(locs, float).reshape(-1)
        phi = np.asarray(marks, float).reshape(len(r), -1)[:, 0]
        p = _projections(t, phi)
        return self.storm(p - r[None, :])

    def shift(self, s, locs, marks):
        s = np.asarray(s, float).reshape(2)
        marks = np.asarray(marks, float)
        phi = marks[:, 0]
        r = np.asarray(locs, float).reshape(-1) - (s[0] * np.cos(phi) + s[1] * np.sin(phi))
        return r[:, None], marks

    def anchors(self, locs, marks):
        r = np.asarray(locs, float).reshape(-1)
        phi = np.asarray(marks, float)[:, 0]
        return np.column_stack([r * np.cos(phi), r * np.sin(phi)])

    def _r_integral(self, points, g, reach, n_sub=8, n_nodes=8):
        """lam * int dphi int dr g(F(p_j(phi) - r)_j) over composite Gauss-Legendre."""
        pts = self.index_points(points)
        phi, wphi = _phi_nodes()
        p = _projections(pts, phi).T  # (Nphi, n)
        edges = [p - reach, p + reach, p]
        R = self.storm.support_radius
        if math.isfinite(R):
            edges += [p - R, p + R]
        edges = np.sort(np.concatenate(edges, axis=1), axis=1)
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        sub = np.linspace(0, 1, n_sub + 1)
        total = np.zeros(len(phi))
        for k in range(edges.shape[1] - 1):
            a, b = edges[:, k], edges[:, k + 1]
            for j in range(n_sub):
                lo = a + (b - a) * sub[j]
                hi = a + (b - a) * sub[j + 1]
                half = 0.5 * (hi - lo)
                r = (0.5 * (hi + lo))[:, None] + half[:, None] * x[None, :]
                vals = self.storm(p[:, None, :] - r[:, :, None])  # (Nphi, nodes, n)
                total += (g(vals) * w[None, :]).sum(1) * half
        return self.lam * float((total * wphi).sum())

    def _line_growth(self, locs, marks, radii, psi, centers, scale):
        r = np.asarray(locs, float).reshape(-1)
        phi = np.asarray(marks, float)[:, 0]
        c = np.zeros((len(r), 2)) if centers is None else np.asarray(centers, float).reshape(-1, 2)
        radii = np.asarray(radii, float)
        out = np.zeros((len(r), len(radii)))
        x, w = np.polynomial.legendre.leggauss(8)
        for i in range(len(r)):
            prof = _scaled_storm(self.storm, scale[i])
            reach = effective_reach(prof, psi)
            co, si = math.cos(phi[i]), math.sin(phi[i])
            shift = c[i, 0] * co + c[i, 1] * si
            for j, R in enumerate(radii):
                A, B = R * abs(co), R * abs(si)
                kinks = shift + np.array([-(A + B), -abs(A - B), abs(A - B), A + B])
                edges = np.concatenate([[r[i] - reach, r[i] + reach], kinks])
                edges = np.unique(np.clip(edges, r[i] - reach, r[i] + reach))
                # subdivide each segment so smooth storms are resolved
                fine = np.concatenate([np.linspace(a, b, 9)[:-1] for a, b in zip(edges[:-1], edges[1:])] + [edges[-1:]])
                lo, hi = fine[:-1], fine[1:]
                half = 0.5 * (hi - lo)
                q = (0.5 * (hi + lo))[:, None] + half[:, None] * x[None, :]
                vals = square_chord(q - shift, co, si, R) * psi(prof(q - r[i]))
                out[i, j] = float(((vals * w[None, :]).sum(1) * half).sum())
        return out


def _scaled_storm(storm: StormProfile, z: float) -> StormProfile:
    if z == 1.0:
        return storm
    if storm.shape == "table":
        return StormProfile("table", table_x=storm.table_x, table_y=tuple(z * np.asarray(storm.table_y)))
    return StormProfile(storm.shape, storm.h * z, storm.s)


class PoissonLine(_LineBase):
    kind = "poisson_line"

    def __init__(self, storm: StormProfile, lam: float):
        if not lam > 0:
            raise ValueError("lambda must be > 0")
        self.storm = storm
        self.lam = float(lam)
        self.mark = ProductMark((AngleMark(), UniformMark(0.0, 1.0)))
        self.intensity = IntensityMeasure(self.lam)
        self.compact = math.isfinite(storm.support_radius)

    def eval(self, t, locs, marks):
        return self._line_eval(t, locs, marks)

    def sup_value(self):
        return self.storm.sup

    def _rho(self, a):
        return self.storm.support_radius if a <= 0 else float(self.storm.level_radius(a))

    def level_mass(self, t, a):
        rho = self._rho(a)
        if rho < 0:
            return 0.0
        return self.lam * 2 * math.pi * 2 * rho if math.isfinite(rho) else math.inf

    def cover_window(self, points, a):
        pts = self.index_points(points)
        rho = max(self._rho(a), 0.0)
        if not math.isfinite(rho):
            raise ValueError("level set at threshold 0 is unbounded; a positive threshold is needed")
        R = float(np.linalg.norm(pts, axis=1).max()) + rho
        return box_window([-R], [R], self.mark)

    def check_window(self, window: Window):
        super().check_window(window)
        if window.mark != self.mark:
            raise ValueError("window mark law does not match the model's mark space")

    def tail_mass(self, t, a, window):
        self.check_window(window)
        rho = self._rho(a)
        if rho < 0:
            return 0.0, True
        if not math.isfinite(rho):
            return math.inf, True
        phi, w = _phi_nodes()
        p = _projections(t, phi)[0]
        inside = np.clip(np.minimum(p + rho, window.upper[0]) - np.maximum(p - rho, window.lower[0]), 0, None)
        return self.lam * float(((2 * rho - inside) * w).sum()), True

    def union_mass(self, points, thresholds, quad=DEFAULT_QUAD):
        pts = self.index_points(points)
        x = np.asarray(thresholds, float)
        rho = np.array([self._rho(v) for v in x])
        if np.any(~np.isfinite(rho)):
            return Estimate(math.inf, 0.0)
        keep = rho >= 0
        if not keep.any():
            return Estimate(0.0, 0.0)

        def run(n_panels):
            phi, w = _phi_nodes(n_panels)
            p = _projections(pts[keep], phi).T
            r = rho[keep][None, :]
            return self.lam * float((union_length(p - r, p + r) * w).sum())

        fine, coarse = run(N_PHI // 8), run(N_PHI // 16)
        return Estimate(fine, abs(fine - coarse))

    def integrate(self, h, points, quad=DEFAULT_QUAD):
        pts = self.index_points(points)
        if len(pts) == 1:
            # the inner integral does not depend on phi
            from ..quad import quad1d_pieces
            R = self.storm.support_radius
            br = [-math.inf, 0.0, math.inf] + ([-R, R] if math.isfinite(R) else [])
            inner = quad1d_pieces(lambda tau: float(h(np.array([self.storm(tau)]))), br, tol=quad.tolerance * 1e-2)
            return inner * (2 * math.pi * self.lam)
        reach = effective_reach(self.storm, lambda v: v, rel=1e-13)
        g = lambda v: h(v)
        fine = self._r_integral(pts, g, reach, n_sub=8)
        coarse = self._r_integral(pts, g, reach, n_sub=4)
        if abs(fine - coarse) > max(1e-6, 1e-4 * abs(fine)):
            raise QuadratureError(f"line quadrature did not settle: {fine} vs {coarse}")
        return Estimate(fine, abs(fine - coarse))

    def sample_core(self, n, rng):
        rho0 = float(self.storm.level_radius(math.exp(-1.0) * self.storm.sup))
        r = rng.uniform(-rho0, rho0, size=(n, 1))
        marks = self.mark.sample(n, rng)
        return r, marks, self.lam * 2 * math.pi * 2 * rho0

    def growth_curves(self, locs, marks, radii, psi, centers=None):
        return self._line_growth(locs, marks, radii, psi, centers, np.ones(len(np.atleast_1d(locs))))

    def scaled(self, factor):
        return PoissonLine(self.storm, self.lam * factor)

    def describe(self):
        return {"kind": self.kind, "lambda": self.lam, "storm": self.storm.describe()}


class MaxStableLine(_LineBase):
    """zeta(t) = sup_i z_i F(<t, e_phi_i> - r_i) with alpha-Frechet intensity in z."""

    kind = "poisson_line_maxstable"

    def __init__(self, storm: StormProfile, lam: float, alpha: float):
        if not lam > 0 or not alpha > 0:
            raise ValueError("lambda and alpha must be > 0")
        self.storm = storm
        self.lam = float(lam)
        self.alpha = float(alpha)
        self.intensity = IntensityMeasure(self.lam)
        self.F_alpha = storm.power_integral(self.alpha)
        if not (math.isfinite(self.F_alpha) and self.F_alpha > 0):
            raise ValueError("storm has a divergent alpha-moment integral")

    @property
    def sigma(self) -> float:
        """Frechet scale of every margin."""
        return (2 * math.pi * self.lam * self.F_alpha) ** (1.0 / self.alpha)

    def mark_for(self, z_min: float) -> ProductMark:
        return ProductMark((AngleMark(), FrechetMark(self.alpha, z_min)))

    def _z_min(self, window: Window) -> float:
        m = window.mark
        if not (isinstance(m, ProductMark) and len(m.parts) == 2 and isinstance(m.parts[0], AngleMark)
                and isinstance(m.parts[1], FrechetMark) and m.parts[1].alpha == self.alpha):
            raise ValueError("window mark law does not match the model's mark space")
        return m.parts[1].z_min

    def check_window(self, window):
        super().check_window(window)
        self._z_min(window)

    def eval(self, t, locs, marks):
        z = np.asarray(marks, float)[:, 1]
        return self._line_eval(t, locs, marks) * z[None, :]

    def sup_value(self):
        return self.sigma

    def level_mass(self, t, a):
        return (self.sigma / a) ** self.alpha if a > 0 else math.inf

    def _outside_power(self, t, lo, hi):
        """int dphi int_{r not in [lo, hi]} F(p - r)^alpha dr."""
        phi, w = _phi_nodes()
        p = _projections(t, phi)[0]
        pi = self.storm.power_integral
        vals = [pi(self.alpha, hi - pk, math.inf) + pi(self.alpha, pk - lo, math.inf) for pk in p]
        return float((np.asarray(vals) * w).sum())

    def tail_mass(self, t, a, window):
        z_min = self._z_min(window)
        if a <= 0:
            return math.inf, True
        lo, hi = window.lower[0], window.upper[0]
        out = self.lam * a ** (-self.alpha) * self._outside_power(t, lo, hi)
        h = self.storm.sup
        if a < z_min * h:
            # in-window lines whose mark fell below z_min
            rho = float(self.storm.level_radius(a / z_min))
            phi, w = _phi_nodes()
            p = _projections(t, phi)[0]
            pi = self.storm.power_integral
            part = []
            for pk in p:
                l2, h2 = max(pk - hi, -rho), min(pk - lo, rho)
                part.append(a ** (-self.alpha) * pi(self.alpha, l2, h2) - z_min ** (-self.alpha) * max(h2 - l2, 0.0))
            out += self.lam * float((np.clip(part, 0, None) * w).sum())
        return out, True

    def _window_for(self, pts, budget):
        a = self.threshold_for(pts, budget / 2)
        z_min = a / self.storm.sup
        tmax = float(np.linalg.norm(pts, axis=1).max())
        far = np.array([[tmax, 0.0]])

        def total(R):
            # the tail grows with |t| for storms with convex tail integrals, so the
            # farthest grid point bounds every other one
            return len(pts) * self.lam * a ** (-self.alpha) * self._outside_power(far, -R, R)

        lo, hi = tmax, tmax + 1.0
        while total(hi) > budget / 2:
            hi = tmax + 2 * (hi - tmax)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if total(mid) > budget / 2:
                lo = mid
            else:
                hi = mid
        miss = self.miss_prob(pts, a)
        window = Window((-hi,), (hi,), self.mark_for(z_min))
        return WindowChoice(window, a, miss + total(hi), exact=True)

    def cover_window(self, points, a):
        raise ValueError("level sets of this model are unbounded in r; use window_for")

    def union_mass(self, points, thresholds, quad=DEFAULT_QUAD):
        pts = self.index_points(points)
        x = np.asarray(thresholds, float)
        if np.any(x <= 0):
            return Estimate(math.inf, 0.0)
        if len(pts) == 1:
            return Estimate(self.level_mass(pts[0], x[0]), 0.0)
        reach = effective_reach(self.storm, lambda v: v ** self.alpha, rel=1e-15)
        g = lambda v: ((v / x) ** self.alpha).max(-1)
        fine = self._r_integral(pts, g, reach, n_sub=8)
        coarse = self._r_integral(pts, g, reach, n_sub=4)
        return Estimate(fine, abs(fine - coarse))

    def integrate(self, h, points, quad=DEFAULT_QUAD):
        pts = self.index_points(points)
        if len(pts) != 1:
            raise QuadratureError("integral oracle for this model is available for a single index point only")
        inner = improper_power_integral(lambda w: float(h(np.array([w]))), self.alpha, tol=quad.tolerance * 1e-2)
        return inner * (2 * math.pi * self.lam * self.F_alpha)

    def sample_core(self, n, rng):
        a0 = math.exp(-1.0) * self.sigma
        reach = effective_reach(self.storm, lambda v: v ** self.alpha, rel=1e-15)
        tau, G = self.storm.cumulative(lambda v: v ** self.alpha, reach, reach / 8192)
        r = np.interp(rng.uniform(0, G[-1], size=n), G, tau)
        phi = rng.uniform(0, 2 * math.pi, size=n)
        Fr = np.maximum(self.storm(r), 1e-300)
        z = (a0 / Fr) * (1.0 - rng.uniform(size=n)) ** (-1.0 / self.alpha)
        mass = self.lam * 2 * math.pi * a0 ** (-self.alpha) * self.F_alpha
        return r[:, None], np.column_stack([phi, z]), mass

    def growth_curves(self, locs, marks, radii, psi, centers=None):
        z = np.asarray(marks, float)[:, 1]
        return self._line_growth(locs, marks, radii, psi, centers, z)

    def scaled(self, factor):
        return MaxStableLine(self.storm, self.lam * factor, self.alpha)

    def describe(self):
        return {"kind": self.kind, "lambda": self.lam, "alpha": self.alpha, "storm": self.storm.describe()}


def make_poisson_line(storm: StormProfile, lam: float = 1.0) -> PoissonLine:
    return PoissonLine(storm, lam)


def make_poisson_line_maxstable(storm: StormProfile, lam: float = 1.0, alpha: float = 1.0) -> MaxStableLine:
    return MaxStableLine(storm, lam, alpha)

"""Common interface of the model zoo.

A model bundles the spectral functions f_t, the intensity mu, exact level-set
mass oracles and, for stationary kinds, the coordinate flow T_s.  Generic
code (integrator, exactdist, flowclass) only talks to this interface.

Min-oriented models (Penrose) are handled through the max-form
g_t = exp(-X_t), so every ``eval`` is the spectral function of a max-i.d.
process with values in [0, inf).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..point_process import MAX_EXPECTED_ATOMS, IntensityMeasure, Window
from ..quad import DEFAULT_QUAD, Estimate, QuadratureError, QuadratureSpec, gauss_legendre


class TailUnavailable(ValueError):
    pass


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class WindowChoice:
    """A simulation window with its truncation guarantee.

    Off-window atoms never reach ``threshold`` at a grid point (exactly, or
    with the probability folded into ``error_bound`` when ``exact`` is
    False), and ``error_bound`` bounds the probability that the truncated
    field differs from the full one anywhere on the grid.
    """

    window: Window
    threshold: float
    error_bound: float
    exact: bool = True


class SpectralModel:
    kind = "abstract"
    orientation = "max"
    stationary = True
    compact = False
    dim = 1

    lam: float
    intensity: IntensityMeasure

    # ---- evaluation -------------------------------------------------------
    def eval(self, t, locs, marks) -> np.ndarray:
        """f_t at every atom: shape (len(t), len(locs))."""
        raise NotImplementedError

    def shift(self, s, locs, marks):
        """Coordinates of T_s omega, with f_{t+s}(omega) = f_t(T_s omega)."""
        raise ValueError(f"model kind {self.kind!r} has no flow action")

    def index_points(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        if t.ndim == 0:
            t = t.reshape(1, 1)
        elif t.ndim == 1:
            t = t.reshape(-1, 1) if self.dim == 1 else t.reshape(1, -1)
        if t.shape[1] != self.dim:
            raise ValueError(f"index points must have dimension {self.dim}, got shape {t.shape}")
        return t

    def field_transform(self, m):
        """Map the sup of g over atoms to the process value."""
        return m

    # ---- mass oracles -----------------------------------------------------
    def level_mass(self, t, a: float) -> float:
        """mu{f_t >= a} over the whole space."""
        raise NotImplementedError

    def tail_mass(self, t, a: float, window: Window) -> tuple[float, bool]:
        """(mu(window complement and {f_t >= a}), exact flag)."""
        raise TailUnavailable("tail mass unavailable")

    def cover_window(self, points, a: float) -> Window:
        raise TailUnavailable("tail mass unavailable")

    def union_mass(self, points, thresholds, quad: QuadratureSpec = DEFAULT_QUAD) -> Estimate:
        raise QuadratureError(f"no union-mass oracle for model kind {self.kind!r}")

    def integrate(self, h, points, quad: QuadratureSpec = DEFAULT_QUAD) -> Estimate:
        """int h(f_{t_1}, ..., f_{t_n}) dmu for h vanishing at the origin.

        ``h`` maps an array of shape (..., n) to shape (...).
        """
        raise QuadratureError(f"no integral oracle for model kind {self.kind!r}")

    # ---- truncation -------------------------------------------------------
    def miss_prob(self, pts, a: float) -> float:
        """sum_t P[X(t) < a] over the points."""
        if self.stationary:
            return len(pts) * math.exp(-self.level_mass(pts[0], a))
        return sum(math.exp(-self.level_mass(t, a)) for t in pts)

    def threshold_for(self, points, budget: float) -> float:
        """Largest a with sum_t P[X(t) < a] <= budget, by bisection on log a."""
        pts = self.index_points(points)

        def miss(a):
            return self.miss_prob(pts, a)

        hi = self.sup_value()
        if miss(hi) <= budget:
            return hi
        lo = hi
        for _ in range(400):
            lo *= 0.5
            if miss(lo) <= budget:
                break
        else:
            raise BracketError("could not bracket the budget threshold")
        for _ in range(100):
            mid = math.sqrt(lo * hi)
            if miss(mid) <= budget:
                lo = mid
            else:
                hi = mid
        return lo

    def sup_value(self) -> float:
        raise NotImplementedError

    def window_for(self, points, budget: float) -> WindowChoice:
        if not 0 < budget < 1:
            raise ValueError(f"error budget must lie in (0, 1), got {budget}")
        pts = self.index_points(points)
        try:
            choice = self._window_for(pts, budget)
            mass = self.intensity.mass(choice.window)
        except BracketError:
            mass = math.inf
        if mass > MAX_EXPECTED_ATOMS:
            best = self._smallest_budget(pts, budget)
            why = (f"window mass {mass:.3g} exceeds {MAX_EXPECTED_ATOMS:.0e}" if math.isfinite(mass)
                   else "no threshold in floating point reaches it")
            raise ValueError(f"error budget {budget:g} is unattainable for this model and grid ({why}); "
                             f"smallest attainable budget is about {best:.3g}")
        return choice

    def _window_for(self, pts, budget) -> WindowChoice:
        if self.compact:
            return WindowChoice(self.cover_window(pts, 0.0), 0.0, 0.0)
        a = self.threshold_for(pts, budget)
        miss = self.miss_prob(pts, a)
        return WindowChoice(self.cover_window(pts, a), a, miss)

    def _attainable(self, pts, budget) -> bool:
        try:
            return self.intensity.mass(self._window_for(pts, budget).window) <= MAX_EXPECTED_ATOMS
        except BracketError:
            return False

    def _smallest_budget(self, pts, budget) -> float:
        lo, hi = math.log(budget), math.log(0.999)
        if not self._attainable(pts, math.exp(hi)):
            return 1.0
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if self._attainable(pts, math.exp(mid)):
                hi = mid
            else:
                lo = mid
        return math.exp(hi)

    def window_intensity(self, window: Window) -> IntensityMeasure:
        return self.intensity

    # ---- flow classification ----------------------------------------------
    def sample_core(self, n: int, rng):
        """n atoms from mu restricted to a finite-mass core near the origin, normalized."""
        raise ValueError(f"model kind {self.kind!r} has no sampling core")

    def growth_curves(self, locs, marks, radii, psi, centers=None) -> np.ndarray:
        raise ValueError(f"model kind {self.kind!r} has no growth-curve quadrature")

    def anchors(self, locs, marks) -> np.ndarray:
        raise ValueError(f"model kind {self.kind!r} has no atom anchors")

    # ---- bookkeeping ------------------------------------------------------
    def scaled(self, factor: float) -> "SpectralModel":
        """Same model with intensity multiplied by ``factor``."""
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError

    def check_window(self, window: Window):
        if window.dim != self.loc_dim:
            raise ValueError(f"window dimension {window.dim} does not match the model's location space")

    @property
    def loc_dim(self) -> int:
        return self.dim


def box_window(lower, upper, mark) -> Window:
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    upper = np.where(upper > lower, upper, lower + 1e-9)
    return Window(tuple(lower), tuple(upper), mark)


def bbox(points) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(points, float)
    return p.min(axis=0), p.max(axis=0)


def circle_intersection_heights(centers, radii) -> list:
    """y-coordinates where pairs of circles cross; used as quadrature breakpoints."""
    out = []
    c = np.asarray(centers, float)
    r = np.asarray(radii, float)
    for i in range(len(c)):
        for j in range(i + 1, len(c)):
            d = np.linalg.norm(c[j] - c[i])
            if d == 0 or d > r[i] + r[j] or d < abs(r[i] - r[j]):
                continue
            a = (r[i] ** 2 - r[j] ** 2 + d * d) / (2 * d)
            hgt = math.sqrt(max(r[i] ** 2 - a * a, 0.0))
            mid = c[i] + a * (c[j] - c[i]) / d
            perp = np.array([-(c[j] - c[i])[1], (c[j] - c[i])[0]]) / d
            out += [mid[1] + hgt * perp[1], mid[1] - hgt * perp[1]]
    return out


def grid_lookup(grid: np.ndarray, t: np.ndarray, what="grid") -> np.ndarray:
    """Row indices of the points ``t`` in ``grid``; error when a point is off-grid."""
    scale = max(1.0, float(np.abs(grid).max()) if grid.size else 1.0)
    tol = 1e-9 * scale
    t = np.asarray(t, float)
    if len(t) == 0:
        return np.zeros(0, int)
    d, idx = cKDTree(grid).query(t, p=np.inf)
    bad = np.flatnonzero(d > tol)
    if len(bad):
        raise ValueError(f"index point {t[bad[0]].tolist()} is not on the {what}")
    return np.asarray(idx, int)


def arc_angle_in_box(r, lo, hi) -> np.ndarray:
    """Angular measure of {theta : r (cos theta, sin theta) in [lo, hi]}.

    ``r`` has shape (N,), ``lo``/``hi`` shape (N, 2) or (2,), box coordinates
    relative to the circle center.
    """
    r = np.asarray(r, float)[:, None]
    lo = np.broadcast_to(np.asarray(lo, float), (r.shape[0], 2))
    hi = np.broadcast_to(np.asarray(hi, float), (r.shape[0], 2))
    rs = np.where(r > 0, r, 1.0)
    with np.errstate(invalid="ignore"):
        ax = np.arccos(np.clip(np.concatenate([lo[:, :1], hi[:, :1]], 1) / rs, -1, 1))
        ay = np.arcsin(np.clip(np.concatenate([lo[:, 1:], hi[:, 1:]], 1) / rs, -1, 1))
    cuts = np.concatenate([ax, -ax, ay, np.pi - ay, np.zeros_like(ax[:, :1])], 1) % (2 * np.pi)
    cuts = np.sort(np.concatenate([cuts, np.full_like(cuts[:, :1], 2 * np.pi)], 1), axis=1)
    mid = 0.5 * (cuts[:, 1:] + cuts[:, :-1])
    px, py = r * np.cos(mid), r * np.sin(mid)
    inside = (px >= lo[:, :1]) & (px <= hi[:, :1]) & (py >= lo[:, 1:]) & (py <= hi[:, 1:])
    out = (np.diff(cuts, axis=1) * inside).sum(1)
    # degenerate radius: the center itself
    centre_in = np.all((lo <= 0) & (hi >= 0), axis=1)
    return np.where(r[:, 0] > 0, out, 2 * np.pi * centre_in)


def effective_reach(profile, func, rel=1e-17, cap=1e7) -> float:
    """Radius beyond which func(F) is below rel * func(F(0)); support radius if compact."""
    if math.isfinite(profile.support_radius):
        return float(profile.support_radius)
    top = float(func(np.array([profile.sup]))[0])
    if top <= 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while float(func(profile(np.array([hi])))[0]) > rel * top:
        hi *= 2
        if hi > cap:
            raise ValueError("integrand does not decay along the storm profile")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if float(func(profile(np.array([mid])))[0]) > rel * top:
            lo = mid
        else:
            hi = mid
    return hi


def radial_panels(reach: float, n_panels=64, n_nodes=8):
    """Composite Gauss-Legendre nodes/weights on [0, reach]."""
    edges = np.linspace(0.0, reach, n_panels + 1)
    xs, ws = zip(*(gauss_legendre(a, b, n_nodes) for a, b in zip(edges[:-1], edges[1:])))
    return np.concatenate(xs), np.concatenate(ws)

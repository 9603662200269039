"""Stochastic max-integrals and compensated sum-integrals over Poisson configurations.

Functions on the base space are handled as ``Fn(model, t, scale)``, meaning
scale * f_t.  Integrals against mu always go through ``model.integrate`` so
gamma and the metrics inherit the model's quadrature and error estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .point_process import PointBatch, PointConfig, Window, group_max, group_sum
from .quad import DEFAULT_QUAD, Estimate, QuadratureSpec
from .spectral.base import SpectralModel

EVAL_CHUNK = 2_000_000  # atoms x index points per evaluation block


def compensator_a(u):
    """Centering function: u clamped to [-1, 1]."""
    out = np.clip(u, -1.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class Fn:
    model: SpectralModel
    t: object
    scale: float = 1.0

    @property
    def point(self) -> np.ndarray:
        return self.model.index_points(self.t)[0]

    def __mul__(self, c):
        return Fn(self.model, self.t, self.scale * c)

    __rmul__ = __mul__


def _eval_checked(model, t, locs, marks) -> np.ndarray:
    vals = model.eval(t, locs, marks)
    bad = ~np.isfinite(vals)
    if bad.any():
        j = int(np.argwhere(bad)[0][1])
        raise ValueError(f"spectral function is not finite at atom {j}: location {np.asarray(locs)[j].tolist()}")
    return vals


def max_integral(model: SpectralModel, t, config: PointConfig) -> float:
    """sup over atoms of f_t; 0 for an empty configuration."""
    if len(config) == 0:
        return 0.0
    vals = _eval_checked(model, t, config.locations, config.marks)
    return float(max(vals.max(), 0.0))


def _chunks(counts, per_atom_cost):
    """Replicate ranges whose atoms fit in one evaluation block."""
    budget = max(1, EVAL_CHUNK // max(per_atom_cost, 1))
    csum = np.concatenate([[0], np.cumsum(counts)])
    lo = 0
    while lo < len(counts):
        hi = int(np.searchsorted(csum, csum[lo] + budget, side="right")) - 1
        hi = max(hi, lo + 1)
        yield lo, hi, int(csum[lo]), int(csum[hi])
        lo = hi


def max_integral_batch(model: SpectralModel, points, batch: PointBatch) -> np.ndarray:
    """Per-replicate max-integrals at every index point, shape (n_rep, n_points)."""
    pts = model.index_points(points)
    out = np.zeros((batch.n_rep, len(pts)))
    for r0, r1, a0, a1 in _chunks(batch.counts, len(pts)):
        vals = _eval_checked(model, pts, batch.locations[a0:a1], batch.marks[a0:a1])
        out[r0:r1] = group_max(vals, batch.counts[r0:r1]).T
    return out


def field_values(model: SpectralModel, points, config: PointConfig) -> np.ndarray:
    """Process values at the index points (min-oriented models are transformed back)."""
    pts = model.index_points(points)
    if len(config) == 0:
        m = np.zeros(len(pts))
    else:
        m = np.zeros(len(pts))
        step = max(1, EVAL_CHUNK // max(len(config), 1))
        for i in range(0, len(pts), step):
            vals = _eval_checked(model, pts[i:i + step], config.locations, config.marks)
            m[i:i + step] = np.maximum(vals.max(1), 0.0)
    return model.field_transform(m)


# ---- truncation certificates ------------------------------------------------

@dataclass(frozen=True)
class TruncationCertificate:
    """P[some off-window atom reaches a] = 1 - exp(-tail mass) at each threshold."""

    window: Window
    thresholds: tuple
    tail_masses: tuple
    exact: bool
    model_kind: str = ""
    t: tuple = ()
    _model: SpectralModel | None = field(default=None, repr=False, compare=False)

    def tail_exceed_prob(self, a: float) -> float:
        for x, m in zip(self.thresholds, self.tail_masses):
            if x == a:
                return -math.expm1(-m)
        if self._model is None:
            raise KeyError(f"threshold {a} not in the certificate")
        m, _ = self._model.tail_mass(np.asarray(self.t), a, self.window)
        return -math.expm1(-m)

    def to_dict(self):
        return {
            "window": self.window.describe(),
            "t": list(self.t),
            "thresholds": list(self.thresholds),
            "tail_exceed_prob": [-math.expm1(-m) for m in self.tail_masses],
            "exact": self.exact,
        }


def tail_certificate(model: SpectralModel, t, window: Window, thresholds) -> TruncationCertificate:
    th = [float(a) for a in np.atleast_1d(thresholds)]
    if any(not a > 0 for a in th):
        raise ValueError("thresholds must be > 0")
    pt = model.index_points(t)[0]
    masses, exact = [], True
    for a in th:
        m, ex = model.tail_mass(pt, a, window)
        masses.append(float(m))
        exact &= bool(ex)
    return TruncationCertificate(window, tuple(th), tuple(masses), exact, model.kind, tuple(pt.tolist()), model)


# ---- compensated sum-integrals ----------------------------------------------

@dataclass(frozen=True)
class SumIntegralPlan:
    epsilon: float
    compensator_integral: float
    remainder_variance_bound: float
    window: Window
    t: tuple
    scale: float = 1.0
    compensator_error: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.remainder_variance_bound < 0:
            raise ValueError("remainder variance bound must be >= 0")
        if not math.isfinite(self.compensator_integral):
            raise ValueError("compensator integral must be finite")

    def to_dict(self):
        return {"epsilon": self.epsilon, "compensator_integral": self.compensator_integral,
                "compensator_error": self.compensator_error,
                "remainder_variance_bound": self.remainder_variance_bound,
                "window": self.window.describe(), "t": list(self.t), "scale": self.scale}


def make_sum_plan(f: Fn, tol: float = 1e-3, quad: QuadratureSpec = DEFAULT_QUAD) -> SumIntegralPlan:
    """Pick eps with int_{|f| <= eps} f^2 dmu <= tol^2 and compute the compensator."""
    model, pt, c = f.model, f.point, float(f.scale)
    if c == 0:
        raise ValueError("scale must be non-zero")
    pts = pt[None, :]

    def remainder(eps):
        return model.integrate(lambda v: np.where(np.abs(c * v[..., 0]) <= eps, (c * v[..., 0]) ** 2, 0.0),
                               pts, quad)

    eps = 1.0
    for _ in range(200):
        rem = remainder(eps)
        if rem.value + rem.error <= tol * tol:
            break
        eps *= 0.5
    else:
        raise ValueError("could not reach the remainder variance tolerance")
    window = model.cover_window(pts, eps / abs(c))
    comp = model.integrate(
        lambda v: np.where(np.abs(c * v[..., 0]) > eps, compensator_a(c * v[..., 0]), 0.0), pts, quad)
    return SumIntegralPlan(eps, float(comp.value), float(rem.value + rem.error), window,
                           tuple(pt.tolist()), c, float(comp.error))


def _check_pairing(model, plan: SumIntegralPlan, window: Window):
    tail, _ = model.tail_mass(np.asarray(plan.t), plan.epsilon / abs(plan.scale), window)
    if tail > 0:
        raise ValueError("inconsistent plan/window pairing: the configuration window does not cover {|f| > epsilon}")


def sum_integral(model: SpectralModel, t, config: PointConfig, plan: SumIntegralPlan) -> float:
    """sum f 1{|f| > eps} - compensator, with f = plan.scale * f_t."""
    pt = model.index_points(t)[0]
    if not np.allclose(pt, plan.t):
        raise ValueError("plan was computed for a different index point")
    _check_pairing(model, plan, config.window)
    if len(config) == 0:
        return -plan.compensator_integral
    f = plan.scale * _eval_checked(model, pt[None, :], config.locations, config.marks)[0]
    return float(np.where(np.abs(f) > plan.epsilon, f, 0.0).sum() - plan.compensator_integral)


def sum_integral_batch(model: SpectralModel, t, batch: PointBatch, plan: SumIntegralPlan) -> np.ndarray:
    pt = model.index_points(t)[0]
    _check_pairing(model, plan, batch.window)
    out = np.zeros(batch.n_rep)
    for r0, r1, a0, a1 in _chunks(batch.counts, 1):
        f = plan.scale * _eval_checked(model, pt[None, :], batch.locations[a0:a1], batch.marks[a0:a1])[0]
        out[r0:r1] = group_sum(np.where(np.abs(f) > plan.epsilon, f, 0.0), batch.counts[r0:r1])
    return out - plan.compensator_integral


# ---- gamma and metrics ----------------------------------------------------------

def _pair(f: Fn, g: Fn | None):
    if g is not None and g.model is not f.model:
        raise ValueError("both functions must live on the same model")
    if g is None:
        return f.model, f.point[None, :], np.array([f.scale])
    return f.model, np.vstack([f.point, g.point]), np.array([f.scale, g.scale])


def gamma(f: Fn, g: Fn, quad: QuadratureSpec = DEFAULT_QUAD) -> Estimate:
    """int a(f + g) - a(f) - a(g) dmu."""
    model, pts, c = _pair(f, g)

    def h(v):
        x, y = c[0] * v[..., 0], c[1] * v[..., 1]
        return compensator_a(x + y) - compensator_a(x) - compensator_a(y)

    return model.integrate(h, pts, quad)


def metric_d(f: Fn, g: Fn | None = None, quad: QuadratureSpec = DEFAULT_QUAD) -> Estimate:
    """(int 1 ^ (f - g)^2 dmu)^(1/2); g = None means g = 0."""
    model, pts, c = _pair(f, g)
    if g is None:
        h = lambda v: np.minimum(1.0, (c[0] * v[..., 0]) ** 2)
    else:
        h = lambda v: np.minimum(1.0, (c[0] * v[..., 0] - c[1] * v[..., 1]) ** 2)
    est = model.integrate(h, pts, quad)
    val = math.sqrt(max(float(est.value), 0.0))
    err = math.sqrt(max(float(est.value) + est.error, 0.0)) - val
    return Estimate(val, err)


def norm_d(f: Fn, quad: QuadratureSpec = DEFAULT_QUAD) -> Estimate:
    return metric_d(f, None, quad)


def d_of_sum(f: Fn, g: Fn, quad: QuadratureSpec = DEFAULT_QUAD) -> Estimate:
    """d(f + g, 0)."""
    model, pts, c = _pair(f, g)
    est = model.integrate(lambda v: np.minimum(1.0, (c[0] * v[..., 0] + c[1] * v[..., 1]) ** 2), pts, quad)
    val = math.sqrt(max(float(est.value), 0.0))
    return Estimate(val, math.sqrt(max(float(est.value) + est.error, 0.0)) - val)


def metric_dmu(f: Fn, g: Fn | None = None, quad: QuadratureSpec = DEFAULT_QUAD, tol: float = 1e-12) -> float:
    """inf{eps > 0 : mu(|f - g| >= eps) <= eps}, by bisection against the mass oracle."""
    model, pts, c = _pair(f, g)
    if g is None:
        diff = lambda v: np.abs(c[0] * v[..., 0])
    else:
        diff = lambda v: np.abs(c[0] * v[..., 0] - c[1] * v[..., 1])

    def mass(eps):
        return float(model.integrate(lambda v: (diff(v) >= eps).astype(float), pts, quad).value)

    hi = 1.0
    while mass(hi) > hi:
        hi *= 2
        if hi > 1e12:
            raise ValueError("mu(|f - g| >= eps) does not fall below eps")
    lo = 0.0
    for _ in range(200):
        if hi - lo <= tol * max(hi, 1e-300):
            break
        mid = 0.5 * (lo + hi)
        if mass(mid) <= mid:
            hi = mid
        else:
            lo = mid
    # lo never moved: the infimum is below 2**-200, i.e. 0
    return hi if lo > 0 else 0.0


def ky_fan(samples_x, samples_y) -> float:
    """Empirical inf{delta : P(|x - y| >= delta) <= delta} over paired samples."""
    x = np.asarray(samples_x, float).ravel()
    y = np.asarray(samples_y, float).ravel()
    if x.size == 0:
        raise ValueError("ky_fan needs non-empty samples")
    if x.shape != y.shape:
        raise ValueError("paired samples must have equal length")
    d = np.sort(np.abs(x - y))[::-1]
    n = d.size
    # on (d_(k+1), d_(k)] the exceedance frequency is k / n
    nxt = np.concatenate([d, [0.0]])
    k = np.arange(n + 1)
    return float(min(1.0, np.min(np.maximum(nxt, k / n))))

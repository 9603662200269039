"""Finite-dimensional laws from the spectral representation.

Max case: P[X(t_j) < x_j, j <= n] = exp(-mu(union_j {f_{t_j} >= x_j})).
Sum case: E exp(i sum theta_j (I(f_{t_j}) + c_j))
        = exp(i sum theta_j c_j + int (e^{i sum theta_j f_j} - 1 - i sum theta_j a(f_j)) dmu).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .integrator import compensator_a
from .quad import DEFAULT_QUAD, Estimate, QuadratureSpec
from .spectral.base import SpectralModel


@dataclass(frozen=True)
class FddQuery:
    points: tuple
    values: tuple
    offsets: tuple | None = None

    def __post_init__(self):
        if len(self.points) == 0:
            raise ValueError("query needs at least one index point")
        if len(self.points) != len(self.values):
            raise ValueError("points and thresholds/angles must have equal lengths")
        if self.offsets is not None and len(self.offsets) != len(self.points):
            raise ValueError("location offsets must match the number of points")

    @classmethod
    def make(cls, points, values, offsets=None) -> "FddQuery":
        pts = np.asarray(points, float)
        pts = pts.reshape(len(pts), -1) if pts.ndim else pts.reshape(1, 1)
        vals = tuple(float(v) for v in np.atleast_1d(values))
        offs = None if offsets is None else tuple(float(v) for v in np.atleast_1d(offsets))
        return cls(tuple(map(tuple, pts.tolist())), vals, offs)

    def to_dict(self):
        return {"points": [list(p) for p in self.points], "values": list(self.values),
                "offsets": None if self.offsets is None else list(self.offsets)}


def union_mass(model: SpectralModel, points, thresholds, quad: QuadratureSpec = DEFAULT_QUAD) -> Estimate:
    """mu(union_j {f_{t_j} >= x_j}); thresholds of +inf drop out."""
    x = np.asarray(thresholds, float)
    pts = model.index_points(points)
    keep = np.isfinite(x)
    if not keep.any():
        return Estimate(0.0, 0.0)
    return model.union_mass(pts[keep], x[keep], quad)


def fdd_cdf(model: SpectralModel, query: FddQuery, quad: QuadratureSpec = DEFAULT_QUAD) -> Estimate:
    """P[X(t_j) < x_j for all j] with a propagated error estimate.

    For min-oriented models the thresholds apply to the max form, so the
    result is P[g(t_j) < x_j] = P[X(t_j) > -log x_j].
    """
    x = np.asarray(query.values, float)
    if np.any(x < 0):
        raise ValueError("thresholds must be non-negative")
    if not np.any(x > 0):
        raise ValueError("thresholds must not all be 0")
    if np.any(x == 0):
        # {f >= 0} is the whole space, so P[X(t) < 0] = 0
        return Estimate(0.0, 0.0)
    m = union_mass(model, query.points, x, quad)
    if not math.isfinite(m.value):
        return Estimate(0.0, 0.0)
    p = math.exp(-m.value)
    return Estimate(p, min(p, p * -math.expm1(-m.error)) if m.error < 50 else p)


def char_function(model: SpectralModel, query: FddQuery, quad: QuadratureSpec = DEFAULT_QUAD) -> Estimate:
    theta = np.asarray(query.values, float)
    if not theta.any():
        return Estimate(1.0 + 0.0j, 0.0)
    pts = model.index_points(query.points)

    def h(v):
        s = (v * theta).sum(-1)
        a = (compensator_a(v) * theta).sum(-1)
        return np.exp(1j * s) - 1.0 - 1j * a

    # model quadratures are real-valued; integrate the two parts separately
    re = model.integrate(lambda v: h(v).real, pts, quad)
    im = model.integrate(lambda v: h(v).imag, pts, quad)
    est = Estimate(complex(float(re.value), float(im.value)), re.error + im.error)
    shift = 0.0 if query.offsets is None else float(np.dot(theta, query.offsets))
    val = complex(np.exp(complex(est.value) + 1j * shift))
    # the real part of the exponent is <= 0, so |val| <= 1; the error propagates through exp
    return Estimate(val, abs(val) * math.expm1(est.error) if est.error < 50 else 1.0)

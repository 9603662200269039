"""Numerical integration helpers shared by the model zoo and the integrator."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    """How integrals against mu are evaluated.

    method "adaptive" uses closed forms or adaptive quadrature where a model
    supports them; "mc" forces Monte Carlo with ``mc_samples`` points and a
    reported standard error.
    """

    method: str = "adaptive"
    mc_samples: int = 200_000
    tolerance: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("adaptive", "mc"):
            raise ValueError(f"quadrature method must be 'adaptive' or 'mc', got {self.method!r}")
        if self.mc_samples < 1 or self.tolerance <= 0:
            raise ValueError("mc_samples must be >= 1 and tolerance > 0")


DEFAULT_QUAD = QuadratureSpec()


@dataclass(frozen=True)
class Estimate:
    value: float | complex
    error: float = 0.0

    def __add__(self, other):
        if isinstance(other, Estimate):
            return Estimate(self.value + other.value, self.error + other.error)
        return Estimate(self.value + other, self.error)

    def __mul__(self, c):
        return Estimate(self.value * c, self.error * abs(c))

    __rmul__ = __mul__

    def to_dict(self):
        v = self.value
        if isinstance(v, complex):
            v = [v.real, v.imag]
        return {"value": v, "error": self.error}


def quad1d(func, lo, hi, tol=1e-10, points=None, limit=400) -> Estimate:
    """scipy quad with warnings turned into a QuadratureError."""
    if not lo < hi:
        return Estimate(0.0, 0.0)
    kw = {"limit": limit, "epsabs": tol, "epsrel": 1e-10}
    if points is not None and math.isfinite(lo) and math.isfinite(hi):
        pts = [p for p in np.unique(np.asarray(points, float)) if lo < p < hi]
        if pts:
            kw["points"] = pts
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(func, lo, hi, **kw)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature did not converge on [{lo}, {hi}]: {exc}") from None
    if not math.isfinite(val):
        raise QuadratureError(f"quadrature returned a non-finite value on [{lo}, {hi}]")
    return Estimate(val, err)


def quad1d_pieces(func, breaks, tol=1e-10) -> Estimate:
    """Sum of quad1d over consecutive breakpoints (which may include +-inf)."""
    b = np.unique(np.asarray(breaks, float))
    out = Estimate(0.0, 0.0)
    for lo, hi in zip(b[:-1], b[1:]):
        out = out + quad1d(func, lo, hi, tol=tol)
    return out


def improper_power_integral(h, alpha, tol=1e-10) -> Estimate:
    """int_0^inf h(w) alpha w^(-alpha-1) dw, the Frechet exponent-measure integral.

    Divergence at either end raises QuadratureError.
    """
    def g(w):
        return h(w) * alpha * w ** (-alpha - 1.0) if w > 0 else 0.0

    lo = quad1d(g, 0.0, 1.0, tol=tol)
    hi = quad1d(g, 1.0, math.inf, tol=tol)
    return lo + hi


def union_length(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Lebesgue measure of a union of intervals, vectorized over leading axes.

    ``lo``, ``hi`` have shape (..., n); empty intervals have hi <= lo.
    """
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    empty = ~(hi > lo)
    lo = np.where(empty, np.inf, lo)
    hi = np.where(empty, np.inf, hi)
    order = np.argsort(lo, axis=-1)
    lo = np.take_along_axis(lo, order, -1)
    hi = np.take_along_axis(hi, order, -1)
    reach = np.maximum.accumulate(hi, axis=-1)
    prev = np.concatenate([np.full(lo.shape[:-1] + (1,), -np.inf), reach[..., :-1]], axis=-1)
    # each interval contributes only what extends past everything before it
    with np.errstate(invalid="ignore"):
        seg = np.clip(reach - np.maximum(prev, lo), 0.0, None)
    seg = np.where(np.isfinite(lo), seg, 0.0)
    return seg.sum(axis=-1)


def overlap_length(lo, hi, a, b):
    """Length of [lo, hi] intersected with [a, b], broadcasting."""
    return np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)


def gauss_legendre(lo, hi, n):
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return mid + half * x, half * w

"""Storm profiles and grains.

Every storm is radial and non-increasing in |tau|, so level sets {F >= a}
are centered balls and their radii are available in closed form (tables:
piecewise-linear inversion).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..quad import gauss_legendre, quad1d, union_length

STORM_SHAPES = ("exp_bump", "indicator", "table")
GRAIN_SHAPES = ("box", "disk")


def ball_volume(d: int, r=1.0):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * np.asarray(r, float) ** d


@dataclass(frozen=True, eq=False)
class StormProfile:
    """F(tau) = h exp(-|tau|/s), h 1{|tau| <= s}, or a radial table.

    A table lists nodes 0 = x_0 < ... < x_n with non-increasing values; F is
    linear between nodes and zero beyond x_n.
    """

    shape: str = "exp_bump"
    h: float = 1.0
    s: float = 1.0
    table_x: tuple = ()
    table_y: tuple = ()

    def __post_init__(self):
        if self.shape not in STORM_SHAPES:
            raise ValueError(f"unknown storm shape {self.shape!r}; expected one of {STORM_SHAPES}")
        if self.shape == "table":
            x = np.asarray(self.table_x, float)
            y = np.asarray(self.table_y, float)
            if x.ndim != 1 or x.shape != y.shape or len(x) < 2:
                raise ValueError("storm table needs matching x/y arrays with >= 2 nodes")
            if x[0] != 0 or np.any(np.diff(x) <= 0):
                raise ValueError("storm table nodes must start at 0 and increase")
            if np.any(y < 0) or np.any(np.diff(y) > 0) or y[0] <= 0:
                raise ValueError("storm table values must be non-negative, non-increasing, positive at 0")
            object.__setattr__(self, "table_x", tuple(x.tolist()))
            object.__setattr__(self, "table_y", tuple(y.tolist()))
        elif not (self.h > 0 and self.s > 0):
            raise ValueError("storm needs h > 0 and s > 0")

    def __call__(self, tau):
        r = np.abs(np.asarray(tau, float))
        if self.shape == "exp_bump":
            return self.h * np.exp(-r / self.s)
        if self.shape == "indicator":
            return np.where(r <= self.s, self.h, 0.0)
        x, y = np.asarray(self.table_x), np.asarray(self.table_y)
        return np.where(r <= x[-1], np.interp(r, x, y), 0.0)

    @property
    def sup(self) -> float:
        return self.table_y[0] if self.shape == "table" else self.h

    @property
    def support_radius(self) -> float:
        if self.shape == "exp_bump":
            return math.inf
        if self.shape == "indicator":
            return self.s
        return self.table_x[-1]

    def level_radius(self, a):
        """Radius r(a) with {F >= a} = {|tau| <= r}; -1 when the set is empty, inf for a <= 0."""
        a = np.asarray(a, float)
        with np.errstate(divide="ignore"):
            if self.shape == "exp_bump":
                r = self.s * np.log(self.h / np.where(a > 0, a, 1.0))
            elif self.shape == "indicator":
                r = np.full(a.shape, self.s)
            else:
                x, y = np.asarray(self.table_x), np.asarray(self.table_y)
                # last node still at level >= a, then linear inversion on the next segment
                i = np.clip(np.searchsorted(-y, -a, side="right") - 1, 0, len(x) - 1)
                j = np.minimum(i + 1, len(x) - 1)
                drop = y[i] - y[j]
                frac = np.where(drop > 0, (y[i] - a) / np.where(drop > 0, drop, 1.0), 0.0)
                r = np.where(i == len(x) - 1, x[-1], x[i] + (x[j] - x[i]) * np.clip(frac, 0.0, 1.0))
        r = np.where(a > self.sup, -1.0, r)
        return np.where(a <= 0, np.inf, r)

    def power_integral(self, alpha: float, lo=-math.inf, hi=math.inf) -> float:
        """int_lo^hi F(tau)^alpha dtau in one dimension."""
        if not lo < hi:
            return 0.0
        if self.shape == "exp_bump":
            c = alpha / self.s

            def half(a, b):  # int_a^b e^{-c t} dt for 0 <= a <= b
                return (math.exp(-c * a) - (math.exp(-c * b) if math.isfinite(b) else 0.0)) / c

            tot = 0.0
            if hi > 0:
                tot += half(max(lo, 0.0), hi)
            if lo < 0:
                tot += half(max(-hi, 0.0), -lo)
            return self.h ** alpha * tot
        if self.shape == "indicator":
            return self.h ** alpha * max(0.0, min(hi, self.s) - max(lo, -self.s))
        R = self.support_radius
        lo, hi = max(lo, -R), min(hi, R)
        if not lo < hi:
            return 0.0
        nodes = np.concatenate([-np.asarray(self.table_x), self.table_x])
        return quad1d(lambda t: float(self(t)) ** alpha, lo, hi, points=nodes).value

    def radial_power_integral(self, alpha: float, d: int) -> float:
        """int_{R^d} F(|tau|)^alpha dtau."""
        if d == 1:
            return self.power_integral(alpha)
        area = d * ball_volume(d)
        if self.shape == "exp_bump":
            return float(area * self.h ** alpha * math.gamma(d) * (self.s / alpha) ** d)
        if self.shape == "indicator":
            return float(ball_volume(d, self.s) * self.h ** alpha)
        f = lambda r: float(area * r ** (d - 1) * self(r) ** alpha)
        return quad1d(f, 0.0, self.support_radius, points=self.table_x).value

    def cumulative(self, func, reach: float, step: float):
        """Grid (tau, G) with G(tau) = int_{-reach}^tau func(F(x)) dx, trapezoid on ``step``."""
        n = max(2, int(math.ceil(2 * reach / step)) + 1)
        tau = np.linspace(-reach, reach, n)
        v = func(self(tau))
        G = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(tau))])
        return tau, G

    def describe(self) -> dict:
        if self.shape == "table":
            return {"shape": "table", "x": list(self.table_x), "y": list(self.table_y)}
        return {"shape": self.shape, "h": self.h, "s": self.s}

    @classmethod
    def from_dict(cls, d: dict) -> "StormProfile":
        d = dict(d)
        shape = d.pop("shape", "exp_bump")
        if shape == "table":
            allowed = {"x", "y"}
            _no_extra(d, allowed, "storm")
            return cls("table", table_x=tuple(d["x"]), table_y=tuple(d["y"]))
        _no_extra(d, {"h", "s"}, "storm")
        return cls(shape, float(d.get("h", 1.0)), float(d.get("s", 1.0)))


@dataclass(frozen=True)
class GrainSet:
    """A centered box (half-widths) or disk (radius) in R^d, d in {1, 2}."""

    shape: str
    size: tuple
    d: int = 2

    def __post_init__(self):
        if self.shape not in GRAIN_SHAPES:
            raise ValueError(f"unknown grain shape {self.shape!r}; expected one of {GRAIN_SHAPES}")
        if self.d not in (1, 2):
            raise ValueError("grains are supported in dimension 1 or 2")
        size = tuple(float(v) for v in np.atleast_1d(self.size))
        if self.shape == "box" and len(size) == 1:
            size = size * self.d
        if self.shape == "box" and len(size) != self.d:
            raise ValueError("box grain needs one half-width per axis")
        if self.shape == "disk" and len(size) != 1:
            raise ValueError("disk grain needs a single radius")
        if not all(v > 0 and math.isfinite(v) for v in size):
            raise ValueError("grain sizes must be positive and finite")
        object.__setattr__(self, "size", size)

    @property
    def measure(self) -> float:
        if self.shape == "box":
            return float(np.prod([2 * w for w in self.size]))
        return float(ball_volume(self.d, self.size[0]))

    @property
    def half_extent(self) -> np.ndarray:
        if self.shape == "box":
            return np.asarray(self.size)
        return np.full(self.d, self.size[0])

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        if self.shape == "box":
            return np.all(np.abs(x) <= np.asarray(self.size), axis=-1)
        return (x ** 2).sum(-1) <= self.size[0] ** 2

    def chord(self, y) -> np.ndarray:
        """Half-length of the section {x: (x, y) in A} for d = 2; -1 when empty."""
        y = np.abs(np.asarray(y, float))
        if self.shape == "box":
            return np.where(y <= self.size[1], self.size[0], -1.0)
        r = self.size[0]
        return np.where(y <= r, np.sqrt(np.clip(r * r - y * y, 0.0, None)), -1.0)

    def describe(self) -> dict:
        return {"shape": self.shape, "size": list(self.size), "d": self.d}

    @classmethod
    def from_dict(cls, d: dict, dim: int) -> "GrainSet":
        _no_extra(d, {"shape", "size", "d"}, "grain")
        return cls(d["shape"], tuple(np.atleast_1d(d["size"]).tolist()), int(d.get("d", dim)))


def _no_extra(d, allowed, what):
    extra = set(d) - set(allowed)
    if extra:
        raise ValueError(f"unknown {what} keys: {sorted(extra)}")


def section_union_area(centers, chord_fn, ylo_hi, n_nodes=64) -> float:
    """Area of a union of translates of a convex symmetric set in R^2.

    ``chord_fn(j, y)`` gives the half chord of set j at absolute height y
    (negative when empty).  Exact in x; Gauss-Legendre in y on each strip
    between consecutive breakpoints.
    """
    breaks = np.unique(np.asarray(ylo_hi, float))
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        ys, ws = gauss_legendre(lo, hi, n_nodes)
        lo_x = np.stack([centers[j][0] - chord_fn(j, ys) for j in range(len(centers))], -1)
        hi_x = np.stack([centers[j][0] + chord_fn(j, ys) for j in range(len(centers))], -1)
        total += float((union_length(lo_x, hi_x) * ws).sum())
    return total

"""Poisson point processes with sigma-finite intensity, restricted to windows.

The product domain is (location box) x (mark space).  Locations are either
Lebesgue points in an axis-aligned box or integer cells carrying weights (for
models whose base space is countable).  Marks come from a closed registry of
laws, each of which knows its own total mass, so ``mass(window)`` is exact.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import ClassVar, Sequence

import numpy as np

from .rng import normalize_seed, stream

MAX_EXPECTED_ATOMS = 5e7

MARK_LAWS: dict[str, type] = {}


def register_mark(cls):
    MARK_LAWS[cls.name] = cls
    return cls


class MarkLaw:
    """Intensity on the mark component.  ``mass`` may exceed 1."""

    name: ClassVar[str] = "abstract"
    ncols: int = 0

    @property
    def mass(self) -> float:
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"law": self.name}

    def columns(self) -> list[str]:
        return [f"{self.name}_{i}" for i in range(self.ncols)]


@register_mark
@dataclass(frozen=True)
class NoMark(MarkLaw):
    name: ClassVar[str] = "none"
    ncols: ClassVar[int] = 0

    @property
    def mass(self):
        return 1.0

    def sample(self, n, rng):
        return np.empty((n, 0))

    @classmethod
    def from_dict(cls, d):
        return cls()


@register_mark
@dataclass(frozen=True)
class UniformMark(MarkLaw):
    lo: float = 0.0
    hi: float = 1.0
    name: ClassVar[str] = "uniform"
    ncols: ClassVar[int] = 1

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("uniform mark needs lo < hi")

    @property
    def mass(self):
        return self.hi - self.lo

    def sample(self, n, rng):
        return rng.uniform(self.lo, self.hi, size=(n, 1))

    def describe(self):
        return {"law": self.name, "lo": self.lo, "hi": self.hi}

    def columns(self):
        return ["v"]

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("lo", 0.0), d.get("hi", 1.0))


@register_mark
@dataclass(frozen=True)
class AngleMark(MarkLaw):
    """Lebesgue measure on [0, 2*pi): the orientation of an oriented line."""

    name: ClassVar[str] = "angle"
    ncols: ClassVar[int] = 1

    @property
    def mass(self):
        return 2 * math.pi

    def sample(self, n, rng):
        return rng.uniform(0.0, 2 * math.pi, size=(n, 1))

    def columns(self):
        return ["phi"]

    @classmethod
    def from_dict(cls, d):
        return cls()


@register_mark
@dataclass(frozen=True)
class FrechetMark(MarkLaw):
    """alpha * z**(-alpha-1) dz restricted to z >= z_min."""

    alpha: float
    z_min: float
    name: ClassVar[str] = "frechet"
    ncols: ClassVar[int] = 1

    def __post_init__(self):
        if self.alpha <= 0 or self.z_min <= 0:
            raise ValueError("frechet mark needs alpha > 0 and z_min > 0")

    @property
    def mass(self):
        return self.z_min ** (-self.alpha)

    def sample(self, n, rng):
        u = rng.uniform(size=(n, 1))
        # 1 - u avoids u == 0
        return self.z_min * (1.0 - u) ** (-1.0 / self.alpha)

    def describe(self):
        return {"law": self.name, "alpha": self.alpha, "z_min": self.z_min}

    def columns(self):
        return ["z"]

    @classmethod
    def from_dict(cls, d):
        return cls(d["alpha"], d["z_min"])


@register_mark
@dataclass(frozen=True, eq=False)
class TableMark(MarkLaw):
    """Exponent measure of a univariate law given as a CDF table, above x_min.

    mu[x, inf) = -log F(x) with F linearly interpolated between table nodes;
    the table must end at F = 1.
    """

    x: tuple
    cdf: tuple
    x_min: float
    name: ClassVar[str] = "table"
    ncols: ClassVar[int] = 1

    def __post_init__(self):
        x = np.asarray(self.x, float)
        F = np.asarray(self.cdf, float)
        if x.ndim != 1 or x.shape != F.shape or len(x) < 2:
            raise ValueError("CDF table needs matching 1-D x and cdf arrays of length >= 2")
        if np.any(np.diff(x) <= 0):
            raise ValueError("CDF table x values must be strictly increasing")
        if np.any(np.diff(F) < 0) or F[0] < 0 or F[-1] != 1:
            raise ValueError("CDF table must be non-decreasing in [0, 1] and end at 1")
        if not (x[0] <= self.x_min <= x[-1]):
            raise ValueError("x_min outside the CDF table")
        if self.cdf_at(self.x_min) <= 0:
            raise ValueError("CDF vanishes at x_min: infinite mass")

    def cdf_at(self, x):
        return np.interp(x, np.asarray(self.x, float), np.asarray(self.cdf, float), left=0.0, right=1.0)

    def quantile(self, p):
        F = np.asarray(self.cdf, float)
        x = np.asarray(self.x, float)
        keep = np.concatenate([[True], np.diff(F) > 0])
        return np.interp(p, F[keep], x[keep])

    @property
    def mass(self):
        return float(-math.log(self.cdf_at(self.x_min)))

    def sample(self, n, rng):
        v = rng.uniform(size=n)
        level = self.cdf_at(self.x_min) ** v
        return self.quantile(level)[:, None]

    def describe(self):
        return {"law": self.name, "x": list(self.x), "cdf": list(self.cdf), "x_min": self.x_min}

    def columns(self):
        return ["x"]

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["x"]), tuple(d["cdf"]), d["x_min"])


@register_mark
@dataclass(frozen=True)
class ProductMark(MarkLaw):
    parts: tuple
    name: ClassVar[str] = "product"

    @property
    def ncols(self):
        return sum(p.ncols for p in self.parts)

    @property
    def mass(self):
        return float(np.prod([p.mass for p in self.parts]))

    def sample(self, n, rng):
        if not self.parts:
            return np.empty((n, 0))
        return np.hstack([p.sample(n, rng) for p in self.parts])

    def describe(self):
        return {"law": self.name, "parts": [p.describe() for p in self.parts]}

    def columns(self):
        return [c for p in self.parts for c in p.columns()]

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(mark_from_dict(p) for p in d["parts"]))


def mark_from_dict(d: dict) -> MarkLaw:
    try:
        cls = MARK_LAWS[d["law"]]
    except KeyError:
        raise ValueError(f"unknown mark law {d.get('law')!r}") from None
    return cls.from_dict(d)


@dataclass(frozen=True)
class Window:
    lower: tuple
    upper: tuple
    mark: MarkLaw = field(default_factory=NoMark)

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("window bounds must have equal, nonzero length")
        if not all(math.isfinite(a) and math.isfinite(b) for a, b in zip(lo, hi)):
            raise ValueError("window has infinite intensity mass")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"degenerate window: need lower < upper, got {lo} / {hi}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, float).reshape(-1, self.dim)
        return np.all((p >= self.lower) & (p <= self.upper), axis=1)

    def describe(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper), "mark": self.mark.describe()}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["lower"]), tuple(d["upper"]), mark_from_dict(d["mark"]))


@dataclass(frozen=True, eq=False)
class IntensityMeasure:
    """density x (Lebesgue or weighted cells) x (window mark law).

    With ``cells`` set, the location component is the counting measure on
    integer positions 0..len(cells)-1 weighted by ``cells``.
    """

    density: float
    cells: np.ndarray | None = None

    def __post_init__(self):
        if not (self.density >= 0 and math.isfinite(self.density)):
            raise ValueError("intensity density must be finite and >= 0")
        if self.cells is not None:
            w = np.asarray(self.cells, float)
            if w.ndim != 1 or np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("cell weights must be a finite non-negative vector")
            object.__setattr__(self, "cells", w)

    def scaled(self, factor: float) -> "IntensityMeasure":
        return IntensityMeasure(self.density * factor, self.cells)

    def _cells_in(self, window: Window) -> np.ndarray:
        if window.dim != 1:
            raise ValueError("cell intensities live on a 1-D index box")
        idx = np.arange(len(self.cells))
        return idx[(idx >= window.lower[0]) & (idx <= window.upper[0])]

    def location_mass(self, window: Window) -> float:
        if self.cells is None:
            return window.volume
        return float(self.cells[self._cells_in(window)].sum())

    def mass(self, window: Window) -> float:
        m = self.density * self.location_mass(window) * window.mark.mass
        if not math.isfinite(m):
            raise ValueError("window has infinite intensity mass")
        return float(m)

    def sample_locations(self, n: int, window: Window, rng) -> np.ndarray:
        if self.cells is None:
            return rng.uniform(window.lower, window.upper, size=(n, window.dim))
        idx = self._cells_in(window)
        w = self.cells[idx]
        return idx[rng.choice(len(idx), size=n, p=w / w.sum())].astype(float)[:, None]


@dataclass(frozen=True, eq=False)
class PointConfig:
    locations: np.ndarray
    marks: np.ndarray
    window: Window
    seed: int

    def __post_init__(self):
        loc = np.asarray(self.locations, float).reshape(-1, self.window.dim)
        mk = np.asarray(self.marks, float)
        mk = mk.reshape(len(loc), mk.shape[-1] if mk.ndim == 2 else self.window.mark.ncols)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "marks", mk)

    def __len__(self):
        return len(self.locations)

    def subset(self, keep) -> "PointConfig":
        return PointConfig(self.locations[keep], self.marks[keep], self.window, self.seed)

    def atoms(self):
        return [(tuple(l), tuple(m)) for l, m in zip(self.locations, self.marks)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(self.window.dim)] + self.window.mark.columns())
        for l, m in zip(self.locations, self.marks):
            w.writerow([repr(float(v)) for v in l] + [repr(float(v)) for v in m])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "schema": 1,
            "window": self.window.describe(),
            "seed": self.seed,
            "atoms": np.hstack([self.locations, self.marks]).tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "PointConfig":
        d = json.loads(text)
        window = Window.from_dict(d["window"])
        rows = np.asarray(d["atoms"], float).reshape(len(d["atoms"]), -1)
        k = window.dim
        return cls(rows[:, :k], rows[:, k:], window, d["seed"])


@dataclass(frozen=True, eq=False)
class PointBatch:
    """Independent replicates stored flat; ``owner[i]`` is the replicate of atom i.

    Atoms are grouped by replicate in increasing order.
    """

    locations: np.ndarray
    marks: np.ndarray
    owner: np.ndarray
    counts: np.ndarray
    window: Window
    seed: int

    @property
    def n_rep(self) -> int:
        return len(self.counts)

    def replicate(self, i: int) -> PointConfig:
        sl = slice(int(self.offsets[i]), int(self.offsets[i] + self.counts[i]))
        return PointConfig(self.locations[sl], self.marks[sl], self.window, self.seed)

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.counts)[:-1]])


def _check_mass(intensity: IntensityMeasure, window: Window) -> float:
    mass = intensity.mass(window)
    if mass > MAX_EXPECTED_ATOMS:
        raise ValueError(f"window mass {mass:.3g} exceeds the simulation guard {MAX_EXPECTED_ATOMS:.0e}")
    return mass


def sample_poisson(intensity: IntensityMeasure, window: Window, seed) -> PointConfig:
    """Pure function of (intensity, window, seed)."""
    seed = normalize_seed(seed)
    mass = _check_mass(intensity, window)
    rng = stream(seed, "poisson")
    n = int(rng.poisson(mass)) if mass > 0 else 0
    loc = intensity.sample_locations(n, window, rng)
    marks = window.mark.sample(n, rng)
    return PointConfig(loc, marks, window, seed)


def sample_poisson_batch(intensity: IntensityMeasure, window: Window, seed, n_rep: int) -> PointBatch:
    """``n_rep`` independent replicates drawn from one stream.

    Deterministic in (intensity, window, seed, n_rep); replicate i is not the
    same draw as ``sample_poisson(..., seed)``.
    """
    seed = normalize_seed(seed)
    mass = _check_mass(intensity, window)
    rng = stream(seed, "poisson-batch", n_rep)
    counts = rng.poisson(mass, size=n_rep) if mass > 0 else np.zeros(n_rep, int)
    total = int(counts.sum())
    if total > MAX_EXPECTED_ATOMS:
        raise ValueError(f"batch of {total} atoms exceeds the simulation guard; use smaller chunks")
    loc = intensity.sample_locations(total, window, rng)
    marks = window.mark.sample(total, rng)
    owner = np.repeat(np.arange(n_rep), counts)
    return PointBatch(loc, marks, owner, counts, window, seed)


def split(config: PointConfig, keep_prob: float, seed) -> tuple[PointConfig, PointConfig]:
    """Independent thinning; returns (kept, discarded)."""
    if not (0 < keep_prob <= 1):
        raise ValueError(f"keep_prob must lie in (0, 1], got {keep_prob}")
    rng = stream(seed, "thin")
    keep = rng.uniform(size=len(config)) < keep_prob
    return config.subset(keep), config.subset(~keep)


def thin(config: PointConfig, keep_prob: float, seed) -> PointConfig:
    return split(config, keep_prob, seed)[0]


def superpose(configs: Sequence[PointConfig]) -> PointConfig:
    """Union of atom multisets.  The result carries the first input's seed."""
    if not configs:
        raise ValueError("superpose needs at least one config (no window to attach)")
    window = configs[0].window
    for c in configs[1:]:
        if c.window != window:
            raise ValueError("cannot superpose configs drawn on different windows")
    return PointConfig(
        np.vstack([c.locations for c in configs]),
        np.vstack([c.marks for c in configs]),
        window,
        configs[0].seed,
    )


def group_max(values: np.ndarray, counts: np.ndarray, initial: float = 0.0) -> np.ndarray:
    """Per-replicate max along the last axis of a flat (..., n_atoms) array."""
    values = np.asarray(values)
    out_shape = values.shape[:-1] + (len(counts),)
    out = np.full(out_shape, initial, dtype=float)
    nz = counts > 0
    if values.shape[-1] == 0 or not nz.any():
        return out
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])[nz]
    red = np.maximum.reduceat(values, starts, axis=-1)
    out[..., nz] = np.maximum(red, initial)
    return out


def group_sum(values: np.ndarray, counts: np.ndarray) -> np.ndarray:
    values = np.asarray(values)
    out = np.zeros(values.shape[:-1] + (len(counts),), dtype=values.dtype)
    nz = counts > 0
    if values.shape[-1] == 0 or not nz.any():
        return out
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])[nz]
    out[..., nz] = np.add.reduceat(values, starts, axis=-1)
    return out

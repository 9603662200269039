"""Exact Gaussian storm paths: Brownian motion in R^k and isotropic fBm fields on R^2.

fBm values are drawn as z @ U where C = U^T U is a dense Cholesky factor
of the covariance restricted to the non-origin nodes.  Factors are cached
per (H, sigma2, grid) under a byte limit.
"""
from __future__ import annotations

import hashlib
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .rng import normalize_seed, stream

MAX_NODES = 4096
JITTER_LADDER = (0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10)
CACHE_BYTES = 2_300_000_000
_ROW_CHUNK = 1024


@dataclass(frozen=True)
class FbmParams:
    H: float
    sigma2: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.H <= 1.0):
            raise ValueError(f"Hurst exponent must lie in (0, 1], got {self.H}")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be > 0, got {self.sigma2}")


@dataclass(frozen=True, eq=False)
class GaussianPath:
    grid: np.ndarray
    values: np.ndarray
    seed: int


def fbm_covariance(params: FbmParams, s, t=None) -> np.ndarray:
    s = np.atleast_2d(np.asarray(s, float))
    t = s if t is None else np.atleast_2d(np.asarray(t, float))
    two_h = 2.0 * params.H
    ns = np.linalg.norm(s, axis=1) ** two_h
    nt = np.linalg.norm(t, axis=1) ** two_h
    d = np.linalg.norm(s[:, None, :] - t[None, :, :], axis=-1) ** two_h
    return 0.5 * params.sigma2 * (ns[:, None] + nt[None, :] - d)


def _check_times(times) -> np.ndarray:
    t = np.asarray(times, float).ravel()
    if t.size == 0:
        raise ValueError("times must be non-empty")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be sorted strictly increasing")
    if not np.any(t == 0.0):
        raise ValueError("times must contain 0")
    return t


def brownian_increments(k: int, times, n: int, rng) -> np.ndarray:
    """n two-sided standard Brownian paths in R^k, shape (n, len(times), k)."""
    t = _check_times(times)
    i0 = int(np.flatnonzero(t == 0.0)[0])
    out = np.zeros((n, t.size, k))
    fwd = np.sqrt(np.diff(t[i0:]))
    if fwd.size:
        out[:, i0 + 1:, :] = np.cumsum(rng.standard_normal((n, fwd.size, k)) * fwd[None, :, None], axis=1)
    back = np.sqrt(np.diff(t[:i0 + 1]))[::-1]
    if back.size:
        steps = np.cumsum(rng.standard_normal((n, back.size, k)) * back[None, :, None], axis=1)
        out[:, :i0, :] = steps[:, ::-1, :]
    return out


def brownian_path(k: int, times, seed) -> GaussianPath:
    if k < 1:
        raise ValueError("dimension k must be >= 1")
    seed = normalize_seed(seed)
    t = _check_times(times)
    vals = brownian_increments(k, t, 1, stream(seed, "brownian", k))[0]
    return GaussianPath(t, vals, seed)


class _FactorCache:
    def __init__(self, limit):
        self.limit = limit
        self.items: OrderedDict = OrderedDict()

    def get(self, key):
        if key in self.items:
            self.items.move_to_end(key)
            return self.items[key]
        return None

    def put(self, key, value):
        size = value[0].nbytes
        while self.items and sum(v[0].nbytes for v in self.items.values()) + size > self.limit:
            self.items.popitem(last=False)
        self.items[key] = value

    def clear(self):
        self.items.clear()


FACTOR_CACHE = _FactorCache(CACHE_BYTES)


def _grid_key(params, grid):
    h = hashlib.sha1(np.ascontiguousarray(grid, dtype=float).tobytes()).hexdigest()
    return (params.H, params.sigma2, grid.shape, h)


def _fill_covariance(params, pts, out):
    two_h = 2.0 * params.H
    norms = np.linalg.norm(pts, axis=1) ** two_h
    for i in range(0, len(pts), _ROW_CHUNK):
        blk = pts[i:i + _ROW_CHUNK]
        d = np.sqrt(((blk[:, None, :] - pts[None, :, :]) ** 2).sum(-1)) ** two_h
        out[i:i + len(blk)] = 0.5 * params.sigma2 * (norms[i:i + len(blk), None] + norms[None, :] - d)


def fbm_factor(params: FbmParams, grid, max_nodes: int = MAX_NODES):
    """Return (U, nonzero) with C[nonzero][:, nonzero] = U^T U, U upper triangular."""
    grid = np.asarray(grid, float)
    if grid.ndim != 2 or grid.shape[1] != 2:
        raise ValueError("fBm grid must be an (n, 2) array of nodes")
    if len(grid) > max_nodes:
        raise ValueError(f"grid has {len(grid)} nodes, above the dense-factorization guard of {max_nodes}")
    origin = np.all(grid == 0.0, axis=1)
    if not origin.any():
        raise ValueError("fBm grid must contain the origin")
    key = _grid_key(params, grid)
    hit = FACTOR_CACHE.get(key)
    if hit is not None:
        return hit
    nz = np.flatnonzero(~origin)
    pts = grid[nz]
    n = len(pts)
    if n == 0:
        res = (np.zeros((0, 0)), nz)
        FACTOR_CACHE.put(key, res)
        return res
    # build in Fortran order so LAPACK factors in place
    a = np.empty((n, n), order="F")
    trace = None
    for eps in JITTER_LADDER:
        _fill_covariance(params, pts, a.T)
        if trace is None:
            trace = float(np.trace(a))
        if eps:
            a[np.diag_indices(n)] += eps * trace / n
        u, info = lapack.dpotrf(a, lower=0, clean=1, overwrite_a=1)
        if info == 0:
            res = (u, nz)
            FACTOR_CACHE.put(key, res)
            return res
        a = u
    raise ValueError(f"fBm covariance is not positive semi-definite after jitter up to {JITTER_LADDER[-1]:g}*trace/n")


def fbm_samples(params: FbmParams, grid, n: int, rng, max_nodes: int = MAX_NODES, chunk: int = 64) -> np.ndarray:
    """n independent fields on ``grid``, shape (n, len(grid)); zero at the origin."""
    grid = np.asarray(grid, float)
    u, nz = fbm_factor(params, grid, max_nodes)
    out = np.zeros((n, len(grid)))
    for i in range(0, n, chunk):
        m = min(chunk, n - i)
        z = rng.standard_normal((m, len(nz)))
        out[i:i + m, nz] = z @ u
    return out


def fbm_field_2d(params: FbmParams, grid, seed, max_nodes: int = MAX_NODES) -> GaussianPath:
    seed = normalize_seed(seed)
    grid = np.asarray(grid, float)
    vals = fbm_samples(params, grid, 1, stream(seed, "fbm"), max_nodes)[0]
    return GaussianPath(grid, vals, seed)


def square_grid(size: int, extent: float = 1.0) -> np.ndarray:
    """size x size nodes on [0, extent]^2, row-major with the origin first."""
    if size < 1:
        raise ValueError("grid size must be >= 1")
    ax = np.linspace(0.0, extent, size) if size > 1 else np.zeros(1)
    yy, xx = np.meshgrid(ax, ax, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])

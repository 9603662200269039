"""Statistical check procedures shared by the CLI, the scripts and the tests.

Each procedure returns a ``Check`` carrying the statistic, the tolerance it
was judged against and a pass flag.  All randomness is keyed by the seed
argument.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .exactdist import FddQuery, char_function, fdd_cdf
from .fields import DEFAULT_BUDGET, simulate_margin
from .flowclass import FlowClassConfig, classify
from .gaussian import FbmParams, fbm_covariance, fbm_samples
from .integrator import (Fn, d_of_sum, gamma, ky_fan, make_sum_plan, max_integral, metric_d,
                         sum_integral_batch, tail_certificate)
from .point_process import Window, sample_poisson, sample_poisson_batch
from .quad import DEFAULT_QUAD
from .rng import derive_seed, normalize_seed, stream
from .spectral.base import SpectralModel
from .spectral.cells import CellFamily

C_SIN = 1.0 - math.sin(1.0)
NUMERIC_TOL = 1e-9


@dataclass
class Check:
    name: str
    passed: bool
    statistic: float
    tolerance: float
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self):
        return {"name": self.name, "pass": bool(self.passed), "statistic": _num(self.statistic),
                "tolerance": _num(self.tolerance), "details": _jsonable(self.details),
                "seconds": round(self.seconds, 3)}

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name}: statistic {self.statistic:.6g} vs tolerance {self.tolerance:.6g}"


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return _num(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _timed(fn):
    def run(*args, **kw):
        t0 = time.perf_counter()
        out = fn(*args, **kw)
        out.seconds = time.perf_counter() - t0
        return out
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


# ---- margins and divisibility -------------------------------------------------

@_timed
def ks_margin_check(model: SpectralModel, t, cdf, n: int = 100_000, seed=0, tol: float = 0.01,
                    budget: float = DEFAULT_BUDGET, name: str = "margin KS") -> Check:
    x = simulate_margin(model, [t] if np.ndim(t) else t, n, seed, budget)[:, 0]
    ks = stats.kstest(x, cdf).statistic
    return Check(name, ks <= tol, ks, tol, {"n": n, "seed": seed})


@_timed
def maxid_check(model: SpectralModel, t, n: int = 10_000, seed=0, parts: int = 4, tol: float = 0.02,
                budget: float = DEFAULT_BUDGET, name: str = "max-i.d. divisibility") -> Check:
    """Two-sample KS between the field at mu and the max of ``parts`` independent fields at mu/parts."""
    pt = model.index_points(t)
    full = simulate_margin(model, pt, n, derive_seed(seed, "full"), budget / parts, raw=True)[:, 0]
    part_model = model.scaled(1.0 / parts)
    pieces = [simulate_margin(part_model, pt, n, derive_seed(seed, "part", j), budget / parts, raw=True)[:, 0]
              for j in range(parts)]
    joined = np.max(pieces, axis=0)
    ks = stats.ks_2samp(full, joined, method="asymp").statistic
    return Check(name, ks <= tol, ks, tol, {"n": n, "parts": parts, "seed": seed,
                                            "mean_full": full.mean(), "mean_joined": joined.mean()})


@_timed
def vacancy_check(model: SpectralModel, t, expected: float, n: int = 100_000, seed=0, tol: float = 0.01,
                  name: str = "vacancy") -> Check:
    x = simulate_margin(model, model.index_points(t), n, seed)[:, 0]
    p = float(np.mean(x < 1))
    err = abs(p - expected)
    return Check(name, err <= tol, err, tol, {"empirical": p, "expected": expected, "n": n})


@_timed
def fdd_check(model: SpectralModel, queries, n: int = 100_000, seed=0, quad=DEFAULT_QUAD,
              budget: float = DEFAULT_BUDGET, name: str = "fdd") -> Check:
    """Empirical P[g(t_j) < x_j] against exp(-union mass), binomial 3 sigma plus quadrature error.

    The truncation budget is added to the tolerance: the simulated field
    differs from the untruncated one with at most that probability.
    """
    pts = np.unique(np.vstack([model.index_points(q.points) for q in queries]), axis=0)
    sims = simulate_margin(model, pts, n, seed, budget, raw=True)
    rows, worst = [], -math.inf
    for q in queries:
        qp = model.index_points(q.points)
        cols = [int(np.argmin(np.abs(pts - p).max(1))) for p in qp]
        emp = float(np.mean(np.all(sims[:, cols] < np.asarray(q.values), axis=1)))
        exact = fdd_cdf(model, q, quad)
        sigma = math.sqrt(max(exact.value * (1 - exact.value), 0.0) / n)
        tol = 3 * sigma + exact.error + budget
        gap = abs(emp - exact.value)
        worst = max(worst, gap - tol)
        rows.append({"query": q.to_dict(), "exact": exact.value, "exact_error": exact.error,
                     "empirical": emp, "n": n, "tolerance": tol, "pass": gap <= tol})
    return Check(name, all(r["pass"] for r in rows), worst, 0.0, {"queries": rows})


# ---- max-stable line ------------------------------------------------------------

@_timed
def maxstable_check(model, n: int = 100_000, seed=0, rel_tol: float = 0.05, slope_tol: float = 0.1,
                    budget: float = DEFAULT_BUDGET) -> Check:
    """Scale estimate and log-log slope of -log P[zeta <= x] over [sigma, 10 sigma]."""
    z = simulate_margin(model, np.zeros((1, model.dim)), n, seed, budget)[:, 0]
    alpha = model.alpha
    # 1/zeta^alpha is exponential with rate sigma^alpha
    sigma_hat = float(np.mean(z ** (-alpha)) ** (-1 / alpha))
    sigma = model.sigma
    xs = np.geomspace(sigma, 10 * sigma, 20)
    F = np.array([np.mean(z <= x) for x in xs])
    slope = float(np.polyfit(np.log(xs), np.log(-np.log(F)), 1)[0])
    rel = abs(sigma_hat / sigma - 1)
    ok = rel <= rel_tol and abs(slope + alpha) <= slope_tol
    return Check("max-stable scale and slope", ok, rel, rel_tol,
                 {"sigma": sigma, "sigma_hat": sigma_hat, "slope": slope, "slope_target": -alpha,
                  "slope_tol": slope_tol, "n": n})


# ---- sum-integral characteristic function ----------------------------------------

@_timed
def charfn_check(model: SpectralModel, t, thetas, n: int = 100_000, seed=0, quad=DEFAULT_QUAD,
                 name: str = "characteristic function") -> Check:
    pt = model.index_points(t)
    plan = make_sum_plan(Fn(model, pt[0]), quad=quad)
    batch = sample_poisson_batch(model.window_intensity(plan.window), plan.window, seed, n)
    vals = sum_integral_batch(model, pt[0], batch, plan)
    rows, worst = [], -math.inf
    for th in np.atleast_1d(thetas):
        emp = complex(np.mean(np.exp(1j * th * vals)))
        exact = char_function(model, FddQuery.make(pt, [th]), quad)
        # the neglected small jumps move the ch.f. by at most theta^2 V / 2
        tol = 3 / math.sqrt(n) + exact.error + 0.5 * th * th * plan.remainder_variance_bound
        gap = abs(emp - exact.value)
        worst = max(worst, gap - tol)
        rows.append({"theta": float(th), "empirical": emp, "exact": exact.value, "gap": gap, "tolerance": tol,
                     "pass": gap <= tol})
    return Check(name, all(r["pass"] for r in rows), worst, 0.0,
                 {"rows": rows, "n": n, "plan": plan.to_dict()})


# ---- metric inequality suites ------------------------------------------------------

def random_cell_pair(rng) -> CellFamily:
    """Two piecewise-constant functions f, g on a random finite atomic measure."""
    c = int(rng.integers(1, 7))
    masses = rng.uniform(0.02, 1.5, size=c)
    scale = 10 ** rng.uniform(-2.5, 0.7, size=(2, 1))
    vals = rng.uniform(-3, 3, size=(2, c)) * scale
    vals[rng.uniform(size=(2, c)) < 0.15] = 0.0
    return CellFamily(masses, vals)


def cell_integral_samples(cells: CellFamily, row: int, n: int, rng) -> np.ndarray:
    """n replicates of I(f) for f = values[row], via per-cell Poisson counts.

    Atoms in one cell share the value of f, so only the counts matter; this
    equals the generic sum_integral with epsilon below min |f| (no remainder).
    """
    f = cells.values[row]
    live = f != 0
    m, v = cells.masses[live], f[live]
    if len(m) == 0:
        return np.zeros(n)
    comp = float((m * np.clip(v, -1, 1)).sum())
    counts = rng.poisson(m, size=(n, len(m)))
    return counts @ v - comp


@_timed
def metrics_audit(trials: int = 1000, seed=0, n: int = 100_000) -> Check:
    """gamma bound and the two P-metric inequalities on random piecewise-constant pairs."""
    seed = normalize_seed(seed)
    rows = []
    violations = 0
    worst = math.inf
    for i in range(trials):
        rng = stream(seed, "audit", i)
        cells = random_cell_pair(rng)
        f, g = Fn(cells, 0), Fn(cells, 1)
        gam = gamma(f, g).value
        df, dg, dfg = metric_d(f).value, metric_d(g).value, d_of_sum(f, g).value
        m_gamma = 3 * dfg ** 2 + 2 * (df + dg) * dfg - abs(gam) + NUMERIC_TOL

        x = cell_integral_samples(cells, 0, n, rng)
        x2 = cell_integral_samples(cells, 0, n, rng)
        kf = ky_fan(x, np.zeros(n))
        kf2 = ky_fan(x, x2)
        se = lambda d: 3 * math.sqrt(max(d * (1 - d), 1.0 / n) / n)
        m_upper = 2 * df ** (2 / 3) - kf + se(kf) + NUMERIC_TOL
        m_lower = 2 * kf2 - (1 - math.exp(-C_SIN * df ** 2)) + 2 * se(kf2) + NUMERIC_TOL
        m_chain = 4 * kf - 2 * kf2 + 4 * se(kf) + 2 * se(kf2) + NUMERIC_TOL
        margins = (m_gamma, m_upper, m_lower, m_chain)
        bad = sum(mg < 0 for mg in margins)
        violations += bad
        worst = min(worst, *margins)
        rows.append({"trial": i, "cells": len(cells.masses), "d_f": df, "d_g": dg, "d_f_plus_g": dfg,
                     "gamma": gam, "kf": kf, "kf_pair": kf2, "margin_gamma": m_gamma,
                     "margin_kf_upper": m_upper, "margin_kf_lower": m_lower, "margin_kf_chain": m_chain})
    return Check("metric inequality suites", violations == 0, violations, 0,
                 {"trials": trials, "n": n, "seed": seed, "worst_margin": worst, "per_trial": rows})


# ---- flow classification ------------------------------------------------------------

@_timed
def classify_check(model: SpectralModel, expected: str, config: FlowClassConfig = FlowClassConfig(),
                   name: str | None = None) -> Check:
    rep = classify(model, config)
    ok = rep.verdict == expected
    return Check(name or f"classify {model.kind}", ok, rep.shell_ratio, float("nan"),
                 {**rep.to_dict(), "expected": expected})


# ---- truncation soundness -------------------------------------------------------------

@_timed
def truncation_check(model: SpectralModel, grid, window: Window, threshold: float, grow: float = 10.0,
                     n_seeds: int = 10_000, seed=0, name: str = "truncation soundness") -> Check:
    """Frequency with which atoms outside ``window`` (inside a window enlarged by ``grow``)
    lift the field at the grid centre to at least ``threshold`` above its truncated value."""
    pts = model.index_points(grid)
    center = pts[len(pts) // 2]
    big = Window(tuple(np.asarray(window.lower) - grow), tuple(np.asarray(window.upper) + grow), window.mark)
    cert = tail_certificate(model, center, window, [threshold]).tail_exceed_prob(threshold)
    hits = reach = 0
    for s in range(n_seeds):
        cfg = sample_poisson(model.window_intensity(big), big, derive_seed(seed, "trunc", s))
        keep = np.all((cfg.locations >= np.asarray(window.lower)) & (cfg.locations <= np.asarray(window.upper)),
                      axis=1)
        x_small = max_integral(model, center, cfg.subset(keep))
        x_off = max_integral(model, center, cfg.subset(~keep))
        hits += x_off > x_small and x_off >= threshold
        reach += x_off >= threshold
    freq = hits / n_seeds
    sd = math.sqrt(max(cert * (1 - cert), 0.0) / n_seeds)
    tol = cert + 3 * sd
    # when the certificate is exact, off-window atoms reach the threshold with exactly that probability
    # (up to the part of the tail beyond the enlarged window)
    reach_freq = reach / n_seeds
    return Check(name, freq <= tol, freq, tol, {"certificate": cert, "threshold": threshold,
                                                "reach_frequency": reach_freq, "n_seeds": n_seeds,
                                                "window": window.describe()})


# ---- Gaussian storms ------------------------------------------------------------------

@_timed
def fbm_covariance_check(H: float, n: int = 100_000, seed=0, sigma2: float = 1.0) -> Check:
    """Empirical covariance on 5 nodes (plus the origin anchor) within 3 sigma entrywise."""
    nodes = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 1.0], [1.0, 1.0], [-0.75, 0.25], [0.3, -0.6]])
    p = FbmParams(H, sigma2)
    x = fbm_samples(p, nodes, n, stream(seed, "fbm-cov", int(H * 1000)))[:, 1:]
    C = fbm_covariance(p, nodes[1:])
    emp = x.T @ x / n  # known zero mean
    se = np.sqrt((np.outer(np.diag(C), np.diag(C)) + C ** 2) / n)
    z = np.abs(emp - C) / se
    return Check(f"fBm covariance H={H}", bool(np.all(z <= 3)), float(z.max()), 3.0,
                 {"n": n, "max_abs_error": float(np.abs(emp - C).max())})

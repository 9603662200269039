import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from idfields.exactdist import FddQuery, fdd_cdf
from idfields.fields import simulate_margin
from idfields.point_process import Window
from idfields.spectral import (
    GrainSet, StormProfile, frechet_table, make_boolean, make_frechet_lift, make_iid, make_moving_maxima,
    make_penrose, make_poisson_line, make_poisson_line_maxstable, model_from_config,
)


def cdf(model, pts, xs):
    return fdd_cdf(model, FddQuery.make(pts, xs)).value


# ---- i.i.d. ----------------------------------------------------------------------

def test_iid_frechet_level_mass():
    x, F = frechet_table(1.0, 1.0)
    model = make_iid(x, F, [0.0, 1.0, 2.0])
    for v in (0.5, 1.0, 3.0):
        assert model.level_mass(np.array([1.0]), v) == pytest.approx(1 / v, rel=1e-6)


def test_iid_margin_ks():
    x, F = frechet_table(1.0, 1.0)
    model = make_iid(x, F, [0.0, 1.0])
    z = simulate_margin(model, [[0.0]], 100_000, 1)[:, 0]
    assert stats.kstest(z, lambda v: np.exp(-1 / np.maximum(v, 1e-300))).statistic <= 0.01


def test_iid_indices_independent():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    F = np.array([0.2, 0.5, 0.9, 1.0])
    model = make_iid(x, F, [1.0, 2.0])
    n = 100_000
    z = simulate_margin(model, [[1.0], [2.0]], n, 2)
    a, b = z[:, 0] > 1.5, z[:, 1] > 1.5
    r = np.corrcoef(a, b)[0, 1]
    assert abs(r) <= 3 / math.sqrt(n)


# ---- moving maxima -----------------------------------------------------------------

def test_moving_maxima_margin_is_x_squared():
    model = make_moving_maxima(StormProfile("exp_bump"), 1.0, 1)
    for v in (0.1, 0.5, 0.9):
        assert cdf(model, [[0.0]], [v]) == pytest.approx(v * v, rel=1e-9)


def test_moving_maxima_stationary_margin():
    model = make_moving_maxima(StormProfile("exp_bump"), 1.0, 1)
    z0 = simulate_margin(model, [[0.0]], 10_000, 3)[:, 0]
    z7 = simulate_margin(model, [[7.0]], 10_000, 4)[:, 0]
    assert stats.ks_2samp(z0, z7).statistic <= 0.02


def test_indicator_storm_zero_probability():
    model = make_moving_maxima(StormProfile("indicator", 1.0, 1.0), 1.0, 1)
    z = simulate_margin(model, [[0.0]], 100_000, 5)[:, 0]
    p = np.mean(z == 0)
    assert abs(p - math.exp(-2)) <= 3 * math.sqrt(math.exp(-2) * (1 - math.exp(-2)) / 1e5)


# ---- Poisson lines ----------------------------------------------------------------------

def test_poisson_line_margin_power():
    model = make_poisson_line(StormProfile("exp_bump"), 1.0)
    for v in (0.9, 0.97, 0.995):
        assert cdf(model, [[0.0, 0.0]], [v]) == pytest.approx(v ** (4 * math.pi), rel=1e-8)


def test_poisson_line_rotation_invariance():
    model = make_poisson_line(StormProfile("exp_bump"), 1.0)
    a = simulate_margin(model, [[1.0, 0.0]], 10_000, 6)[:, 0]
    b = simulate_margin(model, [[0.0, 1.0]], 10_000, 7)[:, 0]
    assert stats.ks_2samp(a, b).statistic <= 0.02


def test_maxstable_scale_and_max_stability():
    model = make_poisson_line_maxstable(StormProfile("exp_bump"), 1.0, 1.0)
    assert model.sigma == pytest.approx(4 * math.pi, rel=1e-9)
    for v in (5.0, 20.0, 100.0):
        assert -math.log(cdf(model, [[0.0, 0.0]], [v])) == pytest.approx(4 * math.pi / v, rel=1e-8)
    one = simulate_margin(model, [[0.0, 0.0]], 10_000, 8)[:, 0]
    four = np.max(simulate_margin(model, [[0.0, 0.0]], 40_000, 9)[:, 0].reshape(4, -1), axis=0) / 4
    assert stats.ks_2samp(one, four).statistic <= 0.02


# ---- Penrose ---------------------------------------------------------------------------

def test_penrose_degenerate_nearest_point():
    grid = np.array([[0.0], [1.0]])
    model = make_penrose("brownian", 1.5, grid, k=1, sigma2=0.0)
    x = simulate_margin(model, [[0.0]], 100_000, 10)[:, 0]
    for r in (0.1, 0.3, 0.8):
        p = math.exp(-2 * 1.5 * r)
        assert abs(np.mean(x > r) - p) <= 3 * math.sqrt(p * (1 - p) / 1e5) + 1e-3


def test_penrose_median_decreases_in_intensity():
    grid = np.linspace(-2, 2, 41)[:, None]
    med = []
    for lam in (1.0, 10.0, 100.0):
        model = make_penrose("brownian", lam, grid, k=1)
        med.append(np.median(simulate_margin(model, [[0.0]], 2_000, 11)[:, 0]))
    assert med[0] > med[1] > med[2]


def test_penrose_grid_stationarity():
    grid = np.linspace(-2, 2, 41)[:, None]
    model = make_penrose("brownian", 1.0, grid, k=1)
    a = simulate_margin(model, [[-1.5]], 10_000, 12)[:, 0]
    b = simulate_margin(model, [[1.0]], 10_000, 13)[:, 0]
    assert stats.ks_2samp(a, b).statistic <= 0.02


def test_penrose_exact_margin():
    grid = np.linspace(-1, 1, 21)[:, None]
    model = make_penrose("brownian", 1.0, grid, k=2)
    x = simulate_margin(model, [[0.5]], 20_000, 14)[:, 0]
    # P[X > r] = exp(-lambda * pi r^2) for k = 2
    p = math.exp(-math.pi * 0.5 ** 2)
    assert abs(np.mean(x > 0.5) - p) <= 3 * math.sqrt(p * (1 - p) / 2e4) + 1e-3


# ---- Boolean -------------------------------------------------------------------------

def test_boolean_vacancy_exact():
    model = make_boolean(GrainSet("disk", (1.0,), 2), 1.0, 2)
    assert 1 - cdf(model, [[0.0, 0.0]], [1.0]) == pytest.approx(1 - math.exp(-math.pi), rel=1e-12)
    box = make_boolean(GrainSet("box", (0.5, 1.0), 2), 2.0, 2)
    assert cdf(box, [[0.0, 0.0]], [1.0]) == pytest.approx(math.exp(-2.0 * 2.0), rel=1e-12)


def test_boolean_union_of_quarters():
    model = make_boolean(GrainSet("disk", (1.0,), 2), 1.0, 2)
    n = 40_000
    full = simulate_margin(model, [[0.0, 0.0]], n, 15)[:, 0]
    quarter = model.scaled(0.25)
    parts = np.max(simulate_margin(quarter, [[0.0, 0.0]], 4 * n, 16)[:, 0].reshape(4, -1), axis=0)
    p = math.exp(-math.pi)
    se = math.sqrt(2 * p * (1 - p) / n)
    assert abs(np.mean(full == 0) - np.mean(parts == 0)) <= 3 * se
    assert set(np.unique(full)) <= {0.0, 1.0}


# ---- Frechet lift ---------------------------------------------------------------------

def test_frechet_lift_unit_base():
    model = make_frechet_lift(np.ones((1, 1)), 1.0, [1.0])
    for v in (0.3, 1.0, 4.0):
        assert cdf(model, [[0.0]], [v]) == pytest.approx(math.exp(-1 / v), rel=1e-9)
    assert cdf(model, [[0.0]], [1e9]) == pytest.approx(1.0, abs=1e-8)


@given(st.floats(0.1, 10.0), st.floats(0.5, 3.0))
@settings(max_examples=30, deadline=None)
def test_frechet_lift_scaling(c, alpha):
    g = np.array([[0.4, 1.0, 0.0]])
    m = [0.5, 0.2, 1.0]
    base = make_frechet_lift(g, alpha, m)
    big = make_frechet_lift(c * g, alpha, m)
    assert big.sigma(np.array([0.0])) == pytest.approx(c * base.sigma(np.array([0.0])), rel=1e-12)


# ---- generic properties ---------------------------------------------------------

def stationary_models():
    grid = np.linspace(-3, 3, 13)[:, None]
    return [
        make_moving_maxima(StormProfile("exp_bump", 1.0, 0.7), 1.0, 1),
        make_moving_maxima(StormProfile("indicator", 1.0, 1.0), 2.0, 2),
        make_poisson_line(StormProfile("exp_bump"), 1.0),
        make_boolean(GrainSet("box", (0.5, 0.25), 2), 1.0, 2),
        make_penrose("brownian", 1.0, grid, k=1),
    ]


@pytest.mark.parametrize("idx", range(5))
def test_shift_covariance(idx):
    model = stationary_models()[idx]
    rng = np.random.default_rng(idx)
    grid_like = getattr(model, "points", None)
    w = model.window_for(grid_like if grid_like is not None else np.zeros((1, model.dim)), 1e-2).window
    from idfields.point_process import sample_poisson
    cfg = sample_poisson(model.window_intensity(w), w, idx)
    for _ in range(10):
        if grid_like is not None:
            t, s = grid_like[rng.integers(0, 4)], grid_like[rng.integers(6, 9)] - grid_like[6]
        else:
            t, s = rng.uniform(-2, 2, model.dim), rng.uniform(-2, 2, model.dim)
        locs, marks = model.shift(s, cfg.locations, cfg.marks)
        lhs = model.eval((t + s)[None, :], cfg.locations, cfg.marks)
        rhs = model.eval(t[None, :], locs, marks)
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("idx", range(4))
@given(a=st.floats(0.05, 0.95), b=st.floats(0.05, 0.95), r=st.floats(0.5, 4.0))
@settings(max_examples=15, deadline=None)
def test_tail_mass_monotone(idx, a, b, r):
    model = stationary_models()[idx]
    a, b = sorted((a, b))
    t = np.zeros(model.dim)
    k = model.loc_dim
    lo, hi = (-r,) * k, (r,) * k
    lo2, hi2 = (-2 * r,) * k, (2 * r,) * k
    w = Window(lo, hi, model.mark)
    w2 = Window(lo2, hi2, model.mark)
    ta, _ = model.tail_mass(t, a, w)
    tb, _ = model.tail_mass(t, b, w)
    assert ta >= tb - 1e-12
    assert model.tail_mass(t, a, w2)[0] <= ta + 1e-12


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown"):
        model_from_config({"kind": "moving_maxima", "lamda": 1.0})
    with pytest.raises(ValueError, match="unknown model kind"):
        model_from_config({"kind": "nope"})

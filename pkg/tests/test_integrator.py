import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idfields.checks import cell_integral_samples, random_cell_pair
from idfields.integrator import (
    Fn, compensator_a, d_of_sum, gamma, ky_fan, make_sum_plan, max_integral, metric_d, metric_dmu,
    norm_d, sum_integral, sum_integral_batch, tail_certificate,
)
from idfields.point_process import PointConfig, Window, sample_poisson, sample_poisson_batch
from idfields.spectral import StormProfile, make_cells, make_moving_maxima


def mm():
    return make_moving_maxima(StormProfile("exp_bump"), 1.0, 1)


def test_compensator_cases():
    assert compensator_a(0.5) == 0.5
    assert compensator_a(2.0) == 1.0
    assert compensator_a(-3.0) == -1.0
    assert np.array_equal(compensator_a(np.array([-2.0, 0.1, 7.0])), [-1.0, 0.1, 1.0])


def test_max_integral_empty_and_single():
    model = mm()
    w = Window((-5.0,), (5.0,), model.mark)
    empty = PointConfig(np.zeros((0, 1)), np.zeros((0, 0)), w, 0)
    assert max_integral(model, 0.0, empty) == 0.0
    # a cell model with value 3.2 on one atom
    cells = make_cells([1.0], [[3.2]])
    one = PointConfig(np.array([[0.0]]), np.zeros((1, 0)), Window((-0.5,), (0.5,)), 0)
    assert max_integral(cells, 0.0, one) == 3.2


@given(st.integers(0, 10_000), st.floats(-4.9, 4.9))
@settings(max_examples=40, deadline=None)
def test_adding_an_atom_never_decreases(seed, u):
    model = mm()
    w = Window((-5.0,), (5.0,), model.mark)
    cfg = sample_poisson(model.window_intensity(w), w, seed)
    more = PointConfig(np.vstack([cfg.locations, [[u]]]), np.zeros((len(cfg) + 1, 0)), w, seed)
    assert max_integral(model, 0.3, more) >= max_integral(model, 0.3, cfg)


def test_tail_certificate_examples():
    model = mm()
    cert = tail_certificate(model, 0.0, Window((-10.0,), (10.0,), model.mark), [0.5])
    assert cert.tail_exceed_prob(0.5) == 0.0
    cert = tail_certificate(model, 0.0, Window((-1.0,), (1.0,), model.mark), [math.exp(-2)])
    assert cert.tail_exceed_prob(math.exp(-2)) == pytest.approx(1 - math.exp(-2), rel=1e-9)
    assert cert.exact


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.5, 6.0))
@settings(max_examples=40, deadline=None)
def test_tail_prob_monotone(a, b, r):
    model = mm()
    a, b = sorted((a, b))
    cert = tail_certificate(model, 0.2, Window((-r,), (r,), model.mark), [a, b])
    assert cert.tail_exceed_prob(a) >= cert.tail_exceed_prob(b)
    bigger = tail_certificate(model, 0.2, Window((-2 * r,), (2 * r,), model.mark), [a])
    assert bigger.tail_exceed_prob(a) <= cert.tail_exceed_prob(a)


def test_sum_integral_empty_is_minus_compensator():
    cells = make_cells([2.0], [[1.0]])
    plan = make_sum_plan(Fn(cells, 0.0))
    empty = PointConfig(np.zeros((0, 1)), np.zeros((0, 0)), plan.window, 0)
    assert sum_integral(cells, 0.0, empty, plan) == -plan.compensator_integral
    assert plan.compensator_integral == pytest.approx(2.0)


def test_compound_poisson_mean():
    m, n = 2.0, 100_000
    cells = make_cells([m], [[1.0]])
    plan = make_sum_plan(Fn(cells, 0.0))
    assert plan.epsilon < 1
    batch = sample_poisson_batch(cells.window_intensity(plan.window), plan.window, 5, n)
    vals = sum_integral_batch(cells, 0.0, batch, plan)
    assert abs(vals.mean()) <= 3 * math.sqrt(m / n)


def test_scaling_on_same_config():
    cells = make_cells([0.7, 1.3], [[0.2, -0.4]])
    p1 = make_sum_plan(Fn(cells, 0.0))
    p2 = make_sum_plan(Fn(cells, 0.0, 2.0))
    for seed in range(20):
        cfg = sample_poisson(cells.window_intensity(p1.window), p1.window, seed)
        assert sum_integral(cells, 0.0, cfg, p2) == pytest.approx(2 * sum_integral(cells, 0.0, cfg, p1), abs=1e-12)


def test_plan_window_pairing_is_checked():
    model = mm()
    plan = make_sum_plan(Fn(model, 0.0))
    small = Window((-0.5,), (0.5,), model.mark)
    cfg = sample_poisson(model.window_intensity(small), small, 1)
    with pytest.raises(ValueError, match="pairing"):
        sum_integral(model, 0.0, cfg, plan)


def test_remainder_bound_respected():
    model = mm()
    plan = make_sum_plan(Fn(model, 0.0), tol=1e-3)
    # int_{e^{-|u|} <= eps} e^{-2|u|} du = eps^2
    assert plan.epsilon ** 2 <= 1e-6 + 1e-12
    assert plan.remainder_variance_bound <= 1e-6 * (1 + 1e-6)


def test_gamma_examples():
    small = make_cells([0.25, 0.5], [[0.25, -0.5], [0.5, 0.25]])
    assert gamma(Fn(small, 0.0), Fn(small, 1.0)).value == 0.0
    ones = make_cells([0.8], [[1.0], [1.0]])
    assert gamma(Fn(ones, 0.0), Fn(ones, 1.0)).value == pytest.approx(-0.8)
    zero = make_cells([0.8, 0.2], [[3.0, -2.0], [0.0, 0.0]])
    assert gamma(Fn(zero, 0.0), Fn(zero, 1.0)).value == 0.0


def test_metric_d_examples():
    c = make_cells([0.25], [[2.0], [0.0]])
    assert metric_d(Fn(c, 0.0)).value == pytest.approx(0.5)
    assert metric_d(Fn(c, 0.0), Fn(c, 0.0)).value == 0.0
    assert norm_d(Fn(c, 0.0)).value == pytest.approx(0.5)


def test_metric_dmu_examples():
    c = make_cells([0.1, 0.4], [[0.3, 1.0], [0.0, 1.0]])
    assert metric_dmu(Fn(c, 0.0), Fn(c, 1.0)) == pytest.approx(0.1, rel=1e-9)
    assert metric_dmu(Fn(c, 0.0), Fn(c, 0.0)) == 0.0


@given(st.integers(0, 2 ** 31))
@settings(max_examples=60, deadline=None)
def test_gamma_bound_and_symmetry(seed):
    rng = np.random.default_rng(seed)
    cells = random_cell_pair(rng)
    f, g = Fn(cells, 0.0), Fn(cells, 1.0)
    gm = gamma(f, g).value
    dfg = d_of_sum(f, g).value
    bound = 3 * dfg ** 2 + 2 * (norm_d(f).value + norm_d(g).value) * dfg
    assert abs(gm) <= bound + 1e-9
    assert metric_d(f, g).value == pytest.approx(metric_d(g, f).value, abs=1e-12)


@given(st.integers(0, 2 ** 31), st.floats(0.0, 1.0))
@settings(max_examples=40, deadline=None)
def test_dmu_monotone_under_shrinking(seed, shrink):
    rng = np.random.default_rng(seed)
    cells = random_cell_pair(rng)
    shrunk = make_cells(cells.masses, np.vstack([cells.values[0] * shrink, np.zeros(cells.n_cells)]))
    full = make_cells(cells.masses, np.vstack([cells.values[0], np.zeros(cells.n_cells)]))
    assert metric_dmu(Fn(shrunk, 0.0), Fn(shrunk, 1.0)) <= metric_dmu(Fn(full, 0.0), Fn(full, 1.0)) + 1e-12


def test_ky_fan_examples():
    x = np.random.default_rng(0).normal(size=100)
    assert ky_fan(x, x) == 0.0
    assert ky_fan(np.zeros(100), np.ones(100)) == 1.0
    with pytest.raises(ValueError):
        ky_fan([], [])


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=50), st.integers(0, 1000))
@settings(max_examples=60, deadline=None)
def test_ky_fan_in_unit_interval_and_brute_force(xs, seed):
    x = np.asarray(xs)
    y = x + np.random.default_rng(seed).normal(size=len(x))
    kf = ky_fan(x, y)
    assert 0.0 <= kf <= 1.0
    d = np.abs(x - y)
    grid = np.concatenate([[0.0], d, [1.0]])
    feasible = [t for t in grid if np.mean(d >= t + 1e-15) <= t]
    # the infimum is attained at one of the breakpoints (right-continuity)
    assert kf == pytest.approx(min(feasible), abs=1e-12) or kf <= min(feasible)


def test_cell_samples_match_generic_sum_integral():
    cells = make_cells([0.6, 1.1], [[1.5, -0.7]])
    plan = make_sum_plan(Fn(cells, 0.0))
    batch = sample_poisson_batch(cells.window_intensity(plan.window), plan.window, 3, 50_000)
    generic = sum_integral_batch(cells, 0.0, batch, plan)
    fast = cell_integral_samples(cells, 0, 50_000, np.random.default_rng(4))
    assert abs(generic.mean() - fast.mean()) <= 4 * math.sqrt(2 * (0.6 * 1.5 ** 2 + 1.1 * 0.49) / 50_000)

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idfields.checks import fdd_check, random_cell_pair
from idfields.exactdist import FddQuery, char_function, fdd_cdf, union_mass
from idfields.spectral import GrainSet, StormProfile, make_boolean, make_cells, make_moving_maxima, make_penrose


def mm():
    return make_moving_maxima(StormProfile("exp_bump"), 1.0, 1)


def test_single_point_example():
    assert fdd_cdf(mm(), FddQuery.make([[0.0]], [0.5])).value == pytest.approx(0.25, rel=1e-12)


def test_infinite_threshold_drops_out():
    q2 = FddQuery.make([[0.0], [1.0]], [0.4, math.inf])
    q1 = FddQuery.make([[0.0]], [0.4])
    assert fdd_cdf(mm(), q2).value == fdd_cdf(mm(), q1).value


def test_far_points_factorize():
    a, b = 0.3, 0.6
    joint = fdd_cdf(mm(), FddQuery.make([[0.0], [50.0]], [a, b])).value
    assert joint == pytest.approx(a * a * b * b, rel=1e-12)


def test_overlapping_points_exact_union():
    # level sets [-r1, r1] and [1 - r2, 1 + r2] overlap: union length is their hull
    a, b = 0.3, 0.5
    r1, r2 = -math.log(a), -math.log(b)
    length = max(r1, 1 + r2) + r1
    got = fdd_cdf(mm(), FddQuery.make([[0.0], [1.0]], [a, b])).value
    assert got == pytest.approx(math.exp(-length), rel=1e-12)


def test_zero_threshold_and_all_zero():
    assert fdd_cdf(mm(), FddQuery.make([[0.0], [1.0]], [0.0, 0.5])).value == 0.0
    with pytest.raises(ValueError):
        fdd_cdf(mm(), FddQuery.make([[0.0]], [0.0]))


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0, 3))
@settings(max_examples=60, deadline=None)
def test_fdd_monotone(x1, x2, y, gap):
    lo, hi = sorted((x1, x2))
    for model in (mm(), make_boolean(GrainSet("disk", (1.0,), 2), 1.0, 2)):
        pts = [[0.0] * model.dim, [gap] + [0.0] * (model.dim - 1)]
        a = fdd_cdf(model, FddQuery.make(pts, [lo, y])).value
        b = fdd_cdf(model, FddQuery.make(pts, [hi, y])).value
        assert a <= b + 1e-12


def test_char_function_zero_angle():
    assert char_function(mm(), FddQuery.make([[0.0]], [0.0])).value == 1.0


@pytest.mark.parametrize("theta", [0.5, 1.0, 2.0, -1.3])
def test_char_function_compound_poisson(theta):
    m = 2.0
    cells = make_cells([m], [[1.0]])
    got = char_function(cells, FddQuery.make([[0.0]], [theta])).value
    want = cmath.exp(m * (cmath.exp(1j * theta) - 1 - 1j * theta))
    assert abs(got - want) <= 1e-12


@given(st.integers(0, 2 ** 31), st.floats(-4, 4), st.floats(-4, 4))
@settings(max_examples=40, deadline=None)
def test_char_function_conjugate_and_bounded(seed, th1, th2):
    cells = random_cell_pair(np.random.default_rng(seed))
    pts = [[0.0], [1.0]]
    plus = char_function(cells, FddQuery.make(pts, [th1, th2])).value
    minus = char_function(cells, FddQuery.make(pts, [-th1, -th2])).value
    assert abs(plus - minus.conjugate()) <= 1e-12
    assert abs(plus) <= 1 + 1e-12


def test_char_function_moving_maxima_bounded():
    val = char_function(mm(), FddQuery.make([[0.0], [0.5]], [1.0, -2.0])).value
    assert abs(val) <= 1.0


def test_union_mass_of_equal_sets():
    model = mm()
    one = union_mass(model, [[0.0]], [0.2]).value
    two = union_mass(model, [[0.0], [0.0]], [0.2, 0.2]).value
    assert one == pytest.approx(two, rel=1e-12)


@pytest.mark.parametrize("make", [
    lambda: mm(),
    lambda: make_boolean(GrainSet("disk", (1.0,), 2), 1.0, 2),
    lambda: make_penrose("brownian", 1.0, np.linspace(-2, 2, 21)[:, None], k=1),
])
def test_exact_vs_simulation(make):
    model = make()
    origin = [0.0] * model.dim
    other = [0.4] + [0.0] * (model.dim - 1)
    if model.kind == "penrose":
        xs = [math.exp(-0.2), math.exp(-0.5), math.exp(-1.0)]
    elif model.kind == "boolean_set":
        xs = [0.5, 1.0, 1.5]
    else:
        xs = [0.3, 0.6, 0.9]
    queries = [FddQuery.make([origin], [x]) for x in xs] + [FddQuery.make([origin, other], [xs[1], xs[2]])]
    chk = fdd_check(model, queries, 100_000, 7)
    assert chk.passed, chk.details

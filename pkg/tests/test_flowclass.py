import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idfields.fields import simulate_config
from idfields.flowclass import (FlowClassConfig, PSI_REGISTRY, cd_split_simulate, classify, label_atoms,
                                register_psi)
from idfields.gaussian import square_grid
from idfields.integrator import field_values
from idfields.spectral import (StormProfile, make_moving_maxima, make_penrose, make_poisson_line,
                               make_poisson_line_maxstable)

GRID = np.linspace(-130.0, 130.0, 2081)

GROUND_TRUTH = {
    "indicator moving maxima": (lambda: make_moving_maxima(StormProfile("indicator"), 1.0, 1), "dissipative"),
    "poisson line": (lambda: make_poisson_line(StormProfile("exp_bump"), 1.0), "conservative"),
    "penrose k=1": (lambda: make_penrose("brownian", 1.0, GRID, k=1), "conservative"),
    "penrose k=3": (lambda: make_penrose("brownian", 1.0, GRID, k=3), "dissipative"),
}


@pytest.mark.parametrize("name", list(GROUND_TRUTH))
def test_ground_truth_verdict(name):
    make, expected = GROUND_TRUTH[name]
    rep = classify(make())
    assert rep.verdict == expected
    assert rep.growth_curve.shape == (200, 7)


@pytest.mark.parametrize("name", list(GROUND_TRUTH))
@pytest.mark.parametrize("psi", ["min1_sq", "exp_inv"])
def test_verdict_invariant_under_psi(name, psi):
    make, expected = GROUND_TRUTH[name]
    assert classify(make(), FlowClassConfig(psi=psi)).verdict == expected


@pytest.mark.parametrize("name", list(GROUND_TRUTH))
@pytest.mark.parametrize("ratio", [2.0, 4.0, 8.0])
def test_verdict_invariant_under_ratio(name, ratio):
    make, expected = GROUND_TRUTH[name]
    assert classify(make(), FlowClassConfig(divergence_ratio=ratio)).verdict == expected


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 31), n=st.integers(1, 40))
def test_growth_curves_monotone(seed, n):
    model = make_poisson_line(StormProfile("exp_bump"), 1.0)
    rep = classify(model, FlowClassConfig(samples_per_radius=n, seed=seed))
    assert np.all(np.diff(rep.growth_curve, axis=1) >= 0)
    assert np.all(rep.growth_curve >= 0)


def test_raw_curves_monotone_before_accumulation():
    # the quadrature itself should already give nested-box monotonicity up to rounding
    model = make_penrose("brownian", 1.0, GRID, k=1)
    rng = np.random.Generator(np.random.Philox(5))
    locs, marks, _ = model.sample_core(50, rng)
    cfg = FlowClassConfig()
    raw = model.growth_curves(locs, marks, np.asarray(cfg.radii), cfg.psi_func)
    assert np.all(np.diff(raw, axis=1) >= -1e-9 * np.abs(raw).max())


def test_report_fields():
    rep = classify(make_moving_maxima(StormProfile("indicator"), 1.0, 1))
    d = rep.to_dict()
    for key in ("model", "psi", "radii", "verdict", "diverging_fraction"):
        assert key in d
    assert rep.curves_csv().count("\n") == 201


def test_classify_deterministic():
    model = make_poisson_line(StormProfile("exp_bump"), 1.0)
    a = classify(model, FlowClassConfig(seed=3))
    b = classify(model, FlowClassConfig(seed=3))
    assert np.array_equal(a.growth_curve, b.growth_curve)


def test_psi_must_be_positive():
    with pytest.raises(ValueError, match="> 0"):
        register_psi("bad_zero", lambda x: np.where(np.asarray(x) > 1, 1.0, 0.0))
    assert "bad_zero" not in PSI_REGISTRY


def test_psi_not_admissible():
    # Frechet level masses mu{f_0 >= a} = sigma / a make int sqrt(min(f_0, 1)) dmu diverge at 0
    register_psi("sqrt_min1", lambda x: np.sqrt(np.minimum(np.abs(np.asarray(x, float)), 1.0)))
    try:
        model = make_poisson_line_maxstable(StormProfile("exp_bump"), 1.0, 1.0)
        with pytest.raises(ValueError, match="psi not admissible"):
            classify(model, FlowClassConfig(psi="sqrt_min1"))
        # the default psi stays admissible there
        classify(model, FlowClassConfig(samples_per_radius=5))
    finally:
        PSI_REGISTRY.pop("sqrt_min1", None)


def test_config_validation():
    with pytest.raises(ValueError):
        FlowClassConfig(psi="nope")
    with pytest.raises(ValueError):
        FlowClassConfig(radii=(4.0, 2.0, 8.0))
    with pytest.raises(ValueError):
        FlowClassConfig(divergence_ratio=1.0)


# ---- C/D split ----------------------------------------------------------------------

def _reconstruct(model, grid, seed, flow=FlowClassConfig()):
    xc, xd = cd_split_simulate(model, flow, grid, seed)
    cfg, _ = simulate_config(model, model.index_points(grid), seed)
    full = field_values(model, model.index_points(grid), cfg)
    return xc, xd, full


def test_dissipative_split_has_empty_conservative_part():
    model = make_moving_maxima(StormProfile("indicator"), 1.0, 1)
    grid = np.linspace(-5, 5, 101)
    xc, xd, full = _reconstruct(model, grid, 11)
    assert xc.truncation["atoms"] == 0
    assert np.all(xc.values == 0)
    assert np.array_equal(np.maximum(xc.values, xd.values), full)


def test_conservative_split_has_empty_dissipative_part():
    model = make_poisson_line(StormProfile("exp_bump"), 1.0)
    xc, xd, full = _reconstruct(model, square_grid(8, 4.0), 12)
    assert xc.truncation["atoms"] > 0 and xd.truncation["atoms"] == 0
    assert np.all(xd.values == 0)
    assert np.array_equal(np.maximum(xc.values, xd.values), full)


def test_min_oriented_split_reconstructs():
    model = make_penrose("brownian", 1.0, GRID, k=1)
    xc, xd, full = _reconstruct(model, GRID[1000:1081], 12)
    # an empty part never lowers the minimum
    assert np.array_equal(np.minimum(xc.values, xd.values), full)


@settings(max_examples=5, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_split_reconstruction_property(seed):
    coarse = np.linspace(-130.0, 130.0, 521)
    model = make_penrose("brownian", 1.0, coarse, k=3)
    grid = coarse[250:271]
    xc, xd, full = _reconstruct(model, grid, seed)
    assert np.array_equal(np.minimum(xc.values, xd.values), full)


def test_undecided_atoms_raise():
    # tiny radii with S_R ~ R^2 put the shell ratio at (7 - 4) / (4 - 1) = 1, between the two cutoffs
    model = make_poisson_line(StormProfile("exp_bump"), 1.0)
    pts = np.zeros((1, 2))
    cfg, _ = simulate_config(model, pts, 4)
    flow = FlowClassConfig(radii=(1e-3, 2e-3, 7 ** 0.5 * 1e-3))
    with pytest.raises(ValueError, match="larger radii"):
        label_atoms(model, cfg, flow)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from idfields.point_process import (
    FrechetMark, IntensityMeasure, PointConfig, UniformMark, Window, group_max, group_sum,
    sample_poisson, sample_poisson_batch, split, superpose, thin,
)


def unit(lo=0.0, hi=1.0, mark=None):
    return Window((lo,), (hi,), mark or UniformMark(0.0, 1.0))


def test_zero_mass_gives_empty_config():
    cfg = sample_poisson(IntensityMeasure(0.0), unit(), 3)
    assert len(cfg) == 0
    assert cfg.marks.shape == (0, 1)


def test_mean_count_matches_mass():
    # lambda = 2 on [0, 5]: Poisson(10)
    batch = sample_poisson_batch(IntensityMeasure(2.0), Window((0.0,), (5.0,)), 11, 100_000)
    m = batch.counts.mean()
    assert abs(m - 10) <= 3 * math.sqrt(10 / 100_000)


def test_empty_probability():
    batch = sample_poisson_batch(IntensityMeasure(1.0), Window((0.0,), (1.0,)), 12, 100_000)
    assert abs(np.mean(batch.counts == 0) - math.exp(-1)) <= 0.005


def test_atoms_lie_in_window():
    w = Window((-1.0, 2.0), (3.0, 2.5), UniformMark(0.0, 2.0))
    cfg = sample_poisson(IntensityMeasure(5.0), w, 4)
    assert len(cfg) > 0
    assert w.contains(cfg.locations).all()


def test_deterministic_per_seed():
    w = unit(0, 10)
    a = sample_poisson(IntensityMeasure(3.0), w, 99)
    b = sample_poisson(IntensityMeasure(3.0), w, 99)
    c = sample_poisson(IntensityMeasure(3.0), w, 100)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv() != c.to_csv()


def test_window_rejects_degenerate_and_infinite():
    with pytest.raises(ValueError):
        Window((0.0,), (0.0,))
    with pytest.raises(ValueError):
        Window((0.0,), (math.inf,))


def test_frechet_mark_has_infinite_mass_without_floor():
    with pytest.raises(ValueError):
        FrechetMark(1.0, 0.0)


def test_thin_keep_all_is_identity():
    cfg = sample_poisson(IntensityMeasure(4.0), unit(0, 5), 5)
    assert thin(cfg, 1.0, 1).to_csv() == cfg.to_csv()


def test_thin_empty():
    cfg = sample_poisson(IntensityMeasure(0.0), unit(), 5)
    assert len(thin(cfg, 0.3, 2)) == 0


def test_thinning_mean():
    lam, n = 8.0, 10_000
    counts = np.array([len(thin(sample_poisson(IntensityMeasure(lam), unit(), s), 0.25, s)) for s in range(n)])
    assert abs(counts.mean() - lam / 4) <= 3 * math.sqrt(lam / 4 / n)


def test_superpose_identity_and_errors():
    cfg = sample_poisson(IntensityMeasure(4.0), unit(0, 5), 5)
    empty = sample_poisson(IntensityMeasure(0.0), unit(0, 5), 6)
    assert superpose([cfg, empty]).to_csv() == cfg.to_csv()
    with pytest.raises(ValueError):
        superpose([])


def test_superposition_of_quarters():
    lam, n = 6.0, 10_000
    counts = np.array([
        len(superpose([sample_poisson(IntensityMeasure(lam / 4), unit(), 4 * s + j) for j in range(4)]))
        for s in range(n)
    ])
    assert abs(counts.mean() - lam) <= 3 * math.sqrt(lam / n)
    assert abs(counts.var() - lam) <= 5 * math.sqrt(2 * lam ** 2 / n)


def test_disjoint_subwindows_independent():
    # chi-square test of independence on the 2-way split of [0, 2]
    batch = sample_poisson_batch(IntensityMeasure(1.5), Window((0.0,), (2.0,)), 21, 10_000)
    left = np.zeros(batch.n_rep, int)
    np.add.at(left, batch.owner, batch.locations[:, 0] < 1.0)
    right = batch.counts - left
    table = np.zeros((4, 4))
    np.add.at(table, (np.minimum(left, 3), np.minimum(right, 3)), 1)
    p = stats.chi2_contingency(table).pvalue
    assert p > 1e-3
    assert abs(left.mean() - 1.5) <= 3 * math.sqrt(1.5 / batch.n_rep)


@given(st.integers(0, 2 ** 32), st.floats(0.05, 1.0))
@settings(max_examples=40, deadline=None)
def test_split_then_superpose_restores_multiset(seed, p):
    cfg = sample_poisson(IntensityMeasure(5.0), unit(0, 3), seed)
    kept, dropped = split(cfg, p, seed + 1)
    back = superpose([kept, dropped])
    assert sorted(back.atoms()) == sorted(cfg.atoms())


def test_json_roundtrip():
    cfg = sample_poisson(IntensityMeasure(3.0), unit(0, 4), 7)
    back = PointConfig.from_json(cfg.to_json())
    assert back.to_csv() == cfg.to_csv()


@given(st.lists(st.integers(0, 5), min_size=1, max_size=8), st.integers(0, 1000))
@settings(max_examples=50, deadline=None)
def test_group_reductions(counts, seed):
    counts = np.asarray(counts)
    vals = np.random.default_rng(seed).normal(size=counts.sum())
    mx = group_max(vals, counts, initial=-np.inf)
    sm = group_sum(vals, counts)
    off = np.concatenate([[0], np.cumsum(counts)])
    for i in range(len(counts)):
        chunk = vals[off[i]:off[i + 1]]
        assert mx[i] == (chunk.max() if len(chunk) else -np.inf)
        assert sm[i] == pytest.approx(chunk.sum())

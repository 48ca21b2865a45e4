import datetime as dt

import numpy as np
import pytest

from conftest import seq
from cyclicavail.core import ObservationSequence
from cyclicavail.sampler import (
    SparsityConfig,
    draw_gaps,
    make_rng,
    observation_indices,
    sparsify,
    sparsify_all,
)


def _day(k, cid="c", size=5):
    values = np.random.default_rng(k).integers(0, size + 1, size=1440)
    return ObservationSequence(values, 1, size, cid, dt.datetime(2014, 3, 3) + dt.timedelta(days=k))


def test_same_seed_same_output():
    days = [_day(k) for k in range(3)]
    a = sparsify_all(days, SparsityConfig(60, seed=7))
    b = sparsify_all(days, SparsityConfig(60, seed=7))
    c = sparsify_all(days, SparsityConfig(60, seed=8))
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
    assert not all(np.array_equal(x.values, y.values) for x, y in zip(a, c))


def test_output_independent_of_input_order():
    days = [_day(k) for k in range(4)]
    fwd = sparsify_all(days, SparsityConfig(30, seed=1))
    rev = sparsify_all(days[::-1], SparsityConfig(30, seed=1))[::-1]
    assert all(np.array_equal(x.values, y.values) for x, y in zip(fwd, rev))


def test_sequences_on_same_day_get_distinct_streams():
    values = np.zeros(60, dtype=int)
    base = dt.datetime(2014, 3, 3)
    seqs = [ObservationSequence(values, 1, 1, "c", base + dt.timedelta(minutes=60 * k)) for k in range(5)]
    out = sparsify_all(seqs, SparsityConfig(10, seed=0))
    masks = {tuple(s.values >= 0) for s in out}
    assert len(masks) > 1


def test_mean_gap_matches_beta():
    rng = make_rng(0)
    for beta in (30.0, 60.0, 120.0):
        gaps = draw_gaps(rng, beta, 20_000)
        assert gaps.min() >= 1
        assert abs(gaps.mean() - beta) / beta < 0.05


def test_retained_fraction_on_full_day():
    days = [_day(k) for k in range(50)]
    out = sparsify_all(days, SparsityConfig(120, seed=3))
    frac = sum(s.num_known for s in out) / (1440 * len(out))
    assert abs(frac * 120 - 1) < 0.2


def test_retained_values_unchanged_and_indices_sorted():
    day = _day(11)
    out = sparsify(day, SparsityConfig(15, seed=2))
    known = out.values >= 0
    assert np.array_equal(out.values[known], day.values[known])
    idx = observation_indices(1440, 15, make_rng(2))
    assert np.all(np.diff(idx) >= 1) and idx.min() >= 0 and idx.max() < 1440


def test_small_beta_keeps_nearly_everything():
    day = _day(1)
    out = sparsify(day, SparsityConfig(0.05, seed=0))
    assert np.array_equal(out.values, day.values)


def test_rejects_sparse_input_and_bad_beta():
    with pytest.raises(ValueError):
        sparsify(seq([1, -1, 0], size=1), SparsityConfig(2))
    with pytest.raises(ValueError):
        SparsityConfig(0)

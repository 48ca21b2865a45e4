import datetime as dt
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cyclicavail.core import (
    CyclicMarkovModel,
    ObservationSequence,
    SchemaError,
    StateDistribution,
    cycle_position,
    floor_rows,
    minute_of_day,
    position_of_timestamp,
    read_sequences_csv,
    sequences_to_csv_text,
    validate_model,
)
from cyclicavail.synth import random_model


@pytest.mark.parametrize("t,p,expected", [(1, 1440, 1), (1441, 1440, 1), (481, 1440, 481),
                                          (1440, 1440, 1440), (5, 1, 1)])
def test_cycle_position(t, p, expected):
    assert cycle_position(t, p) == expected


@pytest.mark.parametrize("t,p", [(0, 10), (-3, 10), (1, 0)])
def test_cycle_position_rejects(t, p):
    with pytest.raises(ValueError):
        cycle_position(t, p)


@given(st.integers(1, 10**6), st.integers(1, 5000))
def test_cycle_position_periodic(t, p):
    assert cycle_position(t, p) == cycle_position(t + p, p)
    assert 1 <= cycle_position(t, p) <= p


@pytest.mark.parametrize("h,m,expected", [(8, 0, 481), (0, 0, 1), (23, 59, 1440), (10, 0, 601)])
def test_minute_of_day(h, m, expected):
    assert minute_of_day(h, m) == expected


@pytest.mark.parametrize("h,m", [(24, 0), (-1, 0), (3, 60), (3, -1)])
def test_minute_of_day_rejects(h, m):
    with pytest.raises(ValueError):
        minute_of_day(h, m)


def test_minute_of_day_bijection():
    values = {minute_of_day(h, m) for h in range(24) for m in range(60)}
    assert values == set(range(1, 1441))


def test_timestamp_position_matches_minute_of_day():
    ts = dt.datetime(2014, 3, 3, 8, 0)
    assert position_of_timestamp(ts, 1440) == 481
    assert position_of_timestamp(ts + dt.timedelta(days=9), 1440) == 481
    # 24-step cycles stay aligned to midnight
    assert position_of_timestamp(dt.datetime(2014, 3, 4, 0, 0), 24) == 1


def test_validate_model_ok():
    model = CyclicMarkovModel(np.array([[[0.5, 0.5], [0.2, 0.8]]]), np.array([[0.5, 0.5]]))
    assert validate_model(model) == []


def test_validate_model_bad_row_sum():
    trans = np.array([[[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.3], [0.5, 0.5]]])
    model = CyclicMarkovModel(trans, np.full((2, 2), 0.5))
    problems = validate_model(model)
    assert len(problems) == 1
    assert "A_2 row 0" in problems[0] and "0.8" in problems[0]


def test_validate_model_floor_violation():
    model = CyclicMarkovModel(np.array([[[1.0, 0.0], [0.5, 0.5]]]), np.full((1, 2), 0.5),
                              smoothing_floor=1e-6)
    problems = validate_model(model)
    assert len(problems) == 1 and "below floor" in problems[0]


def test_floor_rows_properties():
    rows = np.array([[0.0, 0.0, 5.0], [1.0, 1.0, 2.0], [0.0, 0.0, 0.0], [1e-9, 0.5, 0.5]])
    out = floor_rows(rows, 1e-3)
    assert np.allclose(out.sum(axis=1), 1.0, atol=1e-15, rtol=0)
    assert out.min() >= 1e-3 * (1 - 1e-12)
    # untouched rows are only normalized; pinned rows keep the free entries' ratios
    assert np.allclose(out[1], [0.25, 0.25, 0.5])
    assert np.allclose(out[2], 1 / 3)
    assert out[3, 0] == pytest.approx(1e-3) and out[3, 1] == pytest.approx(out[3, 2])


def test_floor_rows_is_constrained_maximizer():
    # brute-force the constrained log-likelihood maximum over a grid on the simplex
    counts = np.array([0.0, 1.0, 9.0])
    floor = 0.05
    best, best_val = None, -np.inf
    grid = np.linspace(floor, 1 - 2 * floor, 901)
    for a0 in grid:
        for a1 in grid:
            a2 = 1 - a0 - a1
            if a2 < floor:
                continue
            val = counts[1] * np.log(a1) + counts[2] * np.log(a2)
            if val > best_val:
                best, best_val = (a0, a1, a2), val
    assert np.allclose(floor_rows(counts, floor), best, atol=2e-3)


def test_state_distribution_validation():
    StateDistribution([0.25, 0.75])
    with pytest.raises(ValueError):
        StateDistribution([0.5, 0.6])
    with pytest.raises(ValueError):
        StateDistribution([-0.1, 1.1])
    assert StateDistribution.one_hot(2, 4).probs.tolist() == [0, 0, 1, 0]


def test_sequence_validation():
    with pytest.raises(ValueError):
        ObservationSequence([0, 5], 1, 4)
    with pytest.raises(ValueError):
        ObservationSequence([0, -2], 1, 4)
    with pytest.raises(ValueError):
        ObservationSequence([0, 1], 0, 4)
    s = ObservationSequence([0, -1, 4], 3, 4)
    assert not s.is_complete and s.num_known == 2
    assert s.positions0(4).tolist() == [2, 3, 0]


def test_model_is_immutable():
    model = random_model(3, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        model.transitions[0, 0, 0] = 0.3


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 30), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_serialization_round_trip_is_bit_identical(p, n, seed):
    model = random_model(p, n, np.random.default_rng(seed), min_entry=0.0)
    model = model.with_transitions(model.transitions, note="x")
    back = CyclicMarkovModel.loads(model.dumps())
    assert back.equals(model)
    assert back.transitions.tobytes() == model.transitions.tobytes()


def test_model_load_rejects_wrong_format():
    with pytest.raises(ValueError):
        CyclicMarkovModel.from_dict({"format": "other"})


def test_sequence_csv_round_trip():
    start = dt.datetime(2014, 3, 3)
    a = ObservationSequence([3, -1, -1, 2] + [-1] * 1436, 1, 5, "A", start)
    b = ObservationSequence([-1] * 1439 + [1], 1, 5, "B", start + dt.timedelta(days=1))
    text = sequences_to_csv_text([a, b])
    assert text.splitlines()[0] == "cluster_id,timestamp,count"
    back = read_sequences_csv(io.StringIO(text), 1440, {"A": 5, "B": 5})
    assert [s.cluster_id for s in back] == ["A", "B"]
    assert np.array_equal(back[0].values, a.values)
    assert np.array_equal(back[1].values, b.values)
    assert back[1].start_time == b.start_time


def test_sequence_csv_schema_errors():
    with pytest.raises(SchemaError):
        read_sequences_csv(io.StringIO("a,b,c\n"))
    with pytest.raises(SchemaError):
        read_sequences_csv(io.StringIO("cluster_id,timestamp,count\nA,notatime,3\n"))
    with pytest.raises(SchemaError):
        read_sequences_csv(io.StringIO("cluster_id,timestamp,count\nA,2014-03-03T00:00,9\n"),
                           cluster_sizes={"A": 4})

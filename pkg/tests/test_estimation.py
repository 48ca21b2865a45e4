import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import make_model, seq
from cyclicavail.core import ObservationSequence, floor_rows, validate_model
from cyclicavail.estimation import (
    TrainingConfig,
    bw_update,
    estimate_complete,
    forward_backward,
    heuristic_gap_counts,
    train_baum_welch,
    train_heuristic,
)
from cyclicavail.sampler import SparsityConfig, make_rng, sparsify_all
from cyclicavail.synth import random_model, sample_sequences, sticky_model

FLOOR = 1e-6


def floor(a):
    return floor_rows(a, FLOOR)


# complete-data estimator ------------------------------------------------------


def test_std_constant_sequence_is_self_loop():
    model = estimate_complete([seq([0, 0, 0, 0], size=1)], 1, 2)
    assert model.transitions[0, 0, 0] == pytest.approx(1 - FLOOR)
    assert model.transitions[0, 0, 1] == pytest.approx(FLOOR)
    # state 1 never visited: falls back to the near-identity row
    assert model.transitions[0, 1, 1] == pytest.approx(0.99)


def test_std_alternating_sequence():
    model = estimate_complete([seq([0, 1] * 100, size=1)], 2, 2)
    assert model.transitions[0, 0, 1] == pytest.approx(1, abs=2e-6)
    assert model.transitions[1, 1, 0] == pytest.approx(1, abs=2e-6)


def test_std_matches_plain_count_loop():
    rng = np.random.default_rng(3)
    truth = random_model(5, 3, rng)
    seqs = sample_sequences(truth, 40, rng, per_cycle=True)
    model = estimate_complete(seqs, 5, 3)
    counts = oracles.count_transitions([(s.values, 0) for s in seqs], 5, 3)
    den = counts.sum(axis=2)
    expected = np.broadcast_to(np.eye(3) * 0.985 + 0.005, (5, 3, 3)).copy()
    expected[den > 0] = counts[den > 0] / den[den > 0][:, None]
    expected = floor(expected)
    assert np.allclose(model.transitions, expected, atol=1e-12)


def test_std_initial_distribution_is_empirical():
    s = seq([0, 1, 1, 1], size=1)
    model = estimate_complete([s, seq([1, 1, 1, 1], size=1)], 4, 2)
    assert model.initial_distribution[0] == pytest.approx([0.5, 0.5])
    assert model.initial_distribution[1] == pytest.approx([FLOOR, 1 - FLOOR])


def test_std_rejects_gaps_and_empty():
    with pytest.raises(ValueError):
        estimate_complete([seq([0, -1, 1], size=1)], 3, 2)
    with pytest.raises(ValueError):
        estimate_complete([], 3, 2)


def test_std_homogeneous_pools_counts():
    seqs = [seq([0, 1, 0, 0, 1, 1], size=1)]
    model = estimate_complete(seqs, 3, 2, TrainingConfig(homogeneous=True))
    counts = oracles.count_transitions([(s.values, 0) for s in seqs], 1, 2)[0]
    expected = floor(counts / counts.sum(axis=1, keepdims=True))
    for x in range(3):
        assert np.allclose(model.transitions[x], expected, atol=1e-12)


# forward / backward -----------------------------------------------------------


def test_fully_missing_has_zero_log_likelihood(kernel_impl):
    model = make_model(np.full((2, 2), 0.5))
    tab = forward_backward(model, seq([-1, -1, -1], size=1))
    assert tab.log_likelihood == pytest.approx(0.0, abs=1e-15)


def test_complete_sequence_concentrates_mass(kernel_impl):
    rng = np.random.default_rng(0)
    model = random_model(4, 3, rng)
    s = sample_sequences(model, 3, rng)[0]
    tab = forward_backward(model, s)
    gamma = tab.gamma
    assert np.allclose(gamma[np.arange(len(s)), s.values], 1.0, atol=1e-12)


@pytest.mark.parametrize("values", [[0, -1, 1], [-1, 1, -1], [1, -1, -1, 0, -1], [2, -1, 0, -1, -1]])
def test_likelihood_matches_enumeration(kernel_impl, values):
    rng = np.random.default_rng(len(values))
    model = random_model(3, 3, rng, min_entry=0.01)
    s = seq(values, size=2, start=2)
    tab = forward_backward(model, s)
    brute = oracles.likelihood(model.transitions, model.initial_distribution, values, 1)
    assert tab.log_likelihood == pytest.approx(np.log(brute), abs=1e-12)


def test_log_tables_are_consistent(kernel_impl):
    rng = np.random.default_rng(1)
    model = random_model(3, 2, rng)
    values = [1, -1, -1, 0, -1]
    tab = forward_backward(model, seq(values, size=1))
    # log alpha_T summed over states is the log likelihood
    assert np.logaddexp.reduce(tab.log_alpha[-1]) == pytest.approx(tab.log_likelihood)
    # alpha_t * beta_t sums to the likelihood at every step
    joint = np.logaddexp.reduce(tab.log_alpha + tab.log_beta, axis=1)
    assert np.allclose(joint, tab.log_likelihood)
    assert np.allclose(tab.gamma.sum(axis=1), 1.0, atol=1e-9)


def test_no_underflow_on_long_sequences(kernel_impl):
    rng = np.random.default_rng(2)
    model = random_model(1440, 4, rng)
    values = np.full(100_000, -1)
    values[::7] = rng.integers(0, 4, size=values[::7].size)
    tab = forward_backward(model, seq(values, size=3))
    assert np.isfinite(tab.log_likelihood) and tab.log_likelihood < -1000
    assert np.allclose(tab.gamma.sum(axis=1), 1.0, atol=1e-9)


def test_forward_backward_rejects_mismatch():
    model = make_model(np.full((2, 2), 0.5))
    with pytest.raises(ValueError):
        forward_backward(model, seq([0, 2, 1], size=2))


# EM update --------------------------------------------------------------------


def test_bw_update_matches_enumerated_em_step(kernel_impl):
    rng = np.random.default_rng(5)
    model = random_model(2, 2, rng, min_entry=0.05)
    data = [([1, -1, 0, -1, 1], 0), ([-1, 0, -1, -1, 1], 1)]
    seqs = [seq(v, size=1, start=s + 1) for v, s in data]
    tables = [forward_backward(model, s) for s in seqs]
    new = bw_update(model, tables)
    expected = oracles.em_step(model.transitions, model.initial_distribution, data, floor)
    assert np.allclose(new, expected, atol=1e-12)


def test_bw_update_on_complete_data_equals_std(kernel_impl):
    rng = np.random.default_rng(6)
    truth = random_model(6, 3, rng)
    seqs = sample_sequences(truth, 60, rng)
    start = random_model(6, 3, np.random.default_rng(99), min_entry=0.01)
    start = start.with_transitions(start.transitions)
    tables = [forward_backward(start, s) for s in seqs]
    std = estimate_complete(seqs, 6, 3)
    assert np.abs(bw_update(start, tables) - std.transitions).max() < 1e-9


def test_bw_all_missing_returns_init(kernel_impl):
    seqs = [seq([-1] * 50, size=2)]
    res = train_baum_welch(seqs, 5, 3)
    init = floor(np.broadcast_to(
        np.array([[0.99, 0.005, 0.005], [0.005, 0.99, 0.005], [0.005, 0.005, 0.99]]), (5, 3, 3)))
    assert res.converged and res.iterations <= 2
    assert np.allclose(res.model.transitions, init, atol=1e-12)


def test_bw_converges_to_std_on_complete_data(kernel_impl):
    rng = np.random.default_rng(8)
    truth = random_model(24, 3, rng)
    seqs = sample_sequences(truth, 50, rng)
    res = train_baum_welch(seqs, 24, 3)
    std = estimate_complete(seqs, 24, 3)
    assert res.converged
    assert np.abs(res.model.transitions - std.transitions).max() < 1e-6


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(1.5, 12.0))
def test_bw_log_likelihood_is_monotone(seed, beta):
    rng = np.random.default_rng(seed)
    truth = random_model(6, 3, rng, min_entry=0.02)
    seqs = sparsify_all(sample_sequences(truth, 15, rng, per_cycle=True),
                        SparsityConfig(beta, seed))
    if not any(s.num_known for s in seqs):
        return
    res = train_baum_welch(seqs, 6, 3, TrainingConfig(max_iterations=25))
    assert np.all(np.diff(res.log_likelihoods) >= -1e-8)


def test_bw_reports_nonconvergence():
    rng = np.random.default_rng(4)
    truth = random_model(6, 3, rng)
    seqs = sparsify_all(sample_sequences(truth, 20, rng, per_cycle=True), SparsityConfig(4, 0))
    res = train_baum_welch(seqs, 6, 3, TrainingConfig(max_iterations=2, epsilon_convergence=1e-12))
    assert not res.converged and res.iterations == 2
    model, trace = res
    assert len(trace) == 2 and model is res.model


def test_bw_warm_start_from_heuristic():
    rng = np.random.default_rng(12)
    truth = sticky_model(12, 3)
    seqs = sparsify_all(sample_sequences(truth, 40, rng, per_cycle=True), SparsityConfig(3, 1))
    heur = train_heuristic(seqs, 12, 3)
    cold = train_baum_welch(seqs, 12, 3)
    warm = train_baum_welch(seqs, 12, 3, init_model=heur)
    assert warm.log_likelihoods[0] > cold.log_likelihoods[0]
    assert np.all(np.diff(warm.log_likelihoods) >= -1e-8)


# heuristic --------------------------------------------------------------------


def test_gap_counts_worked_example(kernel_impl):
    g = heuristic_gap_counts(0, 1, 3)
    assert g.path_count == 4
    counts = g.counts()
    assert counts[0].tolist() == [[2, 2], [0, 0]]
    assert counts[1].tolist() == [[1, 1], [1, 1]]
    assert counts[2].tolist() == [[0, 2], [0, 2]]


def test_gap_counts_single_self_loop(kernel_impl):
    g = heuristic_gap_counts(2, 2, 1, num_states=4)
    assert g.path_count == 1
    expected = np.zeros((1, 4, 4))
    expected[0, 2, 2] = 1
    assert np.array_equal(g.counts(), expected)


def test_gap_counts_unit_steps_force_monotone_path(kernel_impl):
    g = heuristic_gap_counts(0, 3, 3, max_jump=1)
    assert g.path_count == 1
    for u in range(3):
        assert g.counts()[u, u, u + 1] == 1 and g.counts()[u].sum() == 1


def test_gap_counts_unrestricted_jumps(kernel_impl):
    ref, total = oracles.gap_edge_counts(0, 3, 3, 4)
    g = heuristic_gap_counts(0, 3, 3)
    assert g.path_count == total == 16
    assert np.array_equal(g.counts(), ref)


def test_gap_counts_rejects_bad_length():
    with pytest.raises(ValueError):
        heuristic_gap_counts(0, 1, 0)


@pytest.mark.parametrize("max_jump", [None, 1])
def test_gap_counts_match_enumeration_exhaustively(kernel_impl, max_jump):
    for n in range(1, 5):
        for a, b in itertools.product(range(n), repeat=2):
            for L in range(1, 7):
                ref, total = oracles.gap_edge_counts(a, b, L, n, max_jump)
                g = heuristic_gap_counts(a, b, L, num_states=n, max_jump=max_jump)
                if total == 0:
                    assert not g.feasible
                    continue
                assert g.path_count == total
                assert np.allclose(g.fractions, ref / total, rtol=0, atol=1e-13)
                # conservation: every offset carries all paths
                assert np.allclose(g.fractions.sum(axis=(1, 2)), 1.0)


def test_heuristic_worked_example_dataset():
    s = seq([0, -1, -1, 1], size=1)
    model = train_heuristic([s], 3, 2)
    A = model.transitions
    assert A[0, 0] == pytest.approx([0.5, 0.5])
    assert A[1, 0] == pytest.approx([0.5, 0.5]) and A[1, 1] == pytest.approx([0.5, 0.5])
    assert A[2, 0] == pytest.approx([FLOOR, 1 - FLOOR])
    assert A[2, 1] == pytest.approx([FLOOR, 1 - FLOOR])


def test_heuristic_equals_std_on_complete_data(kernel_impl):
    rng = np.random.default_rng(10)
    truth = random_model(24, 4, rng)
    seqs = sample_sequences(truth, 30, rng, per_cycle=True)
    heur = train_heuristic(seqs, 24, 4)
    std = estimate_complete(seqs, 24, 4)
    assert np.array_equal(heur.transitions, std.transitions)


def test_heuristic_accumulation_matches_gap_by_gap_sum(kernel_impl):
    values = [2, -1, -1, 0, -1, 0, 1, -1, -1, -1, 3, -1]
    p, n = 4, 4
    counts = np.zeros((p, n, n))
    known = [k for k, v in enumerate(values) if v >= 0]
    for k0, k1 in zip(known, known[1:]):
        g = heuristic_gap_counts(values[k0], values[k1], k1 - k0, num_states=n)
        for u in range(k1 - k0):
            counts[(k0 + u) % p] += g.fractions[u]
    model = train_heuristic([seq(values, size=3)], p, n)
    den = counts.sum(axis=2)
    init = floor(np.broadcast_to(np.eye(n) * 0.99 + (1 - np.eye(n)) * 0.01 / 3, (p, n, n)).copy())
    expected = init.copy()
    expected[den > 0] = counts[den > 0] / den[den > 0][:, None]
    assert np.allclose(model.transitions, floor(expected), atol=1e-12)


def test_heuristic_needs_two_observations():
    with pytest.raises(ValueError):
        train_heuristic([seq([-1, 2, -1], size=2)], 3, 3)


def test_heuristic_long_gap_beyond_cycle(kernel_impl):
    # a gap longer than p revisits positions; every visit must be counted
    model = train_heuristic([seq([0] + [-1] * 9 + [0], size=1)], 3, 2)
    assert model.transitions[:, 0, 0] == pytest.approx(1 - FLOOR)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["std", "bw", "heur"]), st.booleans())
def test_trainers_emit_valid_models(seed, method, homogeneous):
    rng = make_rng(seed)
    n = int(rng.integers(2, 5))
    p = int(rng.integers(1, 8))
    truth = random_model(p, n, rng, min_entry=0.0)
    seqs = sample_sequences(truth, 6, rng, per_cycle=True)
    if method != "std":
        seqs = sparsify_all(seqs, SparsityConfig(float(rng.uniform(1, 4)), seed))
        if sum(s.num_known for s in seqs) < 2 or all(s.num_known < 2 for s in seqs):
            return
    cfg = TrainingConfig(homogeneous=homogeneous, max_iterations=10)
    if method == "std":
        model = estimate_complete(seqs, p, n, cfg)
    elif method == "bw":
        model = train_baum_welch(seqs, p, n, cfg).model
    else:
        model = train_heuristic(seqs, p, n, cfg)
    assert validate_model(model) == []
    if homogeneous:
        assert np.all(model.transitions == model.transitions[0])


def test_std_error_shrinks_with_more_cycles():
    # row L1 error of the counting estimator should fall roughly as 1/sqrt(cycles)
    p, n = 24, 3
    errs = {}
    for cycles in (200, 2000, 20000):
        vals = []
        for seed in range(4):
            rng = np.random.default_rng(seed)
            truth = random_model(p, n, rng, min_entry=0.05)
            est = estimate_complete(sample_sequences(truth, cycles, rng), p, n)
            vals.append(np.abs(est.transitions - truth.transitions).sum(axis=2).mean())
        errs[cycles] = np.mean(vals)
    assert errs[2000] < errs[200] / 2 and errs[20000] < errs[2000] / 2
    assert errs[20000] < 0.02

"""Brute-force references, deliberately independent of the library's algorithms."""

import itertools

import numpy as np


def emission(b, obs, state):
    return 1.0 if obs == -1 else b[state, obs]


def enumerate_paths(trans, init, values, start_pos0, b=None):
    """Yield (path, joint probability) for every state path over ``values``."""
    p, n, _ = trans.shape
    b = np.eye(n) if b is None else b
    T = len(values)
    for path in itertools.product(range(n), repeat=T):
        prob = init[start_pos0][path[0]] * emission(b, values[0], path[0])
        for t in range(1, T):
            x = (start_pos0 + t - 1) % p
            prob *= trans[x, path[t - 1], path[t]] * emission(b, values[t], path[t])
        yield path, prob


def likelihood(trans, init, values, start_pos0=0, b=None):
    return sum(prob for _, prob in enumerate_paths(trans, init, values, start_pos0, b))


def expected_transition_counts(trans, init, values, start_pos0=0, b=None):
    """Posterior expected transition counts per cycle position, by enumeration."""
    p, n, _ = trans.shape
    num = np.zeros((p, n, n))
    total = 0.0
    for path, prob in enumerate_paths(trans, init, values, start_pos0, b):
        total += prob
        for t in range(len(values) - 1):
            num[(start_pos0 + t) % p, path[t], path[t + 1]] += prob
    return num / total


def em_step(trans, init, sequences, floor_fn):
    """One EM re-estimate: pooled expected counts normalized per row;
    unvisited rows keep their old values."""
    num = sum(expected_transition_counts(trans, init, v, s) for v, s in sequences)
    den = num.sum(axis=2)
    out = trans.copy()
    mask = den > 0
    out[mask] = num[mask] / den[mask][:, None]
    return floor_fn(out)


def gap_paths(a, b, L, max_jump=None):
    """All state paths of L transitions from a to b inside [min, max]."""
    lo, hi = min(a, b), max(a, b)
    for mid in itertools.product(range(lo, hi + 1), repeat=L - 1):
        path = (a, *mid, b)
        if max_jump is not None and any(abs(x - y) > max_jump for x, y in zip(path, path[1:])):
            continue
        yield path


def gap_edge_counts(a, b, L, n, max_jump=None):
    counts = np.zeros((L, n, n), dtype=np.int64)
    total = 0
    for path in gap_paths(a, b, L, max_jump):
        total += 1
        for u in range(L):
            counts[u, path[u], path[u + 1]] += 1
    return counts, total


def count_transitions(sequences, p, n):
    """Plain loop over adjacent known pairs."""
    num = np.zeros((p, n, n))
    for values, start_pos0 in sequences:
        for t in range(len(values) - 1):
            if values[t] >= 0 and values[t + 1] >= 0:
                num[(start_pos0 + t) % p, values[t], values[t + 1]] += 1
    return num

"""Pure-numpy kernels. Same signatures and results as the compiled ``_kernels``.

Array conventions shared by both implementations:

* ``trans``  float64 (p, N, N), row-stochastic per cycle position
* ``pos``    int64 (T,), 0-based cycle position of each step
* ``emis``   float64 (T, N), probability of step t's observation in each state
* ``alpha``/``beta`` are scaled so that ``alpha[t] * beta[t]`` sums to one
"""

import numpy as np


def forward(trans, pos, emis, init):
    T, n = emis.shape
    alpha = np.empty((T, n))
    scale = np.empty(T)
    a = init * emis[0]
    for t in range(T):
        if t:
            a = (alpha[t - 1] @ trans[pos[t - 1]]) * emis[t]
        c = a.sum()
        if not c > 0.0:
            raise ValueError(f"observation at step {t} has zero probability under the model")
        alpha[t] = a / c
        scale[t] = c
    return alpha, scale


def backward(trans, pos, emis, scale):
    T, n = emis.shape
    beta = np.empty((T, n))
    beta[T - 1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = trans[pos[t]] @ (emis[t + 1] * beta[t + 1]) / scale[t + 1]
    return beta


def accumulate_transitions(trans, pos, emis, alpha, beta, scale, num, den):
    """Add expected transition counts (xi) into ``num`` and state occupancy into ``den``."""
    T = emis.shape[0]
    for t in range(T - 1):
        x = pos[t]
        w = emis[t + 1] * beta[t + 1] / scale[t + 1]
        xi = alpha[t][:, None] * trans[x] * w[None, :]
        num[x] += xi
        den[x] += xi.sum(axis=1)


def _allowed(lo, hi, max_jump):
    idx = np.arange(lo, hi + 1)
    if max_jump < 0:
        return np.ones((idx.size, idx.size))
    return (np.abs(idx[:, None] - idx[None, :]) <= max_jump).astype(float)


def _band_fractions(a, b, L, max_jump):
    """Per-offset edge fractions within the band [min(a,b), max(a,b)].

    Returns ``(lo, fracs)`` with ``fracs`` of shape (L, w, w), or ``None``
    when no admissible path exists.
    """
    lo, hi = min(a, b), max(a, b)
    w = hi - lo + 1
    allowed = _allowed(lo, hi, max_jump)
    fwd = np.zeros((L + 1, w))
    bwd = np.zeros((L + 1, w))
    fwd[0, a - lo] = 1.0
    bwd[L, b - lo] = 1.0
    for u in range(L):
        f = fwd[u] @ allowed
        s = f.sum()
        if s == 0.0:
            return None
        fwd[u + 1] = f / s
    for u in range(L - 1, -1, -1):
        g = allowed @ bwd[u + 1]
        bwd[u] = g / g.sum()
    if fwd[L, b - lo] == 0.0:
        return None
    fracs = fwd[:L, :, None] * allowed[None, :, :] * bwd[1:, None, :]
    fracs /= fracs.sum(axis=(1, 2), keepdims=True)
    return lo, fracs


def gap_edge_fractions(a, b, L, n, max_jump):
    """Fraction of admissible paths using each edge at each offset, shape (L, n, n).

    All zeros when no admissible path exists.
    """
    out = np.zeros((L, n, n))
    band = _band_fractions(a, b, L, max_jump)
    if band is not None:
        lo, fracs = band
        w = fracs.shape[1]
        out[:, lo:lo + w, lo:lo + w] = fracs
    return out


def heuristic_accumulate(values, pos, n, max_jump, counts):
    """Single pass over one sequence adding gap edge fractions into ``counts``.

    Returns ``(gaps, infeasible)``: the number of adjacent known pairs seen and
    how many of them admitted no path.
    """
    known = np.flatnonzero(values >= 0)
    gaps = 0
    infeasible = 0
    for k0, k1 in zip(known[:-1], known[1:]):
        a, b = int(values[k0]), int(values[k1])
        L = int(k1 - k0)
        gaps += 1
        if a == b:
            # only the constant path stays inside a one-state band
            np.add.at(counts, (pos[k0:k1], a, a), 1.0)
            continue
        band = _band_fractions(a, b, L, max_jump)
        if band is None:
            infeasible += 1
            continue
        lo, fracs = band
        w = fracs.shape[1]
        for u in range(L):
            counts[pos[k0 + u], lo:lo + w, lo:lo + w] += fracs[u]
    return gaps, infeasible

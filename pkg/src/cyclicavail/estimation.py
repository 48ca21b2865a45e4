"""Trainers for cyclic Markov models.

Three estimators share one count-normalization step:

* :func:`estimate_complete` counts observed transitions per cycle position
  (gap-free data only).
* :func:`train_baum_welch` runs EM, treating missing minutes as
  observations that every state emits with probability one.
* :func:`train_heuristic` makes a single pass, spreading each gap between two
  known observations uniformly over the state paths that stay between them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .core import (
    DEFAULT_FLOOR,
    MISSING,
    CyclicMarkovModel,
    ObservationSequence,
    floor_rows,
    near_identity,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingConfig:
    epsilon_convergence: float = 1e-4
    max_iterations: int = 100
    init_diagonal_mass: float = 0.99
    smoothing_floor: float = DEFAULT_FLOOR
    homogeneous: bool = False
    # heuristic only: largest allowed state change per step; None = unrestricted
    max_jump: int | None = None

    def __post_init__(self):
        if not self.epsilon_convergence > 0:
            raise ValueError("epsilon_convergence must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.init_diagonal_mass < 1:
            raise ValueError("init_diagonal_mass must lie in (0, 1)")
        if self.smoothing_floor < 0:
            raise ValueError("smoothing_floor must be >= 0")
        if self.max_jump is not None and self.max_jump < 0:
            raise ValueError("max_jump must be >= 0")


def _check_inputs(sequences: Sequence[ObservationSequence], p: int, n: int) -> None:
    if not sequences:
        raise ValueError("no training sequences")
    if p < 1 or n < 1:
        raise ValueError("cycle length and state count must be >= 1")
    for seq in sequences:
        if seq.num_states != n:
            raise ValueError(
                f"sequence for cluster {seq.cluster_id!r} has {seq.num_states} states, "
                f"expected {n}"
            )
        if seq.start_cycle_position > p:
            raise ValueError(f"sequence start position {seq.start_cycle_position} > p={p}")


def initial_transitions(p: int, n: int, config: TrainingConfig) -> np.ndarray:
    base = floor_rows(near_identity(n, config.init_diagonal_mass), config.smoothing_floor)
    return np.broadcast_to(base, (p, n, n)).copy()


def estimate_initial_distribution(
    sequences: Sequence[ObservationSequence], p: int, n: int, config: TrainingConfig
) -> np.ndarray:
    """Empirical state frequencies of known values at each cycle position.

    Positions without observations (and every position in homogeneous mode)
    get the pooled distribution; with no observations at all it is uniform.
    """
    counts = np.zeros((p, n))
    for seq in sequences:
        known = seq.values != MISSING
        np.add.at(counts, (seq.positions0(p)[known], seq.values[known]), 1.0)
    pooled = counts.sum(axis=0)
    pooled = pooled / pooled.sum() if pooled.sum() > 0 else np.full(n, 1.0 / n)
    empty = counts.sum(axis=1) == 0
    if config.homogeneous:
        empty[:] = True
    counts[empty] = pooled
    return floor_rows(counts, config.smoothing_floor)


def normalize_counts(
    num: np.ndarray, den: np.ndarray, fallback: np.ndarray, config: TrainingConfig
) -> np.ndarray:
    """Turn per-position transition counts into floored row-stochastic matrices.

    Rows never visited (zero ``den``) take the corresponding ``fallback`` row.
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    if config.homogeneous:
        num = np.broadcast_to(num.sum(axis=0), num.shape)
        den = np.broadcast_to(den.sum(axis=0), den.shape)
    out = np.array(fallback, dtype=float, copy=True)
    visited = den > 0
    out[visited] = num[visited] / den[visited][:, None]
    return floor_rows(out, config.smoothing_floor)


def _assemble(transitions, sequences, p, n, config, method, **meta) -> CyclicMarkovModel:
    return CyclicMarkovModel(
        transitions=transitions,
        initial_distribution=estimate_initial_distribution(sequences, p, n, config),
        smoothing_floor=config.smoothing_floor,
        metadata={"method": method, "homogeneous": config.homogeneous, **meta},
    )


# complete data --------------------------------------------------------------


def complete_counts(sequences: Sequence[ObservationSequence], p: int, n: int):
    """Observed transition counts ``num[x, i, j]`` and visit counts ``den[x, i]``.

    Only transitions with both endpoints known are counted.
    """
    num = np.zeros((p, n, n))
    for seq in sequences:
        v = seq.values
        pos = seq.positions0(p)[:-1]
        ok = (v[:-1] != MISSING) & (v[1:] != MISSING)
        np.add.at(num, (pos[ok], v[:-1][ok], v[1:][ok]), 1.0)
    return num, num.sum(axis=2)


def estimate_complete(
    sequences: Sequence[ObservationSequence],
    p: int,
    n: int,
    config: TrainingConfig | None = None,
    allow_gaps: bool = False,
) -> CyclicMarkovModel:
    """Count-based estimate from gap-free sequences.

    With ``allow_gaps=True`` missing values are tolerated and any transition
    touching one is skipped; this is the naive baseline for sparse data.
    """
    config = config or TrainingConfig()
    _check_inputs(sequences, p, n)
    if not allow_gaps:
        for seq in sequences:
            if not seq.is_complete:
                raise ValueError(
                    f"sequence for cluster {seq.cluster_id!r} contains missing values"
                )
    num, den = complete_counts(sequences, p, n)
    trans = normalize_counts(num, den, initial_transitions(p, n, config), config)
    return _assemble(trans, sequences, p, n, config, "std")


# forward / backward -----------------------------------------------------------


def emission_table(model: CyclicMarkovModel, seq: ObservationSequence) -> np.ndarray:
    """``(T, N)`` probabilities of each step's observation; missing steps are all ones."""
    b = model.emission_matrix()
    emis = np.ones((len(seq), model.num_states))
    known = seq.values != MISSING
    emis[known] = b[:, seq.values[known]].T
    return emis


@dataclass(frozen=True, eq=False)
class ForwardBackwardTables:
    """Scaled forward/backward variables for one sequence.

    ``alpha[t]`` is the forward variable divided by the running product of
    ``scale[:t+1]``, and ``beta[t]`` the backward variable divided by the
    product of ``scale[t+1:]``; their elementwise product is the posterior
    state distribution. Log-space values are available as properties.
    """

    alpha: np.ndarray
    beta: np.ndarray
    scale: np.ndarray
    positions: np.ndarray
    emissions: np.ndarray

    @property
    def log_likelihood(self) -> float:
        return float(np.log(self.scale).sum())

    @property
    def log_alpha(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.alpha) + np.cumsum(np.log(self.scale))[:, None]

    @property
    def log_beta(self) -> np.ndarray:
        logc = np.log(self.scale)
        tail = logc.sum() - np.cumsum(logc)
        with np.errstate(divide="ignore"):
            return np.log(self.beta) + tail[:, None]

    @property
    def gamma(self) -> np.ndarray:
        g = self.alpha * self.beta
        return g / g.sum(axis=1, keepdims=True)

    def xi(self, t: int, transitions: np.ndarray) -> np.ndarray:
        """Posterior ``P(q_t = i, q_{t+1} = j | O)`` for 0-based step ``t``."""
        w = self.emissions[t + 1] * self.beta[t + 1] / self.scale[t + 1]
        return self.alpha[t][:, None] * transitions[self.positions[t]] * w[None, :]


def forward_backward(
    model: CyclicMarkovModel, seq: ObservationSequence, emissions: np.ndarray | None = None
) -> ForwardBackwardTables:
    """E-step tables for one sequence. ``emissions`` may be passed in when
    the observation model is unchanged between calls."""
    model.check_sequence(seq)
    if len(seq) == 0:
        raise ValueError("empty sequence")
    pos = np.ascontiguousarray(seq.positions0(model.cycle_length), dtype=np.int64)
    emis = emission_table(model, seq) if emissions is None else emissions
    trans = np.ascontiguousarray(model.transitions)
    init = np.ascontiguousarray(model.initial_distribution[pos[0]])
    alpha, scale = kernels.forward(trans, pos, emis, init)
    beta = kernels.backward(trans, pos, emis, scale)
    return ForwardBackwardTables(alpha, beta, scale, pos, emis)


def expected_counts(model: CyclicMarkovModel, tables: Sequence[ForwardBackwardTables]):
    """Pooled expected transition counts ``(num, den)`` over all sequences."""
    p, n = model.cycle_length, model.num_states
    num = np.zeros((p, n, n))
    den = np.zeros((p, n))
    trans = np.ascontiguousarray(model.transitions)
    for tab in tables:
        kernels.accumulate_transitions(
            trans, tab.positions, tab.emissions, tab.alpha, tab.beta, tab.scale, num, den
        )
    return num, den


def bw_update(
    model: CyclicMarkovModel,
    tables: Sequence[ForwardBackwardTables],
    config: TrainingConfig | None = None,
) -> np.ndarray:
    """One re-estimation of all transition matrices from E-step tables.

    Rows that no sequence visits keep their current values.
    """
    config = config or TrainingConfig(smoothing_floor=model.smoothing_floor)
    num, den = expected_counts(model, tables)
    return normalize_counts(num, den, model.transitions, config)


@dataclass
class BaumWelchResult:
    model: CyclicMarkovModel
    log_likelihoods: list[float] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    max_change: float = math.inf

    def __iter__(self):
        # allows ``model, trace = train_baum_welch(...)``
        yield self.model
        yield self.log_likelihoods


def train_baum_welch(
    sequences: Sequence[ObservationSequence],
    p: int,
    n: int,
    config: TrainingConfig | None = None,
    init_model: CyclicMarkovModel | None = None,
) -> BaumWelchResult:
    """EM over the transition matrices with the initial and observation models held fixed.

    Stops when no transition entry moves by more than
    ``config.epsilon_convergence`` or after ``config.max_iterations`` updates;
    ``converged`` tells the two apart. The trace holds the log-likelihood of
    the data under the model entering each iteration.
    """
    config = config or TrainingConfig()
    _check_inputs(sequences, p, n)
    if not any(seq.num_known for seq in sequences):
        log.warning("training data holds no known observations; returning initial model")
    if init_model is None:
        model = _assemble(initial_transitions(p, n, config), sequences, p, n, config, "bw")
    else:
        if init_model.cycle_length != p or init_model.num_states != n:
            raise ValueError("warm-start model dimensions do not match")
        model = CyclicMarkovModel(
            transitions=floor_rows(init_model.transitions, config.smoothing_floor),
            initial_distribution=init_model.initial_distribution,
            observation_model=init_model.observation_model,
            smoothing_floor=config.smoothing_floor,
            metadata={"method": "bw", "homogeneous": config.homogeneous,
                      "warm_start": init_model.metadata.get("method", "custom")},
        )
    result = BaumWelchResult(model=model)
    # the observation model is held fixed, so emissions are computed once
    emissions = [emission_table(model, seq) for seq in sequences]
    for it in range(1, config.max_iterations + 1):
        tables = [forward_backward(model, seq, e) for seq, e in zip(sequences, emissions)]
        result.log_likelihoods.append(sum(tab.log_likelihood for tab in tables))
        new = bw_update(model, tables, config)
        change = float(np.abs(new - model.transitions).max())
        model = model.with_transitions(new)
        result.iterations = it
        result.max_change = change
        log.debug("iteration %d: log-likelihood %.6f, max change %.3g",
                  it, result.log_likelihoods[-1], change)
        if change < config.epsilon_convergence:
            result.converged = True
            break
    result.model = model.with_transitions(
        model.transitions, iterations=result.iterations, converged=result.converged
    )
    return result


# heuristic -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GapPathCounts:
    """Edge usage by the admissible paths bridging one gap.

    ``fractions[u, i, j]`` is the share of admissible paths taking edge
    ``i -> j`` between offsets ``u`` and ``u + 1``; multiply by
    :attr:`path_count` for absolute counts.
    """

    state_from: int
    state_to: int
    gap_length: int
    fractions: np.ndarray
    max_jump: int | None = None

    @property
    def feasible(self) -> bool:
        return bool(self.fractions.any())

    @property
    def path_count(self) -> int:
        """Exact number of admissible paths (integer dynamic program)."""
        lo, hi = sorted((self.state_from, self.state_to))
        ways = {s: int(s == self.state_from) for s in range(lo, hi + 1)}
        for _ in range(self.gap_length):
            ways = {
                j: sum(c for i, c in ways.items()
                       if self.max_jump is None or abs(i - j) <= self.max_jump)
                for j in ways
            }
        return ways[self.state_to]

    def counts(self) -> np.ndarray:
        """Absolute per-edge path counts as floats (exact while below 2**53)."""
        return np.rint(self.fractions * self.path_count)


def heuristic_gap_counts(
    state_from: int,
    state_to: int,
    gap_length: int,
    num_states: int | None = None,
    max_jump: int | None = None,
) -> GapPathCounts:
    if gap_length < 1:
        raise ValueError(f"gap length must be >= 1, got {gap_length}")
    n = num_states if num_states is not None else max(state_from, state_to) + 1
    if not (0 <= state_from < n and 0 <= state_to < n):
        raise ValueError("states outside the model's range")
    fracs = kernels.gap_edge_fractions(
        int(state_from), int(state_to), int(gap_length), int(n),
        -1 if max_jump is None else int(max_jump),
    )
    return GapPathCounts(int(state_from), int(state_to), int(gap_length), fracs, max_jump)


def heuristic_counts(
    sequences: Sequence[ObservationSequence], p: int, n: int, max_jump: int | None = None
):
    counts = np.zeros((p, n, n))
    gaps = infeasible = 0
    jump = -1 if max_jump is None else int(max_jump)
    for seq in sequences:
        pos = np.ascontiguousarray(seq.positions0(p), dtype=np.int64)
        values = np.ascontiguousarray(seq.values, dtype=np.int64)
        g, bad = kernels.heuristic_accumulate(values, pos, n, jump, counts)
        gaps += g
        infeasible += bad
    return counts, gaps, infeasible


def train_heuristic(
    sequences: Sequence[ObservationSequence],
    p: int,
    n: int,
    config: TrainingConfig | None = None,
) -> CyclicMarkovModel:
    """One-pass estimate from gap path counts, summed per cycle position then normalized."""
    config = config or TrainingConfig()
    _check_inputs(sequences, p, n)
    if sum(seq.num_known for seq in sequences) < 2:
        raise ValueError("heuristic training needs at least two known observations")
    counts, gaps, infeasible = heuristic_counts(sequences, p, n, config.max_jump)
    if gaps == 0:
        raise ValueError("no sequence contains two known observations")
    if infeasible:
        log.warning("%d of %d gaps admit no path under max_jump=%s",
                    infeasible, gaps, config.max_jump)
    trans = normalize_counts(counts, counts.sum(axis=2), initial_transitions(p, n, config), config)
    return _assemble(trans, sequences, p, n, config, "heur", gaps=gaps)


TRAINERS = {
    "std": lambda seqs, p, n, cfg: estimate_complete(seqs, p, n, cfg, allow_gaps=True),
    "bw": lambda seqs, p, n, cfg: train_baum_welch(seqs, p, n, cfg).model,
    "heur": train_heuristic,
}

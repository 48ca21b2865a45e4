"""Forward propagation through the cycle, expected availability and baselines."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import (
    MISSING,
    CyclicMarkovModel,
    ObservationSequence,
    StateDistribution,
    position_of_timestamp,
)


def propagate(
    model: CyclicMarkovModel,
    start: StateDistribution | np.ndarray,
    start_position: int,
    d: int,
) -> StateDistribution:
    """Distribution ``d`` steps after ``start_position`` (1-based cycle position).

    Step ``k`` applies the matrix of position ``start_position + k``, wrapping
    around the cycle as often as needed.
    """
    probs = start.probs if isinstance(start, StateDistribution) else np.asarray(start, float)
    if probs.shape != (model.num_states,):
        raise ValueError(
            f"distribution has {probs.size} states, model has {model.num_states}"
        )
    if d < 0:
        raise ValueError("prediction distance must be >= 0")
    p = model.cycle_length
    if not 1 <= start_position <= p:
        raise ValueError(f"cycle position {start_position} outside [1, {p}]")
    if d == 0:
        return start if isinstance(start, StateDistribution) else StateDistribution(probs)
    s = probs.copy()
    x = start_position - 1
    trans = model.transitions
    for _ in range(d):
        s = s @ trans[x]
        x = x + 1 if x + 1 < p else 0
    # renormalize away accumulated rounding so the result is a valid distribution
    return StateDistribution(s / s.sum())


def cycle_composite(model: CyclicMarkovModel, start_position: int = 1) -> np.ndarray:
    """Product of all ``p`` matrices in cycle order, beginning at ``start_position``."""
    p = model.cycle_length
    out = np.eye(model.num_states)
    for k in range(p):
        out = out @ model.transitions[(start_position - 1 + k) % p]
    return out


def expected_available(dist: StateDistribution | np.ndarray) -> float:
    probs = dist.probs if isinstance(dist, StateDistribution) else np.asarray(dist, float)
    return float(np.arange(probs.size) @ probs)


def most_likely_state(dist: StateDistribution | np.ndarray) -> int:
    probs = dist.probs if isinstance(dist, StateDistribution) else np.asarray(dist, float)
    # np.argmax returns the first maximum, i.e. the lowest state on ties
    return int(np.argmax(probs))


@dataclass(frozen=True)
class PredictionRequest:
    last_observation: int
    last_observation_time: dt.datetime
    horizon_d: int

    def __post_init__(self):
        if self.horizon_d < 1:
            raise ValueError("horizon must be at least one minute")
        if self.last_observation < 0:
            raise ValueError("last observation must be a non-negative count")

    def last_position(self, p: int) -> int:
        return position_of_timestamp(self.last_observation_time, p)

    @property
    def target_time(self) -> dt.datetime:
        return self.last_observation_time + dt.timedelta(minutes=self.horizon_d)


def predict_distribution(
    model: CyclicMarkovModel, last_observation: int, last_position: int, d: int
) -> StateDistribution:
    start = StateDistribution.one_hot(last_observation, model.num_states)
    return propagate(model, start, last_position, d)


def predict(model: CyclicMarkovModel, request: PredictionRequest) -> float:
    """Expected availability ``d`` minutes after the last observation.

    Depends only on the observed value, its cycle position and ``d``.
    """
    if request.last_observation > model.cluster_size:
        raise ValueError(
            f"observation {request.last_observation} exceeds cluster size {model.cluster_size}"
        )
    dist = predict_distribution(
        model,
        request.last_observation,
        request.last_position(model.cycle_length),
        request.horizon_d,
    )
    return expected_available(dist)


def expectation_table(model: CyclicMarkovModel, horizons: Iterable[int]) -> np.ndarray:
    """``table[y, h, i]``: expected value at 0-based position ``y`` given state ``i``
    observed ``horizons[h]`` steps earlier.

    Runs the chain backwards from every target position at once, so all
    horizons cost ``max(horizons)`` batched matrix-vector products.
    """
    horizons = [int(h) for h in horizons]
    if not horizons or min(horizons) < 0:
        raise ValueError("horizons must be non-negative")
    p, n = model.cycle_length, model.num_states
    want = {h: k for k, h in enumerate(horizons)}
    table = np.empty((p, len(horizons), n))
    ys = np.arange(p)
    vals = np.broadcast_to(np.arange(n, dtype=float), (p, n)).copy()
    for h, k in want.items():
        if h == 0:
            table[:, k] = vals
    for step in range(1, max(horizons) + 1):
        mats = model.transitions[(ys - step) % p]
        vals = np.einsum("yij,yj->yi", mats, vals)
        if step in want:
            table[:, want[step]] = vals
    return table


# baselines -----------------------------------------------------------------


def baseline_last(request: PredictionRequest) -> float:
    return float(request.last_observation)


@dataclass(frozen=True, eq=False)
class HistoricAverageModel:
    """Mean availability per cycle position (1-based lookups)."""

    means: np.ndarray
    cluster_size: int

    def __post_init__(self):
        means = np.array(self.means, dtype=float, copy=True)
        if means.ndim != 1 or means.size < 1:
            raise ValueError("means must be a non-empty vector")
        if (means < 0).any() or (means > self.cluster_size).any():
            raise ValueError("means must lie within [0, cluster_size]")
        means.setflags(write=False)
        object.__setattr__(self, "means", means)

    @property
    def cycle_length(self) -> int:
        return self.means.size

    @classmethod
    def fit(
        cls, sequences: Sequence[ObservationSequence], p: int, homogeneous: bool = False
    ) -> "HistoricAverageModel":
        """Average known values per position; empty positions are linearly
        interpolated around the cycle. ``homogeneous`` uses one pooled mean."""
        if not sequences:
            raise ValueError("no training sequences")
        size = sequences[0].cluster_size
        total = np.zeros(p)
        count = np.zeros(p)
        for seq in sequences:
            if seq.cluster_size != size:
                raise ValueError("sequences disagree on cluster size")
            known = seq.values != MISSING
            pos = seq.positions0(p)[known]
            np.add.at(total, pos, seq.values[known])
            np.add.at(count, pos, 1.0)
        if count.sum() == 0:
            raise ValueError("no known observations to average")
        if homogeneous:
            return cls(np.full(p, total.sum() / count.sum()), size)
        seen = np.flatnonzero(count > 0)
        means = np.empty(p)
        means[seen] = total[seen] / count[seen]
        if seen.size < p:
            # periodic interpolation: pad the observed positions by one cycle each side
            xs = np.concatenate([seen - p, seen, seen + p])
            ys = np.tile(means[seen], 3)
            missing = np.flatnonzero(count == 0)
            means[missing] = np.interp(missing, xs, ys)
        return cls(means, size)

    def at(self, position: int) -> float:
        if not 1 <= position <= self.cycle_length:
            raise ValueError(f"cycle position {position} outside [1, {self.cycle_length}]")
        return float(self.means[position - 1])


def baseline_avg(avg_model: HistoricAverageModel, position: int) -> float:
    return avg_model.at(position)

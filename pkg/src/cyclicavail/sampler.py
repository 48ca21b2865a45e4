"""Sparse training sets from complete sequences via exponential probe arrivals."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import MISSING, ObservationSequence, minute_index


@dataclass(frozen=True)
class SparsityConfig:
    """``beta`` is the mean time between observations in steps (minutes)."""

    beta: float
    seed: int = 0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be > 0")

    @property
    def rate(self) -> float:
        return 1.0 / self.beta


def make_rng(*key: int) -> np.random.Generator:
    """PCG64 stream keyed by non-negative integers; identical on every platform."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))


def stable_id(text: str) -> int:
    return zlib.crc32(text.encode("utf-8"))


def draw_gaps(rng: np.random.Generator, beta: float, size: int) -> np.ndarray:
    """Exponential inter-arrival times by inverse transform, rounded to whole
    steps with a minimum of one."""
    u = rng.random(size)
    gaps = np.floor(-beta * np.log1p(-u) + 0.5).astype(np.int64)
    return np.maximum(gaps, 1)


def observation_indices(length: int, beta: float, rng: np.random.Generator) -> np.ndarray:
    """Indices visited by a probe starting just before index 0."""
    chunk = max(16, int(math.ceil(2 * length / beta)) + 16)
    out = []
    cursor = -1
    while cursor < length:
        steps = cursor + np.cumsum(draw_gaps(rng, beta, chunk))
        out.append(steps[steps < length])
        cursor = int(steps[-1])
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def sparsify(
    seq: ObservationSequence, config: SparsityConfig, rng: np.random.Generator | None = None
) -> ObservationSequence:
    """Keep only the minutes a simulated probe visits; all others become -1."""
    if not seq.is_complete:
        raise ValueError("input sequence already contains missing values")
    rng = rng if rng is not None else make_rng(config.seed)
    keep = observation_indices(len(seq), config.beta, rng)
    values = np.full(len(seq), MISSING, dtype=np.int64)
    values[keep] = seq.values[keep]
    return seq.with_values(values)


def sequence_key(seq: ObservationSequence, index: int) -> int:
    if seq.start_time is not None:
        return minute_index(seq.start_time) & 0xFFFFFFFF
    return index


def sparsify_all(
    sequences: Sequence[ObservationSequence], config: SparsityConfig
) -> list[ObservationSequence]:
    """Sparsify each sequence with its own stream derived from
    ``(seed, cluster id, start minute)``, so results do not depend on input order."""
    out = []
    for k, seq in enumerate(sequences):
        rng = make_rng(config.seed, stable_id(seq.cluster_id), sequence_key(seq, k))
        out.append(sparsify(seq, config, rng))
    return out

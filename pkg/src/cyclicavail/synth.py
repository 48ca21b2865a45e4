"""Synthetic ground-truth models, trajectories and stay records."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from math import comb

import numpy as np

from .core import DEFAULT_FLOOR, CyclicMarkovModel, ObservationSequence, floor_rows
from .ingestion import ClusterDefinition, StayRecord

BASE_DATE = dt.datetime(2014, 3, 3)  # a Monday


def random_model(p: int, n: int, rng: np.random.Generator, min_entry: float = 0.05) -> CyclicMarkovModel:
    """Dense random chain whose every transition entry is at least ``min_entry``."""
    if min_entry * n > 1:
        raise ValueError("min_entry too large for the number of states")
    trans = min_entry + (1 - n * min_entry) * rng.dirichlet(np.ones(n), size=(p, n))
    init = rng.dirichlet(np.ones(n), size=p)
    return CyclicMarkovModel(trans, init, metadata={"generator": "random", "min_entry": min_entry})


def daily_profile(p: int, amplitude: float = 0.4, phase: float = 0.0) -> np.ndarray:
    """Free fraction per position: high at night, dipping around midday."""
    x = (np.arange(p) + 0.5) / p
    return 0.5 + amplitude * np.cos(2 * np.pi * (x - phase))


def sticky_model(
    p: int,
    n: int,
    profile: np.ndarray | None = None,
    turnover: float = 0.08,
    homogeneous: bool = False,
) -> CyclicMarkovModel:
    """Time-varying chain that mostly holds its state and otherwise resamples
    from a binomial centred on the position's free fraction.

    ``turnover`` is the per-step resampling probability; with
    ``homogeneous=True`` the profile is flattened to its mean.
    """
    profile = daily_profile(p) if profile is None else np.asarray(profile, float)
    if homogeneous:
        profile = np.full(p, profile.mean())
    m = n - 1
    k = np.arange(n)
    trans = np.empty((p, n, n))
    init = np.empty((p, n))
    binom = np.array([comb(m, j) for j in k], dtype=float)
    for x in range(p):
        q = profile[(x + 1) % p]
        target = binom * q ** k * (1 - q) ** (m - k)
        trans[x] = (1 - turnover) * np.eye(n) + turnover * target[None, :]
        q0 = profile[x]
        init[x] = binom * q0 ** k * (1 - q0) ** (m - k)
    trans = floor_rows(trans, DEFAULT_FLOOR)
    init = floor_rows(init, DEFAULT_FLOOR)
    return CyclicMarkovModel(trans, init, metadata={"generator": "sticky", "turnover": turnover})


def sample_path(
    model: CyclicMarkovModel, length: int, rng: np.random.Generator, start_position: int = 1,
    start_state: int | None = None,
) -> np.ndarray:
    p, n = model.cycle_length, model.num_states
    cum = np.cumsum(model.transitions, axis=2)
    out = np.empty(length, dtype=np.int64)
    x = start_position - 1
    if start_state is None:
        state = int(rng.choice(n, p=model.initial_distribution[x]))
    else:
        state = start_state
    u = rng.random(length)
    for t in range(length):
        out[t] = state
        state = min(int(np.searchsorted(cum[x, state], u[t], side="right")), n - 1)
        x = x + 1 if x + 1 < p else 0
    return out


def sample_sequences(
    model: CyclicMarkovModel,
    cycles: int,
    rng: np.random.Generator,
    per_cycle: bool = False,
    cluster_id: str = "synthetic",
    step_minutes: int = 1,
) -> list[ObservationSequence]:
    """Trajectories covering ``cycles`` full periods starting at position 1.

    ``per_cycle=True`` returns one sequence per period, each starting from the
    initial distribution; otherwise one continuous sequence. Timestamps start
    at :data:`BASE_DATE` midnight, one step per minute.
    """
    p = model.cycle_length
    lengths = [p] * cycles if per_cycle else [p * cycles]
    out = []
    offset = 0
    for length in lengths:
        values = sample_path(model, length, rng)
        out.append(ObservationSequence(
            values=values,
            start_cycle_position=1,
            cluster_size=model.cluster_size,
            cluster_id=cluster_id,
            start_time=BASE_DATE + dt.timedelta(minutes=offset * step_minutes),
            step_minutes=step_minutes,
        ))
        offset += length
    return out


@dataclass
class BayData:
    """Per-bay binary availability plus the cluster total for the same days."""

    bays: list[list[ObservationSequence]]
    cluster: list[ObservationSequence]


def correlated_bays(
    p: int,
    num_bays: int,
    days: int,
    rng: np.random.Generator,
    shared: float = 0.8,
    turnover: float = 0.05,
    day_spread: float = 0.15,
) -> BayData:
    """Bays driven by a common daily occupancy curve.

    Each bay flips state with probability ``turnover`` per step, landing on
    "free" with the shared free fraction of that minute. ``shared`` mixes the
    common curve with an independent per-bay curve (1 = identical demand,
    0 = independent). Each day also draws a demand offset common to all bays.
    """
    base = daily_profile(p)
    own_phase = rng.uniform(-0.5, 0.5, size=num_bays)
    bays: list[list[ObservationSequence]] = [[] for _ in range(num_bays)]
    cluster = []
    for day in range(days):
        shift = rng.normal(0.0, day_spread)
        paths = np.empty((num_bays, p), dtype=np.int64)
        for b in range(num_bays):
            mine = daily_profile(p, phase=own_phase[b])
            q = np.clip(shared * base + (1 - shared) * mine + shift, 0.02, 0.98)
            state = int(rng.random() < q[0])
            flips = rng.random(p) < turnover
            draws = rng.random(p)
            for x in range(p):
                paths[b, x] = state
                if flips[x]:
                    state = int(draws[x] < q[(x + 1) % p])
        start = BASE_DATE + dt.timedelta(days=day)
        for b in range(num_bays):
            bays[b].append(ObservationSequence(paths[b], 1, 1, f"bay{b}", start))
        cluster.append(ObservationSequence(paths.sum(axis=0), 1, num_bays, "cluster", start))
    return BayData(bays, cluster)


def synthetic_stays(
    rng: np.random.Generator,
    cluster_sizes: dict[str, int],
    weeks: int = 8,
    start: dt.datetime = BASE_DATE,
    mean_stays_per_bay: float = 8.0,
) -> tuple[list[StayRecord], list[ClusterDefinition]]:
    """Stay records with a weekday daytime peak and short weekend activity.

    Arrivals follow a time-of-day intensity; durations are log-normal around
    an hour. A few over-long stays are included so the exclusion rule has
    something to drop.
    """
    clusters = []
    stays = []
    hours = np.arange(24)
    for cid, size in cluster_sizes.items():
        bays = [f"{cid}-{k:02d}" for k in range(size)]
        clusters.append(ClusterDefinition(cid, frozenset(bays)))
        for bay in bays:
            for day in range(weeks * 7):
                date = start + dt.timedelta(days=day)
                weekend = date.weekday() >= 5
                intensity = np.exp(-0.5 * ((hours - 12.5) / 3.5) ** 2)
                intensity /= intensity.sum()
                count = rng.poisson(mean_stays_per_bay * (0.3 if weekend else 1.0))
                free_at = date
                for hour in np.sort(rng.choice(24, size=count, p=intensity)):
                    arrival = date + dt.timedelta(hours=int(hour), minutes=int(rng.integers(60)))
                    if arrival < free_at:
                        continue
                    minutes = max(2, int(rng.lognormal(np.log(55), 0.6)))
                    departure = arrival + dt.timedelta(minutes=minutes)
                    stays.append(StayRecord(bay, arrival, departure))
                    free_at = departure
        # corrupt records the ingest step must drop
        stays.append(StayRecord(bays[0], start + dt.timedelta(hours=20),
                                start + dt.timedelta(hours=47)))
    stays.sort(key=lambda s: (s.arrival, s.bay_id))
    return stays, clusters

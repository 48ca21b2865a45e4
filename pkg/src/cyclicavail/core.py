"""Model parameters, observation sequences and cycle-time arithmetic.

All arrays use 0-based state indices (state ``i`` means ``i`` available
resources) while cycle positions are 1-based in the public API, matching
minute-of-day numbering (position 1 is 00:00).
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

MISSING = -1
DEFAULT_FLOOR = 1e-6
ROW_SUM_TOL = 1e-9
MINUTES_PER_DAY = 1440
MODEL_FORMAT = "cyclic-markov-model"
MODEL_FORMAT_VERSION = 1

_EPOCH = dt.datetime(1970, 1, 1)


def cycle_position(t: int, p: int) -> int:
    """Return the 1-based cycle position of 1-based time index ``t``."""
    if p < 1:
        raise ValueError(f"cycle length must be >= 1, got {p}")
    if t < 1:
        raise ValueError(f"time index must be >= 1, got {t}")
    return ((t - 1) % p) + 1


def minute_of_day(hour: int, minute: int) -> int:
    if not 0 <= hour <= 23:
        raise ValueError(f"hour out of range: {hour}")
    if not 0 <= minute <= 59:
        raise ValueError(f"minute out of range: {minute}")
    return 60 * hour + minute + 1


def minute_index(ts: dt.datetime) -> int:
    """Whole minutes elapsed since 1970-01-01T00:00 (naive, local dataset time)."""
    delta = ts.replace(second=0, microsecond=0, tzinfo=None) - _EPOCH
    return delta.days * MINUTES_PER_DAY + delta.seconds // 60


def position_of_timestamp(ts: dt.datetime, p: int) -> int:
    """Cycle position of the minute containing ``ts``.

    For ``p == 1440`` this is exactly the minute of day; for other cycle
    lengths the absolute minute count is wrapped, so any ``p`` dividing 1440
    stays aligned to midnight.
    """
    return (minute_index(ts) % p) + 1


def parse_timestamp(text: str) -> dt.datetime:
    ts = dt.datetime.fromisoformat(text.strip())
    return ts.replace(tzinfo=None)


def format_timestamp(ts: dt.datetime) -> str:
    return ts.strftime("%Y-%m-%dT%H:%M")


def floor_rows(rows: np.ndarray, floor: float) -> np.ndarray:
    """Normalize each row to sum to one with every entry at least ``floor``.

    Entries that would fall below the floor are pinned to it and the
    remaining mass is shared proportionally by the others. This is the
    maximizer of ``sum_j n_j log a_j`` under the floor constraint, so using
    it inside EM keeps the likelihood non-decreasing.
    """
    rows = np.array(rows, dtype=float, copy=True)
    n = rows.shape[-1]
    if floor * n > 1.0:
        raise ValueError(f"floor {floor} too large for {n} states")
    flat = rows.reshape(-1, n)
    total = flat.sum(axis=1)
    empty = total <= 0
    flat[empty] = 1.0 / n
    flat[~empty] /= total[~empty, None]
    if floor <= 0:
        return flat.reshape(rows.shape)
    low = flat.min(axis=1) < floor
    if low.any():
        # the solution is max(floor, lam * row); pinned entries form a prefix
        # of the sorted row, and lam follows from the remaining mass
        sub = flat[low]
        srt = np.sort(sub, axis=1)
        tail = np.cumsum(srt[:, ::-1], axis=1)[:, ::-1]
        k = np.arange(n)
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = (1.0 - k * floor) / tail
        first = np.argmax(srt * lam >= floor, axis=1)
        lam_star = lam[np.arange(sub.shape[0]), first]
        flat[low] = np.maximum(floor, sub * lam_star[:, None])
    return flat.reshape(rows.shape)


def near_identity(num_states: int, diagonal_mass: float) -> np.ndarray:
    """Single transition matrix with ``diagonal_mass`` on the diagonal."""
    if num_states == 1:
        return np.ones((1, 1))
    off = (1.0 - diagonal_mass) / (num_states - 1)
    mat = np.full((num_states, num_states), off)
    np.fill_diagonal(mat, diagonal_mass)
    return mat


@dataclass(frozen=True)
class StateDistribution:
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("state distribution must be a non-empty vector")
        if (probs < 0).any() or abs(probs.sum() - 1.0) > ROW_SUM_TOL:
            raise ValueError("state distribution must be non-negative and sum to 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def one_hot(cls, state: int, num_states: int) -> "StateDistribution":
        if not 0 <= state < num_states:
            raise ValueError(f"state {state} outside [0, {num_states - 1}]")
        probs = np.zeros(num_states)
        probs[state] = 1.0
        return cls(probs)

    @property
    def num_states(self) -> int:
        return self.probs.size


@dataclass(frozen=True, eq=False)
class ObservationSequence:
    """Minute-stepped availability counts; ``-1`` marks a missing minute.

    ``start_cycle_position`` is the 1-based cycle position of ``values[0]``.
    ``start_time`` is optional and only needed to write the sequence back to
    CSV.
    """

    values: np.ndarray
    start_cycle_position: int
    cluster_size: int
    cluster_id: str = ""
    start_time: dt.datetime | None = None
    step_minutes: int = 1

    def __post_init__(self):
        values = np.array(self.values, dtype=np.int64, copy=True)
        if values.ndim != 1:
            raise ValueError("observation values must be one-dimensional")
        if self.cluster_size < 0:
            raise ValueError("cluster size must be non-negative")
        bad = (values != MISSING) & ((values < 0) | (values > self.cluster_size))
        if bad.any():
            idx = int(np.flatnonzero(bad)[0])
            raise ValueError(
                f"value {values[idx]} at index {idx} outside [0, {self.cluster_size}]"
            )
        if self.start_cycle_position < 1:
            raise ValueError("start_cycle_position must be >= 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def num_states(self) -> int:
        return self.cluster_size + 1

    @property
    def is_complete(self) -> bool:
        return bool((self.values != MISSING).all())

    @property
    def num_known(self) -> int:
        return int((self.values != MISSING).sum())

    def positions0(self, p: int) -> np.ndarray:
        """0-based cycle position of every step."""
        if self.start_cycle_position > p:
            raise ValueError(
                f"start position {self.start_cycle_position} exceeds cycle length {p}"
            )
        return (self.start_cycle_position - 1 + np.arange(len(self))) % p

    def with_values(self, values: np.ndarray) -> "ObservationSequence":
        return ObservationSequence(
            values=values,
            start_cycle_position=self.start_cycle_position,
            cluster_size=self.cluster_size,
            cluster_id=self.cluster_id,
            start_time=self.start_time,
            step_minutes=self.step_minutes,
        )


@dataclass(frozen=True, eq=False)
class CyclicMarkovModel:
    """Cyclic time-inhomogeneous chain over availability counts ``0..M``.

    Attributes
    ----------
    transitions : ndarray, shape (p, N, N)
        ``transitions[x - 1]`` moves the chain from cycle position ``x`` to
        ``x + 1``.
    initial_distribution : ndarray, shape (p, N)
        State distribution for a sequence starting at each cycle position.
    observation_model : ndarray, shape (N, N) or None
        ``observation_model[j, k]`` is the probability of observing ``k`` in
        state ``j``. ``None`` means the noiseless identity; a missing
        observation always has probability one.
    """

    transitions: np.ndarray
    initial_distribution: np.ndarray
    observation_model: np.ndarray | None = None
    smoothing_floor: float = DEFAULT_FLOOR
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        trans = np.array(self.transitions, dtype=float, copy=True)
        if trans.ndim != 3 or trans.shape[1] != trans.shape[2] or trans.shape[0] < 1:
            raise ValueError(f"transitions must have shape (p, N, N), got {trans.shape}")
        p, n, _ = trans.shape
        init = np.array(self.initial_distribution, dtype=float, copy=True)
        if init.shape != (p, n):
            raise ValueError(f"initial distribution must have shape {(p, n)}, got {init.shape}")
        obs = self.observation_model
        if obs is not None:
            obs = np.array(obs, dtype=float, copy=True)
            if obs.shape != (n, n):
                raise ValueError(f"observation model must have shape {(n, n)}")
            obs.setflags(write=False)
            object.__setattr__(self, "observation_model", obs)
        trans.setflags(write=False)
        init.setflags(write=False)
        object.__setattr__(self, "transitions", trans)
        object.__setattr__(self, "initial_distribution", init)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def num_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def cycle_length(self) -> int:
        return self.transitions.shape[0]

    @property
    def cluster_size(self) -> int:
        return self.num_states - 1

    def matrix(self, x: int) -> np.ndarray:
        """Transition matrix for 1-based cycle position ``x``."""
        if not 1 <= x <= self.cycle_length:
            raise ValueError(f"cycle position {x} outside [1, {self.cycle_length}]")
        return self.transitions[x - 1]

    def emission_matrix(self) -> np.ndarray:
        if self.observation_model is None:
            return np.eye(self.num_states)
        return self.observation_model

    def with_transitions(self, transitions: np.ndarray, **metadata) -> "CyclicMarkovModel":
        meta = dict(self.metadata)
        meta.update(metadata)
        return CyclicMarkovModel(
            transitions=transitions,
            initial_distribution=self.initial_distribution,
            observation_model=self.observation_model,
            smoothing_floor=self.smoothing_floor,
            metadata=meta,
        )

    def check_sequence(self, seq: ObservationSequence) -> None:
        if seq.num_states != self.num_states:
            raise ValueError(
                f"sequence cluster size {seq.cluster_size} does not match model "
                f"with {self.num_states} states"
            )
        if seq.start_cycle_position > self.cycle_length:
            raise ValueError(
                f"sequence starts at position {seq.start_cycle_position}, beyond "
                f"cycle length {self.cycle_length}"
            )

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_FORMAT_VERSION,
            "num_states": self.num_states,
            "cycle_length": self.cycle_length,
            "smoothing_floor": self.smoothing_floor,
            "transitions": self.transitions.tolist(),
            "initial_distribution": self.initial_distribution.tolist(),
            "observation_model": (
                None if self.observation_model is None else self.observation_model.tolist()
            ),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CyclicMarkovModel":
        if data.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a {MODEL_FORMAT} document")
        if data.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {data.get('version')}")
        model = cls(
            transitions=np.array(data["transitions"], dtype=float),
            initial_distribution=np.array(data["initial_distribution"], dtype=float),
            observation_model=(
                None
                if data.get("observation_model") is None
                else np.array(data["observation_model"], dtype=float)
            ),
            smoothing_floor=float(data.get("smoothing_floor", DEFAULT_FLOOR)),
            metadata=data.get("metadata") or {},
        )
        if model.num_states != data["num_states"] or model.cycle_length != data["cycle_length"]:
            raise ValueError("declared dimensions do not match stored matrices")
        return model

    def dumps(self) -> str:
        # float repr is the shortest string that round-trips bit-exactly
        return json.dumps(self.to_dict(), allow_nan=False)

    @classmethod
    def loads(cls, text: str) -> "CyclicMarkovModel":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "CyclicMarkovModel":
        return cls.loads(Path(path).read_text())

    def equals(self, other: "CyclicMarkovModel") -> bool:
        """Bit-identical comparison of every field."""
        same_obs = (self.observation_model is None and other.observation_model is None) or (
            self.observation_model is not None
            and other.observation_model is not None
            and np.array_equal(self.observation_model, other.observation_model)
        )
        return (
            np.array_equal(self.transitions, other.transitions)
            and np.array_equal(self.initial_distribution, other.initial_distribution)
            and same_obs
            and self.smoothing_floor == other.smoothing_floor
            and self.metadata == other.metadata
        )


def validate_model(model: CyclicMarkovModel, floor: float | None = None) -> list[str]:
    """List every broken invariant of ``model``; empty means valid.

    ``floor`` defaults to the model's own smoothing floor. A small relative
    slack absorbs the rounding of the renormalization step.
    """
    floor = model.smoothing_floor if floor is None else floor
    problems = []
    trans = model.transitions
    if not np.isfinite(trans).all():
        problems.append("transitions contain non-finite values")
    sums = trans.sum(axis=2)
    for x, i in zip(*np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)):
        problems.append(f"A_{x + 1} row {i} sums to {sums[x, i]!r}")
    if floor > 0:
        low = trans < floor * (1 - 1e-9)
        for x, i in sorted({(int(a), int(b)) for a, b, _ in zip(*np.nonzero(low))}):
            j = int(np.argmin(trans[x, i]))
            problems.append(
                f"A_{x + 1} row {i} entry {j} = {trans[x, i, j]!r} below floor {floor}"
            )
    init = model.initial_distribution
    if (init < 0).any():
        problems.append("initial distribution has negative entries")
    init_sums = init.sum(axis=1)
    for x in np.flatnonzero(np.abs(init_sums - 1.0) > ROW_SUM_TOL):
        problems.append(f"initial distribution row {x + 1} sums to {init_sums[x]!r}")
    if model.observation_model is not None:
        obs_sums = model.observation_model.sum(axis=1)
        for j in np.flatnonzero(np.abs(obs_sums - 1.0) > ROW_SUM_TOL):
            problems.append(f"observation model row {j} sums to {obs_sums[j]!r}")
    return problems


# observation CSV ----------------------------------------------------------

SEQUENCE_HEADER = ["cluster_id", "timestamp", "count"]


def write_sequences_csv(sequences: Iterable[ObservationSequence], out: TextIO) -> int:
    """Write known values as ``cluster_id,timestamp,count`` rows; returns row count."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SEQUENCE_HEADER)
    rows = 0
    for seq in sequences:
        if seq.start_time is None:
            raise ValueError(f"sequence for cluster {seq.cluster_id!r} has no start time")
        for k in np.flatnonzero(seq.values != MISSING):
            ts = seq.start_time + dt.timedelta(minutes=int(k) * seq.step_minutes)
            writer.writerow([seq.cluster_id, format_timestamp(ts), int(seq.values[k])])
            rows += 1
    return rows


def read_sequences_csv(
    source: TextIO | str | Path,
    p: int = MINUTES_PER_DAY,
    cluster_sizes: dict[str, int] | None = None,
    split: str = "day",
) -> list[ObservationSequence]:
    """Materialize sequences from the observation CSV, filling absent minutes with -1.

    ``split="day"`` yields one full-day sequence (00:00 to 23:59) per cluster and
    calendar day that has at least one row; ``split="none"`` yields one sequence
    per cluster from its first to its last timestamp. Cluster sizes default to
    the largest count seen for the cluster.
    """
    if split not in ("day", "none"):
        raise ValueError(f"unknown split mode {split!r}")
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return read_sequences_csv(fh, p, cluster_sizes, split)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != SEQUENCE_HEADER:
        raise SchemaError(f"expected header {','.join(SEQUENCE_HEADER)}, got {header}")
    by_cluster: dict[str, dict[int, int]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise SchemaError(f"line {lineno}: expected 3 fields, got {len(row)}")
        try:
            minute = minute_index(parse_timestamp(row[1]))
            count = int(row[2])
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from None
        if count < 0:
            raise SchemaError(f"line {lineno}: negative count {count}")
        cells = by_cluster.setdefault(row[0].strip(), {})
        if minute in cells and cells[minute] != count:
            raise SchemaError(f"line {lineno}: conflicting duplicate timestamp {row[1]}")
        cells[minute] = count

    sequences = []
    for cid in sorted(by_cluster):
        cells = by_cluster[cid]
        size = max(cells.values())
        if cluster_sizes is not None:
            if cid not in cluster_sizes:
                raise SchemaError(f"no cluster size known for {cid!r}")
            size = cluster_sizes[cid]
        minutes = np.array(sorted(cells), dtype=np.int64)
        counts = np.array([cells[m] for m in minutes], dtype=np.int64)
        if split == "day":
            days = minutes // MINUTES_PER_DAY
            spans = [(d * MINUTES_PER_DAY, (d + 1) * MINUTES_PER_DAY) for d in np.unique(days)]
        else:
            spans = [(int(minutes[0]), int(minutes[-1]) + 1)]
        for lo, hi in spans:
            mask = (minutes >= lo) & (minutes < hi)
            values = np.full(hi - lo, MISSING, dtype=np.int64)
            values[minutes[mask] - lo] = counts[mask]
            try:
                seq = ObservationSequence(
                    values=values,
                    start_cycle_position=(lo % p) + 1,
                    cluster_size=size,
                    cluster_id=cid,
                    start_time=_EPOCH + dt.timedelta(minutes=int(lo)),
                )
            except ValueError as exc:
                raise SchemaError(f"cluster {cid!r}: {exc}") from None
            sequences.append(seq)
    return sequences


def sequences_to_csv_text(sequences: Iterable[ObservationSequence]) -> str:
    buf = io.StringIO()
    write_sequences_csv(sequences, buf)
    return buf.getvalue()


class SchemaError(ValueError):
    """Input file does not follow the expected layout."""

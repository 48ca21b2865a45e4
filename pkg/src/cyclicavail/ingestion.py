"""Stay records to per-cluster, per-weekday availability sequences."""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .core import (
    MINUTES_PER_DAY,
    ObservationSequence,
    SchemaError,
    minute_index,
    parse_timestamp,
)

log = logging.getLogger(__name__)

MAX_STAY = dt.timedelta(hours=24)
STAY_HEADER = ["bay_id", "arrival", "departure"]
CLUSTER_HEADER = ["cluster_id", "bay_id"]


@dataclass(frozen=True)
class StayRecord:
    bay_id: str
    arrival: dt.datetime
    departure: dt.datetime

    def __post_init__(self):
        if not self.departure > self.arrival:
            raise ValueError("departure must be after arrival")

    @property
    def duration(self) -> dt.timedelta:
        return self.departure - self.arrival


@dataclass(frozen=True)
class ClusterDefinition:
    cluster_id: str
    bay_ids: frozenset[str]

    def __post_init__(self):
        if not self.bay_ids:
            raise ValueError(f"cluster {self.cluster_id!r} has no bays")
        object.__setattr__(self, "bay_ids", frozenset(self.bay_ids))

    @property
    def size(self) -> int:
        return len(self.bay_ids)


@dataclass(frozen=True)
class DatasetSplit:
    """1-based week indices counted from the start of the ingest range."""

    training_weeks: frozenset[int]
    testing_weeks: frozenset[int]
    weekday_only: bool = True

    def __post_init__(self):
        object.__setattr__(self, "training_weeks", frozenset(self.training_weeks))
        object.__setattr__(self, "testing_weeks", frozenset(self.testing_weeks))
        if self.training_weeks & self.testing_weeks:
            raise ValueError("training and testing weeks overlap")

    @classmethod
    def standard(cls, total_weeks: int = 8) -> "DatasetSplit":
        """Weeks three and six train, the rest test."""
        train = {3, 6}
        return cls(frozenset(train), frozenset(set(range(1, total_weeks + 1)) - train))


@dataclass
class StayParseResult:
    records: list[StayRecord] = field(default_factory=list)
    excluded_long: int = 0
    malformed: list[tuple[int, str]] = field(default_factory=list)


def parse_stays(stream: TextIO) -> StayParseResult:
    """Read ``bay_id,arrival,departure`` rows.

    Stays longer than 24 hours are dropped and counted; rows that cannot be
    parsed or end before they start are collected with their line numbers.
    """
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != STAY_HEADER:
        raise SchemaError(f"expected header {','.join(STAY_HEADER)}, got {header}")
    result = StayParseResult()
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            result.malformed.append((lineno, f"expected 3 fields, got {len(row)}"))
            continue
        try:
            arrival = parse_timestamp(row[1])
            departure = parse_timestamp(row[2])
        except ValueError as exc:
            result.malformed.append((lineno, str(exc)))
            continue
        if not departure > arrival:
            result.malformed.append((lineno, "departure not after arrival"))
            continue
        rec = StayRecord(row[0].strip(), arrival, departure)
        if rec.duration > MAX_STAY:
            result.excluded_long += 1
            continue
        result.records.append(rec)
    return result


def parse_clusters(stream: TextIO) -> list[ClusterDefinition]:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != CLUSTER_HEADER:
        raise SchemaError(f"expected header {','.join(CLUSTER_HEADER)}, got {header}")
    bays: dict[str, set[str]] = {}
    owner: dict[str, str] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise SchemaError(f"line {lineno}: expected 2 fields, got {len(row)}")
        cid, bay = row[0].strip(), row[1].strip()
        if bay in owner and owner[bay] != cid:
            raise SchemaError(f"line {lineno}: bay {bay!r} in clusters {owner[bay]!r} and {cid!r}")
        owner[bay] = cid
        bays.setdefault(cid, set()).add(bay)
    return [ClusterDefinition(cid, frozenset(b)) for cid, b in sorted(bays.items())]


def load_cluster_sizes(path: str | Path) -> dict[str, int]:
    """Cluster sizes from a ``{cluster_id: size}`` JSON or a cluster CSV."""
    path = Path(path)
    if path.suffix == ".json":
        return {str(k): int(v) for k, v in json.loads(path.read_text()).items()}
    with open(path, newline="") as fh:
        return {c.cluster_id: c.size for c in parse_clusters(fh)}


@dataclass
class IngestReport:
    clusters: int = 0
    days_total: int = 0
    days_train: int = 0
    days_test: int = 0
    skipped_days: list[dt.date] = field(default_factory=list)
    unknown_bays: Counter = field(default_factory=Counter)
    clipped_stays: int = 0

    def summary(self) -> str:
        lines = [
            f"clusters: {self.clusters}",
            f"days emitted: {self.days_total} (train {self.days_train}, test {self.days_test})",
            f"stays clipped at range edges: {self.clipped_stays}",
        ]
        if self.skipped_days:
            lines.append(f"days skipped as missing data: {len(self.skipped_days)}")
        if self.unknown_bays:
            lines.append(
                f"stays on bays outside any cluster: {sum(self.unknown_bays.values())} "
                f"({len(self.unknown_bays)} bays)"
            )
        return "\n".join(lines)


@dataclass
class ClusterSequences:
    cluster: ClusterDefinition
    train: list[ObservationSequence] = field(default_factory=list)
    test: list[ObservationSequence] = field(default_factory=list)


def occupancy(
    stays: Iterable[StayRecord], bay_index: dict[str, int], start: dt.datetime, minutes: int
) -> tuple[np.ndarray, int]:
    """Boolean ``(bays, minutes)`` occupancy over ``[start, start + minutes)``.

    A stay occupies minutes ``[minute(arrival), minute(departure))``; stays
    reaching beyond the range are clipped. Returns the array and the number
    of clipped stays.
    """
    base = minute_index(start)
    diff = np.zeros((len(bay_index), minutes + 1), dtype=np.int32)
    rows, lo, hi = [], [], []
    clipped = 0
    for rec in stays:
        b = bay_index.get(rec.bay_id)
        if b is None:
            continue
        a = minute_index(rec.arrival) - base
        e = minute_index(rec.departure) - base
        if e <= 0 or a >= minutes:
            continue
        if a < 0 or e > minutes:
            clipped += 1
        rows.append(b)
        lo.append(max(a, 0))
        hi.append(min(e, minutes))
    if rows:
        np.add.at(diff, (np.array(rows), np.array(lo)), 1)
        np.add.at(diff, (np.array(rows), np.array(hi)), -1)
    return np.cumsum(diff[:, :minutes], axis=1) > 0, clipped


def build_sequences(
    stays: Sequence[StayRecord],
    clusters: Sequence[ClusterDefinition],
    start_date: dt.date,
    end_date: dt.date,
    split: DatasetSplit,
    p: int = MINUTES_PER_DAY,
    missing_days: Iterable[dt.date] = (),
) -> tuple[dict[str, ClusterSequences], IngestReport]:
    """One complete 1440-minute sequence per cluster and included day.

    Days run from ``start_date`` up to but excluding ``end_date``; each day is
    assigned to training or testing by its week index. Values count the
    cluster's bays that are free during each minute.
    """
    if end_date <= start_date:
        raise ValueError("empty time range")
    if MINUTES_PER_DAY % p:
        raise ValueError("cycle length must divide one day")
    seen: dict[str, str] = {}
    for c in clusters:
        for bay in c.bay_ids:
            if bay in seen:
                raise ValueError(f"bay {bay!r} belongs to clusters {seen[bay]!r} and {c.cluster_id!r}")
            seen[bay] = c.cluster_id

    report = IngestReport(clusters=len(clusters))
    for rec in stays:
        if rec.bay_id not in seen:
            report.unknown_bays[rec.bay_id] += 1
    if report.unknown_bays:
        log.warning("ignoring stays on %d bays not assigned to any cluster", len(report.unknown_bays))

    missing = set(missing_days)
    ndays = (end_date - start_date).days
    start = dt.datetime.combine(start_date, dt.time())
    days = []
    for k in range(ndays):
        day = start_date + dt.timedelta(days=k)
        if split.weekday_only and day.weekday() >= 5:
            continue
        week = k // 7 + 1
        role = "train" if week in split.training_weeks else (
            "test" if week in split.testing_weeks else None)
        if role is None:
            continue
        if day in missing:
            report.skipped_days.append(day)
            continue
        days.append((k, day, role))

    by_cluster_stays: dict[str, list[StayRecord]] = {c.cluster_id: [] for c in clusters}
    for rec in stays:
        cid = seen.get(rec.bay_id)
        if cid is not None:
            by_cluster_stays[cid].append(rec)

    out: dict[str, ClusterSequences] = {}
    for c in clusters:
        bay_index = {bay: i for i, bay in enumerate(sorted(c.bay_ids))}
        occ, clipped = occupancy(by_cluster_stays[c.cluster_id], bay_index, start,
                                 ndays * MINUTES_PER_DAY)
        report.clipped_stays += clipped
        free = c.size - occ.sum(axis=0)
        entry = ClusterSequences(c)
        for k, day, role in days:
            seq = ObservationSequence(
                values=free[k * MINUTES_PER_DAY:(k + 1) * MINUTES_PER_DAY],
                start_cycle_position=(minute_index(dt.datetime.combine(day, dt.time())) % p) + 1,
                cluster_size=c.size,
                cluster_id=c.cluster_id,
                start_time=dt.datetime.combine(day, dt.time()),
            )
            getattr(entry, role).append(seq)
        out[c.cluster_id] = entry
    report.days_train = sum(1 for _, _, r in days if r == "train")
    report.days_test = sum(1 for _, _, r in days if r == "test")
    report.days_total = len(days)
    return out, report

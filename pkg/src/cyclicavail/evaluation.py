"""Experiment grid: normalized MAE per model, sparsity level and horizon."""

from __future__ import annotations

import csv
import io
import itertools
import logging
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .core import MISSING, CyclicMarkovModel, ObservationSequence, minute_of_day
from .estimation import TrainingConfig, estimate_complete, train_baum_welch, train_heuristic
from .prediction import HistoricAverageModel, expectation_table
from .sampler import SparsityConfig, sparsify_all

log = logging.getLogger(__name__)

DEFAULT_BETAS = (30.0, 60.0, 120.0)
DEFAULT_HORIZONS = (15, 30, 60, 120, 240)
DAYTIME_WINDOW = (minute_of_day(7, 0), minute_of_day(23, 0) - 1)
MARKOV_METHODS = ("BW", "HEUR", "STD")
ALL_METHODS = MARKOV_METHODS + ("AVG", "LAST")


class Predictor(Protocol):
    def predict(self, seq: ObservationSequence, targets: np.ndarray, d: int) -> np.ndarray:
        """Predictions for step indices ``targets`` of ``seq`` given the value ``d`` steps earlier."""


class MarkovPredictor:
    def __init__(self, model: CyclicMarkovModel, horizons: Iterable[int]):
        self.model = model
        self.horizons = [int(h) for h in horizons]
        self._index = {h: k for k, h in enumerate(self.horizons)}
        self._table = expectation_table(model, self.horizons)

    def predict(self, seq, targets, d):
        if seq.num_states != self.model.num_states:
            raise ValueError("model and test sequence disagree on cluster size")
        if d not in self._index:
            raise ValueError(f"horizon {d} was not prepared")
        pos = seq.positions0(self.model.cycle_length)[targets]
        last = seq.values[targets - d]
        return self._table[pos, self._index[d], last]


class LastPredictor:
    def predict(self, seq, targets, d):
        return seq.values[targets - d].astype(float)


class AveragePredictor:
    def __init__(self, avg: HistoricAverageModel):
        self.avg = avg

    def predict(self, seq, targets, d):
        return self.avg.means[seq.positions0(self.avg.cycle_length)[targets]]


class OraclePredictor:
    """Returns the truth; a sanity reference for the harness itself."""

    def predict(self, seq, targets, d):
        return seq.values[targets].astype(float)


@dataclass(frozen=True)
class ExperimentGrid:
    """``betas`` may include 0 for the complete training set."""

    betas: tuple[float, ...] = DEFAULT_BETAS
    horizons: tuple[int, ...] = DEFAULT_HORIZONS
    window: tuple[int, int] = DAYTIME_WINDOW
    repetitions: int = 4
    methods: tuple[str, ...] = ALL_METHODS
    variants: tuple[str, ...] = ("hom", "inhom")
    seed: int = 0

    def __post_init__(self):
        if not self.horizons or min(self.horizons) < 1:
            raise ValueError("horizons must be positive")
        lo, hi = self.window
        if not 1 <= lo <= hi:
            raise ValueError("window must satisfy 1 <= start <= end")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        unknown = set(self.methods) - set(ALL_METHODS) - {"ORACLE"}
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")

    def kinds(self) -> list[str]:
        out = []
        for m in self.methods:
            if m in ("LAST", "ORACLE"):
                out.append(m)
            else:
                out.extend(f"{m}-{v}" for v in self.variants)
        return out


@dataclass
class ErrorCell:
    abs_sum: float = 0.0
    sq_sum: float = 0.0
    count: int = 0
    skipped: int = 0

    def add(self, err: np.ndarray, skipped: int) -> None:
        self.abs_sum += float(np.abs(err).sum())
        self.sq_sum += float((err ** 2).sum())
        self.count += int(err.size)
        self.skipped += skipped


@dataclass
class EvaluationReport:
    """Accumulated errors keyed by ``(cluster, kind, beta, d)``."""

    cells: dict[tuple[str, str, float, int], ErrorCell] = field(default_factory=dict)
    cluster_sizes: dict[str, int] = field(default_factory=dict)
    train_seconds: dict[str, list[float]] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def cell(self, cluster, kind, beta, d) -> ErrorCell:
        return self.cells.setdefault((cluster, kind, float(beta), int(d)), ErrorCell())

    def _select(self, kind=None, beta=None, d=None, cluster=None):
        for (c, k, b, h), cell in self.cells.items():
            if kind is not None and k != kind:
                continue
            if beta is not None and b != float(beta):
                continue
            if d is not None and h != int(d):
                continue
            if cluster is not None and c != cluster:
                continue
            yield c, cell

    def normalized_mae(self, kind=None, beta=None, d=None, cluster=None, weighted=True) -> float:
        """Normalized MAE over the selected cells.

        ``weighted=True`` weights clusters by their number of predictions;
        otherwise each cluster's normalized MAE counts equally.
        """
        per_cluster: dict[str, list[float]] = {}
        for c, cell in self._select(kind, beta, d, cluster):
            acc = per_cluster.setdefault(c, [0.0, 0])
            acc[0] += cell.abs_sum / self.cluster_sizes[c]
            acc[1] += cell.count
        per_cluster = {c: v for c, v in per_cluster.items() if v[1]}
        if not per_cluster:
            return float("nan")
        if weighted:
            return sum(v[0] for v in per_cluster.values()) / sum(v[1] for v in per_cluster.values())
        return float(np.mean([v[0] / v[1] for v in per_cluster.values()]))

    def normalized_rmse(self, kind=None, beta=None, d=None, cluster=None) -> float:
        num = den = 0.0
        for c, cell in self._select(kind, beta, d, cluster):
            num += cell.sq_sum / self.cluster_sizes[c] ** 2
            den += cell.count
        return float(np.sqrt(num / den)) if den else float("nan")

    def counts(self, kind=None, beta=None, d=None) -> tuple[int, int]:
        cells = [cell for _, cell in self._select(kind, beta, d)]
        return sum(c.count for c in cells), sum(c.skipped for c in cells)

    def kinds(self) -> list[str]:
        return sorted({k for _, k, _, _ in self.cells})

    def betas(self) -> list[float]:
        return sorted({b for _, _, b, _ in self.cells})

    def horizons(self) -> list[int]:
        return sorted({h for _, _, _, h in self.cells})

    def merge(self, other: "EvaluationReport") -> None:
        for key, cell in other.cells.items():
            mine = self.cells.setdefault(key, ErrorCell())
            mine.abs_sum += cell.abs_sum
            mine.sq_sum += cell.sq_sum
            mine.count += cell.count
            mine.skipped += cell.skipped
        self.cluster_sizes.update(other.cluster_sizes)
        for k, v in other.train_seconds.items():
            self.train_seconds.setdefault(k, []).extend(v)

    def rows(self, include_rmse: bool = False) -> list[dict]:
        out = []
        for kind, beta, d in itertools.product(self.kinds(), self.betas(), self.horizons()):
            count, skipped = self.counts(kind, beta, d)
            if not count:
                continue
            row = {
                "model": kind,
                "beta": beta,
                "d": d,
                "nmae": self.normalized_mae(kind, beta, d),
                "nmae_unweighted": self.normalized_mae(kind, beta, d, weighted=False),
                "predictions": count,
                "skipped": skipped,
            }
            if include_rmse:
                row["nrmse"] = self.normalized_rmse(kind, beta, d)
            out.append(row)
        return out

    def to_csv(self, include_rmse: bool = False) -> str:
        rows = self.rows(include_rmse)
        buf = io.StringIO()
        fields = ["model", "beta", "d", "nmae", "nmae_unweighted", "predictions", "skipped"]
        if include_rmse:
            fields.append("nrmse")
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) and k != "beta" else v)
                             for k, v in row.items()})
        return buf.getvalue()

    def summary_table(self) -> dict[str, dict[str, float]]:
        """Normalized MAE per method and variant, pooled over betas and horizons."""
        table: dict[str, dict[str, float]] = {}
        for kind in self.kinds():
            method, _, variant = kind.partition("-")
            value = self.normalized_mae(kind)
            if variant:
                table.setdefault(method, {})[variant] = value
            else:
                # variant-free baselines read the same in both columns
                table.setdefault(method, {}).update(hom=value, inhom=value)
        return table

    def format_table(self) -> str:
        table = self.summary_table()
        order = [m for m in (*ALL_METHODS, "ORACLE") if m in table]
        lines = [f"{'Model':<8}{'hom.':>10}{'inhom.':>10}", "-" * 28]
        for m in order:
            cols = [table[m].get(v) for v in ("hom", "inhom")]
            cells = "".join(f"{c:>10.3f}" if c is not None else f"{'--':>10}" for c in cols)
            lines.append(f"{m:<8}{cells}")
        return "\n".join(lines)


def window_targets(seq: ObservationSequence, p: int, window: tuple[int, int], d: int):
    """Step indices whose cycle position lies in ``window`` and whose lookback
    ``d`` stays inside the sequence; also returns how many were dropped for
    reaching before its start."""
    pos1 = seq.positions0(p) + 1
    lo, hi = window
    in_window = np.flatnonzero((pos1 >= lo) & (pos1 <= hi))
    ok = in_window[in_window >= d]
    return ok, int(in_window.size - ok.size)


def evaluate(
    predictors: Mapping[str, Mapping[str, Predictor]],
    test_sequences: Mapping[str, Sequence[ObservationSequence]],
    grid: ExperimentGrid,
    p: int,
    beta: float = 0.0,
    report: EvaluationReport | None = None,
) -> EvaluationReport:
    """Score every predictor on every in-window test minute and horizon.

    ``predictors[cluster][kind]`` predicts for that cluster's test days. The
    measurement at ``t - d`` is always the true value; lookbacks that would
    cross into the previous sequence are skipped and counted.
    """
    report = report if report is not None else EvaluationReport()
    for cluster, seqs in test_sequences.items():
        if cluster not in predictors:
            raise ValueError(f"no predictors for cluster {cluster!r}")
        for seq in seqs:
            if not seq.is_complete:
                raise ValueError(f"test sequence for {cluster!r} has missing values")
            report.cluster_sizes[cluster] = seq.cluster_size
            for d in grid.horizons:
                targets, skipped = window_targets(seq, p, grid.window, d)
                truth = seq.values[targets].astype(float)
                for kind, predictor in predictors[cluster].items():
                    pred = predictor.predict(seq, targets, d)
                    report.cell(cluster, kind, beta, d).add(pred - truth, skipped)
    return report


def _timed(fn, *args):
    start = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - start


def train_predictors(
    train: Sequence[ObservationSequence],
    p: int,
    grid: ExperimentGrid,
    config: TrainingConfig,
    timings: dict[str, list[float]] | None = None,
) -> dict[str, Predictor]:
    """Fit every model kind in the grid on one cluster's training set."""
    n = train[0].num_states
    out: dict[str, Predictor] = {}
    for kind in grid.kinds():
        method, _, variant = kind.partition("-")
        cfg = TrainingConfig(**{**config.__dict__, "homogeneous": variant == "hom"})
        if method == "LAST":
            out[kind] = LastPredictor()
            continue
        if method == "ORACLE":
            out[kind] = OraclePredictor()
            continue
        if method == "AVG":
            avg, secs = _timed(HistoricAverageModel.fit, train, p, variant == "hom")
            out[kind] = AveragePredictor(avg)
        else:
            if method == "BW":
                result, secs = _timed(train_baum_welch, train, p, n, cfg)
                model = result.model
                if not result.converged:
                    log.info("BW did not converge for %s (%d iterations)",
                             train[0].cluster_id, result.iterations)
            elif method == "HEUR":
                model, secs = _timed(train_heuristic, train, p, n, cfg)
            else:
                model, secs = _timed(
                    lambda *a: estimate_complete(*a, allow_gaps=True), train, p, n, cfg)
            out[kind] = MarkovPredictor(model, grid.horizons)
        if timings is not None:
            timings.setdefault(kind, []).append(secs)
    return out


def run_experiment(
    train: Mapping[str, Sequence[ObservationSequence]],
    test: Mapping[str, Sequence[ObservationSequence]],
    grid: ExperimentGrid,
    p: int,
    config: TrainingConfig | None = None,
) -> EvaluationReport:
    """Sparsify, train and evaluate for every beta and repetition.

    Within a repetition every model sees the same sparse training set.
    Results for one beta are pooled over repetitions.
    """
    config = config or TrainingConfig()
    report = EvaluationReport(metadata={
        "seed": grid.seed, "repetitions": grid.repetitions,
        "betas": list(grid.betas), "horizons": list(grid.horizons),
        "window": list(grid.window), "p": p,
    })
    for rep in range(grid.repetitions):
        for beta in grid.betas:
            for cluster in sorted(train):
                seqs = list(train[cluster])
                if beta > 0:
                    seqs = sparsify_all(seqs, SparsityConfig(beta, seed=grid.seed + rep))
                if sum(s.num_known for s in seqs) < 2:
                    log.warning("cluster %s has too few observations at beta=%s", cluster, beta)
                    continue
                preds = train_predictors(seqs, p, grid, config, report.train_seconds)
                evaluate({cluster: preds}, {cluster: test[cluster]}, grid, p, beta, report)
    return report


@dataclass
class TimingResult:
    samples: list[float]

    @property
    def mean(self) -> float:
        return statistics.fmean(self.samples)

    @property
    def variance(self) -> float:
        return statistics.pvariance(self.samples) if len(self.samples) > 1 else 0.0


def benchmark_training(
    trainers: Mapping[str, Callable[[Sequence[ObservationSequence]], object]],
    training_sets: Sequence[Sequence[ObservationSequence]],
    repetitions: int = 1,
) -> dict[str, TimingResult]:
    """Wall-clock training time per trainer on identical inputs.

    Trainers are interleaved and their order rotated each round so slow
    drift in the machine's state is spread across all of them.
    """
    names = list(trainers)
    samples: dict[str, list[float]] = {name: [] for name in names}
    rnd = 0
    for _ in range(repetitions):
        for data in training_sets:
            order = names[rnd % len(names):] + names[:rnd % len(names)]
            rnd += 1
            for name in order:
                _, secs = _timed(trainers[name], data)
                samples[name].append(secs)
    return {name: TimingResult(s) for name, s in samples.items()}


def timing_csv(results: Mapping[str, TimingResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trainer", "runs", "mean_seconds", "variance"])
    for name, res in results.items():
        writer.writerow([name, len(res.samples), f"{res.mean:.6g}", f"{res.variance:.6g}"])
    return buf.getvalue()


@dataclass
class GranularityComparison:
    cluster: EvaluationReport
    per_bay: EvaluationReport

    def rows(self) -> list[dict]:
        out = []
        for kind in self.cluster.kinds():
            bay_maes = [self.per_bay.normalized_mae(kind, cluster=c)
                        for c in sorted(self.per_bay.cluster_sizes)]
            out.append({
                "model": kind,
                "cluster_nmae": self.cluster.normalized_mae(kind),
                "per_bay_nmae": float(np.nanmean(bay_maes)),
            })
        return out


def per_resource_vs_cluster_comparison(
    cluster_train: Mapping[str, Sequence[ObservationSequence]],
    cluster_test: Mapping[str, Sequence[ObservationSequence]],
    bay_train: Mapping[str, Sequence[ObservationSequence]],
    bay_test: Mapping[str, Sequence[ObservationSequence]],
    grid: ExperimentGrid,
    p: int,
    config: TrainingConfig | None = None,
) -> GranularityComparison:
    """Run the same grid once on joint cluster models and once per single bay."""
    return GranularityComparison(
        cluster=run_experiment(cluster_train, cluster_test, grid, p, config),
        per_bay=run_experiment(bay_train, bay_test, grid, p, config),
    )


def known_fraction(sequences: Iterable[ObservationSequence]) -> float:
    total = known = 0
    for s in sequences:
        total += len(s)
        known += int((s.values != MISSING).sum())
    return known / total if total else 0.0

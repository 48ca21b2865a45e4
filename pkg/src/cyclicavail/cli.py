"""Command-line entry point: ``cyclicavail <subcommand> ...``.

Exit codes: 0 success, 2 usage, 3 schema, 4 non-convergence, 5 I/O.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import csv
import datetime as dt
import json
import logging
import sys
from importlib import metadata as importlib_metadata
from pathlib import Path

import numpy as np

from . import evaluation, estimation, kernels, sampler, synth
from .core import (
    MINUTES_PER_DAY,
    MISSING,
    CyclicMarkovModel,
    ObservationSequence,
    SchemaError,
    format_timestamp,
    minute_index,
    parse_timestamp,
    read_sequences_csv,
    write_sequences_csv,
)
from .ingestion import DatasetSplit, build_sequences, load_cluster_sizes, parse_clusters, parse_stays
from .prediction import PredictionRequest, expected_available, predict_distribution

log = logging.getLogger("cyclicavail")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SCHEMA = 3
EXIT_NONCONVERGED = 4
EXIT_IO = 5


class UsageError(Exception):
    pass


def tool_version() -> str:
    try:
        return importlib_metadata.version("artifact")
    except importlib_metadata.PackageNotFoundError:
        return "unknown"


# helpers ----------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _str_list(text: str | None) -> list[str]:
    return [x.strip() for x in (text or "").split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _window(text: str) -> tuple[int, int]:
    """``HH:MM-HH:MM`` (end exclusive) or ``start-end`` cycle positions."""
    lo, _, hi = text.partition("-")
    if ":" in lo:
        def pos(s):
            h, m = (int(v) for v in s.split(":"))
            return 60 * h + m + 1
        return pos(lo), pos(hi) - 1
    return int(lo), int(hi)


def _config(args) -> estimation.TrainingConfig:
    return estimation.TrainingConfig(
        epsilon_convergence=args.epsilon,
        max_iterations=args.max_iterations,
        init_diagonal_mass=args.init_diagonal,
        smoothing_floor=args.floor,
        homogeneous=args.homogeneous,
        max_jump=args.max_jump,
    )


def _load_sequences(path, p, sizes_path=None, cluster_size=None, split="day"):
    sizes = None
    if sizes_path:
        sizes = load_cluster_sizes(sizes_path)
    seqs = read_sequences_csv(path, p=p, cluster_sizes=sizes, split=split)
    if cluster_size is not None:
        seqs = [
            ObservationSequence(values=s.values, start_cycle_position=s.start_cycle_position,
                                cluster_size=cluster_size, cluster_id=s.cluster_id,
                                start_time=s.start_time)
            for s in seqs
        ]
    return seqs


def _group(seqs):
    out: dict[str, list] = {}
    for s in seqs:
        out.setdefault(s.cluster_id, []).append(s)
    return out


def _add_sequence_input(sp, required=True):
    sp.add_argument("--p", type=int, default=MINUTES_PER_DAY, help="cycle length in steps")
    sp.add_argument("--sizes", help="cluster sizes (JSON map or cluster_id,bay_id CSV)")
    sp.add_argument("--cluster-size", type=int, help="size used for every cluster")
    sp.add_argument("--split", choices=["day", "none"], default="day",
                    help="sequence boundaries: one per day, or one per cluster")


def _add_training_flags(sp):
    sp.add_argument("--epsilon", type=float, default=1e-4,
                    help="BW stops when no transition entry changes by more than this")
    sp.add_argument("--max-iterations", type=int, default=100)
    sp.add_argument("--init-diagonal", type=float, default=0.99,
                    help="initial self-transition probability")
    sp.add_argument("--floor", type=float, default=1e-6, help="minimum transition probability")
    sp.add_argument("--homogeneous", action="store_true",
                    help="share one transition matrix across the whole cycle")
    sp.add_argument("--max-jump", type=int, default=None,
                    help="HEUR: largest state change per step (default unrestricted)")
    sp.add_argument("--jobs", type=int, default=1, help="clusters trained concurrently")


# subcommands ------------------------------------------------------------------


def cmd_ingest(args) -> tuple[int, list[str]]:
    with open(args.stays, newline="") as fh:
        parsed = parse_stays(fh)
    with open(args.clusters, newline="") as fh:
        clusters = parse_clusters(fh)
    start = dt.date.fromisoformat(args.start)
    end = (dt.date.fromisoformat(args.end) if args.end
           else start + dt.timedelta(weeks=args.weeks))
    total_weeks = -(-(end - start).days // 7)
    train_weeks = set(_int_list(args.train_weeks))
    test_weeks = (set(_int_list(args.test_weeks)) if args.test_weeks
                  else set(range(1, total_weeks + 1)) - train_weeks)
    split = DatasetSplit(frozenset(train_weeks), frozenset(test_weeks), not args.all_days)
    missing = [dt.date.fromisoformat(d) for d in _str_list(args.missing_days)]
    by_cluster, report = build_sequences(parsed.records, clusters, start, end, split,
                                         args.p, missing)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_path, test_path, sizes_path = out / "train.csv", out / "test.csv", out / "sizes.json"
    with open(train_path, "w", newline="") as fh:
        write_sequences_csv([s for c in by_cluster.values() for s in c.train], fh)
    with open(test_path, "w", newline="") as fh:
        write_sequences_csv([s for c in by_cluster.values() for s in c.test], fh)
    sizes_path.write_text(json.dumps({c.cluster_id: c.size for c in clusters}, indent=1))
    print(report.summary())
    print(f"stays read: {len(parsed.records)}; excluded (>24h): {parsed.excluded_long}; "
          f"malformed: {len(parsed.malformed)}")
    for lineno, reason in parsed.malformed[:20]:
        print(f"  line {lineno}: {reason}", file=sys.stderr)
    return EXIT_OK, [str(train_path), str(test_path), str(sizes_path)]


def cmd_sparsify(args):
    seqs = _load_sequences(args.input, args.p, args.sizes, args.cluster_size, args.split)
    sparse = sampler.sparsify_all(seqs, sampler.SparsityConfig(args.beta, args.seed))
    with open(args.output, "w", newline="") as fh:
        rows = write_sequences_csv(sparse, fh)
    print(f"kept {rows} of {sum(len(s) for s in seqs)} observations "
          f"(beta={args.beta}, seed={args.seed})")
    return EXIT_OK, [args.output]


def _train_one(method, seqs, p, config, warm_start):
    n = seqs[0].num_states
    if method == "bw":
        init = estimation.train_heuristic(seqs, p, n, config) if warm_start else None
        res = estimation.train_baum_welch(seqs, p, n, config, init_model=init)
        return res.model, res.log_likelihoods, res.converged
    if method == "heur":
        return estimation.train_heuristic(seqs, p, n, config), [], True
    return estimation.estimate_complete(seqs, p, n, config, allow_gaps=True), [], True


def cmd_train(args):
    path = args.input or args.beta_file
    if not path:
        raise UsageError("train needs --input (or --beta-file)")
    seqs = _load_sequences(path, args.p, args.sizes, args.cluster_size, args.split)
    groups = _group(seqs)
    if args.cluster:
        if args.cluster not in groups:
            raise SchemaError(f"cluster {args.cluster!r} not present in {path}")
        groups = {args.cluster: groups[args.cluster]}
    if not groups:
        raise SchemaError(f"no observations in {path}")
    if len(groups) > 1 and not args.out_dir:
        raise UsageError("input holds several clusters; pass --out-dir or --cluster")
    if len(groups) == 1 and not (args.output or args.out_dir):
        raise UsageError("pass --output for the model file")
    config = _config(args)
    names = sorted(groups)
    if args.jobs > 1 and len(names) > 1:
        with cf.ProcessPoolExecutor(args.jobs) as pool:
            futures = [pool.submit(_train_one, args.method, groups[c], args.p, config,
                                   args.warm_start) for c in names]
            results = [f.result() for f in futures]
    else:
        results = [_train_one(args.method, groups[c], args.p, config, args.warm_start)
                   for c in names]
    outputs = []
    status = EXIT_OK
    for cid, (model, trace, converged) in zip(names, results):
        model = model.with_transitions(model.transitions, cluster_id=cid)
        if args.out_dir:
            Path(args.out_dir).mkdir(parents=True, exist_ok=True)
            target = Path(args.out_dir) / f"{cid}.json"
        else:
            target = Path(args.output)
        model.save(target)
        outputs.append(str(target))
        if args.trace and trace:
            trace_path = (Path(args.trace) if len(names) == 1
                          else Path(args.trace).with_name(f"{cid}.{Path(args.trace).name}"))
            with open(trace_path, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["iteration", "log_likelihood"])
                for k, ll in enumerate(trace, start=1):
                    writer.writerow([k, repr(ll)])
            outputs.append(str(trace_path))
        state = "converged" if converged else "NOT converged"
        print(f"{cid}: {args.method} model with {model.num_states} states, p={model.cycle_length}"
              + (f", {len(trace)} iterations, {state}" if args.method == "bw" else ""))
        if not converged:
            status = EXIT_NONCONVERGED
    return status, outputs


def _find_last_observation(path, model, cluster, target):
    seqs = read_sequences_csv(path, p=model.cycle_length,
                              cluster_sizes=None, split="none")
    seqs = [s for s in seqs if s.cluster_id == cluster or not cluster]
    if not seqs:
        raise SchemaError(f"no observations for cluster {cluster!r}")
    seq = seqs[0]
    tmin = minute_index(target)
    start = minute_index(seq.start_time)
    known = np.flatnonzero(seq.values != MISSING)
    known = known[start + known < tmin]
    if known.size == 0:
        raise UsageError("no observation precedes the target time; refusing to predict")
    k = int(known[-1])
    return int(seq.values[k]), seq.start_time + dt.timedelta(minutes=k)


def cmd_predict(args):
    model = CyclicMarkovModel.load(args.model)
    target = parse_timestamp(args.target)
    if args.observations:
        last, last_time = _find_last_observation(args.observations, model, args.cluster, target)
    else:
        if args.last is None or args.last_time is None:
            raise UsageError("predict needs --last and --last-time, or --observations")
        last, last_time = args.last, parse_timestamp(args.last_time)
    d = minute_index(target) - minute_index(last_time)
    if d < 1:
        raise UsageError("target must be at least one minute after the last observation")
    if not 0 <= last <= model.cluster_size:
        raise UsageError(f"last observation {last} outside [0, {model.cluster_size}]")
    req = PredictionRequest(last, last_time, d)
    dist = predict_distribution(model, last, req.last_position(model.cycle_length), d)
    expected = expected_available(dist)
    print(f"last observation {last} at {format_timestamp(last_time)}; "
          f"target {format_timestamp(target)}; d={d}")
    print(f"expected available: {expected:.6f}")
    outputs = []
    if args.distribution:
        with open(args.distribution, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["state", "probability"])
            for i, prob in enumerate(dist.probs):
                writer.writerow([i, repr(float(prob))])
        outputs.append(args.distribution)
    return EXIT_OK, outputs


def _evaluate_cluster(train, test, grid, p, config):
    return evaluation.run_experiment(train, test, grid, p, config)


def cmd_evaluate(args):
    train = _group(_load_sequences(args.train, args.p, args.sizes, args.cluster_size, args.split))
    test = _group(_load_sequences(args.test, args.p, args.sizes, args.cluster_size, args.split))
    missing = sorted(set(train) ^ set(test))
    if missing:
        raise SchemaError(f"clusters present in only one of train/test: {missing}")
    grid = evaluation.ExperimentGrid(
        betas=tuple(_float_list(args.betas)),
        horizons=tuple(_int_list(args.horizons)),
        window=_window(args.window),
        repetitions=args.repetitions,
        methods=tuple(m.strip().upper() for m in args.methods.split(",")),
        variants=tuple(v.strip() for v in args.variants.split(",")),
        seed=args.seed,
    )
    config = _config(args)
    names = sorted(train)
    report = evaluation.EvaluationReport(metadata={"seed": args.seed, "dataset": args.train})
    jobs = [({c: train[c]}, {c: test[c]}) for c in names]
    if args.jobs > 1 and len(names) > 1:
        with cf.ProcessPoolExecutor(args.jobs) as pool:
            parts = list(pool.map(_evaluate_cluster, *zip(*jobs),
                                  *[[x] * len(jobs) for x in (grid, args.p, config)]))
    else:
        parts = [_evaluate_cluster(tr, te, grid, args.p, config) for tr, te in jobs]
    for part in parts:
        report.merge(part)
    print(report.format_table())
    outputs = []
    if args.report:
        Path(args.report).write_text(report.to_csv(include_rmse=args.rmse))
        outputs.append(args.report)
    else:
        print()
        print(report.to_csv(include_rmse=args.rmse), end="")
    return EXIT_OK, outputs


def cmd_bench(args):
    config = _config(args)
    p = args.p
    if args.input:
        groups = _group(_load_sequences(args.input, p, args.sizes, args.cluster_size, args.split))
        sets = [groups[c] for c in sorted(groups)]
    else:
        rng = sampler.make_rng(args.seed)
        model = synth.sticky_model(p, args.states)
        sets = []
        for k in range(args.sets):
            seqs = synth.sample_sequences(model, args.cycles, rng, per_cycle=True)
            if args.beta > 0:
                seqs = sampler.sparsify_all(seqs, sampler.SparsityConfig(args.beta, args.seed + k))
            sets.append(seqs)
    trainers = {}
    for m in (x.strip().lower() for x in args.methods.split(",")):
        if m not in estimation.TRAINERS:
            raise UsageError(f"unknown trainer {m!r}")
        fn = estimation.TRAINERS[m]
        trainers[m.upper()] = (lambda fn: lambda data: fn(data, p, data[0].num_states, config))(fn)
    results = evaluation.benchmark_training(trainers, sets, args.repetitions)
    text = evaluation.timing_csv(results)
    print(f"kernels: {kernels.IMPLEMENTATION}")
    print(text, end="")
    outputs = []
    if args.output:
        Path(args.output).write_text(text)
        outputs.append(args.output)
    return EXIT_OK, outputs


def cmd_synth(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = sampler.make_rng(args.seed)
    if args.kind == "stays":
        sizes = {}
        for item in args.clusters.split(","):
            cid, _, size = item.partition(":")
            sizes[cid.strip()] = int(size)
        stays, clusters = synth.synthetic_stays(rng, sizes, weeks=args.weeks)
        stays_path, clusters_path = out / "stays.csv", out / "clusters.csv"
        with open(stays_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bay_id", "arrival", "departure"])
            for s in stays:
                writer.writerow([s.bay_id, s.arrival.isoformat(), s.departure.isoformat()])
        with open(clusters_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["cluster_id", "bay_id"])
            for c in clusters:
                for bay in sorted(c.bay_ids):
                    writer.writerow([c.cluster_id, bay])
        print(f"wrote {len(stays)} stays for {len(clusters)} clusters")
        return EXIT_OK, [str(stays_path), str(clusters_path)]

    if args.generator == "random":
        model = synth.random_model(args.p, args.states, rng, args.min_entry)
    else:
        model = synth.sticky_model(args.p, args.states, turnover=args.turnover)
    seqs = synth.sample_sequences(model, args.cycles, rng, per_cycle=args.per_cycle,
                                  cluster_id=args.cluster_id)
    model_path, data_path, sizes_path = out / "model.json", out / "data.csv", out / "sizes.json"
    model.save(model_path)
    with open(data_path, "w", newline="") as fh:
        write_sequences_csv(seqs, fh)
    sizes_path.write_text(json.dumps({args.cluster_id: model.cluster_size}))
    outputs = [str(model_path), str(data_path), str(sizes_path)]
    if args.beta:
        sparse = sampler.sparsify_all(seqs, sampler.SparsityConfig(args.beta, args.seed))
        sparse_path = out / "sparse.csv"
        with open(sparse_path, "w", newline="") as fh:
            write_sequences_csv(sparse, fh)
        outputs.append(str(sparse_path))
    print(f"wrote ground-truth model (p={args.p}, N={args.states}) and "
          f"{sum(len(s) for s in seqs)} observations to {out}")
    return EXIT_OK, outputs


def cmd_rerun(args):
    manifest = json.loads(Path(args.manifest_file).read_text())
    if "argv" not in manifest:
        raise SchemaError(f"{args.manifest_file} is not a run manifest")
    return run(manifest["argv"], _nested=True), manifest.get("outputs", [])


# parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cyclicavail",
        description="Cyclic Markov models of resource availability from sparse observations.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--manifest", help="where to write the run manifest")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ingest", help="stay records -> per-cluster minute sequences")
    sp.add_argument("--stays", required=True, help="CSV bay_id,arrival,departure")
    sp.add_argument("--clusters", required=True, help="CSV cluster_id,bay_id")
    sp.add_argument("--start", required=True, help="first day (YYYY-MM-DD)")
    sp.add_argument("--end", help="day after the last one (default: start + --weeks)")
    sp.add_argument("--weeks", type=int, default=8)
    sp.add_argument("--train-weeks", default="3,6")
    sp.add_argument("--test-weeks", default=None, help="default: every other week")
    sp.add_argument("--all-days", action="store_true", help="keep weekends")
    sp.add_argument("--missing-days", default="", help="comma-separated dates to drop")
    sp.add_argument("--p", type=int, default=MINUTES_PER_DAY)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("sparsify", help="drop observations with exponential gaps")
    sp.add_argument("--input", required=True)
    sp.add_argument("--output", required=True)
    sp.add_argument("--beta", type=float, required=True, help="mean gap in minutes")
    sp.add_argument("--seed", type=int, default=0)
    _add_sequence_input(sp)
    sp.set_defaults(func=cmd_sparsify)

    sp = sub.add_parser("train", help="fit a model (bw, heur or std)")
    sp.add_argument("--method", choices=["bw", "heur", "std"], required=True)
    sp.add_argument("--input", help="observation CSV")
    sp.add_argument("--beta-file", help="alias of --input for sparsified data")
    sp.add_argument("--cluster", help="train only this cluster")
    sp.add_argument("--output", help="model file (single cluster)")
    sp.add_argument("--out-dir", help="directory for one model per cluster")
    sp.add_argument("--trace", help="CSV for the BW log-likelihood trace")
    sp.add_argument("--warm-start", action="store_true", help="BW: start from the HEUR estimate")
    _add_sequence_input(sp)
    _add_training_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="expected availability at a target time")
    sp.add_argument("--model", required=True)
    sp.add_argument("--last", type=int, help="last observed number of free resources")
    sp.add_argument("--last-time", help="timestamp of the last observation")
    sp.add_argument("--target", required=True, help="timestamp to predict")
    sp.add_argument("--observations", help="observation CSV to take the latest value from")
    sp.add_argument("--cluster", help="cluster in --observations")
    sp.add_argument("--distribution", help="write the target distribution CSV here")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", help="normalized MAE over the experiment grid")
    sp.add_argument("--train", required=True)
    sp.add_argument("--test", required=True)
    sp.add_argument("--betas", default="30,60,120", help="0 = complete training data")
    sp.add_argument("--horizons", default="15,30,60,120,240")
    sp.add_argument("--window", default="07:00-23:00")
    sp.add_argument("--repetitions", type=int, default=4)
    sp.add_argument("--methods", default="BW,HEUR,STD,AVG,LAST")
    sp.add_argument("--variants", default="hom,inhom")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--report", help="CSV output path")
    sp.add_argument("--rmse", action="store_true", help="add normalized RMSE column")
    _add_sequence_input(sp)
    _add_training_flags(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("bench", help="training wall-clock per trainer")
    sp.add_argument("--input", help="observation CSV; one training set per cluster")
    sp.add_argument("--methods", default="bw,heur,std")
    sp.add_argument("--repetitions", type=int, default=3)
    sp.add_argument("--states", type=int, default=6, help="synthetic set: number of states")
    sp.add_argument("--cycles", type=int, default=10, help="synthetic set: days per set")
    sp.add_argument("--sets", type=int, default=2, help="synthetic set: number of sets")
    sp.add_argument("--beta", type=float, default=60.0, help="synthetic set: sparsity")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output", help="timing CSV path")
    _add_sequence_input(sp)
    _add_training_flags(sp)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("synth", help="ground-truth synthetic datasets")
    sp.add_argument("--kind", choices=["chain", "stays"], default="chain")
    sp.add_argument("--generator", choices=["random", "sticky"], default="random")
    sp.add_argument("--p", type=int, default=24)
    sp.add_argument("--states", type=int, default=3)
    sp.add_argument("--cycles", type=int, default=200)
    sp.add_argument("--per-cycle", action="store_true", help="one sequence per cycle")
    sp.add_argument("--min-entry", type=float, default=0.05)
    sp.add_argument("--turnover", type=float, default=0.08)
    sp.add_argument("--beta", type=float, default=0.0, help="also write a sparsified copy")
    sp.add_argument("--cluster-id", default="synthetic")
    sp.add_argument("--clusters", default="A:5,B:8", help="stays: id:size list")
    sp.add_argument("--weeks", type=int, default=8)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("rerun", help="repeat a run from its manifest")
    sp.add_argument("manifest_file")
    sp.set_defaults(func=cmd_rerun)
    return parser


def _manifest_path(args, outputs) -> Path:
    if args.manifest:
        return Path(args.manifest)
    if getattr(args, "out_dir", None):
        return Path(args.out_dir) / "manifest.json"
    if outputs:
        return Path(outputs[0] + ".manifest.json")
    return Path(f"{args.command}.manifest.json")


def run(argv: list[str] | None = None, _nested: bool = False) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on usage errors
    if not _nested:
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
    started = dt.datetime.now(dt.timezone.utc)
    try:
        status, outputs = args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    if args.command == "rerun":
        return status
    finished = dt.datetime.now(dt.timezone.utc)
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "subcommand": args.command,
        "argv": argv,
        "flags": flags,
        "outputs": outputs,
        "seed": flags.get("seed"),
        "tool_version": tool_version(),
        "kernels": kernels.IMPLEMENTATION,
        "started": started.isoformat(),
        "finished": finished.isoformat(),
        "exit_status": status,
    }
    path = _manifest_path(args, outputs)
    try:
        path.write_text(json.dumps(manifest, indent=1, default=str))
    except OSError as exc:
        print(f"I/O error writing manifest: {exc}", file=sys.stderr)
        return EXIT_IO
    return status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

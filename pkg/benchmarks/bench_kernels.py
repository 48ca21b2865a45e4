"""Compare the compiled and pure-Python kernels on one day-scale problem.

Usage: python benchmarks/bench_kernels.py [--days 20] [--states 6] [--beta 120]
"""

import argparse
import time

import numpy as np

from cyclicavail import kernels
from cyclicavail.estimation import emission_table
from cyclicavail.sampler import SparsityConfig, sparsify_all
from cyclicavail.synth import sample_sequences, sticky_model


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--days", type=int, default=20)
    parser.add_argument("--states", type=int, default=6)
    parser.add_argument("--beta", type=float, default=120.0)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    p, n = 1440, args.states
    model = sticky_model(p, n, turnover=0.02)
    rng = np.random.default_rng(0)
    seq = sample_sequences(model, args.days, rng)[0]
    sparse = sparsify_all([seq], SparsityConfig(args.beta, 0))[0]
    pos = np.ascontiguousarray(sparse.positions0(p), dtype=np.int64)
    emis = emission_table(model, sparse)
    trans = np.ascontiguousarray(model.transitions)
    init = np.ascontiguousarray(model.initial_distribution[0])
    values = np.ascontiguousarray(sparse.values, dtype=np.int64)

    impls = kernels.implementations()
    print(f"T={len(seq)} steps, N={n}, beta={args.beta:g}; selected: {kernels.IMPLEMENTATION}")
    print("(backward and accumulate timings include the passes they depend on)")
    print(f"{'kernel':<24}" + "".join(f"{name:>12}" for name in impls) + f"{'speedup':>10}")
    rows = {
        "forward": lambda k: k.forward(trans, pos, emis, init),
        "backward": lambda k: k.backward(trans, pos, emis, k.forward(trans, pos, emis, init)[1]),
        "accumulate_transitions": None,
        "heuristic_accumulate": lambda k: k.heuristic_accumulate(
            values, pos, n, -1, np.zeros((p, n, n))),
    }

    def accumulate(k):
        alpha, scale = k.forward(trans, pos, emis, init)
        beta = k.backward(trans, pos, emis, scale)
        k.accumulate_transitions(trans, pos, emis, alpha, beta, scale,
                                 np.zeros((p, n, n)), np.zeros((p, n)))

    rows["accumulate_transitions"] = accumulate
    for name, fn in rows.items():
        secs = {impl: best_of(lambda: fn(mod), args.repeat) for impl, mod in impls.items()}
        speed = (secs["python"] / secs["cython"]) if "cython" in secs else float("nan")
        print(f"{name:<24}" + "".join(f"{s * 1e3:>10.1f}ms" for s in secs.values())
              + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()

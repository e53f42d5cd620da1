"""Time the numba and numpy kernel backends on the same workloads.

    python3 benchmarks/bench_backends.py --n 1024 --rounds 2000
"""

import argparse
import time

from ballsbins import _backend, coupling, metrics, tetris
from ballsbins.core import Configuration, Simulation


def workloads(n, rounds):
    q0 = Configuration.random(n, seed=1)
    n4 = 4 * max(1, n // 4)

    def untracked():
        Simulation(q0, seed=2, track=False, capacity=rounds).advance(rounds)

    def tracked():
        Simulation(q0, seed=2, track=True, capacity=rounds).advance(rounds)

    def visits():
        Simulation(q0, seed=2, track_visits=True, capacity=rounds).advance(rounds)

    def tetris_run():
        tetris.simulate(q0, rounds, seed=2)

    def coupled():
        coupling.coupled_run(Configuration.random(n4, seed=1), rounds, seed=2)

    def single_cover():
        metrics.single_ball_cover_times(4, 100_000, seed=2)

    return {
        "run_rounds untracked": (untracked, n * rounds),
        "run_rounds tracked": (tracked, n * rounds),
        "run_rounds with visits": (visits, n * rounds),
        "tetris_rounds": (tetris_run, n * rounds),
        "coupled_rounds": (coupled, n4 * rounds),
        "batch_single_cover": (single_cover, 100_000),
    }


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--rounds", type=int, default=2000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--only", help="substring filter on workload names")
    args = p.parse_args(argv)

    jobs = workloads(args.n, args.rounds)
    if args.only:
        jobs = {k: v for k, v in jobs.items() if args.only in k}
    results = {}
    for name in ("numba", "numpy"):
        _backend.set_backend(name)
        for label, (fn, units) in jobs.items():
            fn()  # compile / warm caches
            results[label, name] = best_of(fn, args.repeat) / units

    print(f"n={args.n} rounds={args.rounds}  (ns per bin-round, or per trial for batch_single_cover)")
    print(f"{'workload':<26}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for label in jobs:
        a, b = results[label, "numba"], results[label, "numpy"]
        print(f"{label:<26}{a * 1e9:>12.1f}{b * 1e9:>12.1f}{b / a:>9.1f}x")
    return results


if __name__ == "__main__":
    main()

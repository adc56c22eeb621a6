"""Compare the compiled trial kernel against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--trials N] [--repeat R] [--workers W]

Both backends see the same tables and master key, so the win counts
printed for each row must match.
"""

import argparse
import time

from ghzlab import kernels
from ghzlab.game import make_ghz_game
from ghzlab.harness import QuantumStrategy, run_trials
from ghzlab.lhv import MixedStrategy, best_classical


def bench(spec, strategy, n, backend, repeat, workers):
    best = float("inf")
    report = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        report = run_trials(spec, strategy, n, 1234, workers=workers, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, report.wins


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    spec = make_ghz_game()
    strategies = {
        "quantum": QuantumStrategy.ideal(),
        "classical": MixedStrategy.point(best_classical(spec)),
    }
    backends = ["python"]
    try:
        kernels.get_backend("cython")
        backends.insert(0, "cython")
    except RuntimeError:
        print("compiled kernel not built; timing numpy only")

    print(f"{'strategy':<10} {'backend':<8} {'seconds':>9} {'Mtrials/s':>10} {'wins':>10}")
    for name, strat in strategies.items():
        rows = {}
        for b in backends:
            secs, wins = bench(spec, strat, args.trials, b, args.repeat, args.workers)
            rows[b] = secs
            print(f"{name:<10} {b:<8} {secs:9.4f} {args.trials / secs / 1e6:10.2f} {wins:>10}")
        if len(rows) == 2:
            print(f"{'':<10} speedup  {rows['python'] / rows['cython']:9.2f}x")


if __name__ == "__main__":
    main()

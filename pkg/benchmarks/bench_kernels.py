"""Numba vs numpy timings for the hot kernels.

    python3 benchmarks/bench_kernels.py [--batch 4000] [--n 20] [--repeat 5]

Both variants live side by side in ``votelearn.kernels``, so one process can
time them on identical inputs. Numba compile time is excluded (one warm-up
call per kernel) and outputs are checked for equality before timing.
"""
import argparse
import time

import numpy as np

from votelearn import _accel, kernels
from votelearn.elections import make_rng, rank_order_from_utilities, sample_utilities


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--batch", type=int, default=4000)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = make_rng(0, 42)
    print(f"{'kernel':28s} {'m':>3s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s}")
    for m in (3, 5, 8):
        ranks = rank_order_from_utilities(sample_utilities(np.ones(m), (args.batch, args.n), rng))
        counts = kernels.pairwise_counts_np(ranks)
        small = counts[: max(1, args.batch // 10)]
        cases = [
            ("pairwise_counts", lambda: kernels.pairwise_counts_np(ranks), lambda: kernels.pairwise_counts_nb(ranks)),
            ("kemeny_winners (B/10)", lambda: kernels.kemeny_winners_np(small), lambda: kernels.kemeny_winners_nb(small)),
        ]
        if m <= 8:
            one = np.ascontiguousarray(counts[0])
            cases.append(("kemeny_brute (one)", lambda: kernels.kemeny_brute_np(one), lambda: kernels.kemeny_brute_nb(one)))
        for name, f_np, f_nb in cases:
            a, b = f_np(), f_nb()
            for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
                assert np.array_equal(np.asarray(x), np.asarray(y)), f"{name}: backends disagree"
            t_np = best_of(f_np, args.repeat)
            t_nb = best_of(f_nb, args.repeat)
            print(f"{name:28s} {m:3d} {t_np:10.5f} {t_nb:10.5f} {t_np / t_nb:7.1f}x")

    m = 12
    counts = kernels.pairwise_counts_np(rank_order_from_utilities(sample_utilities(np.ones(m), (1, 51), rng)))[0]
    kernels.kemeny_dp_nb(counts)
    t_np = best_of(lambda: kernels.kemeny_dp_np(counts), 2)
    t_nb = best_of(lambda: kernels.kemeny_dp_nb(counts), 2)
    print(f"{'kemeny_dp (one election)':28s} {m:3d} {t_np:10.5f} {t_nb:10.5f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()

"""Compare the numba and numpy kernel paths.

Usage: python benchmarks/bench_kernels.py [--dim 16] [--times 2000] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from qextrap import _kernels as K


def _inputs(dim, n_times, n_ops, seed=0):
    rng = np.random.default_rng(seed)
    evals = np.sort(rng.uniform(0.0, 1.0, dim))
    w = rng.normal(size=(n_ops, dim, dim)) + 1j * rng.normal(size=(n_ops, dim, dim))
    w = w + w.conj().transpose(0, 2, 1)
    times = np.linspace(0.0, 50.0, n_times)
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return evals, w, times, psi


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=16)
    ap.add_argument("--times", type=int, default=2000)
    ap.add_argument("--ops", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    evals, w, times, psi = _inputs(args.dim, args.times, args.ops)
    # warm up and check agreement before timing
    a = K._timeline_jit(evals, w, times, 0.1)
    b = K.timeline_numpy(evals, w, times, 0.1)
    assert np.allclose(a, b, atol=1e-9), "timeline paths disagree"
    assert np.allclose(K._rank_one_jit(psi), K.rank_one_numpy(psi), atol=1e-12), "rank_one paths disagree"

    cases = [
        ("timeline", lambda: K._timeline_jit(evals, w, times, 0.1), lambda: K.timeline_numpy(evals, w, times, 0.1)),
        ("rank_one", lambda: K._rank_one_jit(psi), lambda: K.rank_one_numpy(psi)),
    ]
    print(f"{'kernel':<10} {'numba [ms]':>12} {'numpy [ms]':>12} {'speedup':>8}")
    for name, jit_fn, np_fn in cases:
        tj = min(timeit.repeat(jit_fn, number=1, repeat=args.repeat)) * 1e3
        tn = min(timeit.repeat(np_fn, number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<10} {tj:12.3f} {tn:12.3f} {tn / tj:8.1f}x")


if __name__ == "__main__":
    main()

"""Time the numba and numpy backends of the diagonal/factorized kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5]

The first numba call compiles (or loads the on-disk cache); it is timed
separately and excluded from the steady-state numbers.
"""
import argparse
import time

import numpy as np

from qmstree import _kernels
from qmstree.ising import ising_model
from qmstree.entropy import _factorized_Q


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    model = ising_model(0.1, 0.5)
    Q = _factorized_Q(model, 3)
    root = np.array([0.5, 0.5])
    mu_big = _kernels.site_marginals(root, Q, 2**16 - 1, 2, 2)
    return {
        "diag_weights n=3 (15 sites)": lambda: _kernels.diag_weights(root, Q, None, 15, 2, 2),
        "site_marginals 2^16 sites": lambda: _kernels.site_marginals(root, Q, 2**16 - 1, 2, 2),
        "conditional_entropy_sum 2^15 parents":
            lambda: _kernels.conditional_entropy_sum(mu_big, Q, 2**15 - 1, 2, 2),
        "xlogx_sum 2^20": lambda: _kernels.xlogx_sum(np.full(2**20, 2.0**-20)),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        print("numba not installed; only the numpy backend is timed")
    rows = []
    for name, fn in cases().items():
        _kernels.set_backend("numpy")
        t_np = _time(fn, args.repeat)
        ref = fn()
        t_nb = first = float("nan")
        if _kernels.HAVE_NUMBA:
            _kernels.set_backend("numba")
            t0 = time.perf_counter()
            out = fn()
            first = time.perf_counter() - t0
            t_nb = _time(fn, args.repeat)
            assert np.allclose(out, ref, rtol=1e-10, atol=1e-14), name
        rows.append((name, t_np, first, t_nb))
    print(f"{'kernel':40s} {'numpy[s]':>10s} {'numba 1st':>10s} {'numba[s]':>10s} {'speedup':>8s}")
    for name, a, f, b in rows:
        print(f"{name:40s} {a:10.4f} {f:10.4f} {b:10.4f} {a / b:8.1f}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Compare the numba and pure-numpy block-tridiagonal solve paths.

Run: python benchmarks/bench_kernels.py [N ...]
The numpy path is what you get with COGUAV_NUMBA=0.
"""

import sys
import time

import numpy as np

from coguav.kernels import HAVE_NUMBA, blocktri_solve, blocktri_to_dense


def make_system(rng, n, b=5):
    low = rng.standard_normal((n - 1, b, b)) * 0.3
    diag = rng.standard_normal((n, b, b))
    diag = np.einsum("nij,nkj->nik", diag, diag) + 4.0 * np.eye(b)
    rhs = rng.standard_normal((n, b))
    return diag, low, rhs


def bench(n, repeats=50):
    rng = np.random.default_rng(7)
    diag, low, rhs = make_system(rng, n)
    ref = np.linalg.solve(blocktri_to_dense(diag, low), rhs.reshape(-1))
    out = {}
    for backend in ("numba", "numpy"):
        if backend == "numba" and not HAVE_NUMBA:
            out[backend] = (float("nan"), float("nan"))
            continue
        x = blocktri_solve(diag, low, rhs, backend=backend)  # warm-up / JIT
        err = np.max(np.abs(x.reshape(-1) - ref))
        t0 = time.perf_counter()
        for _ in range(repeats):
            blocktri_solve(diag, low, rhs, backend=backend)
        out[backend] = ((time.perf_counter() - t0) / repeats * 1e3, err)
    return out


def main():
    sizes = [int(a) for a in sys.argv[1:]] or [50, 200, 800, 3200]
    print(f"{'N':>6} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8} "
          f"{'max err':>10}")
    for n in sizes:
        r = bench(n)
        tn, err_n = r["numba"]
        tp, err_p = r["numpy"]
        speed = tp / tn if tn == tn and tn > 0 else float("nan")
        print(f"{n:>6} {tn:>10.3f} {tp:>10.3f} {speed:>8.1f} "
              f"{max(err_n, err_p):>10.2e}")


if __name__ == "__main__":
    main()

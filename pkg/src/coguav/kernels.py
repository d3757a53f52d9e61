"""Hot numeric kernels: symmetric block-tridiagonal factor-and-solve.

The Newton systems of the trajectory subproblem couple only adjacent time
slots, giving a symmetric positive-definite block-tridiagonal matrix with
small (5x5) blocks.  The forward/backward block sweep is inherently
sequential over the N slots, so it is compiled with numba when available.

Set the environment variable ``COGUAV_NUMBA=0`` to force the pure-numpy
fallback path (also used automatically when numba is not installed).
``benchmarks/bench_kernels.py`` compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


def numba_enabled() -> bool:
    """True when the compiled path is active (env flag wins over detection)."""
    flag = os.environ.get("COGUAV_NUMBA", "").strip().lower()
    if flag in ("0", "false", "off", "no"):
        return False
    return HAVE_NUMBA


@njit(cache=True)
def _chol_inplace(a):
    # Lower Cholesky of a small SPD matrix; returns False on a bad pivot.
    n = a.shape[0]
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= a[j, k] * a[j, k]
        if s <= 0.0 or not np.isfinite(s):
            return False
        d = np.sqrt(s)
        a[j, j] = d
        for i in range(j + 1, n):
            s = a[i, j]
            for k in range(j):
                s -= a[i, k] * a[j, k]
            a[i, j] = s / d
    return True


@njit(cache=True)
def _chol_solve(g, b, out):
    # Solve (G G^T) out = b given lower Cholesky factor G.
    n = g.shape[0]
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= g[i, k] * out[k]
        out[i] = s / g[i, i]
    for i in range(n - 1, -1, -1):
        s = out[i]
        for k in range(i + 1, n):
            s -= g[k, i] * out[k]
        out[i] = s / g[i, i]


@njit(cache=True)
def _blocktri_solve_nb(diag, low, rhs, x):
    n, b = rhs.shape
    fac = diag.copy()
    y = rhs.copy()
    tmp = np.empty(b)
    xt = np.empty((b, b))
    for i in range(n):
        if i > 0:
            # X = S_{i-1}^{-1} L_i^T, then S_i = D_i - L_i X, y_i -= L_i S^{-1} y_{i-1}
            for c in range(b):
                for r in range(b):
                    tmp[r] = low[i - 1, c, r]
                _chol_solve(fac[i - 1], tmp, xt[:, c])
            for r in range(b):
                for c in range(b):
                    s = 0.0
                    for k in range(b):
                        s += low[i - 1, r, k] * xt[k, c]
                    fac[i, r, c] -= s
            _chol_solve(fac[i - 1], y[i - 1], tmp)
            for r in range(b):
                s = 0.0
                for k in range(b):
                    s += low[i - 1, r, k] * tmp[k]
                y[i, r] -= s
        if not _chol_inplace(fac[i]):
            return False
    _chol_solve(fac[n - 1], y[n - 1], x[n - 1])
    for i in range(n - 2, -1, -1):
        for r in range(b):
            s = y[i, r]
            for k in range(b):
                s -= low[i, k, r] * x[i + 1, k]
            tmp[r] = s
        _chol_solve(fac[i], tmp, x[i])
    return True


def _blocktri_solve_np(diag, low, rhs):
    n, b = rhs.shape
    fac = [None] * n
    y = rhs.copy()
    s_i = diag[0].copy()
    for i in range(n):
        if i > 0:
            prev = fac[i - 1]
            xt = np.linalg.solve(prev, low[i - 1].T)
            s_i = diag[i] - low[i - 1] @ xt
            y[i] -= low[i - 1] @ np.linalg.solve(prev, y[i - 1])
        try:
            np.linalg.cholesky(s_i)
        except np.linalg.LinAlgError:
            return None
        fac[i] = s_i
    x = np.empty_like(rhs)
    x[n - 1] = np.linalg.solve(fac[n - 1], y[n - 1])
    for i in range(n - 2, -1, -1):
        x[i] = np.linalg.solve(fac[i], y[i] - low[i].T @ x[i + 1])
    return x


def blocktri_solve(diag: np.ndarray, low: np.ndarray, rhs: np.ndarray,
                   backend: str | None = None) -> np.ndarray | None:
    """Solve the SPD block-tridiagonal system H x = rhs.

    ``diag`` is (N, B, B) with the diagonal blocks, ``low`` is (N-1, B, B)
    with the sub-diagonal blocks (block (i+1, i)), ``rhs`` is (N, B).
    Returns None when a Schur complement loses positive definiteness
    (caller regularizes and retries).
    """
    diag = np.ascontiguousarray(diag, dtype=np.float64)
    low = np.ascontiguousarray(low, dtype=np.float64)
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    if backend is None:
        backend = "numba" if numba_enabled() else "numpy"
    if backend == "numba":
        x = np.empty_like(rhs)
        ok = _blocktri_solve_nb(diag, low, rhs, x)
        return x if ok else None
    if backend == "numpy":
        return _blocktri_solve_np(diag, low, rhs)
    raise ValueError(f"unknown backend {backend!r}")


def blocktri_to_dense(diag: np.ndarray, low: np.ndarray) -> np.ndarray:
    """Assemble the full dense matrix (test / dense-solve path)."""
    n, b = diag.shape[0], diag.shape[1]
    full = np.zeros((n * b, n * b))
    for i in range(n):
        full[i * b:(i + 1) * b, i * b:(i + 1) * b] = diag[i]
        if i > 0:
            full[i * b:(i + 1) * b, (i - 1) * b:i * b] = low[i - 1]
            full[(i - 1) * b:i * b, i * b:(i + 1) * b] = low[i - 1].T
    return full


def dense_solve(diag: np.ndarray, low: np.ndarray,
                rhs: np.ndarray) -> np.ndarray | None:
    """Dense fallback with the same contract as :func:`blocktri_solve`."""
    full = blocktri_to_dense(diag, low)
    try:
        np.linalg.cholesky(full)
        x = np.linalg.solve(full, rhs.reshape(-1))
    except np.linalg.LinAlgError:
        return None
    return x.reshape(rhs.shape)

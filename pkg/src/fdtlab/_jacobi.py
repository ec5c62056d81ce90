"""Cyclic Jacobi eigensolver for dense real symmetric matrices.

The sweep order is fixed (row-major over the strict upper triangle), every
operation is sequential scalar arithmetic, and no fast-math is enabled, so
the solver is bit-deterministic: identical input bits give identical output
bits on every call. Convergence: off-diagonal Frobenius norm below
1e-12 * max(1, ||A||_F), at most 100 sweeps. Quadratic convergence makes
the sweep cap unreachable in practice for float64 inputs.
"""

import numpy as np
from numba import njit

MAX_SWEEPS = 100
OFF_DIAG_TOL = 1e-12


@njit(cache=True)
def jacobi_eig(a):  # pragma: no cover - exercised via spectral_core
    """Diagonalize symmetric `a` in place; returns (eigenvalues, vectors) unsorted."""
    n = a.shape[0]
    v = np.eye(n)
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += a[i, j] * a[i, j]
    tol = OFF_DIAG_TOL * max(1.0, np.sqrt(fro))

    for _ in range(MAX_SWEEPS):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        if np.sqrt(2.0 * off) <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # A <- J^T A J applied as column then row rotation
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq

    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i]
    return w, v

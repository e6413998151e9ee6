"""Dense symmetric eigenvalue solvers.

Two in-repo routes: cyclic Jacobi rotations (very accurate, used for small
matrices) and Householder tridiagonalization followed by implicit QL (used
once the O(n^2) Python-level rotations of Jacobi get slow).
"""

from __future__ import annotations

import numpy as np

__all__ = ["jacobi_eigvalsh", "tridiagonal_ql_eigvalsh", "symmetric_eigvalsh"]

JACOBI_MAX_N = 24


def jacobi_eigvalsh(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix, ascending.

    Args:
        a: Symmetric (n, n) array. Not modified.
        tol: Sweeps stop once the off-diagonal Frobenius norm falls below
            ``tol * ||a||_F``.
        max_sweeps: Hard cap on the number of cyclic sweeps.

    Returns:
        Sorted eigenvalues as a 1-D array.
    """
    m = np.array(a, dtype=float, copy=True)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    n = m.shape[0]
    if n == 1:
        return m.diagonal().copy()
    if not np.array_equal(m, m.T):
        raise ValueError("matrix is not symmetric")

    scale = np.linalg.norm(m)
    if scale == 0.0:
        return np.zeros(n)
    threshold = tol * scale

    for _ in range(max_sweeps):
        off = np.linalg.norm(m - np.diag(m.diagonal()))
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                if apq == 0.0:
                    continue
                app, aqq = m[p, p], m[q, q]
                # Rutishauser's stable form of the rotation angle
                theta = (aqq - app) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                row_p = m[p, :].copy()
                row_q = m[q, :].copy()
                m[p, :] = c * row_p - s * row_q
                m[q, :] = s * row_p + c * row_q
                col_p = m[:, p].copy()
                col_q = m[:, q].copy()
                m[:, p] = c * col_p - s * col_q
                m[:, q] = s * col_p + c * col_q
                m[p, q] = m[q, p] = 0.0
    else:
        raise RuntimeError("Jacobi iteration did not converge")

    return np.sort(m.diagonal())


def _tridiagonalize(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = np.array(a, dtype=float, copy=True)
    n = m.shape[0]
    off = np.zeros(n)
    for k in range(n - 2):
        x = m[k + 1:, k]
        norm_x = np.linalg.norm(x)
        if norm_x == 0.0:
            continue
        alpha = -np.copysign(norm_x, x[0])
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        sub = m[k + 1:, k + 1:]
        p = sub @ v
        q = p - (v @ p) * v
        sub -= 2.0 * (np.outer(v, q) + np.outer(q, v))
        m[k + 1:, k] = 0.0
        m[k, k + 1:] = 0.0
        m[k + 1, k] = m[k, k + 1] = alpha
    diag = m.diagonal().copy()
    off[: n - 1] = np.diagonal(m, offset=-1)
    return diag, off


def tridiagonal_ql_eigvalsh(a: np.ndarray, max_iter: int = 60) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix via Householder + implicit QL, ascending."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.array_equal(a, a.T):
        raise ValueError("matrix is not symmetric")
    n = a.shape[0]
    d, e = _tridiagonalize(a)
    d, e = d.tolist(), e.tolist()
    eps = np.finfo(float).eps
    for l in range(n):
        iters = 0
        while True:
            m = l
            while m < n - 1:
                if abs(e[m]) <= eps * (abs(d[m]) + abs(d[m + 1])):
                    break
                m += 1
            if m == l:
                break
            iters += 1
            if iters > max_iter:
                raise RuntimeError("QL iteration did not converge")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + np.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return np.sort(np.array(d))


def symmetric_eigvalsh(a: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues, Jacobi for small matrices and QL otherwise."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] <= JACOBI_MAX_N:
        return jacobi_eigvalsh(a)
    return tridiagonal_ql_eigvalsh(a)

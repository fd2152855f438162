"""Independent oracles used across the test suite.

Everything here recomputes expected values by a route different from the
library code under test: direct summation instead of FFTs, dense linear
algebra instead of rank-one updates, scalar search instead of closed forms.
"""

import numpy as np

from dcflearn.objective import ProblemInstance, _gradient


def brute_dft2(x: np.ndarray) -> np.ndarray:
    """O(N^4) orthonormal 2-D DFT per channel by direct summation."""
    n = x.shape[0]
    out = np.zeros(x.shape, dtype=np.complex128)
    for u in range(n):
        for v in range(n):
            acc = np.zeros(x.shape[2], dtype=np.complex128)
            for p in range(n):
                for q in range(n):
                    acc += x[p, q] * np.exp(-2j * np.pi * (u * p + v * q) / n)
            out[u, v] = acc / n
    return out


def circular_correlation(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Direct-summation circular correlation of two 2-D grids."""
    n = x.shape[0]
    out = np.zeros((n, n))
    for m in range(n):
        for q in range(n):
            acc = 0.0
            for p in range(n):
                for s in range(n):
                    acc += x[p, s] * w[(p + m) % n, (s + q) % n]
            out[m, q] = acc
    return out


def spatial_objective(w: np.ndarray, prob: ProblemInstance, x_raw: np.ndarray) -> float:
    """Objective evaluated via spatial circular correlation.

    The orthonormal transform convention scales the correlation by 1/N, so
    the data term is ``|| (1/N) sum_k corr(X^k, W^k) - Y ||^2``.
    """
    n = prob.n
    resp = np.zeros((n, n))
    for k in range(prob.c):
        resp += circular_correlation(x_raw[:, :, k], w[:, :, k])
    resp /= n
    y = np.fft.ifft2(prob.yhat, norm="ortho").real
    data = float(np.sum((resp - y) ** 2))
    reg = prob.mask.lambda1 * float(np.sum((w * prob.mask.p[:, :, None]) ** 2))
    return data + reg


def dense_minimizer(prob: ProblemInstance) -> np.ndarray:
    """Exact minimizer of the (quadratic) objective by dense linear solve.

    The gradient is affine in W; the Hessian is assembled column by column
    from gradient probes of basis tensors.
    """
    shape = prob.xhat.shape
    dim = int(np.prod(shape))
    g0 = _gradient(np.zeros(shape), prob).ravel()
    h = np.zeros((dim, dim))
    basis = np.zeros(shape)
    for i in range(dim):
        basis.ravel()[i] = 1.0
        h[:, i] = _gradient(basis, prob).ravel() - g0
        basis.ravel()[i] = 0.0
    w = np.linalg.solve(h, -g0)
    return w.reshape(shape)


def golden_section(f, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Scalar minimizer of a unimodal function on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    while abs(b - a) > tol:
        if f(c) < f(d):
            b = d
        else:
            a = c
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
    return 0.5 * (a + b)


def dense_u_solve(x: np.ndarray, y: complex, rho: float, b: np.ndarray) -> np.ndarray:
    """Per-bin sub-problem by dense Hermitian solve:
    ``(rho/2 I + conj(x) x^T) u = conj(x) y + (rho/2) b``.
    """
    c = x.shape[0]
    a = 0.5 * rho * np.eye(c, dtype=np.complex128) + np.outer(np.conj(x), x)
    return np.linalg.solve(a, np.conj(x) * y + 0.5 * rho * b)

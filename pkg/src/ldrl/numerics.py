"""Log-domain linear algebra helpers and the GTH stationary-distribution solver.

Everything downstream of the tilted matrix works with logarithms of
positive vectors: at large inverse temperature the Perron eigenvectors
span more orders of magnitude than float64 can hold linearly, so
matrix-vector products are evaluated as per-row/per-column log-sum-exp
reductions over a dense log-matrix (entries -inf at structural zeros).
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp


def log_matvec(log_mat: np.ndarray, log_x: np.ndarray) -> np.ndarray:
    """log(A @ exp(log_x)) for a dense log-matrix with -inf zeros."""
    return logsumexp(log_mat + log_x[None, :], axis=1)


def log_matvec_t(log_mat: np.ndarray, log_x: np.ndarray) -> np.ndarray:
    """log(A.T @ exp(log_x)); reduction runs down the columns of A."""
    return logsumexp(log_mat + log_x[:, None], axis=0)


def log_normalize(log_x: np.ndarray) -> np.ndarray:
    """Shift log_x so that sum(exp(log_x)) == 1."""
    return log_x - logsumexp(log_x)


def gth_stationary(kernel: np.ndarray) -> np.ndarray:
    """Stationary distribution of a column-stochastic matrix.

    Grassmann-Taksar-Heyman elimination: no subtractions, so small
    stationary probabilities keep relative accuracy even when the chain
    is nearly periodic or nearly reducible (which is exactly the regime
    of driven maze dynamics at large beta).
    """
    t = np.array(kernel, dtype=float)
    n = t.shape[0]
    if n == 1:
        return np.ones(1)
    for k in range(n - 1, 0, -1):
        s = t[:k, k].sum()
        t[k, :k] /= s
        t[:k, :k] += np.outer(t[:k, k], t[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = t[k, 0] + pi[1:k] @ t[k, 1:k]
    return pi / pi.sum()


def format_float(x: float) -> str:
    """Decimal text with 17 significant digits (lossless for float64)."""
    return f"{x:.17g}"

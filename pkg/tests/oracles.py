"""Independent reference computations used by the tests."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from mfgseg.continuation import ExtendedVector, residual


def dense_principal(op):
    """Lowest eigenpair from a full symmetric decomposition, positive and L2(h)-normalized."""
    w, V = scipy.linalg.eigh(op.dense())
    v = V[:, 0]
    v = v * np.sign(v.sum())
    return w[0], v / np.sqrt(op.grid.h * v @ v)


def dense_kth(op, k):
    w, V = scipy.linalg.eigh(op.dense())
    v = V[:, k]
    if v[0] < 0:
        v = -v
    return w[k], v / np.sqrt(op.grid.h * v @ v)


def fd_jacobian(X: ExtendedVector, pair, grid, step: float = 1e-6) -> np.ndarray:
    """Central differences of the residual in every unknown."""
    x0 = X.to_array()
    cols = []
    for j in range(x0.size):
        dx = step * max(1.0, abs(x0[j]))
        xp, xm = x0.copy(), x0.copy()
        xp[j] += dx
        xm[j] -= dx
        rp = residual(ExtendedVector.from_array(xp), pair, grid)
        rm = residual(ExtendedVector.from_array(xm), pair, grid)
        cols.append((rp - rm) / (2 * dx))
    return np.column_stack(cols)


def continuum_neumann_eigenvalue(k: int) -> float:
    return (k * np.pi) ** 2


def observed_order(errors, hs) -> np.ndarray:
    e, h = np.asarray(errors, float), np.asarray(hs, float)
    return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])


def symmetric_cubic_coefficient(beta_star: float) -> float:
    """Hand reduction of the symmetric linear problem at k = 1.

    The second-order correction is a = b = -1/2 + cos(2 pi x)/10 with
    multiplier shift -2, giving beta2 = (beta_star / 2) (3/2 + 2 + 9/10).
    """
    return beta_star / 2 * (1.5 + 2.0 + 0.9)

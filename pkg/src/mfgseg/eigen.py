"""Eigenpairs of the symmetric tridiagonal operator ``nu * L + diag(V)``.

Eigenvalues are located by Sturm-sequence bisection, which certifies their
index, and the vectors are obtained by inverse iteration.  For the principal
pair the shift is kept strictly below the spectrum, so the shifted matrix is
an M-matrix and the elimination runs without pivoting; every entry of the
eigenvector then comes out positive with full relative accuracy, even where
it is exponentially small.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .grid1d import NeumannLaplacian, derivative

BISECT_RTOL = 1e-13
MAX_SWEEPS = 200
TAIL_RTOL = 1e-10
_SECTIONS = 63


class EigenConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SchrodingerOperator:
    nu: float
    potential: np.ndarray
    laplacian: NeumannLaplacian

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        V = self.laplacian.grid.field(self.potential)
        if not np.all(np.isfinite(V)):
            raise ValueError("potential has non-finite entries")
        object.__setattr__(self, "potential", V)

    @property
    def grid(self):
        return self.laplacian.grid

    @property
    def diag(self) -> np.ndarray:
        return self.nu * self.laplacian.diag + self.potential

    @property
    def offdiag(self) -> np.ndarray:
        return self.nu * self.laplacian.offdiag

    @property
    def scale(self) -> float:
        """Size of the operator, nu/h^2 + max|V|; residuals are measured against it."""
        return self.nu / self.grid.h**2 + float(np.max(np.abs(self.potential)))

    def apply(self, v) -> np.ndarray:
        return self.nu * self.laplacian.apply(v) + self.potential * v

    def rayleigh(self, v) -> float:
        # edge form: a sum of squares, no cancellation at large nu/h^2
        h = self.grid.h
        dv = derivative(self.grid, v)
        num = self.nu * h * np.dot(dv, dv) + h * np.dot(self.potential, v * v)
        return float(num / (h * np.dot(v, v)))

    def dense(self) -> np.ndarray:
        e = self.offdiag
        return np.diag(self.diag) + np.diag(e, 1) + np.diag(e, -1)


def sturm_count(d: np.ndarray, e: np.ndarray, shifts) -> np.ndarray:
    """Number of eigenvalues strictly below each shift."""
    shifts = np.atleast_1d(np.asarray(shifts, dtype=float))
    e2 = e * e
    pivmin = np.finfo(float).tiny * max(1.0, float(e2.max(initial=0.0)))
    q = d[0] - shifts
    q = np.where(np.abs(q) < pivmin, -pivmin, q)
    count = (q < 0).astype(int)
    for j in range(1, d.size):
        q = (d[j] - shifts) - e2[j - 1] / q
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        count += q < 0
    return count


def _gershgorin(d, e):
    r = np.zeros_like(d)
    r[:-1] += np.abs(e)
    r[1:] += np.abs(e)
    return float(np.min(d - r)), float(np.max(d + r))


def bisect_eigenvalue(d, e, k: int, lo: float | None = None, hi: float | None = None):
    """Bracket [lo, hi] of the k-th smallest eigenvalue (k = 0 is the lowest)."""
    g_lo, g_hi = _gershgorin(d, e)
    lo = g_lo if lo is None else lo
    hi = g_hi if hi is None else hi
    span = max(abs(g_lo), abs(g_hi))
    floor = 4 * np.finfo(float).eps * span
    # widen until the bracket certifies the index
    while sturm_count(d, e, lo)[0] > k:
        lo -= max(hi - lo, floor, 1.0)
    while sturm_count(d, e, hi)[0] <= k:
        hi += max(hi - lo, floor, 1.0)
    while hi - lo > BISECT_RTOL * max(abs(lo), abs(hi)) + floor:
        shifts = np.linspace(lo, hi, _SECTIONS + 2)[1:-1]
        counts = sturm_count(d, e, shifts)
        below = np.flatnonzero(counts <= k)
        above = np.flatnonzero(counts > k)
        new_lo = shifts[below[-1]] if below.size else lo
        new_hi = shifts[above[0]] if above.size else hi
        if new_lo == lo and new_hi == hi:
            break
        lo, hi = new_lo, new_hi
    return lo, hi


def _thomas(d, e, b):
    """Tridiagonal solve without pivoting; safe for M-matrices."""
    n = d.size
    dp = np.empty(n)
    bp = np.empty(n)
    dp[0] = d[0]
    bp[0] = b[0]
    for j in range(1, n):
        w = e[j - 1] / dp[j - 1]
        dp[j] = d[j] - w * e[j - 1]
        bp[j] = b[j] - w * bp[j - 1]
    x = np.empty(n)
    x[-1] = bp[-1] / dp[-1]
    for j in range(n - 2, -1, -1):
        x[j] = (bp[j] - e[j] * x[j + 1]) / dp[j]
    return x


def _banded_solve(d, e, sigma, b):
    ab = np.zeros((3, d.size))
    ab[0, 1:] = e
    ab[1] = d - sigma
    ab[2, :-1] = e
    return solve_banded((1, 1), ab, b, check_finite=False)


def _normalize(op, v):
    h = op.grid.h
    return v / np.sqrt(h * np.dot(v, v))


def _inverse_iteration(op, sigma, start, principal: bool):
    d, e = op.diag, op.offdiag
    v = _normalize(op, start)
    tol = 1e-10 * op.scale
    for sweep in range(1, MAX_SWEEPS + 1):
        if principal:
            w = _thomas(d - sigma, e, v)
        else:
            try:
                w = _banded_solve(d, e, sigma, v)
            except LinAlgError:
                sigma -= 1e-12 * op.scale
                continue
        if not np.all(np.isfinite(w)):
            raise EigenConvergenceError("inverse iteration produced non-finite values")
        w = _normalize(op, w)
        if np.dot(w, v) < 0:
            w = -w
        lam = op.rayleigh(w)
        resid = np.max(np.abs(op.apply(w) - lam * w))
        if principal:
            # componentwise: exponentially small tails must settle too
            change = np.max(np.abs(w - v) / np.abs(w))
            v = w
            if resid <= tol and change <= TAIL_RTOL:
                return lam, v, sweep
            continue
        change = np.max(np.abs(w - v))
        v = w
        if resid <= tol and change <= 1e-12 * max(1.0, np.max(np.abs(v))):
            return lam, v, sweep
        if resid <= 1e-3 * tol:
            return lam, v, sweep
    raise EigenConvergenceError(f"inverse iteration did not converge in {MAX_SWEEPS} sweeps")


def principal_eigenpair(op: SchrodingerOperator):
    """Lowest eigenvalue and its positive eigenvector with ``integrate(v**2) == 1``."""
    d, e = op.diag, op.offdiag
    V = op.potential
    # nu*L >= 0 gives min V <= lambda_0; the constant test vector gives mean V >= lambda_0
    lo = float(V.min())
    hi = float(V.mean())
    if hi - lo <= 4 * np.finfo(float).eps * max(abs(hi), 1.0):
        v = np.ones(op.grid.M)
        return op.rayleigh(v), v
    hi = hi + 1e-14 * max(abs(hi), 1.0)
    lo, hi = bisect_eigenvalue(d, e, 0, lo - 1e-14 * max(abs(lo), 1.0), hi)
    sigma = lo - max(hi - lo, 1e-14 * op.scale)
    lam, v, _ = _inverse_iteration(op, sigma, np.ones(op.grid.M), principal=True)
    if np.mean(v) < 0:
        v = -v
    if not np.all(v > 0):
        raise EigenConvergenceError("principal eigenvector is not strictly positive")
    return lam, v


def kth_eigenpair(op: SchrodingerOperator, k: int):
    """k-th smallest eigenpair, vector normalized with a positive first entry."""
    M = op.grid.M
    if not 0 <= k < M:
        raise ValueError(f"eigenvalue index {k} out of range for M = {M}")
    if k == 0:
        return principal_eigenpair(op)
    d, e = op.diag, op.offdiag
    lo, hi = bisect_eigenvalue(d, e, k)
    sigma = 0.5 * (lo + hi)
    # deterministic start with components along every mode
    start = np.cos(k * np.pi * op.grid.nodes) + 1e-3 * np.sin(np.arange(1, M + 1) * 1.618)
    lam, v, _ = _inverse_iteration(op, sigma, start, principal=False)
    if v[0] < 0:
        v = -v
    return lam, v

"""Cell-centered grid on (0, 1) with homogeneous Neumann conditions.

Nodes sit at cell midpoints, ``x_j = (j + 1/2) h``.  The Laplacian uses
mirrored ghost cells, so the first and last rows only see one neighbour.
Edge derivatives live on the ``M - 1`` interior cell faces; the two boundary
faces carry zero flux.  With these choices

    h * sum(f * (L g)) == h * sum(df * dg)

holds exactly (summation by parts), which is what makes the energy identities
of the solver checkable to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIN_CELLS = 8


@dataclass(frozen=True)
class Grid:
    M: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.M) != self.M or self.M < MIN_CELLS:
            raise ValueError(f"grid needs an integer M >= {MIN_CELLS}, got {self.M!r}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "h", 1.0 / self.M)
        nodes = (np.arange(self.M) + 0.5) * self.h
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)

    @property
    def edges(self) -> np.ndarray:
        """Interior cell faces x = h, 2h, ..., (M-1)h."""
        return np.arange(1, self.M) * self.h

    def field(self, values) -> np.ndarray:
        arr = np.asarray(values, dtype=float)
        if arr.shape != (self.M,):
            raise ValueError(f"field has shape {arr.shape}, grid expects ({self.M},)")
        return arr

    def sample(self, func) -> np.ndarray:
        return np.asarray(func(self.nodes), dtype=float) * np.ones(self.M)


@dataclass(frozen=True)
class NeumannLaplacian:
    """Symmetric tridiagonal matrix of ``w -> -w''`` with mirrored ghosts."""

    grid: Grid

    @property
    def diag(self) -> np.ndarray:
        h2 = self.grid.h**2
        d = np.full(self.grid.M, 2.0 / h2)
        d[0] = d[-1] = 1.0 / h2
        return d

    @property
    def offdiag(self) -> np.ndarray:
        return np.full(self.grid.M - 1, -1.0 / self.grid.h**2)

    def apply(self, f) -> np.ndarray:
        return apply_laplacian(self, f)

    def dense(self) -> np.ndarray:
        e = self.offdiag
        return np.diag(self.diag) + np.diag(e, 1) + np.diag(e, -1)

    def sparse(self):
        import scipy.sparse as sp

        e = self.offdiag
        return sp.diags([e, self.diag, e], [-1, 0, 1], format="csr")

    def eigenvalue(self, k: int) -> float:
        """Closed-form k-th eigenvalue (2/h^2)(1 - cos(k pi h)).

        Evaluated as (4/h^2) sin^2(k pi h / 2) to avoid cancellation at fine h.
        """
        h = self.grid.h
        return 4.0 / h**2 * np.sin(0.5 * k * np.pi * h) ** 2


def integrate(grid: Grid, f) -> float:
    """Midpoint rule h * sum(f)."""
    return float(grid.h * np.sum(grid.field(f)))


def inner(grid: Grid, f, g) -> float:
    return float(grid.h * np.dot(grid.field(f), grid.field(g)))


def l2_norm(grid: Grid, f) -> float:
    return float(np.sqrt(inner(grid, f, f)))


def apply_laplacian(lap: NeumannLaplacian, f) -> np.ndarray:
    f = lap.grid.field(f)
    # flux form keeps the row sums exactly zero
    flux = np.zeros(lap.grid.M + 1)
    flux[1:-1] = np.diff(f) / lap.grid.h
    return -np.diff(flux) / lap.grid.h


def derivative(grid: Grid, f) -> np.ndarray:
    """Forward differences on the M - 1 interior edges."""
    return np.diff(grid.field(f)) / grid.h


def node_derivative(grid: Grid, f) -> np.ndarray:
    """Edge derivatives averaged back to nodes; boundary faces count as zero."""
    d = np.zeros(grid.M + 1)
    d[1:-1] = derivative(grid, f)
    return 0.5 * (d[:-1] + d[1:])


def dirichlet_energy(grid: Grid, f) -> float:
    """Discrete ``int |f'|^2`` over interior edges."""
    d = derivative(grid, f)
    return float(grid.h * np.dot(d, d))


def normalize(grid: Grid, f, mass: float = 1.0) -> np.ndarray:
    """Rescale so that ``integrate(f**2) == mass``."""
    f = grid.field(f)
    return f * np.sqrt(mass / inner(grid, f, f))


def cumulative_integral(grid: Grid, f, anchor: float) -> np.ndarray:
    """Values of ``int_anchor^x f`` at every node (trapezoid between nodes).

    The anchor may lie anywhere in [0, 1]; the integrand is linearly
    interpolated between neighbouring nodes.
    """
    f = grid.field(f)
    x = grid.nodes
    prim = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(x))])
    return prim - float(np.interp(anchor, x, prim))

"""Hopf-Cole map from the reduced system back to the stationary MFG system.

With ``nu = 2 nt^2``, ``m_i = v_i^2`` and ``u_i = -2 nt ln v_i`` the pair
``(u_i, m_i)`` solves

    -nt u_i'' + |u_i'|^2 / 2 + lambda_i = g_i(m_j),
    -nt m_i'' - (u_i' m_i)' = 0,

with the same multipliers.  The residuals below are discrete and vanish to
second order in h on converged states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid1d import Grid, derivative, integrate
from .interactions import InteractionPair
from .nash import SolutionState

MASS_TOL = 1e-10


@dataclass(frozen=True)
class MFGState:
    nu_tilde: float
    m1: np.ndarray
    m2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    lambda1: float
    lambda2: float
    grid: Grid

    def __post_init__(self):
        for name in ("m1", "m2"):
            m = self.grid.field(getattr(self, name))
            if not np.all(m > 0):
                raise ValueError(f"{name} must be strictly positive")
            if abs(integrate(self.grid, m) - 1.0) > MASS_TOL:
                raise ValueError(f"{name} does not have unit mass")

    @property
    def nu(self) -> float:
        return 2.0 * self.nu_tilde**2

    def to_state(self) -> SolutionState:
        """Inverse map ``v_i = sqrt(m_i)``."""
        return SolutionState(self.nu, np.sqrt(self.m1), np.sqrt(self.m2), self.lambda1, self.lambda2, self.grid)


def to_mfg(state: SolutionState) -> MFGState:
    v1, v2 = state.v1, state.v2
    if not (np.all(v1 > 0) and np.all(v2 > 0)):
        raise ValueError("Hopf-Cole map needs strictly positive components")
    nt = math.sqrt(state.nu / 2.0)
    return MFGState(nt, v1**2, v2**2, -2 * nt * np.log(v1), -2 * nt * np.log(v2),
                    state.lambda1, state.lambda2, state.grid)


def _flux_divergence(grid: Grid, flux_edges: np.ndarray) -> np.ndarray:
    """-(F_{j+1/2} - F_{j-1/2}) / h with zero flux through the boundary."""
    F = np.zeros(grid.M + 1)
    F[1:-1] = flux_edges
    return -np.diff(F) / grid.h


def _edge_mean(m: np.ndarray, kind: str) -> np.ndarray:
    if kind == "geometric":
        return np.sqrt(m[:-1] * m[1:])
    if kind == "arithmetic":
        return 0.5 * (m[:-1] + m[1:])
    raise ValueError(f"unknown edge mean {kind!r}")


def mfg_residuals(mfg: MFGState, pair: InteractionPair, edge_mean: str = "geometric") -> dict:
    """Sup-norm residuals of the HJB and Fokker-Planck equations per population."""
    grid = mfg.grid
    out = {}
    comps = ((mfg.u1, mfg.m1, mfg.m2, mfg.lambda1, pair.g1), (mfg.u2, mfg.m2, mfg.m1, mfg.lambda2, pair.g2))
    for i, (u, m, m_other, lam, g) in enumerate(comps, start=1):
        du = derivative(grid, u)
        dm = derivative(grid, m)
        lap_u = _flux_divergence(grid, -du)  # u''
        # |u'|^2 at the nodes: average of the two adjacent faces (boundary faces carry zero)
        sq = np.zeros(grid.M + 1)
        sq[1:-1] = du**2
        grad2 = 0.5 * (sq[:-1] + sq[1:])
        hjb = -mfg.nu_tilde * lap_u + 0.5 * grad2 + lam - g(m_other)
        fp = _flux_divergence(grid, mfg.nu_tilde * dm + du * _edge_mean(m, edge_mean))
        out[f"hjb{i}"] = float(np.max(np.abs(hjb)))
        out[f"fp{i}"] = float(np.max(np.abs(fp)))
    return out


def segregation_from_mfg(mfg: MFGState) -> float:
    return integrate(mfg.grid, np.sqrt(mfg.m1 * mfg.m2))

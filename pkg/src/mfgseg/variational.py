"""Direct minimization of the coupled Dirichlet energy for linear interactions.

For ``g_i(s) = gamma_i s`` the rescaled pair ``vt_1 = sqrt(gamma_2) v_1``,
``vt_2 = sqrt(gamma_1) v_2`` with ``beta = 1/nu`` minimizes

    J_beta(vt_1, vt_2) = int |vt_1'|^2 + |vt_2'|^2 + beta vt_1^2 vt_2^2

over ``int vt_1^2 = gamma_2``, ``int vt_2^2 = gamma_1``.  Minimizing in one
component with the other frozen is a principal eigenproblem, so alternating
the two exact half-steps never increases the energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eigen import SchrodingerOperator, principal_eigenpair
from .grid1d import Grid, NeumannLaplacian, dirichlet_energy, integrate, normalize
from .nash import SolutionState, pde_residuals

NONTRIVIAL_TOL = 1e-6


@dataclass(frozen=True)
class VariationalProblem:
    gamma1: float
    gamma2: float
    beta: float
    grid: Grid

    def __post_init__(self):
        for name in ("gamma1", "gamma2", "beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def masses(self) -> tuple[float, float]:
        """Constraint values for (vt_1, vt_2)."""
        return self.gamma2, self.gamma1

    def trivial(self):
        one = np.ones(self.grid.M)
        return math.sqrt(self.gamma2) * one, math.sqrt(self.gamma1) * one


@dataclass
class MinimizerResult:
    vtilde1: np.ndarray
    vtilde2: np.ndarray
    c_beta: float
    nontrivial: bool
    iterations: int
    multipliers: tuple = (math.nan, math.nan)
    converged: bool = True

    def coupling(self, prob: VariationalProblem) -> float:
        """``beta * int vt_1^2 vt_2^2``."""
        return prob.beta * integrate(prob.grid, self.vtilde1**2 * self.vtilde2**2)


def j_beta(prob: VariationalProblem, v1, v2) -> float:
    g = prob.grid
    v1, v2 = g.field(v1), g.field(v2)
    return dirichlet_energy(g, v1) + dirichlet_energy(g, v2) + prob.beta * integrate(g, v1**2 * v2**2)


def competitor(prob: VariationalProblem):
    """Positive and negative parts of the first Neumann mode, scaled to the constraints."""
    g = prob.grid
    psi = np.cos(np.pi * g.nodes)
    plus, minus = np.maximum(psi, 0.0), np.maximum(-psi, 0.0)
    return normalize(g, plus, prob.gamma2), normalize(g, minus, prob.gamma1)


def _half_step(prob: VariationalProblem, other, mass):
    op = SchrodingerOperator(1.0, prob.beta * other**2, NeumannLaplacian(prob.grid))
    mu, v = principal_eigenpair(op)
    return mu, normalize(prob.grid, v, mass)


def _descend(prob: VariationalProblem, start, tol: float, max_iters: int) -> MinimizerResult:
    v1, v2 = (np.asarray(s, dtype=float).copy() for s in start)
    m1, m2 = prob.masses
    v1, v2 = normalize(prob.grid, v1, m1), normalize(prob.grid, v2, m2)
    mu = (math.nan, math.nan)
    converged = False
    scale = max(math.sqrt(m1), math.sqrt(m2))
    for it in range(1, max_iters + 1):
        mu1, n1 = _half_step(prob, v2, m1)
        mu2, n2 = _half_step(prob, n1, m2)
        change = max(np.max(np.abs(n1 - v1)), np.max(np.abs(n2 - v2)))
        v1, v2, mu = n1, n2, (mu1, mu2)
        if change < tol * scale:
            converged = True
            break
    t1, t2 = prob.trivial()
    dist = max(np.max(np.abs(v1 - t1)), np.max(np.abs(v2 - t2)))
    return MinimizerResult(v1, v2, j_beta(prob, v1, v2), bool(dist > NONTRIVIAL_TOL), it, mu, converged)


def minimize(prob: VariationalProblem, starts=None, tol: float = 1e-11, max_iters: int = 20000) -> MinimizerResult:
    """Best alternating-minimization result over the given starting pairs.

    Defaults to the constant pair and the sign-split first mode.  Never
    raises; ``converged`` on the result records whether the sup-norm change
    dropped below ``tol``.
    """
    if starts is None:
        starts = [prob.trivial(), competitor(prob)]
    if not starts:
        raise ValueError("need at least one starting pair")
    best = None
    for start in starts:
        res = _descend(prob, start, tol, max_iters)
        if best is None or res.c_beta < best.c_beta:
            best = res
    return best


@dataclass
class GammaLimit:
    c_inf: float
    x0: float
    profiles: tuple


def gamma_limit_reference(gamma1: float, gamma2: float, grid: Grid | None = None) -> GammaLimit:
    """Limit energy, interface point and segregated profiles as beta -> infinity."""
    if not (gamma1 > 0 and gamma2 > 0):
        raise ValueError("gammas must be positive")
    c1, c2 = gamma1 ** (1 / 3), gamma2 ** (1 / 3)
    x0 = c2 / (c1 + c2)
    c_inf = math.pi**2 / 4 * (c1 + c2) ** 3
    profiles = ()
    if grid is not None:
        x = grid.nodes
        V1 = np.where(x <= x0, math.sqrt(2 * gamma2 / x0) * np.cos(np.pi * x / (2 * x0)), 0.0)
        V2 = np.where(x >= x0, math.sqrt(2 * gamma1 / (1 - x0)) * np.cos(np.pi * (1 - x) / (2 * (1 - x0))), 0.0)
        profiles = (V1, V2)
    return GammaLimit(c_inf, x0, profiles)


def monotone_gamma_check(gamma1: float, gamma2: float, beta_list, grid: Grid, tol: float = 1e-11) -> list[float]:
    """c_beta along an increasing beta sweep, each run warm-started from the last minimizer."""
    betas = list(beta_list)
    if any(b1 >= b2 for b1, b2 in zip(betas[:-1], betas[1:])):
        raise ValueError("beta list must be strictly increasing")
    out = []
    prev = None
    for beta in betas:
        prob = VariationalProblem(gamma1, gamma2, beta, grid)
        starts = [prob.trivial(), competitor(prob)]
        if prev is not None:
            starts.append((prev.vtilde1, prev.vtilde2))
        prev = minimize(prob, starts, tol=tol)
        out.append(prev.c_beta)
    return out


def to_nash(prob: VariationalProblem, result: MinimizerResult) -> SolutionState:
    """Map a minimizer back to an equilibrium with ``nu = 1/beta``."""
    v1 = result.vtilde1 / math.sqrt(prob.gamma2)
    v2 = result.vtilde2 / math.sqrt(prob.gamma1)
    lam = tuple(m / prob.beta for m in result.multipliers)
    return SolutionState(1.0 / prob.beta, v1, v2, lam[0], lam[1], prob.grid)


def nash_residuals(prob: VariationalProblem, result: MinimizerResult):
    from .interactions import linear_pair

    return pde_residuals(to_nash(prob, result), linear_pair(prob.gamma1, prob.gamma2))

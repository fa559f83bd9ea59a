"""Nash equilibria of the two-population system by damped best response.

A state ``(nu, v1, v2, lambda1, lambda2)`` solves

    -nu v_i'' + g_i(v_j^2) v_i = lambda_i v_i,   int v_i^2 = 1,   v_i > 0,

with Neumann conditions on (0, 1).  Each component is the principal
eigenfunction of the operator built from the other one, so a fixed point of
the best-response map is an equilibrium.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .eigen import SchrodingerOperator, principal_eigenpair
from .grid1d import Grid, NeumannLaplacian, derivative, integrate, normalize
from .interactions import InteractionPair, audit

log = logging.getLogger(__name__)

MASS_TOL = 1e-10


class NotConverged(RuntimeError):
    def __init__(self, message, state=None, iterations=0):
        super().__init__(message)
        self.state = state
        self.iterations = iterations


@dataclass(frozen=True)
class SolutionState:
    nu: float
    v1: np.ndarray
    v2: np.ndarray
    lambda1: float
    lambda2: float
    grid: Grid
    tol: float = 1e-8
    iterations: int = 0
    residuals: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        object.__setattr__(self, "v1", self.grid.field(self.v1))
        object.__setattr__(self, "v2", self.grid.field(self.v2))
        object.__setattr__(self, "lambda1", float(self.lambda1))
        object.__setattr__(self, "lambda2", float(self.lambda2))

    @property
    def beta(self) -> float:
        return 1.0 / self.nu

    @property
    def components(self):
        return self.v1, self.v2

    @property
    def lambdas(self):
        return self.lambda1, self.lambda2

    def reflected(self) -> "SolutionState":
        """Mirror x -> 1 - x (components keep their identity)."""
        return replace(self, v1=self.v1[::-1].copy(), v2=self.v2[::-1].copy())

    def check(self, pair: InteractionPair) -> list[str]:
        """Invariant violations (empty when the state is valid)."""
        problems = []
        for i, v in enumerate(self.components, start=1):
            mass = integrate(self.grid, v * v)
            if abs(mass - 1.0) > MASS_TOL:
                problems.append(f"mass of v{i} is {mass!r}")
            if not np.all(v > 0):
                problems.append(f"v{i} is not strictly positive")
        res = pde_residuals(self, pair)
        for i, r in enumerate(res, start=1):
            if r > self.tol:
                problems.append(f"residual of v{i} is {r:.3e} > {self.tol:.1e}")
        return problems


def trivial_state(grid: Grid, nu: float, pair: InteractionPair) -> SolutionState:
    one = np.ones(grid.M)
    return SolutionState(nu, one, one.copy(), float(pair.g1(1.0)), float(pair.g2(1.0)), grid)


def potentials(state: SolutionState, pair: InteractionPair):
    """g_1(v_2^2) and g_2(v_1^2) on the nodes."""
    return pair.g1(state.v2**2), pair.g2(state.v1**2)


def pde_residuals(state: SolutionState, pair: InteractionPair, scaled: bool = True):
    """Sup-norm of ``nu L v_i + g_i(v_j^2) v_i - lambda_i v_i`` per component.

    When ``scaled`` the residual is divided by ``nu/h^2 + max|g_i|``.
    """
    lap = NeumannLaplacian(state.grid)
    out = []
    for v, V, lam in zip(state.components, potentials(state, pair), state.lambdas):
        r = state.nu * lap.apply(v) + (V - lam) * v
        size = np.max(np.abs(r))
        if scaled:
            size /= state.nu / state.grid.h**2 + np.max(np.abs(V))
        out.append(float(size))
    return tuple(out)


@dataclass
class BestResponseConfig:
    damping: float = 0.5
    max_iters: int = 5000
    tol: float = 1e-10
    perturbation: tuple | None = None  # (mode k, amplitude eps)

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.perturbation is not None:
            k, eps = self.perturbation
            if int(k) != k or k < 1:
                raise ValueError("perturbation mode must be a positive integer")


def kicked_initial(grid: Grid, k: int, eps: float):
    """Trivial pair pushed by +/- eps * sqrt(2) cos(k pi x), renormalized."""
    psi = np.sqrt(2.0) * np.cos(k * np.pi * grid.nodes)
    v1 = normalize(grid, 1.0 + eps * psi)
    v2 = normalize(grid, 1.0 - eps * psi)
    if not (np.all(v1 > 0) and np.all(v2 > 0)):
        raise ValueError("kick amplitude too large: initial fields must stay positive")
    return v1, v2


def best_response(nu: float, pair: InteractionPair, v_other, which: int, grid: Grid | None = None):
    """Principal eigenpair of ``nu L + g_which(v_other^2)``."""
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    v_other = np.asarray(v_other, dtype=float)
    grid = grid or Grid(v_other.size)
    op = SchrodingerOperator(nu, pair[which - 1](v_other**2), NeumannLaplacian(grid))
    return principal_eigenpair(op)


def solve_nash(nu: float, pair: InteractionPair, config: BestResponseConfig | None = None,
               initial=None, grid: Grid | None = None) -> SolutionState:
    """Gauss-Seidel damped best-response iteration.

    Converged when both components move less than ``tol`` in sup norm and both
    multipliers change by less than ``tol`` relatively.  Raises
    :class:`NotConverged` after ``max_iters`` sweeps.
    """
    config = config or BestResponseConfig()
    if initial is None:
        if grid is None:
            raise ValueError("need an initial pair or a grid")
        if config.perturbation is not None:
            initial = kicked_initial(grid, *config.perturbation)
        else:
            initial = (np.ones(grid.M), np.ones(grid.M))
    v1, v2 = (np.asarray(v, dtype=float).copy() for v in initial)
    grid = grid or Grid(v1.size)
    if not (np.all(v1 > 0) and np.all(v2 > 0)):
        raise ValueError("initial fields must be positive")
    v1, v2 = normalize(grid, v1), normalize(grid, v2)
    w = config.damping
    lam = np.array([np.nan, np.nan])
    for it in range(1, config.max_iters + 1):
        l1, b1 = best_response(nu, pair, v2, 1, grid)
        new1 = normalize(grid, (1 - w) * v1 + w * b1)
        l2, b2 = best_response(nu, pair, new1, 2, grid)
        new2 = normalize(grid, (1 - w) * v2 + w * b2)
        change = max(np.max(np.abs(new1 - v1)), np.max(np.abs(new2 - v2)))
        new_lam = np.array([l1, l2])
        dlam = np.max(np.abs(new_lam - lam) / np.maximum(np.abs(new_lam), 1e-300))
        v1, v2, lam = new1, new2, new_lam
        if change < config.tol and (it == 1 or dlam < config.tol):
            break
    else:
        state = SolutionState(nu, v1, v2, lam[0], lam[1], grid, iterations=config.max_iters)
        raise NotConverged(
            f"best response did not converge in {config.max_iters} iterations "
            f"(last change {change:.2e})",
            state=state,
            iterations=config.max_iters,
        )
    # multipliers consistent with the returned fields
    l1, _ = best_response(nu, pair, v2, 1, grid)
    state = SolutionState(nu, v1, v2, l1, lam[1], grid, iterations=it)
    res = pde_residuals(state, pair)
    tol = max(10 * config.tol, 1e-9)
    log.debug("nash nu=%g converged in %d iterations, residuals %s", nu, it, res)
    return replace(state, residuals=res, tol=max(tol, 10 * max(res)))


@dataclass
class IdentityReport:
    id1: tuple
    id2: tuple
    bracket: tuple
    bound: tuple
    trivial: bool
    C_g: float
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.bracket) and all(self.bound)


def _is_trivial(state: SolutionState, atol: float = 1e-9) -> bool:
    return bool(np.max(np.abs(state.v1 - 1)) < atol and np.max(np.abs(state.v2 - 1)) < atol)


def identity_residuals(state: SolutionState, pair: InteractionPair, C_g: float | None = None) -> IdentityReport:
    """Energy identities, multiplier bracketing and the global multiplier bound.

    ``id1`` is ``|nu int|v'|^2 + int g v^2 - lambda|`` and ``id2`` the version
    weighted by ``1/v``.  Both are exact at the discrete level on a converged
    state because the edge derivative and the Laplacian are adjoint.
    """
    grid = state.grid
    h = grid.h
    trivial = _is_trivial(state)
    if C_g is None:
        s_max = max(2.0, 1.01 * float(max(np.max(state.v1**2), np.max(state.v2**2))))
        C_g = max(audit(g, s_max).C_g for g in pair)
    overlap = integrate(grid, state.v1**2 * state.v2**2)
    id1, id2, bracket, bound = [], [], [], []
    for v, V, lam in zip(state.components, potentials(state, pair), state.lambdas):
        dv = derivative(grid, v)
        kinetic = state.nu * h * np.dot(dv, dv)
        id1.append(float(abs(kinetic + integrate(grid, V * v * v) - lam)))
        weighted = state.nu * h * np.sum(dv * dv / (v[:-1] * v[1:]))
        id2.append(float(abs(weighted + lam - integrate(grid, V))))
        slack = 1e-12 * max(1.0, abs(lam))
        if trivial:
            bracket.append(bool(V.min() - slack <= lam <= V.max() + slack))
        else:
            bracket.append(bool(V.min() < lam < V.max()))
        bound.append(bool(overlap / C_g - slack <= lam <= C_g + slack))
    return IdentityReport(tuple(id1), tuple(id2), tuple(bracket), tuple(bound), trivial, float(C_g),
                          {"overlap": overlap})

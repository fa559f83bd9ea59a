"""Pseudo-arclength continuation of solution branches in beta = 1/nu.

The unknown is ``X = (v1, v2, lambda1, lambda2, beta)`` and the residual is

    L v_i + beta g_i(v_j^2) v_i - beta lambda_i v_i = 0      (M rows each)
    h sum v_i^2 - 1 = 0                                      (i = 1, 2)

i.e. the system multiplied through by beta, so the multipliers keep their
meaning and stay O(1) as beta grows.  Branches start at the bifurcation
points ``beta_k = mu_k / (2 sqrt(g_1'(1) g_2'(1)))`` of the trivial branch.

Arclength is measured in the weighted inner product

    <a, b> = h sum(a_v b_v) + a_lambda . b_lambda + a_beta b_beta / beta_ref^2

with ``beta_ref`` the parameter at the base point of the step, so a unit
step in the parameter direction is a relative change of beta.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .grid1d import Grid, NeumannLaplacian, dirichlet_energy, integrate
from .interactions import InteractionPair
from .nash import SolutionState, pde_residuals

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
NEWTON_MAX_ITERS = 25


class Diverged(RuntimeError):
    pass


class BranchIntegrityFailure(RuntimeError):
    def __init__(self, message, branch=None, step=None):
        super().__init__(message)
        self.branch = branch
        self.step = step


class StepUnderflow(RuntimeError):
    def __init__(self, message, branch=None):
        super().__init__(message)
        self.branch = branch


class ResolutionError(ValueError):
    """Requested viscosity is below what the grid can resolve."""


@dataclass(frozen=True)
class ExtendedVector:
    v1: np.ndarray
    v2: np.ndarray
    lambda1: float
    lambda2: float
    beta: float

    @property
    def M(self) -> int:
        return self.v1.size

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.v1, self.v2, [self.lambda1, self.lambda2, self.beta]])

    @classmethod
    def from_array(cls, arr) -> "ExtendedVector":
        arr = np.asarray(arr, dtype=float)
        M = (arr.size - 3) // 2
        return cls(arr[:M].copy(), arr[M:2 * M].copy(), float(arr[-3]), float(arr[-2]), float(arr[-1]))

    @classmethod
    def from_state(cls, state: SolutionState) -> "ExtendedVector":
        return cls(state.v1.copy(), state.v2.copy(), state.lambda1, state.lambda2, 1.0 / state.nu)

    def to_state(self, grid: Grid, **kw) -> SolutionState:
        return SolutionState(1.0 / self.beta, self.v1, self.v2, self.lambda1, self.lambda2, grid, **kw)


def trivial_point(grid: Grid, pair: InteractionPair, beta: float) -> ExtendedVector:
    one = np.ones(grid.M)
    return ExtendedVector(one, one.copy(), float(pair.g1(1.0)), float(pair.g2(1.0)), float(beta))


# --- bifurcation analysis -------------------------------------------------


def bifurcation_points(pair: InteractionPair, k_max: int, grid: Grid | None = None):
    """``(k, beta_k, nu_k)`` for k = 1..k_max.

    With a grid the discrete Neumann eigenvalue replaces ``(k pi)^2``.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    a1, a2 = pair.alphas
    out = []
    for k in range(1, k_max + 1):
        mu = NeumannLaplacian(grid).eigenvalue(k) if grid is not None else (k * math.pi) ** 2
        beta = mu / (2.0 * math.sqrt(a1 * a2))
        out.append((k, beta, 1.0 / beta))
    return out


def neumann_mode(grid: Grid, k: int) -> np.ndarray:
    """sqrt(2) cos(k pi x): an exact, L2-normalized eigenvector of the discrete Laplacian."""
    return np.sqrt(2.0) * np.cos(k * np.pi * grid.nodes)


def kernel_direction(pair: InteractionPair, k: int, grid: Grid) -> ExtendedVector:
    """``(-sqrt(alpha_1) psi_k, sqrt(alpha_2) psi_k, 0, 0, 0)``."""
    if k < 1:
        raise ValueError("kernel direction needs k >= 1")
    a1, a2 = pair.alphas
    psi = neumann_mode(grid, k)
    return ExtendedVector(-math.sqrt(a1) * psi, math.sqrt(a2) * psi, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ExpansionCoefficients:
    A: float
    B: float
    C: float
    beta_star: float

    def to_dict(self) -> dict:
        return {"A": self.A, "B": self.B, "C": self.C, "beta_star": self.beta_star}


def expansion_coefficients(pair: InteractionPair, k: int, grid: Grid) -> ExpansionCoefficients:
    """Closed-form coefficients of the local bifurcation expansion at beta_k.

    Derivatives of g_i are taken at s = 1 and the powers of the normalized
    mode are integrated with the midpoint rule.
    """
    g1, g2 = pair
    d1 = [float(g1(1.0, n)) for n in range(4)]
    d2 = [float(g2(1.0, n)) for n in range(4)]
    p1, p2 = d1[1], d2[1]
    psi = neumann_mode(grid, k)
    int2 = integrate(grid, psi**2)
    int3 = integrate(grid, psi**3)
    int4 = integrate(grid, psi**4)
    beta_star = bifurcation_points(pair, k, grid)[-1][1]
    A = -4.0 * p1 * p2 * int2
    B = beta_star * (2 * d2[2] * p1**1.5 - 2 * d1[2] * p2**1.5 + 3 * p1 * p2 * (math.sqrt(p1) - math.sqrt(p2))) * int3
    bracket = 12 * p1 * p2 * math.sqrt(p1 * p2)
    for (gi, gj) in ((d1, d2), (d2, d1)):
        bracket += -8 * gj[1] ** 2 * gi[3] + 12 * gi[2] * (gj[1] * math.sqrt(gi[1] * gj[1]) - gj[1] ** 2)
    C = beta_star / (-6.0 * A) * bracket * int4
    return ExpansionCoefficients(float(A), float(B), float(C), float(beta_star))


@dataclass(frozen=True)
class LocalExpansion:
    """Numerical reduction of the branch at beta_k: beta = beta_k + beta1 eps + beta2 eps^2.

    ``eps`` is the coefficient of ``v - (1, 1)`` along the (unnormalized)
    kernel direction ``(-sqrt(alpha_1) psi_k, sqrt(alpha_2) psi_k)``, the
    convention of :func:`expansion_coefficients` and :func:`parabola_fit`;
    ``X2`` is the second-order correction, orthogonal to that direction.
    """

    beta1: float
    beta2: float
    beta_star: float
    X2: np.ndarray = field(repr=False)


def _line_derivatives(pair: InteractionPair, X0: ExtendedVector, u: np.ndarray, M: int):
    """Second and third t-derivatives at t = 0 of ``(g_i(v_j^2) - lambda_i) v_i`` along X0 + t u."""
    u1, u2 = u[:M], u[M:2 * M]
    ul = u[2 * M:2 * M + 2]
    out2, out3 = [], []
    for g, vi, vj, ui, uj, dl in ((pair.g1, X0.v1, X0.v2, u1, u2, ul[0]), (pair.g2, X0.v2, X0.v1, u2, u1, ul[1])):
        s = vj**2
        s1, s2 = 2 * vj * uj, 2 * uj**2
        G1 = g(s, 1) * s1
        G2 = g(s, 2) * s1**2 + g(s, 1) * s2
        G3 = g(s, 3) * s1**3 + 3 * g(s, 2) * s1 * s2
        out2.append(G2 * vi + 2 * (G1 - dl) * ui)
        out3.append(G3 * vi + 3 * G2 * ui)
    return np.concatenate(out2), np.concatenate(out3)


def lyapunov_schmidt(pair: InteractionPair, k: int, grid: Grid) -> LocalExpansion:
    """Second-order bifurcation coefficients from the discrete equations.

    Solves the order-eps^2 equation for the correction ``X2`` with a bordered
    system and projects the order-eps^3 equation on the left null vector
    ``(-sqrt(alpha_2) psi, sqrt(alpha_1) psi, 0, 0)``.
    """
    M, h = grid.M, grid.h
    beta_star = bifurcation_points(pair, k, grid)[-1][1]
    X0 = trivial_point(grid, pair, beta_star)
    a1, a2 = pair.alphas
    psi = neumann_mode(grid, k)
    phi = kernel_direction(pair, k, grid).to_array()[:-1]
    Psi = np.concatenate([-math.sqrt(a2) * psi, math.sqrt(a1) * psi, [0.0, 0.0]])
    Jx = jacobian(X0, pair, grid)[:, :-1].tocsc()
    lap = NeumannLaplacian(grid).sparse()

    def d2(a, b):
        # beta * D^2N on the PDE rows, 2h <a_i, b_i> on the constraints
        p, _ = _line_derivatives(pair, X0, a + b, M)
        m, _ = _line_derivatives(pair, X0, a - b, M)
        pde = beta_star * 0.25 * (p - m)
        cons = [2 * h * np.dot(a[:M], b[:M]), 2 * h * np.dot(a[M:2 * M], b[M:2 * M])]
        return np.concatenate([pde, cons])

    def dN(u):
        # mixed beta-X derivative: the PDE rows of the Jacobian without the Laplacian
        r = Jx @ u
        pde = np.concatenate([r[:M] - lap @ u[:M], r[M:2 * M] - lap @ u[M:2 * M]]) / beta_star
        return np.concatenate([pde, [0.0, 0.0]])

    Fbx_phi = dN(phi)
    denom = float(np.dot(Psi, Fbx_phi))
    Q = 0.5 * d2(phi, phi)
    beta1 = -float(np.dot(Psi, Q)) / denom
    rhs = -Q - beta1 * Fbx_phi
    w = np.concatenate([h * phi[:2 * M], [0.0, 0.0]])
    B = sp.bmat([[Jx, sp.csc_matrix(phi[:, None])], [sp.csr_matrix(w[None, :]), None]]).tocsc()
    sol, _ = _solve(B, np.append(rhs, 0.0))
    X2 = sol[:-1]
    _, third = _line_derivatives(pair, X0, phi, M)
    D3 = np.concatenate([beta_star * third, [0.0, 0.0]])
    D2N_phiphi = d2(phi, phi) / beta_star
    D2N_phiphi[2 * M:] = 0.0
    cubic = d2(phi, X2) + D3 / 6.0 + beta1 * dN(X2) + 0.5 * beta1 * D2N_phiphi
    beta2 = -float(np.dot(Psi, cubic)) / denom
    return LocalExpansion(beta1, beta2, beta_star, X2)


# --- residual, Jacobian, Newton ------------------------------------------


def residual(X: ExtendedVector, pair: InteractionPair, grid: Grid) -> np.ndarray:
    """The 2M + 2 equations at X."""
    lap = NeumannLaplacian(grid)
    b = X.beta
    r1 = lap.apply(X.v1) + b * (pair.g1(X.v2**2) - X.lambda1) * X.v1
    r2 = lap.apply(X.v2) + b * (pair.g2(X.v1**2) - X.lambda2) * X.v2
    c1 = grid.h * np.dot(X.v1, X.v1) - 1.0
    c2 = grid.h * np.dot(X.v2, X.v2) - 1.0
    return np.concatenate([r1, r2, [c1, c2]])


def jacobian(X: ExtendedVector, pair: InteractionPair, grid: Grid):
    """Analytic (2M + 2) x (2M + 3) Jacobian with respect to (v1, v2, l1, l2, beta)."""
    M, h, b = grid.M, grid.h, X.beta
    v1, v2 = X.v1, X.v2
    L = NeumannLaplacian(grid).sparse()
    G1, G2 = pair.g1(v2**2), pair.g2(v1**2)
    dG1, dG2 = pair.g1(v2**2, 1), pair.g2(v1**2, 1)
    J11 = L + sp.diags(b * (G1 - X.lambda1))
    J12 = sp.diags(2 * b * dG1 * v2 * v1)
    J21 = sp.diags(2 * b * dG2 * v1 * v2)
    J22 = L + sp.diags(b * (G2 - X.lambda2))
    z = np.zeros(M)
    cols_top = np.column_stack([-b * v1, z, (G1 - X.lambda1) * v1])
    cols_bot = np.column_stack([z, -b * v2, (G2 - X.lambda2) * v2])
    top = sp.hstack([J11, J12, sp.csr_matrix(cols_top)])
    mid = sp.hstack([J21, J22, sp.csr_matrix(cols_bot)])
    cons = np.zeros((2, 2 * M + 3))
    cons[0, :M] = 2 * h * v1
    cons[1, M:2 * M] = 2 * h * v2
    return sp.vstack([top, mid, sp.csr_matrix(cons)]).tocsc()


def metric_weights(grid: Grid, beta_ref: float) -> np.ndarray:
    M = grid.M
    return np.concatenate([np.full(2 * M, grid.h), [1.0, 1.0, 1.0 / beta_ref**2]])


def w_inner(a, b, w) -> float:
    return float(np.sum(w * a * b))


def scaled_residual(X: ExtendedVector, pair: InteractionPair, grid: Grid, r=None) -> float:
    r = residual(X, pair, grid) if r is None else r
    M = grid.M
    out = 0.0
    for i, (v, g, lam) in enumerate(((X.v1, pair.g1(X.v2**2), X.lambda1), (X.v2, pair.g2(X.v1**2), X.lambda2))):
        size = (4.0 / grid.h**2 + X.beta * (np.max(np.abs(g)) + abs(lam))) * max(np.max(np.abs(v)), 1e-300)
        out = max(out, np.max(np.abs(r[i * M:(i + 1) * M])) / size)
    return float(max(out, np.max(np.abs(r[2 * M:]))))


def _solve(J, rhs):
    lu = splu(J, permc_spec="COLAMD")
    return lu.solve(rhs), lu


def _det_sign(lu) -> int:
    diag = lu.U.diagonal()
    sign = int(np.prod(np.sign(diag)))
    for perm in (lu.perm_r, lu.perm_c):
        seen = np.zeros(perm.size, dtype=bool)
        parity = 0
        for i in range(perm.size):
            if not seen[i]:
                j, length = i, 0
                while not seen[j]:
                    seen[j] = True
                    j = perm[j]
                    length += 1
                parity += length - 1
        sign *= -1 if parity % 2 else 1
    return sign


def newton_correct(X: ExtendedVector, pair: InteractionPair, grid: Grid, anchor=None,
                   tol: float = NEWTON_TOL, max_iters: int = NEWTON_MAX_ITERS):
    """Newton corrector.

    ``anchor`` is ``(X_prev, tangent, ds)`` for a pseudo-arclength step (tangent
    given as an array in the weighted metric of ``X_prev.beta``) or ``None`` to
    keep beta frozen.  Returns ``(X, iterations)``; raises :class:`Diverged`.
    """
    x = X.to_array().copy()
    n = x.size
    if anchor is not None:
        X_prev, tangent, ds = anchor
        x_prev = X_prev.to_array()
        w = metric_weights(grid, X_prev.beta)
        t = np.asarray(tangent, dtype=float)
    last = np.inf
    for it in range(max_iters + 1):
        Xc = ExtendedVector.from_array(x)
        if not Xc.beta > 0:
            raise Diverged("beta left the positive half-line")
        r = residual(Xc, pair, grid)
        if anchor is not None:
            r = np.append(r, w_inner(x - x_prev, t, w) - ds)
        err = scaled_residual(Xc, pair, grid, r[: 2 * grid.M + 2])
        if anchor is not None:
            err = max(err, abs(r[-1]))
        if not np.isfinite(err):
            raise Diverged("non-finite residual")
        if err < tol:
            return Xc, it
        if it >= 3 and err > 10 * last:
            raise Diverged(f"residual grew from {last:.2e} to {err:.2e}")
        if it == max_iters:
            break
        last = err
        J = jacobian(Xc, pair, grid)
        if anchor is not None:
            J = sp.vstack([J, sp.csr_matrix(w * t)]).tocsc()
            dx, _ = _solve(J, -r)
        else:
            # frozen beta: drop the last column
            dx = np.zeros(n)
            dx[:-1], _ = _solve(J[:, :-1].tocsc(), -r)
        if not np.all(np.isfinite(dx)):
            raise Diverged("singular Jacobian")
        x = x + dx
    raise Diverged(f"no convergence in {max_iters} iterations (residual {err:.2e})")


def tangent_at(X: ExtendedVector, pair: InteractionPair, grid: Grid, previous):
    """Unit tangent (weighted metric at X.beta) oriented along ``previous``.

    Returns ``(tangent, det_sign)`` where ``det_sign`` is the sign of the
    determinant of the bordered Jacobian.
    """
    w = metric_weights(grid, X.beta)
    J = jacobian(X, pair, grid)
    prev = np.asarray(previous, dtype=float)
    A = sp.vstack([J, sp.csr_matrix(w * prev)]).tocsc()
    rhs = np.zeros(A.shape[0])
    rhs[-1] = 1.0
    t, lu = _solve(A, rhs)
    t = t / math.sqrt(w_inner(t, t, w))
    if w_inner(t, prev, w) < 0:
        t = -t
    return t, _det_sign(lu)


# --- branch tracing -------------------------------------------------------


@dataclass
class StepPolicy:
    eps0: float = 1e-2
    ds0: float | None = None
    ds_min: float = 1e-8
    ds_max: float = 0.5
    grow: float = 1.3
    shrink: float = 0.5
    fast_iters: int = 4
    beta_cap: float = 1e7
    max_steps: int = 5000
    checkpoints_per_decade: int = 4
    integrity_retries: int = 4

    def __post_init__(self):
        if not (0 < self.ds_min <= self.ds_max):
            raise ValueError("need 0 < ds_min <= ds_max")
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if self.checkpoints_per_decade < 0:
            raise ValueError("checkpoints_per_decade must be non-negative")


@dataclass(frozen=True)
class BranchPoint:
    state: SolutionState
    tangent: np.ndarray
    s: float
    newton_iters: int
    stability_indicator: int
    checkpoint: bool = False
    fold: bool = False

    @property
    def beta(self) -> float:
        return self.state.beta

    @property
    def nu(self) -> float:
        return self.state.nu


@dataclass
class Branch:
    k: int
    points: list
    origin: float
    pair: InteractionPair
    grid: Grid
    metadata: dict = field(default_factory=dict)
    folds: list = field(default_factory=list)

    @property
    def betas(self) -> np.ndarray:
        return np.array([p.beta for p in self.points])

    @property
    def nus(self) -> np.ndarray:
        return 1.0 / self.betas

    def checkpoints(self) -> list:
        return [p for p in self.points if p.checkpoint]

    def states(self) -> list:
        return [p.state for p in self.points]


def morphology_label(state: SolutionState) -> tuple[int, int]:
    """Interior critical-point counts of both components."""
    from .asymptotics import count_critical_points

    rep = count_critical_points(state)
    return len(rep.critical_points[0]), len(rep.critical_points[1])


def _checkpoint_betas(beta_lo: float, beta_hi: float, per_decade: int) -> list:
    if per_decade <= 0:
        return []
    lo = math.floor(math.log10(beta_lo) * per_decade) + 1
    hi = math.ceil(math.log10(beta_hi) * per_decade)
    return [10 ** (j / per_decade) for j in range(lo, hi + 1)]


POLISH_TOL = 1e-8


def _polish(st: SolutionState, pair) -> SolutionState:
    """Best-response pass that resolves exponentially small tails to relative accuracy.

    Newton converges in an absolute norm, which leaves tails of size 1e-70
    with no correct digits; the principal eigensolver does not.  The polished
    pair differs from the corrected one at round-off level; if it moves more
    than ``POLISH_TOL`` the corrected state is kept.
    """
    from .nash import best_response

    grid = st.grid
    try:
        _, v1 = best_response(st.nu, pair, st.v2, 1, grid)
        l2, v2 = best_response(st.nu, pair, v1, 2, grid)
        l1, v1 = best_response(st.nu, pair, v2, 1, grid)
    except Exception as exc:  # noqa: BLE001 - diagnostic refinement only
        log.debug("polish skipped at nu=%g: %s", st.nu, exc)
        return st
    move = max(np.max(np.abs(v1 - st.v1)), np.max(np.abs(v2 - st.v2)), abs(l1 - st.lambda1), abs(l2 - st.lambda2))
    if not move <= POLISH_TOL:
        log.debug("polish rejected at nu=%g (moved %.2e)", st.nu, move)
        return st
    return replace(st, v1=v1, v2=v2, lambda1=l1, lambda2=l2)


def _as_state(X: ExtendedVector, pair, grid, iters: int) -> SolutionState:
    st = _polish(X.to_state(grid, iterations=iters), pair)
    res = pde_residuals(st, pair)
    return replace(st, residuals=res, tol=max(1e-9, 10 * max(res)))


def trace_branch(pair: InteractionPair, k: int, target_nu_min: float, steps: StepPolicy | None = None,
                 grid: Grid | None = None, M: int | None = None, check_labels: bool = True) -> Branch:
    """Follow the k-th branch from its bifurcation point down to ``target_nu_min``.

    The first point is the trivial state plus ``eps0`` times the kernel
    direction, oriented so that ``v1`` is larger at x = 0, with beta shifted
    by the second-order prediction of :func:`lyapunov_schmidt`.  Accepted
    points must keep ``k - 1`` interior critical points per component.  Points are also landed exactly on a logarithmic
    ladder of nu values (``checkpoints_per_decade``) and on ``target_nu_min``.
    """
    steps = steps or StepPolicy()
    if grid is None:
        if M is None:
            raise ValueError("need a grid or M")
        grid = Grid(M)
    if k < 1:
        raise ValueError("branch index k must be >= 1")
    if not target_nu_min > 0:
        raise ValueError("target_nu_min must be positive")
    if math.sqrt(target_nu_min) < 3 * grid.h:
        raise ResolutionError(
            f"interface width sqrt(nu) = {math.sqrt(target_nu_min):.3g} is below 3h = {3 * grid.h:.3g}; "
            f"refine the grid (M >= {math.ceil(3 / math.sqrt(target_nu_min))})"
        )
    t0 = time.time()
    beta_k = bifurcation_points(pair, k, grid)[-1][1]
    beta_target = 1.0 / target_nu_min
    coeffs = expansion_coefficients(pair, k, grid)
    kern = kernel_direction(pair, k, grid).to_array()
    # orientation: v1 starts above 1 at x = 0
    kern = -kern
    eps0 = steps.eps0
    base = trivial_point(grid, pair, beta_k)
    w0 = metric_weights(grid, beta_k)
    knorm = math.sqrt(w_inner(kern, kern, w0))
    tau0 = kern / knorm
    local = lyapunov_schmidt(pair, k, grid)
    # the predictor moves along -kernel, i.e. eps = -eps0
    shift = -local.beta1 * eps0 + local.beta2 * eps0**2
    guess = base.to_array() + eps0 * kern
    guess[-1] = beta_k + shift
    X, iters = newton_correct(ExtendedVector.from_array(guess), pair, grid, anchor=(base, tau0, eps0 * knorm))
    tangent, det = tangent_at(X, pair, grid, tau0)
    expected = (k - 1, k - 1)

    branch = Branch(k=k, points=[], origin=beta_k, pair=pair, grid=grid,
                    metadata={"M": grid.M, "pair": pair.to_dict(), "eps0": eps0,
                              "expansion": coeffs.to_dict(),
                              "local_expansion": {"beta1": local.beta1, "beta2": local.beta2}, "started": time.strftime("%Y-%m-%dT%H:%M:%S")})

    def accept(Xa, tan, it, det_sign, s, checkpoint=False, fold=False):
        st = _as_state(Xa, pair, grid, it)
        branch.points.append(BranchPoint(st, tan, s, it, det_sign, checkpoint, fold))
        return st

    if check_labels and morphology_label(X.to_state(grid)) != expected:
        raise BranchIntegrityFailure(
            f"first point of branch {k} has labels {morphology_label(X.to_state(grid))}", branch, 0)
    s = eps0 * knorm
    accept(X, tangent, iters, det, s)
    ladder = [b for b in _checkpoint_betas(X.beta, beta_target, steps.checkpoints_per_decade) if b < beta_target]
    ladder.append(beta_target)
    ds = steps.ds0 if steps.ds0 is not None else min(steps.ds_max, max(steps.ds_min, 2 * eps0 * knorm))
    n_steps = 0
    retries = 0
    while True:
        n_steps += 1
        if n_steps > steps.max_steps:
            log.warning("branch %d: step budget exhausted at beta=%g", k, X.beta)
            break
        x0 = X.to_array()
        try:
            Xn, it = newton_correct(ExtendedVector.from_array(x0 + ds * tangent), pair, grid, anchor=(X, tangent, ds))
            ok_sign = np.all(Xn.v1 > 0) and np.all(Xn.v2 > 0)
            if not ok_sign:
                raise Diverged("lost positivity")
            if Xn.beta < 0.5 * bifurcation_points(pair, 1, grid)[0][1]:
                raise Diverged("stepped below half the first bifurcation value")
        except Diverged as exc:
            ds *= steps.shrink
            log.debug("branch %d: step rejected (%s), ds -> %g", k, exc, ds)
            if ds < steps.ds_min:
                raise StepUnderflow(f"step size underflow at beta={X.beta:.6g}: {exc}", branch) from exc
            continue
        if check_labels:
            labels = morphology_label(Xn.to_state(grid))
            if labels != expected:
                retries += 1
                if retries > steps.integrity_retries or ds * steps.shrink < steps.ds_min:
                    raise BranchIntegrityFailure(
                        f"branch {k}: critical-point counts {labels} != {expected} at beta={Xn.beta:.6g}",
                        branch, n_steps)
                ds *= steps.shrink
                continue
        retries = 0
        tan_n, det_n = tangent_at(Xn, pair, grid, tangent)
        fold = bool(np.sign(tan_n[-1]) != np.sign(tangent[-1]) and tangent[-1] != 0)
        if fold:
            branch.folds.append(Xn.beta)
        # land on checkpoint values of beta crossed by this step
        crossed = [b for b in ladder if (X.beta < b <= Xn.beta) or (Xn.beta <= b < X.beta)]
        crossed.sort(key=lambda b: abs(b - X.beta))
        done = False
        for b in crossed:
            frac = (b - X.beta) / (Xn.beta - X.beta)
            guess = (1 - frac) * x0 + frac * Xn.to_array()
            guess[-1] = b
            Xc, itc = newton_correct(ExtendedVector.from_array(guess), pair, grid, anchor=None)
            if check_labels and morphology_label(Xc.to_state(grid)) != expected:
                raise BranchIntegrityFailure(f"branch {k}: label change at checkpoint beta={b:.6g}", branch, n_steps)
            tan_c, det_c = tangent_at(Xc, pair, grid, tangent)
            accept(Xc, tan_c, itc, det_c, s + frac * ds, checkpoint=True)
            ladder.remove(b)
            if b == beta_target:
                done = True
                break
        if done:
            break
        s += ds
        accept(Xn, tan_n, it, det_n, s, fold=fold)
        X, tangent = Xn, tan_n
        if X.beta > steps.beta_cap:
            log.warning("branch %d: beta cap %g exceeded", k, steps.beta_cap)
            break
        if it <= steps.fast_iters:
            ds = min(ds * steps.grow, steps.ds_max)
    branch.metadata["elapsed_s"] = time.time() - t0
    branch.metadata["steps"] = n_steps
    return branch


def parabola_fit(branch: Branch, n: int = 5):
    """Least-squares fit of ``beta - beta_k = C eps^2`` over the first n points.

    ``eps`` is the coefficient of the mode direction
    ``(sqrt(alpha_1) psi_k, -sqrt(alpha_2) psi_k)`` in ``v - (1, 1)``.
    Returns ``(C_fit, eps, beta)``.
    """
    grid = branch.grid
    a1, a2 = branch.pair.alphas
    psi = neumann_mode(grid, branch.k)
    d1, d2 = math.sqrt(a1) * psi, -math.sqrt(a2) * psi
    pts = branch.points[:n]
    eps = np.array([(grid.h * (np.dot(p.state.v1 - 1, d1) + np.dot(p.state.v2 - 1, d2))) / (a1 + a2) for p in pts])
    beta = np.array([p.beta for p in pts])
    C_fit = float(np.dot(eps**2, beta - branch.origin) / np.dot(eps**2, eps**2))
    return C_fit, eps, beta


def gradient_bound_ok(branch: Branch, C_g: float) -> bool:
    """Every point satisfies ``int |v'|^2 <= C_g beta`` for both components."""
    g = branch.grid
    return all(dirichlet_energy(g, p.state.v1) + dirichlet_energy(g, p.state.v2) <= C_g * p.beta * 2
               and max(dirichlet_energy(g, p.state.v1), dirichlet_energy(g, p.state.v2)) <= C_g * p.beta
               for p in branch.points)

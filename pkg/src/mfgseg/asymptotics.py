"""Segregation, morphology and vanishing-viscosity diagnostics.

Most functions here take a converged :class:`~mfgseg.nash.SolutionState`.
Those that only make sense on the first branch (monotone components) orient
the state first so that ``v1`` is decreasing and ``v2`` increasing, and raise
:class:`NotMonotone` when that is impossible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid1d import Grid, cumulative_integral, derivative, integrate, l2_norm, node_derivative
from .interactions import InteractionPair, h_part
from .nash import SolutionState, potentials

DEAD_BAND = 1e-7
PLATEAU_LEVEL = 1e-3
AITKEN_MAX_RATIO = 0.9
SLACK = 5.0


class NotMonotone(ValueError):
    pass


def segregation_metric(state: SolutionState) -> float:
    """Overlap ``int v1 v2``; equals 1 only at the trivial state."""
    return integrate(state.grid, state.v1 * state.v2)


# --- morphology -----------------------------------------------------------


@dataclass
class MorphologyReport:
    critical_points: tuple  # per component: list of (x, "max" | "min")
    inflection_points: tuple  # per component: list of x
    label: int
    degenerate: bool

    @property
    def counts(self) -> tuple[int, int]:
        return len(self.critical_points[0]), len(self.critical_points[1])


def _sign_changes(signs: np.ndarray):
    """Pairs (a, b) of consecutive nonzero entries with opposite signs."""
    nz = np.flatnonzero(signs)
    out = []
    for a, b in zip(nz[:-1], nz[1:]):
        if signs[a] != signs[b]:
            out.append((a, b))
    return out


def _longest_plateau(signs: np.ndarray, level: np.ndarray) -> int:
    """Longest run of flattened edges where the field is not negligible."""
    best = run = 0
    for s, big in zip(signs, level):
        run = run + 1 if (s == 0 and big) else 0
        best = max(best, run)
    return best


def _critical_points(grid: Grid, v: np.ndarray):
    d = derivative(grid, v)
    band = DEAD_BAND * np.max(np.abs(v)) / grid.h
    signs = np.where(np.abs(d) < band, 0, np.sign(d)).astype(int)
    pts = []
    for a, b in _sign_changes(signs):
        # edge e joins nodes e and e + 1; the extremum sits on nodes a+1..b
        x = float(np.mean(grid.nodes[a + 1:b + 1]))
        pts.append((x, "max" if signs[a] > 0 else "min"))
    # exponentially small tails are flat but not plateaus
    edge_level = np.maximum(v[:-1], v[1:]) > PLATEAU_LEVEL * np.max(np.abs(v))
    return pts, _longest_plateau(signs, edge_level)


def _inflections(grid: Grid, q: np.ndarray, scale: float):
    signs = np.where(np.abs(q) < 1e-12 * scale, 0, np.sign(q)).astype(int)
    x = grid.nodes
    out = []
    for a, b in _sign_changes(signs):
        out.append(float(x[a] + (x[b] - x[a]) * q[a] / (q[a] - q[b])))
    return out


def count_critical_points(state: SolutionState, pair: InteractionPair | None = None) -> MorphologyReport:
    """Interior critical points (with a dead band) and inflection points.

    Inflections are sign changes of ``g_i(v_j^2) - lambda_i``, which has the
    sign of ``v_i''``; they need the interaction pair and are left empty
    without it.
    """
    grid = state.grid
    crit, runs = zip(*(_critical_points(grid, v) for v in state.components))
    if pair is not None:
        infl = tuple(
            _inflections(grid, V - lam, max(1.0, abs(lam)))
            for V, lam in zip(potentials(state, pair), state.lambdas)
        )
    else:
        infl = ([], [])
    degenerate = max(runs) > 3 or len(crit[0]) != len(crit[1])
    if pair is not None and any(len(i) != len(c) + 1 for i, c in zip(infl, crit)):
        degenerate = True
    return MorphologyReport(tuple(crit), infl, len(crit[0]), bool(degenerate))


def orient_first_branch(state: SolutionState) -> tuple[SolutionState, bool]:
    """Return the state with v1 decreasing / v2 increasing, reflecting if needed."""
    rep = count_critical_points(state)
    if rep.counts != (0, 0):
        raise NotMonotone(f"components have interior critical points {rep.counts}")
    s1 = np.sign(state.v1[-1] - state.v1[0])
    s2 = np.sign(state.v2[-1] - state.v2[0])
    if s1 == 0 or s2 == 0 or s1 == s2:
        raise NotMonotone("components are not strictly monotone in opposite senses")
    if s1 > 0:
        return state.reflected(), True
    return state, False


# --- interface ------------------------------------------------------------


@dataclass
class InterfaceReport:
    x_m: float
    m: float
    xi1: float
    xi2: float
    lambda_over_nu: tuple
    m4_over_nu: float
    reflected: bool = False


def _root(x, f):
    """Linear interpolation of the single sign change of f."""
    idx = np.flatnonzero(np.sign(f[:-1]) != np.sign(f[1:]))
    if idx.size == 0:
        raise NotMonotone("no sign change found")
    j = int(idx[0])
    return float(x[j] + (x[j + 1] - x[j]) * f[j] / (f[j] - f[j + 1]))


def interface_report(state: SolutionState, pair: InteractionPair) -> InterfaceReport:
    st, reflected = orient_first_branch(state)
    x = st.grid.nodes
    d = st.v1 - st.v2
    if not (d[0] > 0 > d[-1]):
        raise NotMonotone("v1 - v2 does not change sign inside the domain")
    x_m = _root(x, d)
    m = float(np.interp(x_m, x, st.v1))
    V1, V2 = potentials(st, pair)
    xi1 = _root(x, V1 - st.lambda1)
    xi2 = _root(x, V2 - st.lambda2)
    return InterfaceReport(
        x_m=x_m,
        m=m,
        xi1=xi1,
        xi2=xi2,
        lambda_over_nu=(st.lambda1 / st.nu, st.lambda2 / st.nu),
        m4_over_nu=m**4 / st.nu,
        reflected=reflected,
    )


# --- limit profiles -------------------------------------------------------


@dataclass
class LimitProfile:
    ell1: float
    ell2: float
    x0: float
    V1: np.ndarray
    V2: np.ndarray

    @property
    def ratio(self) -> float:
        return self.ell2 / self.ell1


def limit_profile(pair: InteractionPair, grid: Grid) -> LimitProfile:
    """Segregated profiles as nu -> 0, built from gamma_i = g_i'(0)."""
    c1, c2 = (g ** (1.0 / 3.0) for g in pair.gammas)
    x0 = c2 / (c1 + c2)
    ell1 = (math.pi / (2 * x0)) ** 2
    ell2 = (math.pi / (2 * (1 - x0))) ** 2
    return LimitProfile(ell1, ell2, x0, *profiles_from_ell(grid, ell1, ell2))


def profiles_from_ell(grid: Grid, ell1: float, ell2: float):
    x = grid.nodes
    r1, r2 = math.sqrt(ell1), math.sqrt(ell2)
    V1 = 2 / math.sqrt(math.pi) * ell1**0.25 * np.cos(r1 * x) * (x <= math.pi / (2 * r1))
    V2 = 2 / math.sqrt(math.pi) * ell2**0.25 * np.cos(r2 * (x - 1)) * (x >= 1 - math.pi / (2 * r2))
    return V1, V2


def profile_error(state: SolutionState, pair: InteractionPair) -> tuple[float, float]:
    """L2 distance of each component to its limit profile (first-branch orientation)."""
    st, _ = orient_first_branch(state)
    lim = limit_profile(pair, st.grid)
    return l2_norm(st.grid, st.v1 - lim.V1), l2_norm(st.grid, st.v2 - lim.V2)


# --- joint energy ---------------------------------------------------------


@dataclass
class JointEnergy:
    values: np.ndarray
    max_deviation: float
    left: float  # lambda_1 v_1(0)^2 / gamma_1
    right: float  # lambda_2 v_2(1)^2 / gamma_2
    x_m: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def endpoint_gaps(self) -> tuple[float, float]:
        return abs(self.values[0] - self.left), abs(self.values[-1] - self.right)


def joint_energy(state: SolutionState, pair: InteractionPair) -> JointEnergy:
    """Pointwise first integral T(x); constant on exact solutions.

    With ``g_i(s) = gamma_i s + h_i(s)``, T combines the kinetic terms
    ``nu v_i'^2``, the potential terms ``(lambda_i - h_i(v_j^2)) v_i^2`` with
    their correction integrals anchored at the interface, and ``-v1^2 v2^2``.
    """
    st, _ = orient_first_branch(state)
    grid = st.grid
    x_m = interface_report(st, pair).x_m
    g1, g2 = pair
    v1, v2 = st.v1, st.v2
    d1, d2 = node_derivative(grid, v1), node_derivative(grid, v2)
    s1, s2 = v2**2, v1**2
    corr1 = 2 * cumulative_integral(grid, h_part(g1, 1, s1) * d2 * v2 * v1**2, x_m)
    corr2 = 2 * cumulative_integral(grid, h_part(g2, 1, s2) * d1 * v1 * v2**2, x_m)
    T = (
        (st.nu * d1**2 + (st.lambda1 - h_part(g1, 0, s1)) * v1**2 + corr1) / g1.gamma
        + (st.nu * d2**2 + (st.lambda2 - h_part(g2, 0, s2)) * v2**2 + corr2) / g2.gamma
        - v1**2 * v2**2
    )
    return JointEnergy(
        values=T,
        max_deviation=float(T.max() - T.min()),
        left=st.lambda1 * v1[0] ** 2 / g1.gamma,
        right=st.lambda2 * v2[-1] ** 2 / g2.gamma,
        x_m=x_m,
    )


def trivial_joint_energy(state: SolutionState, pair: InteractionPair) -> np.ndarray:
    """T evaluated without the interface anchor (h-part integrals vanish when v is constant)."""
    g1, g2 = pair
    v1, v2 = state.v1, state.v2
    d1, d2 = node_derivative(state.grid, v1), node_derivative(state.grid, v2)
    return (
        (state.nu * d1**2 + (state.lambda1 - h_part(g1, 0, v2**2)) * v1**2) / g1.gamma
        + (state.nu * d2**2 + (state.lambda2 - h_part(g2, 0, v1**2)) * v2**2) / g2.gamma
        - v1**2 * v2**2
    )


# --- a priori estimates -------------------------------------------------


def _slack(grid: Grid, rhs):
    return SLACK * grid.h * np.maximum(np.abs(rhs), 1.0)


def apriori_bounds_check(state: SolutionState, pair: InteractionPair) -> list[dict]:
    """Evaluate the first-branch a priori inequalities; return the violations.

    Each right-hand side gets ``5h * max(|rhs|, 1)`` of slack.  Only the
    oscillation and gradient estimates apply to states that are not
    monotone (the trivial one, higher branches); the rest are skipped.
    """
    grid = state.grid
    x = grid.nodes
    violations = []

    def report(name, where, lhs, rhs):
        lhs = np.atleast_1d(np.asarray(lhs, dtype=float))
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float)) * np.ones_like(lhs)
        bad = lhs > rhs + _slack(grid, rhs)
        if np.any(bad):
            j = int(np.argmax(lhs - rhs))
            where = np.atleast_1d(where) * np.ones_like(lhs)
            violations.append({"check": name, "x": float(where[j]), "margin": float(lhs[j] - rhs[j])})

    try:
        st, _ = orient_first_branch(state)
        monotone = True
    except NotMonotone:
        st, monotone = state, False
    v1, v2 = st.v1, st.v2
    if monotone:
        report("bound12abv:v1", x, v1**2, 1.0 / x)
        report("bound12abv:v2", x, v2**2, 1.0 / (1.0 - x))
    for i, (v, lam) in enumerate(zip(st.components, st.lambdas), start=1):
        report(f"inftybound:v{i}", 0.0, abs(v[0] ** 2 - v[-1] ** 2), 2 * lam / st.nu)
        dv = derivative(grid, v)
        report(f"energyest:v{i}", 0.0, st.nu * np.max(np.abs(dv), initial=0.0) ** 2, lam * np.max(np.abs(v)) ** 2)
    if not monotone:
        return violations
    ifc = interface_report(st, pair)
    xi1, xi2 = ifc.xi1, ifc.xi2
    a = np.interp(xi1, x, v1)
    report("x1ineq", xi1, xi1 * (v1[0] ** 2 + v1[0] * a + a**2), 3.0)
    b = np.interp(xi2, x, v2)
    report("x2ineq", xi2, (1 - xi2) * (v2[-1] ** 2 + v2[-1] * b + b**2), 3.0)
    e = grid.edges
    dv1, dv2 = np.abs(derivative(grid, v1)), np.abs(derivative(grid, v2))
    x0s = x[x >= xi1]
    if x0s.size:
        lever = np.clip(e[None, :] - x0s[:, None], 0.0, None)
        worst = np.max(dv1[None, :] * lever, axis=1)
        report("v1pineq", x0s, worst, x0s**-0.5)
    x0s = x[x <= xi2]
    if x0s.size:
        lever = np.clip(x0s[:, None] - e[None, :], 0.0, None)
        worst = np.max(dv2[None, :] * lever, axis=1)
        report("v2pineq", x0s, worst, (1 - x0s) ** -0.5)
    return violations


# --- scaling laws ---------------------------------------------------------


def aitken(f1: float, f2: float, f3: float) -> float:
    """Limit of a geometrically converging triple; falls back to f3."""
    d1, d2 = f2 - f1, f3 - f2
    denom = d2 - d1
    if denom == 0 or d1 == 0 or not (0 < d2 / d1 < AITKEN_MAX_RATIO):
        return f3
    return f3 - d2 * d2 / denom


@dataclass
class ScalingReport:
    rows: list
    drift: dict
    extrapolated: dict
    extrapolation_nus: tuple = ()
    notes: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])


SCALING_KEYS = ("lambda1_over_nu", "lambda2_over_nu", "m4_over_nu", "x_m", "xi1", "xi2", "seg")
# quantities with a positive limit; the positions and the overlap are reported raw
EXTRAPOLATED_KEYS = ("lambda1_over_nu", "lambda2_over_nu", "m4_over_nu")


def scaling_row(state: SolutionState, pair: InteractionPair) -> dict:
    ifc = interface_report(state, pair)
    return {
        "nu": state.nu,
        "lambda1_over_nu": ifc.lambda_over_nu[0],
        "lambda2_over_nu": ifc.lambda_over_nu[1],
        "m4_over_nu": ifc.m4_over_nu,
        "x_m": ifc.x_m,
        "xi1": ifc.xi1,
        "xi2": ifc.xi2,
        "m": ifc.m,
        "seg": segregation_metric(state),
    }


def _value_at(nus, vals, nu):
    order = np.argsort(np.log(nus))
    return float(np.interp(np.log(nu), np.log(nus)[order], np.asarray(vals)[order]))


def scaling_law_report(branch, pair: InteractionPair | None = None) -> ScalingReport:
    """Per-point first-branch diagnostics, last-decade drift and extrapolated limits.

    ``lambda_i / nu`` and ``m^4 / nu`` are extrapolated with Aitken's delta^2
    over three points spaced half a decade apart ending at the smallest nu
    (the branch's exact checkpoints when available); the interface positions
    and the overlap are reported at the smallest nu.
    """
    pair = pair or branch.pair
    if branch.k != 1:
        raise ValueError("scaling laws are defined on the first branch only")
    rows = []
    notes = []
    for p in branch.points:
        try:
            rows.append(scaling_row(p.state, pair) | {"checkpoint": p.checkpoint})
        except NotMonotone as exc:
            notes.append(f"nu={p.nu:.4g}: {exc}")
    if not rows:
        return ScalingReport([], {}, {}, notes=notes)
    nus = np.array([r["nu"] for r in rows])
    nu_end = float(nus.min())
    drift = {}
    for key in SCALING_KEYS:
        vals = [r[key] for r in rows]
        end = _value_at(nus, vals, nu_end)
        if nus.max() >= 10 * nu_end * (1 - 1e-9):
            start = _value_at(nus, vals, 10 * nu_end)
            drift[key] = abs(end - start) / abs(end) if end != 0 else math.inf
    targets = [nu_end * 10.0, nu_end * 10**0.5, nu_end]
    pool = [r for r in rows if r["checkpoint"]] or rows
    pnus = np.array([r["nu"] for r in pool])
    picks = []
    for t in targets:
        j = int(np.argmin(np.abs(np.log(pnus) - math.log(t))))
        if abs(math.log(pnus[j]) - math.log(t)) < 0.05:
            picks.append(pool[j])
    last = rows[int(np.argmin(nus))]
    extrapolated = {key: last[key] for key in SCALING_KEYS}
    used = ()
    if len(picks) == 3:
        for key in EXTRAPOLATED_KEYS:
            extrapolated[key] = aitken(*(r[key] for r in picks))
        used = tuple(r["nu"] for r in picks)
    else:
        notes.append("no half-decade checkpoint ladder; reporting last values")
    return ScalingReport(rows, drift, extrapolated, used, notes)

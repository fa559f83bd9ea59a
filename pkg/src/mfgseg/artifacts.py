"""Reading, writing and re-validating solution, branch and sweep artifacts.

JSON floats are written with ``repr`` (shortest round-trip form) and CSV
columns with 17 significant digits, so a stored state reloads bit for bit.
Anything time-dependent goes into a ``metadata`` block that is excluded from
determinism checks.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .asymptotics import (
    NotMonotone,
    apriori_bounds_check,
    count_critical_points,
    joint_energy,
    scaling_row,
    segregation_metric,
)
from .grid1d import Grid, dirichlet_energy
from .hopfcole import mfg_residuals, to_mfg
from .interactions import InteractionPair
from .nash import SolutionState, identity_residuals, pde_residuals

BRANCH_COLUMNS = (
    "index", "beta", "nu", "lambda1", "lambda2", "seg_integral", "sup_v1", "sup_v2", "x_m", "m",
    "xi1", "xi2", "lambda1_over_nu", "lambda2_over_nu", "m4_over_nu", "label", "newton_iters",
)

# diagnose tolerances; the nu-dependence follows the measured truncation error
ID1_TOL = 1e-8
JOINT_ENERGY_FACTOR = 2.0  # max deviation / |mean T| <= factor * h^2 / nu
HJB_FACTOR = 20.0  # hjb_i <= factor * h^2 / nu * max(1, max g)
FP_FACTOR = 2.0  # fp_i <= factor * h^2 / nu^1.5


class ArtifactError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def write_json(path: Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=False, allow_nan=True) + "\n")


# --- solutions ------------------------------------------------------------


def _finite_or_none(x):
    return None if x is None or not math.isfinite(x) else float(x)


def state_diagnostics(state: SolutionState, pair: InteractionPair) -> dict:
    """Summary numbers stored next to a solution."""
    out = {"segregation": segregation_metric(state)}
    try:
        row = scaling_row(state, pair)
        out.update({k: row[k] for k in ("x_m", "m", "xi1", "xi2", "m4_over_nu")})
    except NotMonotone:
        pass
    morph = count_critical_points(state, pair)
    out["critical_points"] = list(morph.counts)
    out["degenerate"] = morph.degenerate
    return out


def solution_payload(state: SolutionState, pair: InteractionPair, metadata: dict | None = None) -> dict:
    return {
        "kind": "solution",
        "nu": state.nu,
        "lambda1": state.lambda1,
        "lambda2": state.lambda2,
        "M": state.grid.M,
        "interactions": pair.to_dict(),
        "nodes": state.grid.nodes.tolist(),
        "v1": state.v1.tolist(),
        "v2": state.v2.tolist(),
        "residuals": list(pde_residuals(state, pair)),
        "diagnostics": state_diagnostics(state, pair),
        "metadata": metadata or {},
    }


def solution_profile_rows(state: SolutionState):
    mfg = to_mfg(state)
    return zip(state.grid.nodes, state.v1, state.v2, mfg.m1, mfg.m2, mfg.u1, mfg.u2)


PROFILE_COLUMNS = ("x", "v1", "v2", "m1", "m2", "u1", "u2")


def load_solution(data: dict) -> tuple[SolutionState, InteractionPair]:
    try:
        if data.get("kind") != "solution":
            raise ArtifactError("not a solution artifact")
        pair = InteractionPair.from_dict(data["interactions"])
        grid = Grid(int(data["M"]))
        nodes = np.asarray(data["nodes"], dtype=float)
        if nodes.shape != (grid.M,) or np.max(np.abs(nodes - grid.nodes)) > 1e-15:
            raise ArtifactError("stored nodes do not match the grid")
        state = SolutionState(float(data["nu"]), np.asarray(data["v1"], dtype=float),
                              np.asarray(data["v2"], dtype=float), data["lambda1"], data["lambda2"], grid)
    except (KeyError, TypeError) as exc:
        raise ArtifactError(f"malformed solution artifact: {exc}") from exc
    except ValueError as exc:
        raise ArtifactError(str(exc)) from exc
    return state, pair


# --- checks -------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


def check_state(state: SolutionState, pair: InteractionPair, label: int | None = None) -> list[Check]:
    """The full validation battery for a single stored state."""
    grid = state.grid
    h2_nu = grid.h**2 / state.nu
    checks = []
    problems = state.check(pair)
    checks.append(Check("invariants", not problems, "; ".join(problems)))
    ids = identity_residuals(state, pair)
    checks.append(Check("id1", max(ids.id1) <= ID1_TOL, f"{max(ids.id1):.2e}"))
    checks.append(Check("id2", max(ids.id2) <= max(ID1_TOL, grid.h**2), f"{max(ids.id2):.2e}"))
    checks.append(Check("multiplier bracket", all(ids.bracket), str(ids.bracket)))
    checks.append(Check("multiplier bound", all(ids.bound), f"C_g={ids.C_g:.4g}"))
    grad_ok = all(dirichlet_energy(grid, v) <= ids.C_g * state.beta for v in state.components)
    checks.append(Check("gradient bound", grad_ok))
    morph = count_critical_points(state, pair)
    note = "degenerate morphology" if morph.degenerate else ""
    if label is not None:
        checks.append(Check("label", morph.counts == (label, label), f"{morph.counts} {note}".strip()))
    else:
        checks.append(Check("morphology", morph.counts[0] == morph.counts[1], f"{morph.counts} {note}".strip()))
    try:
        je = joint_energy(state, pair)
        rel = je.max_deviation / max(abs(je.mean), 1e-300)
        checks.append(Check("joint energy", rel <= JOINT_ENERGY_FACTOR * h2_nu, f"{rel:.2e}"))
        viol = apriori_bounds_check(state, pair)
        checks.append(Check("a priori bounds", not viol, "; ".join(v["check"] for v in viol)))
    except NotMonotone:
        viol = apriori_bounds_check(state, pair)
        checks.append(Check("a priori bounds", not viol, "; ".join(v["check"] for v in viol)))
    try:
        res = mfg_residuals(to_mfg(state), pair)
        gmax = max(float(np.max(np.abs(V))) for V in (pair.g1(state.v2**2), pair.g2(state.v1**2)))
        hjb = max(res["hjb1"], res["hjb2"])
        fp = max(res["fp1"], res["fp2"])
        ok = hjb <= HJB_FACTOR * h2_nu * max(1.0, gmax) and fp <= FP_FACTOR * h2_nu / math.sqrt(state.nu)
        checks.append(Check("mfg residuals", ok, f"hjb={hjb:.2e} fp={fp:.2e}"))
    except ValueError as exc:
        checks.append(Check("mfg residuals", False, str(exc)))
    return checks


# --- branches -----------------------------------------------------------


def branch_rows(branch) -> list[tuple]:
    rows = []
    for i, p in enumerate(branch.points):
        st = p.state
        morph = count_critical_points(st)
        try:
            sc = scaling_row(st, branch.pair)
        except NotMonotone:
            sc = {}
        nan = math.nan
        rows.append((
            i, st.beta, st.nu, st.lambda1, st.lambda2, segregation_metric(st),
            float(np.max(st.v1)), float(np.max(st.v2)),
            sc.get("x_m", nan), sc.get("m", nan), sc.get("xi1", nan), sc.get("xi2", nan),
            st.lambda1 / st.nu, st.lambda2 / st.nu, sc.get("m4_over_nu", nan),
            morph.label, p.newton_iters,
        ))
    return rows


def load_artifact(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "summary.json"
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"cannot read artifact {path}: {exc}") from exc
    if not isinstance(data, dict) or "kind" not in data:
        raise ArtifactError(f"{path} is not a recognised artifact")
    data["_path"] = str(path)
    return data

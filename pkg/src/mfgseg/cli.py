"""Command-line entry points: ``solve``, ``branch``, ``variational``, ``diagnose``.

Exit codes: 0 success, 1 configuration or validation error (including a
failed ``diagnose``), 2 non-convergence, 3 branch integrity failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import artifacts as art
from .asymptotics import scaling_law_report, segregation_metric
from .config import ConfigError, RunConfig
from .continuation import (
    BranchIntegrityFailure,
    ResolutionError,
    StepUnderflow,
    bifurcation_points,
    expansion_coefficients,
    parabola_fit,
    trace_branch,
)
from .grid1d import integrate
from .nash import NotConverged, pde_residuals, solve_nash
from .variational import VariationalProblem, competitor, gamma_limit_reference, minimize, to_nash

log = logging.getLogger("mfgseg")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_INTEGRITY = 0, 1, 2, 3


def _stamp() -> dict:
    return {"created": time.strftime("%Y-%m-%dT%H:%M:%S")}


def _formats(cfg: RunConfig, flag: str | None) -> set:
    if flag is None:
        return set(cfg.output.formats)
    return {"csv", "json"} if flag == "both" else {flag}


# --- solve ----------------------------------------------------------------


def cmd_solve(cfg: RunConfig, out: Path, formats: set) -> int:
    if cfg.nash is None:
        raise ConfigError("solve needs a 'nash' section")
    try:
        state = solve_nash(cfg.nash.nu, cfg.pair, cfg.nash.solver_config(), grid=cfg.grid)
    except NotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("hint: lower the damping, or follow the branch with 'mfgseg branch' instead", file=sys.stderr)
        return EXIT_NONCONVERGED
    out.mkdir(parents=True, exist_ok=True)
    if "json" in formats:
        meta = _stamp() | {"iterations": state.iterations}
        art.write_json(out / "solution.json", art.solution_payload(state, cfg.pair, meta))
    if "csv" in formats:
        art.write_csv(out / "solution.csv", art.PROFILE_COLUMNS, art.solution_profile_rows(state))
    print(f"lambda1 = {state.lambda1:.17g}")
    print(f"lambda2 = {state.lambda2:.17g}")
    print(f"segregation = {segregation_metric(state):.17g}")
    return EXIT_OK


# --- branch -------------------------------------------------------------


def _trace_job(args):
    pair, k, target, policy, grid = args
    try:
        return "ok", trace_branch(pair, k, target, policy, grid=grid), None
    except BranchIntegrityFailure as exc:
        return "integrity", exc.branch, {"message": str(exc), "step": exc.step}
    except StepUnderflow as exc:
        return "underflow", exc.branch, {"message": str(exc)}


def _write_branch(cfg: RunConfig, k: int, branch, failure, out: Path, formats: set) -> None:
    d = out / f"branch_k{k}"
    d.mkdir(parents=True, exist_ok=True)
    rows = art.branch_rows(branch)
    if "csv" in formats:
        art.write_csv(d / "branch.csv", art.BRANCH_COLUMNS, rows)
    if "json" not in formats:
        return
    (d / "checkpoints").mkdir(exist_ok=True)
    names = []
    for i, p in enumerate(branch.points):
        if p.checkpoint:
            name = f"checkpoints/point_{i:04d}.json"
            art.write_json(d / name, art.solution_payload(p.state, cfg.pair, {}) | {"index": i})
            names.append(name)
    coeffs = expansion_coefficients(cfg.pair, k, cfg.grid)
    summary = {
        "kind": "branch",
        "k": k,
        "M": cfg.grid.M,
        "interactions": cfg.pair.to_dict(),
        "target_nu_min": cfg.branch.target_nu_min,
        "bifurcation_points": [[kk, b] for kk, b, _ in bifurcation_points(cfg.pair, k, cfg.grid)],
        "expansion": coeffs.to_dict(),
        "local_expansion": branch.metadata.get("local_expansion"),
        "n_points": len(branch.points),
        "folds": list(branch.folds),
        "checkpoints": names,
        "failure": failure,
    }
    if len(branch.points) >= 5:
        summary["parabola_fit_C"] = parabola_fit(branch)[0]
    if k == 1 and branch.points:
        rep = scaling_law_report(branch, cfg.pair)
        summary["scaling"] = {
            "endpoint_nu": float(min(branch.nus)),
            "extrapolated": rep.extrapolated,
            "extrapolation_nus": list(rep.extrapolation_nus),
            "last_decade_drift": rep.drift,
            "notes": rep.notes,
        }
    summary["metadata"] = _stamp() | {k2: branch.metadata.get(k2) for k2 in ("elapsed_s", "steps", "started")}
    art.write_json(d / "summary.json", summary)


def cmd_branch(cfg: RunConfig, out: Path, formats: set, jobs: int) -> int:
    if cfg.branch is None:
        raise ConfigError("branch needs a 'branch' section")
    b = cfg.branch
    policy = b.policy()
    if math.sqrt(b.target_nu_min) < 3 * cfg.grid.h:
        raise ConfigError(str(ResolutionError(
            f"target nu {b.target_nu_min:g} is not resolved on M = {cfg.grid.M} (need sqrt(nu) >= 3h)")))
    tasks = [(cfg.pair, k, b.target_nu_min, policy, cfg.grid) for k in b.ks]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_trace_job, tasks))
    else:
        results = [_trace_job(t) for t in tasks]
    code = EXIT_OK
    for k, (status, branch, failure) in zip(b.ks, results):
        _write_branch(cfg, k, branch, failure, out, formats)
        if status == "ok":
            last = branch.points[-1].state
            print(f"branch k={k}: {len(branch.points)} points, nu down to {last.nu:.4g}, "
                  f"segregation {segregation_metric(last):.6g}")
        else:
            print(f"branch k={k}: {failure['message']}", file=sys.stderr)
            new = EXIT_INTEGRITY if status == "integrity" else EXIT_NONCONVERGED
            code = code or new
    return code


# --- variational -----------------------------------------------------------


def cmd_variational(cfg: RunConfig, out: Path, formats: set, jobs: int) -> int:
    if cfg.variational is None:
        raise ConfigError("variational needs a 'variational' section")
    v = cfg.variational
    grid = cfg.grid
    probs = [VariationalProblem(v.gamma1, v.gamma2, beta, grid) for beta in v.betas]
    results = []
    if v.warm_start:
        prev = None
        for prob in probs:
            starts = [prob.trivial(), competitor(prob)]
            if prev is not None:
                starts.append((prev.vtilde1, prev.vtilde2))
            prev = minimize(prob, starts)
            results.append(prev)
    elif jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(minimize, probs))
    else:
        results = [minimize(p) for p in probs]
    rows = []
    scale = math.sqrt(v.gamma1 * v.gamma2)
    for prob, res in zip(probs, results):
        seg = integrate(grid, res.vtilde1 * res.vtilde2) / scale
        rows.append((prob.beta, res.c_beta, res.nontrivial, seg, res.coupling(prob), res.iterations))
    ref = gamma_limit_reference(v.gamma1, v.gamma2, grid)
    out.mkdir(parents=True, exist_ok=True)
    header = ("beta", "c_beta", "nontrivial", "seg_integral", "coupling", "iterations")
    if "csv" in formats:
        art.write_csv(out / "variational.csv", header, rows)
        art.write_csv(out / "gamma_limit_profiles.csv", ("x", "V1", "V2"),
                      zip(grid.nodes, *ref.profiles))
    if "json" in formats:
        art.write_json(out / "variational.json", {
            "kind": "variational",
            "gamma1": v.gamma1,
            "gamma2": v.gamma2,
            "M": grid.M,
            "rows": [dict(zip(header, (float(r[0]), float(r[1]), bool(r[2]), float(r[3]), float(r[4]), int(r[5]))))
                     for r in rows],
            "reference": {"c_inf": ref.c_inf, "x0": ref.x0,
                          "profiles": {"x": grid.nodes.tolist(), "V1": ref.profiles[0].tolist(),
                                       "V2": ref.profiles[1].tolist()}},
            "nash_residuals": [max(pde_residuals(to_nash(p, r), cfg.pair)) for p, r in zip(probs, results)],
            "metadata": _stamp(),
        })
    for r in rows:
        print(f"beta = {r[0]:<10.6g} c_beta = {r[1]:.12g}  nontrivial = {bool(r[2])}")
    print(f"c_inf = {ref.c_inf:.12g}, x0 = {ref.x0:.12g}")
    return EXIT_OK


# --- diagnose -------------------------------------------------------------


def _print_checks(title: str, checks) -> bool:
    print(title)
    for c in checks:
        print(f"  {'PASS' if c.passed else 'FAIL'}  {c.name:<20} {c.detail}")
    return all(c.passed for c in checks)


def _diagnose_branch(data: dict) -> bool:
    root = Path(data["_path"]).parent
    k = int(data["k"])
    ok = True
    csv_path = root / "branch.csv"
    rows = art.read_csv(csv_path) if csv_path.exists() else []
    if rows:
        labels = {int(r["label"]) for r in rows}
        ok &= _print_checks("branch table", [art.Check("label column", labels == {k - 1}, str(sorted(labels)))])
    by_index = {int(r["index"]): r for r in rows}
    for name in data.get("checkpoints", []):
        payload = art.load_artifact(root / name)
        state, pair = art.load_solution(payload)
        checks = art.check_state(state, pair, label=k - 1)
        row = by_index.get(int(payload.get("index", -1)))
        if row is not None:
            same = all(abs(row[c] - val) <= 1e-12 * max(1.0, abs(val))
                       for c, val in (("nu", state.nu), ("lambda1", state.lambda1), ("lambda2", state.lambda2)))
            checks.append(art.Check("table consistency", same))
        ok &= _print_checks(f"{name} (nu = {state.nu:.6g})", checks)
    if data.get("failure"):
        print(f"  recorded failure: {data['failure']['message']}")
        ok = False
    return ok


def _diagnose_variational(data: dict) -> bool:
    rows = data["rows"]
    c = [r["c_beta"] for r in rows]
    betas = [r["beta"] for r in rows]
    c_inf = data["reference"]["c_inf"]
    h = 1.0 / data["M"]
    checks = [
        art.Check("monotone", all(b1 <= b2 for b1, b2 in zip(c[:-1], c[1:])) or
                  any(x >= y for x, y in zip(betas[:-1], betas[1:]))),
        art.Check("upper bound", max(c) <= c_inf * (1 + 10 * h * h), f"max c_beta = {max(c):.6g}"),
        art.Check("coupling bound", all(r["coupling"] <= c_inf for r in rows)),
    ]
    return _print_checks("variational sweep", checks)


def cmd_diagnose(path: str) -> int:
    try:
        data = art.load_artifact(path)
        kind = data["kind"]
        if kind == "solution":
            state, pair = art.load_solution(data)
            ok = _print_checks(f"solution (nu = {state.nu:.6g}, M = {state.grid.M})", art.check_state(state, pair))
        elif kind == "branch":
            ok = _diagnose_branch(data)
        elif kind == "variational":
            ok = _diagnose_variational(data)
        else:
            raise art.ArtifactError(f"unknown artifact kind {kind!r}")
    except (art.ArtifactError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print("all checks passed" if ok else "some checks FAILED")
    return EXIT_OK if ok else EXIT_CONFIG


# --- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mfgseg", description="Segregated equilibria of two-population stationary MFGs.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("solve", "branch", "variational", "diagnose"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON run configuration")
        s.add_argument("--out", help="output directory (overrides output.directory)")
        s.add_argument("--jobs", type=int, default=1, help="parallel workers for independent solves")
        s.add_argument("--format", choices=("csv", "json", "both"), help="artifact formats")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "diagnose":
            s.add_argument("artifact", nargs="?", help="solution JSON, branch directory or summary JSON")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "diagnose" and args.artifact:
            return cmd_diagnose(args.artifact)
        if not args.config:
            raise ConfigError("--config is required")
        cfg = RunConfig.load(args.config)
        if args.command == "diagnose":
            if cfg.diagnose is None:
                raise ConfigError("diagnose needs an artifact path or a 'diagnose' section")
            return cmd_diagnose(cfg.diagnose.input)
        out = Path(args.out or cfg.output.directory)
        formats = _formats(cfg, args.format)
        if args.command == "solve":
            return cmd_solve(cfg, out, formats)
        if args.command == "branch":
            return cmd_branch(cfg, out, formats, args.jobs)
        return cmd_variational(cfg, out, formats, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

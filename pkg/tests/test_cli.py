from __future__ import annotations

import csv
import json

import pytest

from mfgseg.cli import main
from mfgseg.config import ConfigError, RunConfig

LINEAR = {"g1": {"kind": "linear", "gamma": 1.0}, "g2": {"kind": "linear", "gamma": 1.0}}


def write_config(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def strip_metadata(path):
    data = json.loads(path.read_text())
    data.pop("metadata", None)
    return data


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown"):
        RunConfig.from_dict({"grid": {"M": 64}, "nash": {"nu": 0.1, "tolerance": 1e-8}})
    with pytest.raises(ConfigError, match="unknown"):
        RunConfig.from_dict({"grids": {"M": 64}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"branch": {"k": 1, "steps": {"ds_maxx": 0.1}}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"variational": {"beta": 1.0, "beta_list": [1.0]}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"output": {"formats": ["xml"]}})


def test_solve_trivial(tmp_path, capsys):
    cfg = write_config(tmp_path, {"grid": {"M": 64}, "interactions": LINEAR, "nash": {"nu": 0.1}})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "lambda1 = 1\n" in out and "segregation = 1\n" in out
    data = json.loads((tmp_path / "o" / "solution.json").read_text())
    assert data["lambda1"] == 1.0 and data["diagnostics"]["degenerate"]


def test_solve_is_bit_identical_and_diagnoses_clean(tmp_path):
    payload = {"grid": {"M": 128}, "interactions": LINEAR, "nash": {"nu": 0.15, "kick": {"k": 1, "eps": 0.1}}}
    cfg = write_config(tmp_path, payload)
    for d in ("a", "b"):
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "solution.csv").read_bytes() == (tmp_path / "b" / "solution.csv").read_bytes()
    assert strip_metadata(tmp_path / "a" / "solution.json") == strip_metadata(tmp_path / "b" / "solution.json")
    assert main(["diagnose", str(tmp_path / "a" / "solution.json")]) == 0
    rows = list(csv.reader(open(tmp_path / "a" / "solution.csv")))
    assert rows[0] == ["x", "v1", "v2", "m1", "m2", "u1", "u2"]
    assert len(rows) == 129


def test_malformed_config_writes_nothing(tmp_path):
    cfg = write_config(tmp_path, {"grid": {"M": 4}, "nash": {"nu": 0.1}})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o").exists()
    bad = tmp_path / "broken.json"
    bad.write_text("{not json")
    assert main(["solve", "--config", str(bad)]) == 1


def test_nonconvergence_exit_code(tmp_path, capsys):
    payload = {"grid": {"M": 64}, "interactions": LINEAR,
               "nash": {"nu": 0.1, "max_iters": 2, "tol": 1e-14, "kick": {"k": 1, "eps": 0.1}}}
    assert main(["solve", "--config", write_config(tmp_path, payload), "--out", str(tmp_path / "o")]) == 2
    assert "hint" in capsys.readouterr().err


def test_corrupted_multiplier_fails_diagnose(tmp_path):
    payload = {"grid": {"M": 128}, "interactions": LINEAR, "nash": {"nu": 0.15, "kick": {"k": 1, "eps": 0.1}}}
    main(["solve", "--config", write_config(tmp_path, payload), "--out", str(tmp_path / "o")])
    path = tmp_path / "o" / "solution.json"
    data = json.loads(path.read_text())
    data["lambda1"] *= 1.001
    path.write_text(json.dumps(data))
    assert main(["diagnose", str(path)]) == 1
    assert main(["diagnose", str(tmp_path / "missing.json")]) == 1


def test_branch_artifacts(tmp_path, capsys):
    payload = {"grid": {"M": 256}, "interactions": LINEAR, "branch": {"k": [1, 2], "target_nu_min": 1e-3}}
    cfg = write_config(tmp_path, payload)
    assert main(["branch", "--config", cfg, "--out", str(tmp_path / "o"), "--jobs", "2"]) == 0
    root = tmp_path / "o" / "branch_k1"
    with open(root / "branch.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["index", "beta", "nu", "lambda1", "lambda2", "seg_integral", "sup_v1", "sup_v2",
                             "x_m", "m", "xi1", "xi2", "lambda1_over_nu", "lambda2_over_nu", "m4_over_nu",
                             "label", "newton_iters"]
    assert {r["label"] for r in rows} == {"0"}
    summary = json.loads((root / "summary.json").read_text())
    assert abs(summary["expansion"]["B"]) < 1e-10
    assert summary["expansion"]["C"] == pytest.approx(3 * 3.141592653589793**2 / 8, rel=1e-2)
    assert {r["label"] for r in csv.DictReader(open(tmp_path / "o" / "branch_k2" / "branch.csv"))} == {"1"}
    assert main(["diagnose", str(root)]) == 0
    assert main(["diagnose", str(tmp_path / "o" / "branch_k2")]) == 0
    # serial run gives identical tables
    assert main(["branch", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    for k in (1, 2):
        name = f"branch_k{k}/branch.csv"
        assert (tmp_path / "o" / name).read_bytes() == (tmp_path / "s" / name).read_bytes()


def test_branch_resolution_guard(tmp_path):
    payload = {"grid": {"M": 64}, "branch": {"k": 1, "target_nu_min": 1e-4}}
    assert main(["branch", "--config", write_config(tmp_path, payload), "--out", str(tmp_path / "o")]) == 1


def test_variational_sweep(tmp_path):
    payload = {"grid": {"M": 128}, "variational": {"gamma1": 1.0, "gamma2": 8.0, "beta_list": [1.0, 40.0, 80.0]}}
    cfg = write_config(tmp_path, payload)
    assert main(["variational", "--config", cfg, "--out", str(tmp_path / "o"), "--format", "both"]) == 0
    data = json.loads((tmp_path / "o" / "variational.json").read_text())
    assert data["reference"]["x0"] == pytest.approx(2 / 3)
    assert data["rows"][0]["nontrivial"] is False
    c = [r["c_beta"] for r in data["rows"]]
    assert c == sorted(c)
    assert main(["diagnose", str(tmp_path / "o" / "variational.json")]) == 0


def test_variational_needs_linear_pair():
    rational = {"g1": {"kind": "rational", "gamma": 1.0, "a": 0.2, "b": 1.0}, "g2": LINEAR["g2"]}
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"interactions": rational, "variational": {"beta": 10.0}})

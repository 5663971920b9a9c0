import json
import math
from pathlib import Path

import numpy as np
import pytest

from branchflow import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_validate_fixture(capsys):
    code, out, _ = run(capsys, "validate", "--fixture", "octahedron")
    assert code == 0
    doc = json.loads(out)
    assert doc["euler_characteristic"] == 2
    assert all(doc["checks"].values())


def test_validate_branch_violation(capsys):
    code, out, _ = run(
        capsys, "validate", "--fixture", "octahedron",
        "--default-weight", str(math.pi / 2),
        "--branch", "0:1", "--check-branch")
    assert code == 3
    doc = json.loads(out)
    assert doc["branch_check"]["status"] == "violated"
    assert doc["branch_check"]["violating_cycle"]


def test_validate_bad_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "validate", "--file", str(bad))
    assert code == 1
    assert "invalid JSON" in err


def test_validate_invalid_document(tmp_path, capsys):
    from branchflow import surface
    doc = surface.builtin("octahedron").to_document()
    doc["weights"] = {"0-1": 3.0}
    f = tmp_path / "badweight.json"
    f.write_text(json.dumps(doc))
    code, _, err = run(capsys, "validate", "--file", str(f))
    assert code == 2
    assert "0-1" in err


def test_curvature_report(capsys):
    code, out, _ = run(
        capsys, "curvature", "--fixture", "klein_quartic_24",
        "--default-weight", "0.3", "--alpha", "1", "--seed", "3")
    assert code == 0
    doc = json.loads(out)
    assert doc["chi"] == -4
    assert abs(doc["total_K"] - 2 * math.pi * -4) < 1e-9
    assert len(doc["K"]) == 24


def test_flow_run_and_export(tmp_path, capsys):
    out_dir = tmp_path / "run"
    code, out, _ = run(
        capsys, "flow", "--fixture", "klein_quartic_24",
        "--default-weight", "0.3", "--flow-kind", "main_E",
        "--alpha", "1", "--seed", "7",
        "--atol", "1e-12", "--rtol", "1e-12", "--out", str(out_dir))
    assert code == 0
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["status"] == "converged"
    assert summary["rate"]["lambda"] < 0
    assert summary["rate"]["r_squared"] > 0.99
    assert summary["chi"] == -4
    assert summary["normalization"] == "branched"
    assert "config_hash" in summary
    lines = (out_dir / "trajectory.jsonl").read_text().splitlines()
    first = json.loads(lines[0])
    assert first["type"] == "record" and first["t"] == 0
    assert json.loads(lines[-1])["type"] == "summary"
    csv_path = tmp_path / "run.csv"
    code, out, _ = run(capsys, "export", "--trajectory",
                       str(out_dir / "trajectory.jsonl"), "--out", str(csv_path))
    assert code == 0
    rows = csv_path.read_text().splitlines()
    assert rows[0].startswith("t,r_0")
    assert len(rows) == len(lines)  # header + records == records + summary
    assert rows[-1].endswith("converged")
    # potential column is monotone non-increasing
    import csv as csvmod
    with open(csv_path) as fh:
        table = list(csvmod.DictReader(fh))
    pots = [float(r["potential"]) for r in table]
    assert all(b <= a + 1e-9 for a, b in zip(pots, pots[1:]))


def test_flow_stationary_start(tmp_path, capsys):
    code, out, _ = run(
        capsys, "flow", "--fixture", "moebius_torus_7",
        "--flow-kind", "main_E", "--alpha", "1",
        "--uniform", "0.2", "--out", str(tmp_path))
    assert code == 0
    summary = json.loads(out)
    assert summary["records"] == 1
    assert summary["final_time"] == 0


def test_flow_hyperbolic_literal_obstruction(tmp_path, capsys):
    code, out, _ = run(
        capsys, "flow", "--fixture", "klein_quartic_24",
        "--default-weight", "0.3", "--flow-kind", "main_H",
        "--alpha", "1", "--seed", "3", "--max-time", "10",
        "--out", str(tmp_path))
    assert code in (4, 5)
    summary = json.loads(out)
    assert summary["probe"]["obstructed"]
    assert summary["probe"]["running_infimum"] > 0


def test_solve_and_round_trip(tmp_path, capsys):
    solve_dir = tmp_path / "s"
    code, out, _ = run(
        capsys, "solve", "--fixture", "klein_quartic_24",
        "--default-weight", "0.3", "--flow-kind", "main_E",
        "--alpha", "2", "--uniform", "0", "--out", str(solve_dir))
    assert code == 0
    summary = json.loads(out)
    assert summary["status"] == "found"
    assert summary["residual"] < 1e-10
    assert summary["certificate"] > 0
    metric = json.loads((solve_dir / "metric.json").read_text())
    assert len(metric["u"]) == 24

    # use the found metric to prescribe a curvature and solve the round trip
    rt_dir = tmp_path / "rt"
    code, out, _ = run(
        capsys, "solve", "--fixture", "klein_quartic_24",
        "--default-weight", "0.3", "--flow-kind", "prescribed_E",
        "--alpha", "2", "--rbar", f"from-metric={solve_dir / 'metric.json'}",
        "--seed", "5", "--out", str(rt_dir))
    assert code == 0
    got = json.loads((rt_dir / "metric.json").read_text())
    rel = np.abs(np.array(got["r"]) / np.array(metric["r"]) - 1).max()
    assert rel < 1e-8


def test_solve_obstruction_exit_code(tmp_path, capsys):
    code, out, _ = run(
        capsys, "solve", "--fixture", "klein_quartic_24",
        "--default-weight", "0.3", "--flow-kind", "main_E",
        "--alpha", "1", "--branch", "0:1", "--normalization", "literal",
        "--uniform", "0", "--out", str(tmp_path))
    assert code == 6
    summary = json.loads(out)
    assert summary["status"] == "no_stationary_point"
    assert abs(summary["obstruction"] - 2 * math.pi) < 1e-12


def test_config_conflicts_rejected(tmp_path, capsys):
    code, _, err = run(
        capsys, "flow", "--fixture", "octahedron", "--flow-kind", "main_E",
        "--rbar", "const=-1", "--out", str(tmp_path))
    assert code == 1
    assert "rbar" in err
    code, _, err = run(
        capsys, "flow", "--fixture", "octahedron", "--flow-kind", "area_E",
        "--out", str(tmp_path))
    assert code == 1


def test_summary_determinism(tmp_path, capsys):
    args = ("flow", "--fixture", "klein_quartic_24", "--default-weight", "0.3",
            "--flow-kind", "main_E", "--alpha", "1", "--seed", "7",
            "--max-time", "1")
    code1, _, _ = run(capsys, *args, "--out", str(tmp_path / "a"))
    code2, _, _ = run(capsys, *args, "--out", str(tmp_path / "b"))
    assert code1 == code2
    a = (tmp_path / "a" / "summary.json").read_bytes()
    b = (tmp_path / "b" / "summary.json").read_bytes()
    assert a == b


def test_verify_subcommand(capsys):
    code, out, _ = run(capsys, "verify", "gauss-bonnet", "--seed", "1")
    assert code == 0
    assert "PASS" in out
    assert "margin=" in out


def test_sweep(tmp_path, capsys):
    code, out, _ = run(
        capsys, "sweep", "--fixture", "klein_quartic_24",
        "--default-weight", "0.3", "--flow-kind", "main_E",
        "--alphas", "0,1", "--seeds", "1",
        "--atol", "1e-12", "--rtol", "1e-12", "--out", str(tmp_path))
    assert code == 0
    merged = json.loads((tmp_path / "sweep.json").read_text())
    assert len(merged["runs"]) == 2
    assert all(r["status"] == "converged" for r in merged["runs"])
    hashes = {r["config_hash"] for r in merged["runs"]}
    assert len(hashes) == 2  # distinct configs hash differently


def test_export_rejects_garbage(tmp_path, capsys):
    f = tmp_path / "t.jsonl"
    f.write_text("not json\n")
    code, _, err = run(capsys, "export", "--trajectory", str(f))
    assert code == 1
    assert "malformed" in err

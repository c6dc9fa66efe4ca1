import json
import shutil
import subprocess

import numpy as np
import pytest
from scipy.integrate import simpson

from biasedsplines import builtin
from biasedsplines.cli import main, read_trajectory, trajectory_header

PHI = np.pi / 3


def run(tmp_path, config, command="solve"):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    out = tmp_path / "out"
    code = main([command, "--config", str(path), "--out", str(out)])
    return code, out


def flat_hermite(method="both"):
    return {"system": {"builtin": "flat", "params": {"dim": 1}},
            "problem": {"q0": [0], "qf": [1], "v0": [0], "vf": [0], "T": 1},
            "solver": {"method": method, "nodes": 100}}


def sphere_grid(which="metric", name="sphere_torque"):
    return {"system": {"builtin": name}, "grid": {"ranges": [[0, 0, 1], [PHI, PHI, 1]]},
            "indicatrix": {"which": which, "count": 4}}


def test_solve_both_methods_near_hermite_cost(tmp_path):
    code, out = run(tmp_path, flat_hermite())
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    for key in ("converged", "method", "iterations", "residual_norm", "cost", "shooting_parameters",
                "wall_time_ms"):
        assert key in summary
    assert [r["method"] for r in summary["runs"]] == ["shooting", "collocation"]
    assert all(abs(r["cost"] - 12) < 0.12 for r in summary["runs"])
    assert (out / "trajectory.csv").exists() and (out / "trajectory_collocation.csv").exists()


def test_trajectory_csv_format_and_cost_roundtrip(tmp_path):
    code, out = run(tmp_path, {**flat_hermite("shooting"),
                               "system": {"builtin": "sphere_torque", "params": {"k1": 2.0}},
                               "problem": {"q0": [-0.8, 0.3], "qf": [0.8, 0.3], "v0": [1.5, 0.6],
                                           "vf": [1.5, -0.6]}})
    assert code == 0
    raw = (out / "trajectory.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    header = raw.split(b"\n", 1)[0].decode()
    assert header.split(",") == trajectory_header(2)
    cols = read_trajectory(out / "trajectory.csv")
    cost = json.loads((out / "summary.json").read_text())["cost"]
    assert abs(simpson(cols["cost_density"], x=cols["t"]) / cost - 1) < 1e-9
    # recompute the density from q and a alone
    s = builtin("sphere_torque", {"k1": 2.0})
    q = np.column_stack([cols["q1"], cols["q2"]])
    a = np.column_stack([cols["a1"], cols["a2"]])
    M = s.metric.value(q)
    N = M @ s.cometric.value(q) @ M
    density = np.einsum("ni,nij,nj->n", a, N, a)
    assert abs(simpson(density, x=cols["t"]) / cost - 1) < 1e-9


def test_outputs_are_deterministic(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    first.mkdir(), second.mkdir()
    _, out1 = run(first, flat_hermite())
    _, out2 = run(second, flat_hermite())
    for name in ("trajectory.csv", "trajectory_collocation.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_dimension_mismatch_exits_1_naming_field(tmp_path, capsys):
    config = {"system": {"builtin": "sphere_torque"},
              "problem": {"q0": [0, 0, 0], "qf": [1, 0], "v0": "FREE", "vf": "FREE"}}
    code, out = run(tmp_path, config)
    assert code == 1
    assert "problem.q0" in capsys.readouterr().err
    assert not out.exists()


@pytest.mark.parametrize("patch, field", [
    ({"solver": {"method": "simplex"}}, "solver.method"),
    ({"system": {"builtin": "cube"}}, "system.builtin"),
    ({"problem": {"q0": [0], "qf": [1], "v0": [0], "vf": "FREE"}}, "problem.v0"),
    ({"problem": {"q0": [0], "qf": [1], "T": -1}}, "problem.T"),
    ({"solver": {"steps": 1}}, "solver.steps"),
    ({"problem": {"qf": [1]}}, "problem.q0"),
])
def test_validation_errors_name_the_field(tmp_path, capsys, patch, field):
    config = {**flat_hermite(), **patch}
    code, _ = run(tmp_path, config)
    assert code == 1
    assert field in capsys.readouterr().err


def test_unreadable_config_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    assert main(["solve", "--config", str(bad)]) == 1
    assert "config" in capsys.readouterr().err


def test_sphere_geodesic_free_velocities(tmp_path):
    config = {"system": {"builtin": "sphere_torque"},
              "problem": {"q0": [0, 0], "qf": [np.pi / 2, 0], "v0": "FREE", "vf": "FREE"}}
    code, out = run(tmp_path, config)
    assert code == 0
    cols = read_trajectory(out / "trajectory.csv")
    assert abs(simpson(cols["cost_density"], x=cols["t"])) < 1e-10


def test_non_convergence_exits_2_with_summary(tmp_path):
    config = {"system": {"builtin": "twolink_serial"},
              "problem": {"q0": [0.3, 1.2], "qf": [1.0, 0.8], "v0": [0, 0], "vf": [0, 0]},
              "solver": {"max_iter": 1, "tolerance": 1e-14}}
    code, out = run(tmp_path, config)
    assert code == 2
    summary = json.loads((out / "summary.json").read_text())
    assert summary["converged"] is False and "diagnostics" in summary


def test_tensors_row_at_sixty_degrees(tmp_path):
    code, out = run(tmp_path, sphere_grid(), "tensors")
    assert code == 0
    cols = read_trajectory(out / "tensors.csv")
    M = [cols[f"M{i}{j}"][0] for i in (1, 2) for j in (1, 2)]
    N = [cols[f"N{i}{j}"][0] for i in (1, 2) for j in (1, 2)]
    assert np.allclose(M, [0.25, 0, 0, 1], atol=1e-12)
    assert np.allclose(N, [0.0625, 0, 0, 1], atol=1e-12)
    assert np.isclose(cols["sectional_curvature"][0], 1.0)
    assert cols["tau_maxabs"][0] > 0


def test_tensors_grid_outside_domain_exits_1(tmp_path, capsys):
    config = sphere_grid()
    config["grid"]["ranges"][1] = [0.0, 2.0, 3]
    code, _ = run(tmp_path, config, "tensors")
    assert code == 1
    assert "grid.ranges" in capsys.readouterr().err


@pytest.mark.parametrize("which, semi_axes", [("metric", (2.0, 1.0)), ("induced", (4.0, 1.0))])
def test_indicatrix_semi_axes(tmp_path, which, semi_axes):
    code, out = run(tmp_path, sphere_grid(which), "indicatrix")
    assert code == 0
    cols = read_trajectory(out / "indicatrix.csv")
    assert np.isclose(np.max(np.abs(cols["u1"])), semi_axes[0])
    assert np.isclose(np.max(np.abs(cols["u2"])), semi_axes[1])


def test_compare_reports_gap_and_distance(tmp_path):
    code, out = run(tmp_path, flat_hermite(), "compare")
    assert code == 0
    report = json.loads((out / "compare.json").read_text())
    assert report["cost_gap_relative"] < 0.01
    assert report["sup_distance"] < 1e-2


def test_inline_expression_system(tmp_path):
    config = {"system": {"dim": 1, "metric": [["1"]], "cometric": [["k"]], "params": {"k": 2.0}},
              "problem": {"q0": [0], "qf": [1], "v0": [0], "vf": [0]}, "solver": {"steps": 100}}
    code, out = run(tmp_path, config)
    assert code == 0
    # cost scales with the cometric weight
    assert np.isclose(json.loads((out / "summary.json").read_text())["cost"], 24.0, rtol=1e-9)


@pytest.mark.skipif(shutil.which("biasedsplines") is None, reason="console script not installed")
def test_console_script(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(sphere_grid()), encoding="utf-8")
    proc = subprocess.run(["biasedsplines", "tensors", "--config", str(cfg), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "tensors.csv").exists()

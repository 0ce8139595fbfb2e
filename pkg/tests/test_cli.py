import csv
import subprocess
import sys

import numpy as np
import pytest
import yaml

import wsriccati as ws
from wsriccati.cli import main

from conftest import MEAN_A, MEAN_B, Q2, R1


def base_config(out_dir, **overrides):
    config = {
        "system": {
            "n": 2,
            "m": 1,
            "mean_a": MEAN_A,
            "mean_b": MEAN_B,
            "family_a": "normal",
            "family_b": "laplace",
            "stddev_scale": 0.1,
        },
        "cost": {"q": [[3.0, 0.0], [0.0, 3.0]], "r": [[1.0]]},
        "weight": {"family": "RRSL", "theta": 1.0, "alpha": 10.0, "beta": 11.0},
        "solver": {"method": "fixed-point", "bank_size": 600, "seed": 11},
        "task": {},
        "output_dir": str(out_dir),
    }
    for key, value in overrides.items():
        config[key] = {**config.get(key, {}), **value} if isinstance(value, dict) else value
    return config


def write_config(tmp_path, config, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(config))
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_design_writes_solution(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, base_config(out))
    assert main(["design", str(cfg)]) == 0
    rows = read_rows(out / "solution.csv")
    assert len(rows) == 1
    record = rows[0]
    assert record["method"] == "fixed-point"
    assert record["weight_family"] == "RRSL"
    assert len(record["config_fingerprint"]) == 64
    # matches a direct library solve on the same configuration
    dist = ws.build_distribution(
        2, 1, MEAN_A, MEAN_B, family_a="normal", family_b="laplace", stddev_scale=0.1
    )
    bank = ws.draw_bank(dist, 600, seed=11)
    spec = ws.WeightSpec(family="RRSL", theta=1.0, alpha=10.0, beta=11.0)
    sol = ws.fixed_point_solve(ws.DesignProblem(bank=bank, q=Q2, r=R1, weights=spec))
    assert float(record["pi_1_1"]) == sol.value[0, 0]
    assert float(record["l_1_2"]) == sol.gain[0, 1]


def test_design_zero_sensitivity_matches_unweighted_solution(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(
        tmp_path, base_config(out, weight={"family": "RN"})
    )
    assert main(["design", str(cfg)]) == 0
    record = read_rows(out / "solution.csv")[0]
    dist = ws.build_distribution(
        2, 1, MEAN_A, MEAN_B, family_a="normal", family_b="laplace", stddev_scale=0.1
    )
    bank = ws.draw_bank(dist, 600, seed=11)
    sol = ws.fixed_point_solve(
        ws.DesignProblem(bank=bank, q=Q2, r=R1, weights=ws.WeightSpec(family="RN"))
    )
    assert float(record["pi_2_1"]) == sol.value[1, 0]
    assert float(record["l_1_1"]) == sol.gain[0, 0]


def test_design_trace_and_weights(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(
        tmp_path, base_config(out, solver={"method": "fixed-point", "bank_size": 300,
                                           "seed": 3, "trace": True,
                                           "dump_weights": True, "fp_tol": 1e-8}),
    )
    assert main(["design", str(cfg)]) == 0
    trace = read_rows(out / "trace.csv")
    solution = read_rows(out / "solution.csv")[0]
    assert len(trace) == int(solution["iterations"]) + 1
    assert trace[0]["s"] == "0"
    assert float(trace[-1]["delta"]) < 1e-8
    assert float(trace[-1]["residual"]) < 1e-6
    weights = read_rows(out / "weights.csv")
    assert len(weights) == 300
    mean_weight = np.mean([float(r["weight"]) for r in weights])
    assert abs(mean_weight - 1.0) <= 1e-9


def test_malformed_config_exits_one_without_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    cfg_dict = base_config(out)
    cfg_dict["system"]["stddev_scale"] = -0.5
    cfg = write_config(tmp_path, cfg_dict)
    assert main(["design", str(cfg)]) == 1
    assert not out.exists()


def test_unknown_config_field_rejected(tmp_path):
    out = tmp_path / "out"
    cfg_dict = base_config(out)
    cfg_dict["solver"]["bank_siz"] = 4  # typo must be reported, not ignored
    cfg = write_config(tmp_path, cfg_dict)
    assert main(["design", str(cfg)]) == 1


def test_invalid_yaml_exits_one(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("system: [unbalanced\n")
    assert main(["design", str(path)]) == 1


def test_missing_config_exits_three(tmp_path):
    assert main(["design", str(tmp_path / "nope.yaml")]) == 3


def test_solver_failure_exits_two(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(
        tmp_path,
        base_config(out, solver={"method": "fixed-point", "bank_size": 200,
                                 "seed": 3, "fp_max_iters": 4}),
    )
    assert main(["design", str(cfg)]) == 2
    assert not (out / "solution.csv").exists()


def test_sweep_rows_and_error_isolation(tmp_path):
    out = tmp_path / "out"
    cfg_dict = base_config(
        out,
        weight={"family": "RSL", "theta": 0.0},
        task={"theta_grid": [0.0, 50.0]},
    )
    cfg = write_config(tmp_path, cfg_dict)
    assert main(["sweep", str(cfg)]) == 0
    rows = read_rows(out / "sweep.csv")
    assert [row["theta"] for row in rows] == ["0.0", "50.0"]
    assert rows[0]["status"] == "ok"
    assert float(rows[0]["rho_plain"]) < 1.0
    assert rows[0]["ms_stable"] == "true"
    assert rows[0]["wms_stable"] == "true"
    # overflow at theta=50 is recorded in the row and does not abort the run
    assert rows[1]["status"] == "error"
    assert "overflow" in rows[1]["error"]
    assert rows[1]["rho_plain"] == ""


def test_sweep_single_point_matches_design_and_stability(tmp_path):
    out_sweep = tmp_path / "sweep"
    cfg_sweep = write_config(
        tmp_path,
        base_config(out_sweep, weight={"family": "RRSL", "theta": 0.5,
                                       "alpha": 10.0, "beta": 11.0},
                    task={"theta_grid": [0.5]}),
        name="sweep.yaml",
    )
    assert main(["sweep", str(cfg_sweep)]) == 0
    sweep_row = read_rows(out_sweep / "sweep.csv")[0]

    out_design = tmp_path / "design"
    cfg_design = write_config(
        tmp_path,
        base_config(out_design, weight={"family": "RRSL", "theta": 0.5,
                                        "alpha": 10.0, "beta": 11.0}),
        name="design.yaml",
    )
    assert main(["design", str(cfg_design)]) == 0

    out_stab = tmp_path / "stab"
    cfg_stab_dict = base_config(
        out_stab,
        weight={"family": "RRSL", "theta": 0.5, "alpha": 10.0, "beta": 11.0},
        task={"solution": str(out_design / "solution.csv")},
    )
    cfg_stab = write_config(tmp_path, cfg_stab_dict, name="stab.yaml")
    assert main(["stability", str(cfg_stab)]) == 0
    stab_row = read_rows(out_stab / "stability.csv")[0]

    assert float(stab_row["rho_plain"]) == float(sweep_row["rho_plain"])
    assert float(stab_row["rho_weighted"]) == float(sweep_row["rho_weighted"])


def test_stability_with_inline_gain(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(
        tmp_path, base_config(out, task={"gain": [[4.0, 3.5]]})
    )
    assert main(["stability", str(cfg)]) == 0
    row = read_rows(out / "stability.csv")[0]
    assert row["theta"] == ""
    assert row["rho_weighted"] == ""
    assert float(row["rho_plain"]) > 0.0


def test_stability_requires_gain_source(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, base_config(out))
    assert main(["stability", str(cfg)]) == 1


def test_solution_fingerprint_mismatch_rejected(tmp_path):
    out_design = tmp_path / "design"
    cfg_design = write_config(
        tmp_path, base_config(out_design), name="design.yaml"
    )
    assert main(["design", str(cfg_design)]) == 0
    # different bank seed: the design blocks no longer match the artifact
    out_other = tmp_path / "other"
    cfg_dict = base_config(
        out_other,
        solver={"method": "fixed-point", "bank_size": 600, "seed": 999},
        task={"solution": str(out_design / "solution.csv")},
    )
    cfg = write_config(tmp_path, cfg_dict, name="other.yaml")
    assert main(["stability", str(cfg)]) == 1


def test_simulate_single_trial_matches_rollout(tmp_path):
    out = tmp_path / "out"
    cfg_dict = base_config(
        out,
        task={"gain": [[4.0, 3.5]], "x0": [1.0, 1.0], "horizon": 25,
              "trials": 1, "rho_list": [100.0], "seed": 21,
              "trajectory_count": 1},
    )
    cfg = write_config(tmp_path, cfg_dict)
    assert main(["simulate", str(cfg)]) == 0
    costs = read_rows(out / "costs.csv")
    assert len(costs) == 1
    dist = ws.build_distribution(
        2, 1, MEAN_A, MEAN_B, family_a="normal", family_b="laplace", stddev_scale=0.1
    )
    single = ws.rollout(
        dist, [[4.0, 3.5]], Q2, R1, [1.0, 1.0], 25, seed=ws.stream_rng(21, 0)
    )
    assert float(costs[0]["cost"]) == single.cost
    tail = read_rows(out / "tail.csv")
    assert float(tail[0]["worst_average"]) == single.cost
    traj = read_rows(out / "trajectories.csv")
    assert len(traj) == 26
    summary = read_rows(out / "summary.csv")[0]
    assert summary["trials"] == "1"
    assert summary["diverged"] == "0"


def test_simulate_requires_initial_state(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(
        tmp_path, base_config(out, task={"gain": [[4.0, 3.5]], "x0": None})
    )
    assert main(["simulate", str(cfg)]) == 1


def test_robustness_point_mass_zero_stddev(tmp_path):
    out = tmp_path / "out"
    cfg_dict = base_config(out)
    cfg_dict["system"]["family_a"] = "point"
    cfg_dict["system"]["family_b"] = "point"
    cfg_dict["system"]["stddev_scale"] = 0.0
    cfg_dict["weight"] = {"family": "RN"}
    cfg_dict["task"] = {"repetitions": 2, "robustness_bank_size": 4, "seed": 5}
    cfg = write_config(tmp_path, cfg_dict)
    assert main(["robustness", str(cfg)]) == 0
    rows = read_rows(out / "robustness.csv")
    assert len(rows) == 2
    assert all(float(row["stddev"]) == 0.0 for row in rows)
    gains = read_rows(out / "gains.csv")
    assert len(gains) == 2
    assert all(row["status"] == "ok" for row in gains)


def test_sweep_runs_are_byte_identical(tmp_path):
    cfg_dict_a = base_config(
        tmp_path / "a",
        solver={"method": "fixed-point", "bank_size": 400, "seed": 17},
        task={"theta_grid": [0.0, 0.5, 1.0]},
    )
    cfg_dict_b = {**cfg_dict_a, "output_dir": str(tmp_path / "b")}
    cfg_a = write_config(tmp_path, cfg_dict_a, name="a.yaml")
    cfg_b = write_config(tmp_path, cfg_dict_b, name="b.yaml")
    assert main(["sweep", str(cfg_a)]) == 0
    assert main(["sweep", str(cfg_b)]) == 0
    bytes_a = (tmp_path / "a" / "sweep.csv").read_bytes()
    bytes_b = (tmp_path / "b" / "sweep.csv").read_bytes()
    assert bytes_a == bytes_b


def test_seed_override_changes_design(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    cfg = write_config(tmp_path, base_config(out_a))
    assert main(["design", str(cfg)]) == 0
    assert main(["design", str(cfg), "--output-dir", str(out_b), "--seed", "99"]) == 0
    row_a = read_rows(out_a / "solution.csv")[0]
    row_b = read_rows(out_b / "solution.csv")[0]
    assert row_a["pi_1_1"] != row_b["pi_1_1"]
    assert row_a["config_fingerprint"] != row_b["config_fingerprint"]


def test_design_newton_methods_match_fixed_point(tmp_path):
    rows = {}
    for method, extra in [
        ("fixed-point", {}),
        ("newton", {}),
        ("newton-continuation", {"continuation": [0.5, 1.0]}),
    ]:
        out = tmp_path / method
        cfg = write_config(
            tmp_path,
            base_config(out, solver={"method": method, "bank_size": 400,
                                     "seed": 11, **extra}),
            name=f"{method}.yaml",
        )
        assert main(["design", str(cfg)]) == 0
        rows[method] = read_rows(out / "solution.csv")[0]
    for method in ("newton", "newton-continuation"):
        assert rows[method]["method"] == method
        for col in ("pi_1_1", "pi_2_1", "pi_2_2", "l_1_1", "l_1_2"):
            diff = abs(float(rows[method][col]) - float(rows["fixed-point"][col]))
            assert diff <= 1e-6, f"{method} {col} differs by {diff}"


def test_shipped_example_config_runs(tmp_path):
    from pathlib import Path

    example = Path(__file__).resolve().parent.parent / "configs" / "example.yaml"
    out = tmp_path / "out"
    assert main(["design", str(example), "--output-dir", str(out)]) == 0
    record = read_rows(out / "solution.csv")[0]
    assert record["weight_family"] == "RRSL"
    assert float(record["residual"]) < 1e-8
    # gains land in the expected region for the benchmark system
    assert 5.0 < float(record["l_1_1"]) < 9.0
    assert 5.0 < float(record["l_1_2"]) < 9.0


def test_console_script_entry_point(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, base_config(out))
    proc = subprocess.run(
        [sys.executable, "-m", "wsriccati.cli", "design", str(cfg), "-v"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "solution.csv").exists()

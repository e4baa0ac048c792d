"""Command-line entry point tests (everything through main(argv))."""

import json
import math

import numpy as np
import pytest

from wt4emt.cli import main
from wt4emt.pinn_inference import (
    PLL_FEATURES,
    FeatureSpec,
    MlpParams,
    OutputSpec,
    save_weights,
)


def nominal_rate_net():
    """Zero weights, offset w0: the learned rate collapses to exact nominal
    rotation, which keeps an equilibrium scenario perfectly flat."""
    bounds = {
        "dt": (0.0, 1e-4), "v_a": (-1.5, 1.5), "v_b": (-1.5, 1.5),
        "v_c": (-1.5, 1.5), "sin_theta": (-1.0, 1.0), "cos_theta": (-1.0, 1.0),
        "omega_integ": (-50.0, 50.0),
    }
    layers = [(np.zeros((8, 7)), np.zeros(8)), (np.zeros((2, 8)), np.zeros(2))]
    return MlpParams(layers, "tanh",
                     [FeatureSpec(n, *bounds[n]) for n in PLL_FEATURES],
                     [OutputSpec("theta_rate", 2.0 * math.pi * 50.0, 50.0),
                      OutputSpec("omega_integ_rate", 0.0, 100.0)])


@pytest.fixture()
def scenario_file(tmp_path):
    doc = {
        "t_end": 0.1,
        "dt": 1e-4,
        "setpoints_initial": [0.65, 0.25],
        "events": [{"t": 0.05, "kind": "p_step", "to": 0.7}],
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture()
def weights_file(tmp_path):
    path = tmp_path / "net.json"
    save_weights(nominal_rate_net(), path)
    return path


def test_run_writes_traces_and_summary(tmp_path, scenario_file):
    out = tmp_path / "out"
    rc = main(["run", "--scenario", str(scenario_file), "--mode", "iterative",
               "--out", str(out)])
    assert rc == 0
    rows = (out / "traces_iterative.csv").read_text().splitlines()
    assert len(rows) == 1 + 1001            # header + ceil(0.1/1e-4)+1 samples
    summary = json.loads((out / "run_iterative.json").read_text())
    assert summary["mode"] == "iterative"
    assert summary["steps"] == 1000
    assert summary["wall_time_mean_s"] > 0.0


def test_run_pinn_mode(tmp_path, scenario_file, weights_file):
    out = tmp_path / "out"
    rc = main(["run", "--scenario", str(scenario_file), "--mode", "pinn",
               "--weights", str(weights_file), "--out", str(out)])
    assert rc == 0
    assert (out / "traces_pinn.csv").exists()


def test_run_pinn_without_weights_fails(tmp_path, scenario_file, capsys):
    rc = main(["run", "--scenario", str(scenario_file), "--mode", "pinn",
               "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "weights" in capsys.readouterr().err.lower()


def test_run_missing_scenario_fails(tmp_path):
    rc = main(["run", "--scenario", str(tmp_path / "nope.json"),
               "--out", str(tmp_path / "out")])
    assert rc == 2


def test_run_applies_param_overrides(tmp_path):
    doc = {"t_end": 0.02, "dt": 1e-4, "setpoints_initial": [0.0, 0.0],
           "events": [], "params": {"l_g": 0.15, "control": {"kp_pll": 20.0}}}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    rc = main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")])
    assert rc == 0


def test_run_rejects_bad_override(tmp_path):
    doc = {"t_end": 0.02, "dt": 1e-4, "setpoints_initial": [0.0, 0.0],
           "events": [], "params": {"l_g": -1.0}}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    rc = main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")])
    assert rc == 1


def test_compare_writes_metrics(tmp_path, scenario_file, weights_file):
    out = tmp_path / "cmp"
    rc = main(["compare", "--scenario", str(scenario_file),
               "--weights", str(weights_file), "--out", str(out), "--reps", "2"])
    assert rc == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["speedup"] > 0.0
    assert "i_a" in metrics["signals"]
    assert metrics["signals"]["i_a"]["mean_abs"] >= 0.0
    # the nominal-rate net tracks the locked loop almost exactly pre-event
    assert metrics["signals"]["theta_pll"]["max_abs"] < 0.1
    assert (out / "traces_iterative.csv").exists()
    assert (out / "traces_pinn.csv").exists()


def test_validate_weights_ok(weights_file, capsys):
    rc = main(["validate-weights", str(weights_file)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "tanh" in out
    assert "MACs" in out


def test_validate_weights_rejects_garbage(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{definitely not json")
    assert main(["validate-weights", str(path)]) == 1


def test_validate_weights_rejects_bad_shapes(tmp_path, weights_file):
    doc = json.loads(weights_file.read_text())
    doc["layers"][0]["w"] = doc["layers"][0]["w"][:-3]
    path = tmp_path / "short.json"
    path.write_text(json.dumps(doc))
    assert main(["validate-weights", str(path)]) == 1

"""Acceptance gates for the trained artifact in weights/pll_pinn_3x64.json.

Each test prints one PASS/FAIL line for its criterion:
  1. held-out per-step theta error at dt = 100 us, mean <= 1e-3 rad
  2. combined-loss gradient matches central differences to 1e-5 relative
  3. end-to-end hybrid vs iterative on the benchmark scenario:
     mean |err(i_a)| <= 1e-4 pu, max <= 1e-3 pu, mean |err(theta)| <= 1e-3 rad
  4. wall-time ratio over 20 seeded events (5 reps) >= 2x with the per-step
     cost breakdown published in the bench report
"""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import torch

from pll_trainer import pll_ode
from pll_trainer.export import numpy_rates
from pll_trainer.losses import total_loss
from pll_trainer.model import RateNet, tensors_from
from pll_trainer.sampling import TrainingConfig, sample_domain, label

ROOT = Path(__file__).resolve().parents[2]
WEIGHTS = ROOT / "weights" / "pll_pinn_3x64.json"
SCENARIO = ROOT / "scenarios" / "benchmark.json"


def _line(ok, text):
    print(f"[{'PASS' if ok else 'FAIL'}] {text}")
    assert ok, text


@pytest.fixture(scope="module")
def weights_doc():
    assert WEIGHTS.exists(), f"trained weights missing: {WEIGHTS}"
    return json.loads(WEIGHTS.read_text())


def test_heldout_per_step_error(weights_doc):
    rng = np.random.default_rng(20250814)
    n = 4000
    dt = 1e-4
    spec = {d["name"]: (d["lo"], d["hi"]) for d in weights_doc["input_spec"]}
    amp = rng.uniform(0.0, spec["v_a"][1], n)
    phase = rng.uniform(0.0, 2 * np.pi, n)
    theta = rng.uniform(0.0, 2 * np.pi, n)
    xi = rng.uniform(*spec["omega_integ"], n)
    v = pll_ode.balanced(amp, phase)

    th_true, _ = pll_ode.oracle_step(theta, xi, v, dt)
    feats = np.column_stack([np.full(n, dt), v[:, 0], v[:, 1], v[:, 2],
                             np.sin(theta), np.cos(theta), xi])
    rates = numpy_rates(weights_doc, feats)
    err = np.abs(theta + dt * rates[:, 0] - th_true)
    _line(err.mean() <= 1e-3,
          f"held-out per-step theta error at dt=100us: mean {err.mean():.3e} rad "
          f"(<= 1e-3), max {err.max():.3e} rad")


def test_loss_gradient_matches_finite_differences():
    cfg = TrainingConfig(widths=(8, 8), n_u=16, n_p=8, holdout=4, epochs=1)
    model = RateNet(cfg, seed=3)
    rng = np.random.default_rng(3)
    t_u = tensors_from(label(sample_domain(cfg, 16, rng)))
    t_p = tensors_from(sample_domain(cfg, 8, rng))
    alpha = 1e-3

    def value():
        return total_loss(model, t_u, t_p, alpha)[2]

    model.zero_grad()
    value().backward()
    w = model.linears[1].weight
    grads = w.grad.detach().clone()
    idx = torch.argsort(grads.abs().ravel(), descending=True)[:5]
    h = 1e-5
    worst = 0.0
    for k in idx:
        i, j = divmod(int(k), w.shape[1])
        with torch.no_grad():
            orig = w[i, j].item()
            w[i, j] = orig + h
        up = value().item()
        with torch.no_grad():
            w[i, j] = orig - h
        dn = value().item()
        with torch.no_grad():
            w[i, j] = orig
        fd = (up - dn) / (2 * h)
        worst = max(worst, abs(fd - grads[i, j].item()) / abs(grads[i, j].item()))
    _line(worst <= 1e-5,
          f"combined-loss gradient vs central differences: rel {worst:.2e} (<= 1e-5)")


def test_end_to_end_hybrid_accuracy(weights_doc, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "wt4emt.cli", "compare",
         "--scenario", str(SCENARIO), "--weights", str(WEIGHTS),
         "--out", str(tmp_path), "--reps", "1"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    m = json.loads((tmp_path / "metrics.json").read_text())["signals"]
    mean_i, max_i = m["i_a"]["mean_abs"], m["i_a"]["max_abs"]
    mean_th = m["theta_pll"]["mean_abs"]
    _line(mean_i <= 1e-4 and max_i <= 1e-3 and mean_th <= 1e-3,
          f"hybrid vs iterative on the benchmark scenario: mean |err(i_a)| "
          f"{mean_i:.3e} (<= 1e-4), max {max_i:.3e} (<= 1e-3), "
          f"mean |err(theta)| {mean_th:.3e} (<= 1e-3)")


def test_speedup_with_cost_breakdown(weights_doc, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "wt4emt.cli", "compare",
         "--scenario", str(SCENARIO), "--weights", str(WEIGHTS),
         "--out", str(tmp_path), "--bench", "--seed", "42",
         "--n", "20", "--reps", "5"],
        capture_output=True, text=True, timeout=3600)
    assert proc.returncode == 0, proc.stderr
    rep = json.loads((tmp_path / "bench.json").read_text())

    # the per-step cost breakdown must be part of the published report
    breakdown_ok = ("pll_step_us" in rep and "pinn_macs_per_step" in rep
                    and "newton_iters_per_step" in rep.get("aggregate", {}))
    speedup = rep.get("aggregate", {}).get("speedup_total", 0.0)
    us = rep.get("pll_step_us", {})
    _line(breakdown_ok and speedup >= 2.0,
          f"speedup over 20 seeded events (5 reps): {speedup:.2f}x (>= 2), "
          f"per-step cost iterative {us.get('iterative', float('nan')):.1f} us "
          f"vs surrogate {us.get('pinn', float('nan')):.1f} us, "
          f"{rep.get('pinn_macs_per_step')} MACs/step")

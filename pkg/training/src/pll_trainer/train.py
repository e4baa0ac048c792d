"""Full-batch Adam training with a stepwise-decaying learning rate.

Run from the command line:

    pll-train --config configs/pll3x64.json --out-dir runs/pll3x64 \
              --export ../weights/pll_pinn_3x64.json

which writes loss_curve.csv and report.json into the run directory and the
weights file in the simulator's format.  The loop keeps the parameters that
scored best on the held-out set and restores them at the end.
"""

import argparse
import copy
import json
import os
import time

import numpy as np
import torch

from .sampling import TrainingConfig, make_training_sets
from .model import RateNet, tensors_from
from .losses import total_loss
from . import export


class Divergence(RuntimeError):
    """Training loss became non-finite."""


def holdout_metrics(model, batch):
    """Per-step absolute errors of the surrogate on a labelled batch."""
    with torch.no_grad():
        th_hat, xi_hat = model.step(batch["dt"], batch["v_abc"],
                                    batch["theta"], batch["xi"])
        th_err = torch.abs(th_hat - batch["theta_next"])
        xi_err = torch.abs(xi_hat - batch["xi_next"])
    return {
        "theta_mean": float(th_err.mean()),
        "theta_max": float(th_err.max()),
        "xi_mean": float(xi_err.mean()),
        "xi_max": float(xi_err.max()),
    }


def train(config, out_dir=None, quiet=False):
    """Returns (model, report).  Optionally writes curve + report files."""
    torch.manual_seed(config.seed)
    model = RateNet(config)
    d_u, d_hold, d_p = make_training_sets(config)
    t_u, t_hold, t_p = tensors_from(d_u), tensors_from(d_hold), tensors_from(d_p)

    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    sched = torch.optim.lr_scheduler.StepLR(
        opt, step_size=config.lr_decay_every, gamma=config.lr_decay)

    curve = []
    best = {"theta_mean": float("inf")}
    best_state = None
    t0 = time.perf_counter()
    epochs_run = 0
    for epoch in range(1, config.epochs + 1):
        opt.zero_grad()
        l_u, l_p, total = total_loss(model, t_u, t_p, config.alpha)
        if not torch.isfinite(total):
            raise Divergence(f"non-finite loss at epoch {epoch}")
        total.backward()
        opt.step()
        sched.step()
        epochs_run = epoch

        if epoch % config.log_every == 0 or epoch == config.epochs:
            m = holdout_metrics(model, t_hold)
            curve.append({
                "epoch": epoch,
                "lr": sched.get_last_lr()[0],
                "loss_u": l_u.item(),
                "loss_p": l_p.item(),
                "loss_total": total.item(),
                **m,
            })
            if m["theta_mean"] < best["theta_mean"]:
                best = m
                best_state = copy.deepcopy(model.state_dict())
            if not quiet:
                print(f"epoch {epoch:>7d}  lr {sched.get_last_lr()[0]:.2e}  "
                      f"L_u {l_u.item():.3e}  L_p {l_p.item():.3e}  "
                      f"holdout theta {m['theta_mean']:.3e}", flush=True)
            if config.target_holdout and m["theta_mean"] <= config.target_holdout:
                break

    if best_state is not None:
        model.load_state_dict(best_state)
    final = holdout_metrics(model, t_hold)
    report = {
        "config": json.loads(config.to_json()),
        "epochs_run": epochs_run,
        "wall_time_s": time.perf_counter() - t0,
        "holdout": final,
        "holdout_dt": config.dt_max,
        "final_loss_u": curve[-1]["loss_u"] if curve else None,
        "final_loss_p": curve[-1]["loss_p"] if curve else None,
    }

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        cols = list(curve[0].keys()) if curve else []
        with open(os.path.join(out_dir, "loss_curve.csv"), "w") as f:
            f.write(",".join(cols) + "\n")
            for row in curve:
                f.write(",".join(f"{row[c]:.10g}" if c != "epoch" else str(row[c])
                                 for c in cols) + "\n")
        with open(os.path.join(out_dir, "report.json"), "w") as f:
            json.dump(report, f, indent=2)
            f.write("\n")
    return model, report


def main(argv=None):
    ap = argparse.ArgumentParser(
        description="train the PLL stepper surrogate and export its weights")
    ap.add_argument("--config", required=True, help="TrainingConfig JSON file")
    ap.add_argument("--out-dir", default=None, help="where to put curve/report")
    ap.add_argument("--export", default=None, help="weights file to write")
    ap.add_argument("--epochs", type=int, default=None, help="override epochs")
    ap.add_argument("--seed", type=int, default=None, help="override seed")
    args = ap.parse_args(argv)

    config = TrainingConfig.from_json(args.config)
    if args.epochs is not None:
        config.epochs = args.epochs
    if args.seed is not None:
        config.seed = args.seed

    model, report = train(config, out_dir=args.out_dir)
    print(f"holdout |theta err| mean {report['holdout']['theta_mean']:.3e} rad, "
          f"max {report['holdout']['theta_max']:.3e} rad "
          f"({report['epochs_run']} epochs, {report['wall_time_s']:.0f} s)")
    if args.export:
        export.export_weights(model, args.export)
        gap = export.crosscheck(model, args.export)
        print(f"wrote {args.export} (round-trip gap {gap:.2e})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

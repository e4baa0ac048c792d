"""Command-line front end: run scenarios, compare solver modes, check weights.

Exit codes: 0 success, 1 runtime/solver failure, 2 usage or configuration
error.  All artifacts land under --out.
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import engine, pinn_inference, wt4_model
from .errors import SimError


def params_from_scenario(sc):
    """Wt4Params for a scenario, honoring its params-override block."""
    over = dict(sc.params_overrides or {})
    ctrl_over = over.pop("control", {})
    over.pop("dt", None)  # the scenario's own dt field is authoritative
    p = wt4_model.Wt4Params(dt=sc.dt, **over)
    if ctrl_over:
        p = replace(p, control=replace(p.control, **ctrl_over))
    return p


def _load_scenario_and_system(args):
    sc = engine.scenario_from_json(args.scenario)
    params = params_from_scenario(sc)
    sys_ = wt4_model.init_steady_state(params, sc.setpoints_initial)
    return sc, params, sys_


def _load_pinn(path):
    return pinn_inference.load_weights(path)


def cmd_run(args):
    if args.mode == "pinn" and not args.weights:
        print("mode pinn requires --weights", file=sys.stderr)
        return 2
    sc, _params, sys_ = _load_scenario_and_system(args)
    pinn = _load_pinn(args.weights) if args.mode == "pinn" else None
    os.makedirs(args.out, exist_ok=True)

    times = []
    res = None
    for _ in range(max(1, args.reps)):
        res = engine.simulate(sys_, sc, args.mode, pinn=pinn)
        times.append(res.wall_time)
    csv_path = os.path.join(args.out, f"traces_{args.mode}.csv")
    engine.traces_to_csv(res, csv_path)
    summary = {
        "mode": args.mode,
        "steps": res.steps,
        "dt": res.dt,
        "wall_time_mean_s": float(np.mean(times)),
        "wall_time_spread": float(np.ptp(times) / np.mean(times)) if len(times) > 1 else 0.0,
        "pll_iterations_total": res.pll_iterations_total,
        "traces_csv": csv_path,
    }
    with open(os.path.join(args.out, f"run_{args.mode}.json"), "w") as f:
        json.dump(summary, f, indent=2)
    print(f"{res.steps} steps in {np.mean(times):.3f} s -> {csv_path}")
    return 0


def cmd_compare(args):
    sc, params, sys_ = _load_scenario_and_system(args)
    pinn = _load_pinn(args.weights)
    os.makedirs(args.out, exist_ok=True)

    if args.bench:
        report = engine.bench(params, pinn, seed=args.seed, n=args.n, reps=args.reps)
        path = os.path.join(args.out, "bench.json")
        with open(path, "w") as f:
            json.dump(report, f, indent=2)
        agg = report.get("aggregate", {})
        print(f"bench: {len(report['per_scenario'])}/{args.n} scenarios, "
              f"speedup {agg.get('speedup_total', float('nan')):.2f}x -> {path}")
        return 0

    base_times, hyb_times = [], []
    base = hyb = None
    for _ in range(max(1, args.reps)):
        base = engine.simulate(sys_, sc, "iterative")
        base_times.append(base.wall_time)
        hyb = engine.simulate(sys_, sc, "pinn", pinn=pinn)
        hyb_times.append(hyb.wall_time)
    m = engine.compare(base, hyb)
    m.speedup = float(np.mean(base_times) / np.mean(hyb_times))
    engine.traces_to_csv(base, os.path.join(args.out, "traces_iterative.csv"))
    engine.traces_to_csv(hyb, os.path.join(args.out, "traces_pinn.csv"))
    path = os.path.join(args.out, "metrics.json")
    with open(path, "w") as f:
        f.write(engine.metrics_to_json(m))
    print(f"max |err(i_a)| {m.max_abs['i_a']:.3e} pu, "
          f"speedup {m.speedup:.2f}x -> {path}")
    return 0


def cmd_validate_weights(args):
    p = pinn_inference.load_weights(args.path)
    n_hidden, widths = p.arch
    shape = f"{n_hidden} hidden x {widths[0]}" if widths else "no hidden layers"
    print(f"{shape}, {p.activation}; {p.mac_count} MACs per call")
    for s in p.input_spec:
        print(f"  in  {s.name}: [{s.lo:g}, {s.hi:g}]")
    for s in p.output_spec:
        print(f"  out {s.name}: offset {s.offset:g}, scale {s.scale:g}")
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(prog="wt4emt",
                                 description="type-4 wind turbine EMT benchmark")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="simulate one scenario")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--mode", choices=engine.PLL_MODES, default="iterative")
    p_run.add_argument("--weights")
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--reps", type=int, default=1)

    p_cmp = sub.add_parser("compare", help="iterative vs pinn on one scenario")
    p_cmp.add_argument("--scenario", required=True)
    p_cmp.add_argument("--weights", required=True)
    p_cmp.add_argument("--out", default="out")
    p_cmp.add_argument("--reps", type=int, default=5)
    p_cmp.add_argument("--bench", action="store_true",
                       help="randomized multi-event benchmark instead")
    p_cmp.add_argument("--seed", type=int, default=42)
    p_cmp.add_argument("--n", type=int, default=20)

    p_val = sub.add_parser("validate-weights", help="check a weights file")
    p_val.add_argument("path")

    args = ap.parse_args(argv)
    handler = {"run": cmd_run, "compare": cmd_compare,
               "validate-weights": cmd_validate_weights}[args.cmd]
    try:
        return handler(args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except SimError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

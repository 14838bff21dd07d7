"""Command-line front end: run sweeps, brute-force checks, config validation."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace

import numpy as np

from .algorithm import brute_force_oracle, run_baseline
from .errors import ConfigError, EeSimError, InfeasibleProblem, OracleTooLarge
from .experiments import (
    SWEEP_ALIASES,
    ExperimentConfig,
    load_config,
    run_sweep,
    trial_scenario,
    write_results,
)
from .power import solve_power_alm
from .scenario import evaluate, feasibility_precheck
from .trajectory import optimize_trajectory

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_PARTIAL = 4


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="ee-sim",
        description="Energy-efficiency experiments for the UAV-relayed THz network",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a Monte Carlo sweep and write CSV results")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--sweep", choices=sorted(SWEEP_ALIASES), help="override the sweep axis")
    run_p.add_argument("--trials", type=int)
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--methods", help="comma-separated subset, e.g. proposed,a,c")
    run_p.add_argument("--out", help="output CSV path")
    run_p.add_argument("--workers", type=int)
    run_p.add_argument("--timing", action="store_true", help="record wall times (breaks bit-reproducibility)")

    oracle_p = sub.add_parser("oracle", help="compare the optimizers against brute-force grids")
    oracle_p.add_argument("--config", required=True)
    oracle_p.add_argument("--trial", type=int, default=0)

    val_p = sub.add_parser("validate", help="feasibility pre-check of the configured scenario")
    val_p.add_argument("--config", required=True)
    val_p.add_argument("--trial", type=int, default=0)
    return parser


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if args.sweep:
        updates["sweep"] = SWEEP_ALIASES[args.sweep]
        updates["sweep_values"] = None  # fall back to the axis defaults
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.methods:
        updates["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if args.out:
        updates["output_path"] = args.out
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.timing:
        updates["timing"] = True
    return replace(cfg, **updates) if updates else cfg


def _cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    records = run_sweep(cfg)
    write_results(records, cfg.output_path, cfg)
    failures = sum(1 for r in records if not math.isfinite(r.final_ee))
    print(f"wrote {len(records)} records to {cfg.output_path} ({failures} failed trials)")
    return EXIT_PARTIAL if failures else EXIT_OK


def _cmd_oracle(args) -> int:
    cfg = load_config(args.config)
    value = cfg.sweep_values[0]
    scn = trial_scenario(cfg, value, args.trial)
    if scn.n_slots > 3:
        print(
            f"oracle needs at most 3 slots, config resolves to {scn.n_slots}; "
            "set 'slots' accordingly",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    traj = scn.initial_trajectory()
    feasibility_precheck(scn, traj)

    psol = solve_power_alm(traj, scn)
    power_oracle = brute_force_oracle(scn, trajectory=traj)
    ratio_p = psol.ee / power_oracle.ee_sum if power_oracle.ee_sum else float("nan")
    print(f"power step  : alm {psol.ee:.6f} vs grid {power_oracle.ee_sum:.6f} "
          f"({100 * ratio_p:.2f}% of oracle)")

    powers = scn.initial_powers()
    tr = optimize_trajectory(traj, powers, scn)
    ee_tr = evaluate(scn, tr.trajectory, powers).ee_sum
    traj_oracle = brute_force_oracle(scn, powers=powers)
    ratio_t = ee_tr / traj_oracle.ee_sum if traj_oracle.ee_sum else float("nan")
    print(f"trajectory  : sca {ee_tr:.6f} vs grid {traj_oracle.ee_sum:.6f} "
          f"({100 * ratio_t:.2f}% of oracle)")
    ok = ratio_p >= 0.98 and ratio_t >= 0.95
    print("oracle comparison:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_PARTIAL


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    value = cfg.sweep_values[0]
    scn = trial_scenario(cfg, value, args.trial)
    traj = scn.initial_trajectory()
    feasibility_precheck(scn, traj)
    print(
        f"feasible: {scn.n_slots} slots, step budget {traj.step_budget:.3g} m, "
        f"span {traj.start.distance_to(traj.end):.3g} m"
    )
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        if args.command == "validate":
            return _cmd_validate(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleProblem, OracleTooLarge) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except EeSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())

"""Small Monte Carlo sweep through the experiment harness, written to CSV.

Run:  python demos/demo_sweep.py  (writes demo_results.csv + .config.json)
"""

import numpy as np

from ee_sim.experiments import DESK_SCENARIO, ExperimentConfig, run_sweep, write_results

cfg = ExperimentConfig(
    scenario=dict(DESK_SCENARIO),
    sweep="rhs_elements",
    sweep_values=[4, 8, 16],
    trials=3,
    methods=("proposed", "c", "initial"),
    seed=42,
    slots=4,
    workers=2,
    output_path="demo_results.csv",
    algo={"i_max": 2, "traj_outer": 6, "sca_max_iters": 6, "alm_max_outer": 9},
)
records = run_sweep(cfg)
write_results(records, cfg.output_path, cfg)

print(f"\n{len(records)} records -> {cfg.output_path}")
print("mean efficiency by (elements, method):")
for value in cfg.sweep_values:
    row = []
    for method in cfg.methods:
        vals = [r.final_ee for r in records if r.sweep_value == value and r.method == method]
        row.append(f"{method}={np.nanmean(vals):8.2f}")
    print(f"  M={int(value):2d}:  " + "  ".join(row))

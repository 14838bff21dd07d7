"""Power step on one instance, checked against an exhaustive grid.

Run:  python demos/demo_power_step.py
"""

import numpy as np

from ee_sim import brute_force_oracle, build_scenario, solve_power_alm
from ee_sim.experiments import DESK_SCENARIO

base = dict(DESK_SCENARIO)
base.pop("slots", None)
scn = build_scenario(
    source_xy=(12.0, 18.0),
    dest_xy=(20.0, 8.0),
    start_xy=(14.0, 14.0),
    end_xy=(14.0, 14.0),  # hovering: isolates the power allocation
    slots=1,
    overrides=base,
)
traj = scn.initial_trajectory()

sol = solve_power_alm(traj, scn)
rho = sol.powers[0]
print(f"allocated coefficients: rho1 = {rho.rho1:.4f} W, rho2 = {rho.rho2:.4f} W "
      f"(peak {scn.p_peak_w} W)")
print(f"summed efficiency   : {sol.ee:.6f} bits/s/Hz per W")
print(f"outer iterations    : {sol.iterations}, feasible: {sol.feasible}")
print("constraint residuals:")
for name, val in sol.feasibility_residuals.items():
    print(f"  {name:14s} {val:.2e}")

oracle = brute_force_oracle(scn, trajectory=traj, rho_steps=400)
print(f"\n400x400 grid oracle : {oracle.ee_sum:.6f} at rho = {oracle.powers[0].round(4)}")
print(f"solver reaches {100 * sol.ee / oracle.ee_sum:.2f}% of the exhaustive optimum")

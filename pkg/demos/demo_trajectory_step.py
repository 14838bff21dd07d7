"""Trajectory step on one instance: watch the path bend toward the nodes.

Run:  python demos/demo_trajectory_step.py
"""

import numpy as np

from ee_sim import build_scenario, evaluate, optimize_trajectory
from ee_sim.scenario import DEFAULTS

overrides = {"mission_time_s": 40.0, "eh_scaled_by_tx_power": True}
scn = build_scenario(
    source_xy=(8.0, 22.0),
    dest_xy=(24.0, 10.0),
    start_xy=(1.5, 1.5),
    end_xy=(28.5, 28.5),
    slots=5,
    overrides=overrides,
)
traj = scn.initial_trajectory()
powers = scn.initial_powers()

before = evaluate(scn, traj, powers)
print("straight-line slots (x, y) and per-slot efficiency:")
for k, p in enumerate(traj.slot_positions()):
    print(f"  slot {k}: ({p[0]:5.2f}, {p[1]:5.2f})  ee = {before.ee_slots[k]:.4f}")

result = optimize_trajectory(traj, powers, scn)
after = evaluate(scn, result.trajectory, powers)
print(f"\noptimized in {result.outer_iterations} outer iterations "
      f"(weights residual {result.theta_norm:.1e}):")
for k, p in enumerate(result.trajectory.slot_positions()):
    print(f"  slot {k}: ({p[0]:5.2f}, {p[1]:5.2f})  ee = {after.ee_slots[k]:.4f}")

print(f"\nsummed efficiency: {before.ee_sum:.4f} -> {after.ee_sum:.4f} "
      f"({100 * (after.ee_sum / before.ee_sum - 1):.1f}% gain)")
src = scn.source.as_array()
d0 = np.linalg.norm(traj.slot_positions() - src, axis=1).min()
d1 = np.linalg.norm(result.trajectory.slot_positions() - src, axis=1).min()
print(f"closest approach to the source: {d0:.2f} m -> {d1:.2f} m")

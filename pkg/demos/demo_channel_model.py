"""Walk through the THz channel model: path gains, absorption, surface sums.

Run:  python demos/demo_channel_model.py
"""

import numpy as np

from ee_sim import ChannelParams, Position3D, RhsLayout, gain_sr_sum, gain_su, path_gain

params = ChannelParams(carrier_freq_hz=1.2e12, absorption_coeff=0.005)
print(f"reference gain at 1 m: {params.ref_gain:.6e} (c / 4 pi f)")

print("\nfree-space amplitude gain vs distance (with molecular absorption):")
for d in (1.0, 5.0, 10.0, 20.0, 40.0):
    clear = path_gain(d, ChannelParams(carrier_freq_hz=1.2e12, absorption_coeff=0.0))
    foggy = path_gain(d, params)
    print(f"  {d:5.1f} m   clear {clear:.3e}   absorbing {foggy:.3e}   ratio {foggy/clear:.4f}")

print("\nabsorption coefficient sweep at 15 m:")
for xi in (0.005, 0.010, 0.020, 0.040):
    g = path_gain(15.0, ChannelParams(carrier_freq_hz=1.2e12, absorption_coeff=xi))
    print(f"  xi = {xi:.3f} /m -> gain {g:.3e}")

source = Position3D(0.0, 0.0, 2.0)
uav = Position3D(8.0, 3.0, 3.0)
print(f"\nsource-to-UAV link over {source.distance_to(uav):.2f} m: {gain_su(uav, source, params):.3e}")

print("\nsummed element gains of the harvesting surface (lambda/2 grid):")
for m in (1, 4, 16):
    rhs = RhsLayout.half_wavelength_grid(m, params.carrier_freq_hz)
    total = gain_sr_sum(uav, rhs, source, params)
    print(f"  M = {m:2d}: {total:.4e}  ({total / gain_su(uav, source, params):.3f}x the point link)")

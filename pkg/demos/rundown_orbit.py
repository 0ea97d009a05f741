"""Rundown through the critical speed, then the key-phasor orbit at constant speed.

Run with ``python3 demos/rundown_orbit.py [output_dir]``.
"""

import sys
from pathlib import Path

import numpy as np

from rotorvib.orbit import average_orbit, detect_tacho, order_filter, slice_revolutions, whirl_direction
from rotorvib.plots import plot_orbit
from rotorvib.rotor import (
    TACHO_AMPLITUDE,
    JeffcottParams,
    build_jeffcott,
    eigen_symmetric,
    envelope_peak_speed,
    simulate_rundown,
)

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)

params = JeffcottParams(disc_mass=10.0, shaft_stiffness=1e6, damping_ratio=0.02, unbalance_mass_ecc=1e-4)
rotor = build_jeffcott(params)
wd = eigen_symmetric(rotor).damped_frequencies[0]

# Slow rundown from 450 to 200 rad/s: the unbalance response peaks near the critical speed.
rundown = simulate_rundown(rotor, params, (450.0, 200.0), 1e-4, 20.0)
t_peak, w_peak = envelope_peak_speed(rundown)
print(f"damped natural frequency {wd:.2f} rad/s")
print(f"y-envelope peaks at {w_peak:.2f} rad/s (t = {t_peak:.2f} s), {abs(w_peak - wd) / wd:.1%} away")

# Constant speed below the critical: the unbalance orbit is a forward-whirling circle.
steady = simulate_rundown(rotor, params, (250.0, 250.0), 1e-4, 3.0)
train = detect_tacho(steady.tacho, 0.5 * TACHO_AMPLITUDE)
slices = slice_revolutions(steady["y"], steady["z"], train)
raw = average_orbit(slices)
one_x = order_filter(slices, 1)
print(f"{len(slices)} revolutions at {slices.mean_speed:.1f} rad/s, dropped {slices.n_dropped}")
print(f"averaged orbit RMS radius {raw.rms_radius():.3e} m, 1X orbit RMS radius {one_x.rms_radius():.3e} m")
print("whirl:", whirl_direction(one_x))
plot_orbit(one_x, out / "unbalance_orbit.svg")
print("wrote", out / "unbalance_orbit.svg")

"""Capturing half-sine shocks, checking them against limits, and windowing a startup transient.

Run with ``python3 demos/shock_capture.py [output_dir]``.
"""

import sys
from pathlib import Path

import numpy as np

from rotorvib.plots import plot_shock
from rotorvib.shock import (
    ExponentialWindow,
    LimitOverlay,
    apply_decay_window,
    capture_shocks,
    pulse_parameters,
    validate_limits,
)
from rotorvib.signal_core import ChannelRecord, MultiChannelRecord

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)

# Two 50 m/s^2, 11 ms half-sine pulses in light noise.
fs = 20000.0
t = np.arange(int(0.3 * fs)) / fs
x = np.random.default_rng(3).normal(0.0, 0.2, t.size)
for t0 in (0.05, 0.2):
    x += np.where((t >= t0) & (t <= t0 + 0.011), 50.0 * np.sin(np.pi * (t - t0) / 0.011), 0.0)
acc = ChannelRecord("acc", x, fs, "m_per_s2")

events = capture_shocks(acc, trigger_level=5.0, pre_window=0.005, post_window=0.02)
# A pass band around the nominal half-sine, relative to the trigger instant. It spans a
# little more than the capture window, since the event starts on a sample boundary.
offsets = np.linspace(-0.006, 0.021, 55)
t_start = -0.011 * np.arcsin(0.1) / np.pi
nominal = np.where((offsets >= t_start) & (offsets <= t_start + 0.011),
                   50.0 * np.sin(np.pi * (offsets - t_start) / 0.011), 0.0)
overlay = LimitOverlay(offsets, nominal + 10.0, nominal - 10.0)
for i, e in enumerate(events):
    p = pulse_parameters(e)
    v = validate_limits(e, overlay, fit=True)
    print(f"event {i}: t = {e.trigger_time:.4f} s, peak {p.peak:.2f} m/s^2, "
          f"duration {p.duration_10pct * 1e3:.2f} ms, delta-v {p.delta_v:.4f} m/s, limits {v.label}")
    plot_shock(e, out / f"shock_{i}.svg", overlay, v.shift)
print(f"closed-form delta-v {2 * 50.0 * 0.011 / np.pi:.4f} m/s")

# A startup transient decays under an exponential window: 10 * e^-2 after 0.1 s with tau 0.05 s.
fs = 10000.0
t = np.arange(5000) / fs
burst = 10.0 * np.exp(-(((t - 0.1) / 0.003) ** 2)) * np.cos(2 * np.pi * 200 * (t - 0.1))
rec = MultiChannelRecord((ChannelRecord("y", burst, fs, "g"),), fs)
windowed = apply_decay_window(rec, ExponentialWindow(0.05), (0.0, 0.4999))
print(f"transient peak {np.abs(burst).max():.3f} g -> {np.abs(windowed['y'].samples).max():.3f} g "
      f"(expected {10 * np.exp(-2):.3f} g)")

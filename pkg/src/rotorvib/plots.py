"""Deterministic SVG figures (matplotlib, fixed hash salt, no timestamp)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "rotorvib"
matplotlib.rcParams["svg.fonttype"] = "none"


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def plot_orbit(orbit, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    y = np.append(orbit.y, orbit.y[0])
    z = np.append(orbit.z, orbit.z[0])
    ax.plot(y, z, lw=1.2)
    ax.plot(orbit.y[0], orbit.z[0], "o", label="TDC")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("y")
    ax.set_ylabel("z")
    ax.set_title(title or f"orbit ({orbit.label}, {orbit.n_revs_averaged} revs)")
    ax.legend(loc="upper right")
    _save(fig, path)


def plot_frf(curves, path) -> None:
    fig, (ax_m, ax_p) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
    for c in curves:
        ax_m.semilogy(c.frequencies, np.abs(c.values), label=c.method)
        ax_p.plot(c.frequencies, np.degrees(np.angle(c.values)), label=c.method)
    ax_m.set_ylabel("|alpha| (m/N)")
    ax_p.set_ylabel("phase (deg)")
    ax_p.set_xlabel("frequency (rad/s)")
    ax_m.legend()
    _save(fig, path)


def plot_shock(event, path, overlay=None, shift: float = 0.0) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(event.times, event.samples, lw=1.0, label="signal")
    if overlay is not None:
        t = event.trigger_time + shift + overlay.offsets
        ax.plot(t, overlay.upper, "r--", lw=0.8, label="limits")
        ax.plot(t, overlay.lower, "r--", lw=0.8)
    ax.axvline(event.trigger_time, color="k", lw=0.5)
    ax.set_xlabel("time (s)")
    ax.set_ylabel(event.unit)
    ax.legend()
    _save(fig, path)


def plot_order_spectrum(spectrum, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(spectrum.orders, spectrum.amplitudes, width=0.18)
    ax.set_xlabel("order")
    ax.set_ylabel("amplitude")
    ax.set_title(f"order spectrum at {spectrum.mean_speed:.1f} rad/s")
    _save(fig, path)


def plot_trend(entries, path, point_id: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ts = [e.ts for e in entries]
    ax.plot(ts, [e.v_rms_mm_s for e in entries], "o-")
    ax.set_xlabel("timestamp")
    ax.set_ylabel("overall velocity (mm/s RMS)")
    ax.set_title(point_id)
    _save(fig, path)

"""Key-phasor processing and shaft orbits.

A once-per-rev tacho gives both the running speed and the top-dead-centre
(TDC) reference. Each revolution between consecutive pulses is resampled at
``P`` equal phase steps, which makes revolution averaging and order
extraction exact even while the speed drifts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AliasingError,
    DegenerateOrbitError,
    DomainError,
    DropoutError,
    InsufficientPulsesError,
    RoleError,
    UnitError,
)
from .signal_core import ChannelRecord, resample_linear

DEFAULT_SAMPLES_PER_REV = 128
MIN_SAMPLES_PER_REV = 32
DROPOUT_JUMP = 0.5


@dataclass(frozen=True, eq=False)
class TachoTrain:
    pulse_times: np.ndarray
    threshold_used: float

    def __post_init__(self):
        t = np.array(self.pulse_times, dtype=float)
        if np.any(np.diff(t) <= 0):
            raise DomainError("pulse times must be strictly ascending")
        t.setflags(write=False)
        object.__setattr__(self, "pulse_times", t)

    def __len__(self):
        return self.pulse_times.size

    @property
    def rev_periods(self) -> np.ndarray:
        return np.diff(self.pulse_times)

    @property
    def dropouts(self) -> np.ndarray:
        """Indices ``i`` of periods that jump by more than 50% from period ``i - 1``."""
        p = self.rev_periods
        if p.size < 2:
            return np.array([], dtype=int)
        jump = np.abs(p[1:] - p[:-1]) / p[:-1]
        return np.flatnonzero(jump > DROPOUT_JUMP) + 1

    def shifted(self, dt: float) -> "TachoTrain":
        return TachoTrain(self.pulse_times + dt, self.threshold_used)


def detect_tacho(ch: ChannelRecord, threshold: float, hysteresis: float = 0.0,
                 start_time: float = 0.0) -> TachoTrain:
    """Rising-edge threshold crossings of a key-phasor channel.

    After a crossing the detector re-arms only once the signal has dropped
    below ``threshold - hysteresis``. Edge times are interpolated linearly
    between the two straddling samples.
    """
    if ch.role != "tacho":
        raise RoleError(f"channel {ch.name!r} has role {ch.role!r}, expected 'tacho'")
    if hysteresis < 0:
        raise DomainError("hysteresis must be >= 0")
    x = ch.samples
    rearm = threshold - hysteresis
    armed = x[0] < threshold
    times = []
    for i in range(1, x.size):
        if armed:
            if x[i] >= threshold and x[i - 1] < threshold:
                frac = (threshold - x[i - 1]) / (x[i] - x[i - 1])
                times.append(start_time + (i - 1 + frac) / ch.sample_rate)
                armed = False
        elif x[i] < rearm:
            armed = True
    if len(times) < 3:
        raise InsufficientPulsesError(f"found {len(times)} tacho pulses, need at least 3")
    return TachoTrain(np.array(times), float(threshold))


class SpeedProfile:
    """Piecewise-linear speed (rad/s) through per-revolution midpoints."""

    def __init__(self, train: TachoTrain):
        if len(train) < 2:
            raise InsufficientPulsesError("speed_profile needs at least 2 pulses")
        t = train.pulse_times
        self.midpoints = 0.5 * (t[1:] + t[:-1])
        self.speeds = 2 * np.pi / np.diff(t)

    def __call__(self, t):
        return np.interp(t, self.midpoints, self.speeds)

    @property
    def mean(self) -> float:
        return float(np.mean(self.speeds))


def speed_profile(train: TachoTrain) -> SpeedProfile:
    return SpeedProfile(train)


@dataclass(frozen=True, eq=False)
class RevolutionSlices:
    """Phase-resampled revolutions; row ``i`` of ``y``/``z`` is revolution ``i``.

    Column 0 of every row is the TDC (pulse) instant.
    """

    y: np.ndarray
    z: np.ndarray
    periods: np.ndarray
    n_dropped: int = 0
    filter_mode: str = "raw"

    def __len__(self):
        return self.y.shape[0]

    def __iter__(self):
        return iter(zip(self.y, self.z))

    @property
    def samples_per_rev(self) -> int:
        return self.y.shape[1]

    @property
    def mean_speed(self) -> float:
        return float(np.mean(2 * np.pi / self.periods))


def _check_vibration(ch: ChannelRecord) -> None:
    if ch.unit == "volt":
        raise UnitError(f"channel {ch.name!r} is uncalibrated (volts)")


def slice_revolutions(y: ChannelRecord, z: ChannelRecord, train: TachoTrain,
                      samples_per_rev: int = DEFAULT_SAMPLES_PER_REV,
                      start_time: float = 0.0, filter_mode: str = "raw") -> RevolutionSlices:
    """Cut ``y``/``z`` into revolutions at the tacho pulses and resample each one.

    Revolutions that run past either end of the record are dropped and
    counted in ``n_dropped``. A dropout (period jump above 50%) aborts.
    """
    if samples_per_rev < MIN_SAMPLES_PER_REV:
        raise DomainError(f"samples_per_rev must be >= {MIN_SAMPLES_PER_REV}, got {samples_per_rev}")
    _check_vibration(y)
    _check_vibration(z)
    bad = train.dropouts
    if bad.size:
        i = int(bad[0])
        raise DropoutError(
            f"tacho dropout: revolution {i} period {train.rev_periods[i]:.6g} s vs "
            f"{train.rev_periods[i - 1]:.6g} s before it (> {DROPOUT_JUMP:.0%} jump)"
        )
    t_end = start_time + (min(len(y), len(z)) - 1) / y.sample_rate
    frac = np.arange(samples_per_rev) / samples_per_rev
    ys, zs, periods = [], [], []
    dropped = 0
    for t0, t1 in zip(train.pulse_times[:-1], train.pulse_times[1:]):
        if t0 < start_time or t1 > t_end:
            dropped += 1
            continue
        times = t0 + frac * (t1 - t0)
        ys.append(resample_linear(y, times, start_time))
        zs.append(resample_linear(z, times, start_time))
        periods.append(t1 - t0)
    if not ys:
        raise InsufficientPulsesError("no complete revolution lies inside the record")
    return RevolutionSlices(np.array(ys), np.array(zs), np.array(periods), dropped, filter_mode)


@dataclass(frozen=True, eq=False)
class Orbit:
    y: np.ndarray
    z: np.ndarray
    n_revs_averaged: int
    filter_mode: str
    mean_speed: float
    order: int | None = None

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        z = np.array(self.z, dtype=float)
        if y.shape != z.shape or y.ndim != 1 or y.size < MIN_SAMPLES_PER_REV:
            raise DomainError(f"orbit needs equal-length y, z with >= {MIN_SAMPLES_PER_REV} points")
        y.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @property
    def samples_per_rev(self) -> int:
        return self.y.size

    @property
    def label(self) -> str:
        return f"order_filtered({self.order})" if self.filter_mode == "order_filtered" else self.filter_mode

    def rms_radius(self) -> float:
        return float(np.sqrt(np.mean(self.y**2 + self.z**2)))

    def rotated(self, angle: float) -> "Orbit":
        c, s = np.cos(angle), np.sin(angle)
        return Orbit(c * self.y - s * self.z, s * self.y + c * self.z,
                     self.n_revs_averaged, self.filter_mode, self.mean_speed, self.order)


def average_orbit(slices: RevolutionSlices, n_revs: int | None = None) -> Orbit:
    """Pointwise mean of the first ``n_revs`` revolutions."""
    n_revs = len(slices) if n_revs is None else n_revs
    if n_revs < 1:
        raise DomainError("n_revs must be >= 1")
    if n_revs > len(slices):
        raise DomainError(f"n_revs = {n_revs} exceeds the {len(slices)} available revolutions")
    # mean taken about the first revolution: exact when all revolutions agree
    y = slices.y[0] + (slices.y[:n_revs] - slices.y[0]).mean(axis=0)
    z = slices.z[0] + (slices.z[:n_revs] - slices.z[0]).mean(axis=0)
    speed = float(np.mean(2 * np.pi / slices.periods[:n_revs]))
    return Orbit(y, z, n_revs, slices.filter_mode, speed)


def order_coefficients(slices: RevolutionSlices, order: int) -> tuple[complex, complex]:
    """Complex amplitude of ``order`` for y and z, averaged over all revolutions.

    A component ``A cos(h phi + p)`` yields ``A e^{i p}``.
    """
    P = slices.samples_per_rev
    if order < 1 or int(order) != order:
        raise DomainError("order must be a positive integer")
    if order >= P / 2:
        raise AliasingError(f"order {order} is not below P/2 = {P / 2}")
    phi = 2 * np.pi * np.arange(P) / P
    kernel = np.exp(-1j * order * phi) * (2.0 / P)
    cy = complex(np.mean(slices.y @ kernel))
    cz = complex(np.mean(slices.z @ kernel))
    return cy, cz


def order_filter(slices: RevolutionSlices, order: int) -> Orbit:
    """Orbit reconstructed from the single harmonic ``order`` (an ellipse)."""
    if len(slices) < 2:
        raise DomainError("order_filter needs at least 2 revolutions")
    cy, cz = order_coefficients(slices, order)
    phi = 2 * np.pi * np.arange(slices.samples_per_rev) / slices.samples_per_rev
    basis = np.exp(1j * order * phi)
    y = (cy * basis).real
    z = (cz * basis).real
    return Orbit(y, z, len(slices), "order_filtered", slices.mean_speed, int(order))


def whirl_direction(o: Orbit, rotation_sense: str = "ccw") -> str:
    """Forward, backward or planar from the orbit's signed area.

    Positive area is counter-clockwise in the (y, z) plane.
    """
    if rotation_sense not in ("ccw", "cw"):
        raise DomainError("rotation_sense must be 'ccw' or 'cw'")
    r2 = o.rms_radius() ** 2
    if r2 == 0:
        raise DegenerateOrbitError("orbit has zero RMS radius")
    y, z = o.y, o.z
    area = 0.5 * np.sum(y * np.roll(z, -1) - np.roll(y, -1) * z)
    if abs(area) < 1e-6 * r2:
        return "planar"
    ccw = area > 0
    return "forward" if ccw == (rotation_sense == "ccw") else "backward"


def write_orbit_csv(o: Orbit, path) -> None:
    """CSV ``phase_index,y,z`` plus a ``.json`` sidecar."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("phase_index,y,z\n")
        for i, (a, b) in enumerate(zip(o.y, o.z)):
            fh.write(f"{i},{a:.9g},{b:.9g}\n")
    meta = {"n_revs_averaged": o.n_revs_averaged, "filter_mode": o.label,
            "mean_speed_rad_s": o.mean_speed, "samples_per_rev": o.samples_per_rev}
    path.with_suffix(".json").write_text(json.dumps(meta))

"""Uniformly sampled vibration records: ingestion, calibration, spectra, filtering."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import signal as sps

from .errors import DataError, DomainError, FormatError, LengthError, RangeError, RoleError, UnitError

UNITS = ("volt", "g", "m_per_s2", "m_per_s", "m", "dimensionless")
ROLES = ("vibration", "tacho", "force")
ACCELERATION_UNITS = ("g", "m_per_s2")

STANDARD_GRAVITY = 9.80665

HANN_AMPLITUDE_CORRECTION = 2.0


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ChannelRecord:
    """One uniformly sampled channel.

    ``samples`` is stored as a read-only float64 copy.
    """

    name: str
    samples: np.ndarray
    sample_rate: float
    unit: str = "volt"
    role: str = "vibration"

    def __post_init__(self):
        samples = _frozen_array(self.samples)
        if samples.ndim != 1 or samples.size == 0:
            raise LengthError(f"channel {self.name!r}: samples must be a non-empty 1-D sequence")
        bad = np.flatnonzero(~np.isfinite(samples))
        if bad.size:
            raise DataError(f"channel {self.name!r}: non-finite sample at index {bad[0]}")
        if not (np.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise DomainError(f"channel {self.name!r}: sample_rate must be > 0, got {self.sample_rate}")
        if self.unit not in UNITS:
            raise UnitError(f"channel {self.name!r}: unknown unit {self.unit!r}")
        if self.role not in ROLES:
            raise RoleError(f"channel {self.name!r}: unknown role {self.role!r}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def times(self, start_time: float = 0.0) -> np.ndarray:
        return start_time + np.arange(self.samples.size) / self.sample_rate

    def with_samples(self, samples, **changes) -> "ChannelRecord":
        return replace(self, samples=samples, **changes)


@dataclass(frozen=True, eq=False)
class MultiChannelRecord:
    """Equal-length channels sharing one sample rate, with at most one tacho.

    ``metadata`` carries values produced alongside a record (for example the
    simulator's revolution count); it is not part of the CSV format.
    """

    channels: tuple
    sample_rate: float
    start_time: float = 0.0
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        channels = tuple(self.channels)
        if not channels:
            raise LengthError("record has no channels")
        n = len(channels[0])
        for ch in channels:
            if len(ch) != n:
                raise LengthError(f"channel {ch.name!r} has {len(ch)} samples, expected {n}")
            if ch.sample_rate != float(self.sample_rate):
                raise DomainError(f"channel {ch.name!r} sample rate {ch.sample_rate} != {self.sample_rate}")
        if sum(ch.role == "tacho" for ch in channels) > 1:
            raise FormatError("at most one tacho channel is allowed")
        names = [ch.name for ch in channels]
        if len(set(names)) != len(names):
            raise FormatError(f"duplicate channel names in {names}")
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __getitem__(self, name: str) -> ChannelRecord:
        for ch in self.channels:
            if ch.name == name:
                return ch
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [ch.name for ch in self.channels]

    @property
    def n_samples(self) -> int:
        return len(self.channels[0])

    @property
    def tacho(self) -> ChannelRecord | None:
        for ch in self.channels:
            if ch.role == "tacho":
                return ch
        return None

    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.n_samples) / self.sample_rate


@dataclass(frozen=True, eq=False)
class SpectrumRecord:
    frequencies: np.ndarray
    magnitudes: np.ndarray
    phases: np.ndarray
    resolution: float
    unit: str = "dimensionless"

    def __post_init__(self):
        for name in ("frequencies", "magnitudes", "phases"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))
        if not (self.frequencies.size == self.magnitudes.size == self.phases.size):
            raise LengthError("spectrum arrays must have equal length")

    def amplitude_at(self, frequency: float) -> float:
        """Magnitude of the bin nearest ``frequency``."""
        return float(self.magnitudes[int(round(frequency / self.resolution))])


# --------------------------------------------------------------------------
# CSV time data

_RATE_RE = re.compile(r"^#\s*sample_rate_hz=(\S+)\s*$")
_CHANNELS_RE = re.compile(r"^#\s*channels=(.+?)\s*$")


def ingest_csv(path) -> MultiChannelRecord:
    """Read a record written in the rotorvib CSV time-data format.

    :param path: file with a ``# sample_rate_hz=`` line, a ``# channels=``
        line of ``name:unit:role`` triples, then one comma-separated row per
        sampling instant.
    :returns: :class:`MultiChannelRecord`
    """
    path = Path(path)
    with path.open(newline="") as fh:
        header1 = fh.readline()
        header2 = fh.readline()
        m_rate = _RATE_RE.match(header1.strip())
        m_chan = _CHANNELS_RE.match(header2.strip())
        if m_rate is None or m_chan is None:
            raise FormatError(f"{path}: malformed header")
        try:
            sample_rate = float(m_rate.group(1))
        except ValueError:
            raise FormatError(f"{path}: bad sample rate {m_rate.group(1)!r}") from None
        specs = []
        for item in m_chan.group(1).split(","):
            parts = item.strip().split(":")
            if len(parts) != 3 or not parts[0]:
                raise FormatError(f"{path}: bad channel declaration {item!r}")
            name, unit, role = parts
            if unit not in UNITS:
                raise FormatError(f"{path}: unknown unit {unit!r} for channel {name!r}")
            if role not in ROLES:
                raise FormatError(f"{path}: unknown role {role!r} for channel {name!r}")
            specs.append((name, unit, role))
        if sum(role == "tacho" for _, _, role in specs) > 1:
            raise FormatError(f"{path}: more than one tacho channel declared")
        if len({name for name, _, _ in specs}) != len(specs):
            raise FormatError(f"{path}: duplicate channel names")

        rows = []
        for lineno, row in enumerate(csv.reader(fh), start=3):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(specs):
                raise LengthError(
                    f"{path}: line {lineno} has {len(row)} values, expected {len(specs)}"
                )
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise DataError(f"{path}: unparseable value at line {lineno}") from None
            if not all(np.isfinite(values)):
                raise DataError(f"{path}: non-finite value at data row {len(rows)} (line {lineno})")
            rows.append(values)
    if not rows:
        raise LengthError(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    channels = tuple(
        ChannelRecord(name, data[:, i], sample_rate, unit, role)
        for i, (name, unit, role) in enumerate(specs)
    )
    return MultiChannelRecord(channels, sample_rate)


def write_csv(record: MultiChannelRecord, path) -> None:
    """Write ``record`` in the CSV time-data format (9 significant digits)."""
    path = Path(path)
    decl = ",".join(f"{ch.name}:{ch.unit}:{ch.role}" for ch in record.channels)
    data = np.column_stack([ch.samples for ch in record.channels])
    with path.open("w", newline="") as fh:
        fh.write(f"# sample_rate_hz={record.sample_rate!r}\n")
        fh.write(f"# channels={decl}\n")
        for row in data:
            fh.write(",".join(f"{v:.9g}" for v in row))
            fh.write("\n")


# --------------------------------------------------------------------------
# calibration, spectra, filtering


def calibrate(ch: ChannelRecord, sensitivity: float, to_si: bool = False) -> ChannelRecord:
    """Convert a voltage channel to acceleration.

    :param sensitivity: transducer sensitivity in mV/g.
    :param to_si: return m/s^2 instead of g.
    """
    if ch.unit != "volt":
        raise UnitError(f"channel {ch.name!r} is already in {ch.unit!r}; calibrate expects volts")
    if not sensitivity > 0:
        raise DomainError(f"sensitivity must be > 0 mV/g, got {sensitivity}")
    g = ch.samples / (sensitivity / 1000.0)
    if to_si:
        return ch.with_samples(g * STANDARD_GRAVITY, unit="m_per_s2")
    return ch.with_samples(g, unit="g")


def _window(kind: str, n: int) -> tuple[np.ndarray, float]:
    if kind == "rectangular":
        return np.ones(n), 1.0
    if kind == "hann":
        # periodic Hann: mean is exactly 0.5, so the 2.0 correction is exact
        return sps.get_window("hann", n, fftbins=True), HANN_AMPLITUDE_CORRECTION
    raise DomainError(f"unknown window {kind!r}")


def fft_spectrum(ch: ChannelRecord, window: str = "rectangular") -> SpectrumRecord:
    """Single-sided amplitude spectrum with window amplitude correction.

    A sine of amplitude A centred on bin k reads A at bin k. The Nyquist bin
    (even lengths) is not doubled since it has no negative-frequency twin.
    """
    x = ch.samples
    n = x.size
    if n < 8:
        raise LengthError(f"fft_spectrum needs at least 8 samples, got {n}")
    w, correction = _window(window, n)
    spec = np.fft.rfft(x * w) / n * correction
    mags = np.abs(spec)
    mags[1:] *= 2.0
    if n % 2 == 0:
        mags[-1] /= 2.0
    phases = np.angle(spec)
    phases[phases <= -np.pi] = np.pi
    freqs = np.fft.rfftfreq(n, d=1.0 / ch.sample_rate)
    return SpectrumRecord(freqs, mags, phases, ch.sample_rate / n, ch.unit)


def write_spectrum_csv(spec: SpectrumRecord, path) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write("frequency_hz,magnitude,phase_rad\n")
        for f, m, p in zip(spec.frequencies, spec.magnitudes, spec.phases):
            fh.write(f"{f:.9g},{m:.9g},{p:.9g}\n")


def highpass_filter(ch: ChannelRecord, cutoff: float, order: int = 4) -> ChannelRecord:
    """Zero-phase Butterworth high-pass (applied forward and backward)."""
    nyquist = ch.sample_rate / 2.0
    if not 0 < cutoff < nyquist:
        raise DomainError(f"cutoff must lie in (0, {nyquist}) Hz, got {cutoff}")
    sos = sps.butter(order, cutoff, btype="highpass", fs=ch.sample_rate, output="sos")
    padlen = min(3 * (2 * len(sos) + 1), len(ch) - 1)
    return ch.with_samples(sps.sosfiltfilt(sos, ch.samples, padlen=padlen))


def resample_linear(ch: ChannelRecord, times: Sequence[float], start_time: float = 0.0) -> np.ndarray:
    """Linear interpolation of ``ch`` at the instants ``times`` (seconds)."""
    t = np.asarray(times, dtype=float)
    t_end = start_time + (len(ch) - 1) / ch.sample_rate
    if t.size and (t.min() < start_time or t.max() > t_end):
        raise RangeError(f"requested times outside record span [{start_time}, {t_end}] s")
    pos = (t - start_time) * ch.sample_rate
    i0 = np.clip(np.floor(pos).astype(int), 0, len(ch) - 1)
    i1 = np.minimum(i0 + 1, len(ch) - 1)
    frac = pos - i0
    x = ch.samples
    return x[i0] + frac * (x[i1] - x[i0])

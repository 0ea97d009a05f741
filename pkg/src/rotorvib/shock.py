"""Shock capture, pulse parameters, limit overlays and decay windows."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import CoverageError, DomainError, RangeError
from .signal_core import ACCELERATION_UNITS, STANDARD_GRAVITY, ChannelRecord, MultiChannelRecord

CLIP_RUN = 3


@dataclass(frozen=True, eq=False)
class ShockEvent:
    """One captured transient.

    ``times`` and ``samples`` cover ``[trigger_time - pre_window,
    trigger_time + post_window]`` (less if truncated at a record edge).
    """

    trigger_time: float
    times: np.ndarray
    samples: np.ndarray
    pre_window: float
    post_window: float
    peak_amplitude: float
    peak_time: float
    duration_10pct: float
    rise_time: float
    unit: str = "dimensionless"
    truncated: bool = False
    clipped: bool = False


def _level_crossing(t, a, i_peak, level, step):
    """Interpolated time where ``a`` first drops below ``level`` walking from the peak."""
    i = i_peak
    last = 0 if step < 0 else a.size - 1
    while i != last:
        nxt = i + step
        if a[nxt] < level:
            frac = (a[i] - level) / (a[i] - a[nxt])
            return t[i] + frac * (t[nxt] - t[i])
        i = nxt
    return t[last]


def _pulse_shape(t: np.ndarray, x: np.ndarray):
    a = np.abs(x)
    i_peak = int(np.argmax(a))
    peak = float(a[i_peak])
    lo10 = _level_crossing(t, a, i_peak, 0.1 * peak, -1)
    hi10 = _level_crossing(t, a, i_peak, 0.1 * peak, +1)
    lo90 = _level_crossing(t, a, i_peak, 0.9 * peak, -1)
    return peak, float(t[i_peak]), float(hi10 - lo10), float(lo90 - lo10)


def _clipped(x: np.ndarray, record_max: float) -> bool:
    at_max = np.abs(x) >= record_max
    run = 0
    for flag in at_max:
        run = run + 1 if flag else 0
        if run >= CLIP_RUN:
            return True
    return False


def capture_shocks(ch: ChannelRecord, trigger_level: float, pre_window: float, post_window: float,
                   holdoff: float | None = None, start_time: float = 0.0) -> list[ShockEvent]:
    """Events where ``|x|`` rises through ``trigger_level``.

    :param holdoff: seconds after a trigger during which new crossings are
        ignored; defaults to ``post_window``.
    :returns: events sorted by trigger time; an empty list when nothing
        crosses the trigger. A record that starts above the trigger yields
        an event at its first sample (flagged truncated).
    """
    if not trigger_level > 0:
        raise DomainError(f"trigger_level must be > 0, got {trigger_level}")
    if not (pre_window > 0 and post_window > 0):
        raise DomainError("pre_window and post_window must be > 0")
    holdoff = post_window if holdoff is None else holdoff
    if holdoff < 0:
        raise DomainError("holdoff must be >= 0")
    x = ch.samples
    a = np.abs(x)
    fs = ch.sample_rate
    t = ch.times(start_time)
    above = a >= trigger_level
    rising = np.flatnonzero(above[1:] & ~above[:-1]) + 1
    if above[0]:
        # already above the trigger when the record starts: trigger at t[0]
        rising = np.concatenate([[0], rising])
    record_max = float(a.max())
    n_pre = int(round(pre_window * fs))
    n_post = int(round(post_window * fs))
    events = []
    next_allowed = -np.inf
    for i in rising:
        if i == 0:
            t_trig = float(t[0])
        else:
            frac = (trigger_level - a[i - 1]) / (a[i] - a[i - 1])
            t_trig = float(t[i - 1] + frac / fs)
        if t_trig < next_allowed:
            continue
        next_allowed = t_trig + holdoff
        lo = i - n_pre
        hi = i + n_post + 1
        truncated = lo < 0 or hi > x.size
        lo, hi = max(lo, 0), min(hi, x.size)
        seg_t = t[lo:hi]
        seg_x = x[lo:hi]
        peak, peak_time, duration, rise = _pulse_shape(seg_t, seg_x)
        events.append(ShockEvent(
            trigger_time=t_trig, times=seg_t.copy(), samples=seg_x.copy(),
            pre_window=pre_window, post_window=post_window,
            peak_amplitude=peak, peak_time=peak_time, duration_10pct=duration, rise_time=rise,
            unit=ch.unit, truncated=truncated, clipped=_clipped(seg_x, record_max),
        ))
    return events


@dataclass(frozen=True)
class PulseReport:
    peak: float
    peak_time: float
    duration_10pct: float
    rise_time: float
    delta_v: float | None
    note: str = ""


def pulse_parameters(e: ShockEvent) -> PulseReport:
    """Key pulse parameters; ``delta_v`` (m/s) only for acceleration units."""
    if e.unit in ACCELERATION_UNITS:
        scale = STANDARD_GRAVITY if e.unit == "g" else 1.0
        dv = float(np.trapezoid(e.samples, e.times) * scale)
        note = ""
    else:
        dv = None
        note = f"velocity change omitted: unit {e.unit!r} is not an acceleration"
    return PulseReport(e.peak_amplitude, e.peak_time, e.duration_10pct, e.rise_time, dv, note)


@dataclass(frozen=True, eq=False)
class LimitOverlay:
    """Upper/lower bounds at time offsets relative to the trigger, linear between."""

    offsets: np.ndarray
    upper: np.ndarray
    lower: np.ndarray

    def __post_init__(self):
        off = np.array(self.offsets, dtype=float)
        up = np.array(self.upper, dtype=float)
        low = np.array(self.lower, dtype=float)
        if not (off.shape == up.shape == low.shape) or off.size < 2:
            raise DomainError("overlay needs at least two breakpoints of (offset, upper, lower)")
        if np.any(np.diff(off) <= 0):
            raise DomainError("overlay time offsets must be ascending")
        if np.any(up < low):
            raise DomainError("overlay upper bound below lower bound")
        object.__setattr__(self, "offsets", off)
        object.__setattr__(self, "upper", up)
        object.__setattr__(self, "lower", low)

    @classmethod
    def from_breakpoints(cls, breakpoints) -> "LimitOverlay":
        bp = list(breakpoints)
        return cls([b[0] for b in bp], [b[1] for b in bp], [b[2] for b in bp])

    @classmethod
    def from_json(cls, text: str) -> "LimitOverlay":
        doc = json.loads(text)
        bp = doc["breakpoints"]
        return cls([b["t_offset_s"] for b in bp], [b["upper"] for b in bp], [b["lower"] for b in bp])

    def to_json(self) -> str:
        bp = [{"t_offset_s": float(t), "upper": float(u), "lower": float(l)}
              for t, u, l in zip(self.offsets, self.upper, self.lower)]
        return json.dumps({"breakpoints": bp})

    def bounds(self, offsets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (np.interp(offsets, self.offsets, self.upper),
                np.interp(offsets, self.offsets, self.lower))


@dataclass(frozen=True)
class Verdict:
    passed: bool
    first_violation_time: float | None = None
    shift: float = 0.0
    n_violations: int = 0

    @property
    def label(self) -> str:
        return "pass" if self.passed else "fail"


def _violations(e: ShockEvent, overlay: LimitOverlay, shift: float) -> np.ndarray:
    rel = e.times - e.trigger_time - shift
    up, low = overlay.bounds(rel)
    return (e.samples > up) | (e.samples < low)


def validate_limits(e: ShockEvent, overlay: LimitOverlay, fit: bool = False) -> Verdict:
    """Pointwise check of the event against ``overlay``.

    With ``fit`` the overlay is first shifted in time, by at most 10% of the
    pulse duration, to the position with fewest violations (smallest shift
    among ties). Amplitude is never rescaled.
    """
    rel = e.times - e.trigger_time
    tol = 0.5 * float(np.median(np.diff(e.times))) if e.times.size > 1 else 0.0
    if overlay.offsets[0] > rel[0] + tol or overlay.offsets[-1] < rel[-1] - tol:
        raise CoverageError(
            f"overlay spans [{overlay.offsets[0]:.6g}, {overlay.offsets[-1]:.6g}] s but the event "
            f"window is [{rel[0]:.6g}, {rel[-1]:.6g}] s relative to the trigger"
        )
    shift = 0.0
    bad = _violations(e, overlay, 0.0)
    if fit and bad.any():
        dt = float(np.median(np.diff(e.times)))
        max_shift = 0.1 * e.duration_10pct
        n = int(np.floor(max_shift / dt))
        candidates = sorted((k * dt for k in range(-n, n + 1)), key=abs)
        best = (int(bad.sum()), 0.0, bad)
        for s in candidates:
            v = _violations(e, overlay, s)
            if v.sum() < best[0]:
                best = (int(v.sum()), s, v)
                if best[0] == 0:
                    break
        _, shift, bad = best
    if not bad.any():
        return Verdict(True, None, shift, 0)
    first = float(e.times[np.argmax(bad)])
    return Verdict(False, first, shift, int(bad.sum()))


def event_report(e: ShockEvent, verdict: Verdict | None = None) -> dict:
    """JSON-ready event summary."""
    p = pulse_parameters(e)
    return {
        "trigger_time_s": e.trigger_time,
        "peak": p.peak,
        "peak_time_s": p.peak_time,
        "duration_10pct_s": p.duration_10pct,
        "rise_time_s": p.rise_time,
        "delta_v": p.delta_v,
        "verdict": None if verdict is None else verdict.label,
        "clipped": e.clipped,
    }


@dataclass(frozen=True)
class ExponentialWindow:
    """``exp(-(t - start) / tau)`` over the region."""

    tau: float

    def gain(self, dt_from_start: np.ndarray) -> np.ndarray:
        return np.exp(-dt_from_start / self.tau)


@dataclass(frozen=True)
class HalfHannWindow:
    """Rising half-Hann taper from 0 at the region start to 1 after ``ramp`` seconds."""

    ramp: float

    def gain(self, dt_from_start: np.ndarray) -> np.ndarray:
        u = np.clip(dt_from_start / self.ramp, 0.0, 1.0)
        return 0.5 * (1 - np.cos(np.pi * u))


def apply_decay_window(rec: MultiChannelRecord, window, region: tuple[float, float]) -> MultiChannelRecord:
    """Multiply vibration channels by ``window`` inside ``region`` (unity elsewhere).

    Tacho channels are passed through untouched.
    """
    if isinstance(window, ExponentialWindow) and not window.tau > 0:
        raise DomainError("tau must be > 0")
    if isinstance(window, HalfHannWindow) and not window.ramp > 0:
        raise DomainError("ramp must be > 0")
    start, end = region
    t = rec.times()
    if start > end or start < t[0] or end > t[-1] + 0.5 / rec.sample_rate:
        raise RangeError(f"region [{start}, {end}] s is outside the record span [{t[0]}, {t[-1]}] s")
    inside = (t >= start) & (t <= end)
    gain = np.ones_like(t)
    gain[inside] = window.gain(t[inside] - start)
    channels = tuple(
        ch if ch.role != "vibration" else ch.with_samples(ch.samples * gain)
        for ch in rec.channels
    )
    return replace(rec, channels=channels)


def write_shock_report(events, verdicts, path) -> None:
    reports = [event_report(e, v) for e, v in zip(events, verdicts)]
    Path(path).write_text(json.dumps(reports, indent=1))

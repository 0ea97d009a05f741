"""Order spectra, overall levels, rule-based fault verdicts and trend storage."""

from __future__ import annotations

import fcntl
import json
import math
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import DomainError, LengthError, OrderingError, UnitError
from .orbit import DEFAULT_SAMPLES_PER_REV, TachoTrain, slice_revolutions
from .rotor import ModalModel
from .signal_core import ACCELERATION_UNITS, STANDARD_GRAVITY, ChannelRecord

ORDER_STEP = 0.25
REVS_PER_BLOCK = 4  # 1 / ORDER_STEP
FAULTS = ("unbalance", "misalignment", "looseness", "resonance")


@dataclass(frozen=True, eq=False)
class OrderSpectrum:
    orders: np.ndarray
    amplitudes: np.ndarray
    mean_speed: float
    channel_name: str = ""

    def __post_init__(self):
        o = np.array(self.orders, dtype=float)
        a = np.array(self.amplitudes, dtype=float)
        if o.shape != a.shape:
            raise LengthError("orders and amplitudes must have equal length")
        if np.any(np.diff(o) <= 0) or np.any(a < 0):
            raise DomainError("orders must ascend and amplitudes be >= 0")
        object.__setattr__(self, "orders", o)
        object.__setattr__(self, "amplitudes", a)

    def amplitude(self, order: float) -> float:
        i = int(np.argmin(np.abs(self.orders - order)))
        if abs(self.orders[i] - order) > 1e-9:
            return 0.0
        return float(self.amplitudes[i])

    def scaled(self, c: float) -> "OrderSpectrum":
        return OrderSpectrum(self.orders, c * self.amplitudes, self.mean_speed, self.channel_name)

    @classmethod
    def from_mapping(cls, amps: dict, mean_speed: float, max_order: float = 8.0,
                     channel_name: str = "") -> "OrderSpectrum":
        """Build a spectrum on the 0.25-order grid from ``{order: amplitude}``."""
        orders = np.arange(0, max_order + ORDER_STEP / 2, ORDER_STEP)
        a = np.zeros_like(orders)
        for o, v in amps.items():
            a[int(round(o / ORDER_STEP))] = v
        return cls(orders, a, mean_speed, channel_name)


def order_spectrum(y: ChannelRecord, train: TachoTrain, max_order: float = 8.0,
                   samples_per_rev: int = DEFAULT_SAMPLES_PER_REV,
                   start_time: float = 0.0) -> OrderSpectrum:
    """Amplitude per order (0.25 steps) from phase-resampled revolutions.

    Consecutive revolutions are grouped in blocks of four so that quarter
    orders fall on exact DFT bins; block magnitudes are averaged.
    """
    if max_order > samples_per_rev / 4:
        raise DomainError(f"max_order {max_order} exceeds samples_per_rev / 4 = {samples_per_rev / 4}")
    slices = slice_revolutions(y, y, train, samples_per_rev, start_time)
    n_revs = len(slices)
    if n_revs < 8:
        raise LengthError(f"order_spectrum needs >= 8 complete revolutions, got {n_revs}")
    n_blocks = n_revs // REVS_PER_BLOCK
    blocks = slices.y[: n_blocks * REVS_PER_BLOCK].reshape(n_blocks, -1)
    N = blocks.shape[1]
    spec = np.abs(np.fft.rfft(blocks, axis=1)) / N
    spec[:, 1:] *= 2.0
    mags = spec.mean(axis=0)
    n_bins = int(round(max_order / ORDER_STEP)) + 1
    orders = np.arange(n_bins) * ORDER_STEP
    return OrderSpectrum(orders, mags[:n_bins], slices.mean_speed, y.name)


def overall_level(ch: ChannelRecord, band: tuple[float, float], quantity: str = "native") -> float:
    """Band-limited RMS by spectral summation.

    :param quantity: ``"native"`` (channel units), or for acceleration
        channels ``"velocity"`` (m/s) or ``"displacement"`` (m), integrated by
        dividing each bin by ``i w`` once or twice.
    """
    f_lo, f_hi = band
    nyq = ch.sample_rate / 2
    if not (0 < f_lo < f_hi < nyq):
        raise DomainError(f"band {band} must satisfy 0 < low < high < Nyquist ({nyq} Hz)")
    x = ch.samples
    n = x.size
    X = np.fft.rfft(x - x.mean()) / n
    f = np.fft.rfftfreq(n, 1.0 / ch.sample_rate)
    if quantity != "native":
        if ch.unit not in ACCELERATION_UNITS:
            raise UnitError(f"integration to {quantity} requires an acceleration channel, got {ch.unit!r}")
        if ch.unit == "g":
            X = X * STANDARD_GRAVITY
        power = {"velocity": 1, "displacement": 2}.get(quantity)
        if power is None:
            raise DomainError(f"unknown quantity {quantity!r}")
        w = 2 * np.pi * f
        with np.errstate(divide="ignore", invalid="ignore"):
            X = np.where(w > 0, X / (1j * w) ** power, 0.0)
    weights = np.full(f.size, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    sel = (f >= f_lo) & (f <= f_hi)
    return float(np.sqrt(np.sum(weights[sel] * np.abs(X[sel]) ** 2)))


def overall_levels(ch: ChannelRecord, band: tuple[float, float]) -> dict:
    """Trend-ready levels for an acceleration channel: mm/s, g and micrometres RMS."""
    a = overall_level(ch, band)
    if ch.unit == "m_per_s2":
        a /= STANDARD_GRAVITY
    return {
        "v_rms_mm_s": overall_level(ch, band, "velocity") * 1e3,
        "a_rms_g": a,
        "d_rms_um": overall_level(ch, band, "displacement") * 1e6,
    }


# --------------------------------------------------------------------------
# rules


@dataclass(frozen=True)
class RuleConstants:
    """Every diagnosis threshold; serialised verbatim as ``rules.json``."""

    unbalance_1x_fraction: float = 0.7
    unbalance_max_2x_ratio: float = 0.3
    misalignment_2x_ratio: float = 0.5
    misalignment_noise_floor_factor: float = 5.0
    looseness_min_harmonics: int = 4
    looseness_harmonic_fraction: float = 0.1
    looseness_subharmonic_ratio: float = 0.2
    resonance_speed_band: float = 0.10
    resonance_amplification: float = 3.0
    resonance_reference_separation: float = 0.25
    resonance_no_reference_confidence_cap: float = 0.5
    max_harmonic: int = 8
    trend_alert_factor: float = 2.0
    trend_danger_factor: float = 4.0
    trend_absolute_danger_mm_s: float = 11.2

    @classmethod
    def from_json(cls, text: str) -> "RuleConstants":
        doc = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise DomainError(f"unknown rule constants: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path=None) -> "RuleConstants":
        """Defaults when ``path`` is None or does not exist."""
        if path is None or not Path(path).exists():
            return cls()
        return cls.from_json(Path(path).read_text())

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)


DEFAULT_RULES = RuleConstants()


@dataclass(frozen=True)
class FaultVerdict:
    detected: bool
    confidence: float
    evidence: str


@dataclass(frozen=True)
class FaultReport:
    verdicts: dict
    overall_levels: dict = field(default_factory=dict)

    def __post_init__(self):
        if set(self.verdicts) != set(FAULTS):
            raise DomainError(f"report must cover exactly {FAULTS}")

    @property
    def detected(self) -> list[str]:
        return [f for f in FAULTS if self.verdicts[f].detected]

    def to_dict(self) -> dict:
        return {
            "verdicts": {f: asdict(self.verdicts[f]) for f in FAULTS},
            "overall_levels": dict(self.overall_levels),
        }


def _margin(value: float, threshold: float, above: bool = True) -> float:
    """Relative margin beyond a threshold: positive when the condition holds."""
    if threshold == 0:
        return 1.0 if (value >= 0 if above else value < 0) else -1.0
    m = (value - threshold) / abs(threshold)
    return m if above else -m


def _confidence(*margins: float) -> float:
    """Clamped linear margin; conjunctions take the weakest condition."""
    return float(min(1.0, max(0.0, 0.5 + 0.5 * min(margins))))


def _harmonics(os: OrderSpectrum, rules: RuleConstants) -> np.ndarray:
    return np.array([os.amplitude(h) for h in range(1, rules.max_harmonic + 1)])


def _looseness(os, a1, rules):
    harm = _harmonics(os, rules)
    level = rules.looseness_harmonic_fraction * a1
    n_family = int(np.sum(harm >= level)) if a1 > 0 else 0
    sub = os.amplitude(0.5)
    sub_ratio = sub / a1 if a1 > 0 else 0.0
    family = n_family >= rules.looseness_min_harmonics
    subharm = sub_ratio >= rules.looseness_subharmonic_ratio
    conf = max(
        _confidence(_margin(n_family, rules.looseness_min_harmonics - 0.5)),
        _confidence(_margin(sub_ratio, rules.looseness_subharmonic_ratio)),
    )
    return family, subharm, n_family, sub_ratio, conf


def diagnose(os: OrderSpectrum, modal: ModalModel | None = None, overall: dict | None = None,
             reference: OrderSpectrum | None = None,
             rules: RuleConstants = DEFAULT_RULES) -> FaultReport:
    """Apply the rule set to one order spectrum.

    :param modal: natural frequencies for the resonance rule; without it the
        resonance verdict is "not evaluable".
    :param reference: an order spectrum of the same channel at a speed at
        least 25% away, used to confirm resonant amplification of 1X.
    """
    overall = dict(overall or {})
    harm = _harmonics(os, rules)
    a1, a2 = harm[0], harm[1]
    total = float(harm.sum())
    if total == 0 or a1 == 0:
        v = {f: FaultVerdict(False, 0.0, "no synchronous content (1X amplitude is zero)") for f in FAULTS}
        if modal is None:
            v["resonance"] = FaultVerdict(False, 0.0, "not evaluable: no modal model supplied")
        return FaultReport(v, overall)

    # resonance first: a confirmed resonance explains a dominant 1X
    confirmed = False
    if modal is None:
        resonance = FaultVerdict(False, 0.0, "not evaluable: no modal model supplied")
    else:
        wr = modal.omega_r[modal.omega_r > 0]
        if wr.size == 0:
            resonance = FaultVerdict(False, 0.0, "not evaluable: modal model has no elastic modes")
        else:
            dev = np.abs(os.mean_speed - wr) / wr
            i = int(np.argmin(dev))
            near = dev[i] <= rules.resonance_speed_band
            speed_margin = _margin(-dev[i], -rules.resonance_speed_band)
            ref_ok = (
                reference is not None
                and abs(reference.mean_speed - os.mean_speed) / os.mean_speed >= rules.resonance_reference_separation
            )
            if ref_ok:
                ref1 = reference.amplitude(1)
                amp = a1 / ref1 if ref1 > 0 else math.inf
                amplified = amp >= rules.resonance_amplification
                conf = _confidence(speed_margin, _margin(min(amp, 1e6), rules.resonance_amplification))
                detected = bool(near and amplified)
                confirmed = detected
                evidence = (f"speed {os.mean_speed:.4g} rad/s is {dev[i]:.1%} from omega_r {wr[i]:.4g} rad/s; "
                            f"1X amplification vs reference at {reference.mean_speed:.4g} rad/s = {amp:.3g}")
            else:
                detected = bool(near)
                conf = min(_confidence(speed_margin), rules.resonance_no_reference_confidence_cap)
                evidence = (f"speed {os.mean_speed:.4g} rad/s is {dev[i]:.1%} from omega_r {wr[i]:.4g} rad/s; "
                            "no reference spectrum >= 25% away, confidence capped")
            resonance = FaultVerdict(detected, conf if detected else min(conf, 0.49), evidence)

    frac1 = a1 / total
    ratio21 = a2 / a1
    unb = frac1 >= rules.unbalance_1x_fraction and ratio21 < rules.unbalance_max_2x_ratio
    unb_conf = _confidence(_margin(frac1, rules.unbalance_1x_fraction),
                           _margin(ratio21, rules.unbalance_max_2x_ratio, above=False))
    unb_evidence = f"1X/sum(1X..{rules.max_harmonic}X) = {frac1:.3f}, 2X/1X = {ratio21:.3f}"
    if unb and confirmed:
        unb = False
        unb_conf = 0.25
        unb_evidence += "; 1X dominance attributed to resonance"
    unbalance = FaultVerdict(bool(unb), unb_conf if unb else min(unb_conf, 0.49), unb_evidence)

    family, subharm, n_family, sub_ratio, loose_conf = _looseness(os, a1, rules)
    loose = family or subharm
    looseness = FaultVerdict(
        bool(loose), loose_conf if loose else min(loose_conf, 0.49),
        f"{n_family} integer orders >= {rules.looseness_harmonic_fraction:g} x 1X, 0.5X/1X = {sub_ratio:.3f}",
    )

    off_order = ~np.isclose(os.orders, np.round(os.orders)) & (os.orders > 0)
    floor = float(np.median(os.amplitudes[off_order])) if off_order.any() else 0.0
    above_floor = a1 >= rules.misalignment_noise_floor_factor * floor
    mis = ratio21 >= rules.misalignment_2x_ratio and above_floor and not family
    mis_conf = _confidence(_margin(ratio21, rules.misalignment_2x_ratio),
                           _margin(a1, rules.misalignment_noise_floor_factor * floor) if floor > 0 else 1.0)
    mis_evidence = f"2X/1X = {ratio21:.3f}, 1X / off-order median = {a1 / floor if floor > 0 else math.inf:.3g}"
    if family and ratio21 >= rules.misalignment_2x_ratio:
        mis_evidence += "; 2X belongs to a harmonic family (looseness)"
    misalignment = FaultVerdict(bool(mis), mis_conf if mis else min(mis_conf, 0.49), mis_evidence)

    verdicts = {"unbalance": unbalance, "misalignment": misalignment,
                "looseness": looseness, "resonance": resonance}
    return FaultReport(verdicts, overall)


# --------------------------------------------------------------------------
# trending


@dataclass(frozen=True)
class TrendEntry:
    ts: float
    point_id: str
    v_rms_mm_s: float
    a_rms_g: float
    d_rms_um: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


@contextmanager
def _locked(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path.with_name(path.name + ".lock"), "a") as lock:
        fcntl.flock(lock, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(lock, fcntl.LOCK_UN)


class TrendStore:
    """Append-only overall-level history.

    With a ``path`` the store lives in a JSON-lines file (one entry per
    line) with baselines in ``baselines.json`` next to it; without one it is
    kept in memory.
    """

    def __init__(self, path=None, rules: RuleConstants = DEFAULT_RULES):
        self.path = None if path is None else Path(path)
        self.rules = rules
        self._entries: list[TrendEntry] = []
        self._baselines: dict[str, float] = {}
        if self.path is not None:
            self._load()

    @property
    def baselines_path(self) -> Path | None:
        return None if self.path is None else self.path.with_name("baselines.json")

    def _load(self):
        if self.path.exists():
            with self.path.open() as fh:
                self._entries = [TrendEntry(**json.loads(line)) for line in fh if line.strip()]
        if self.baselines_path.exists():
            self._baselines = {k: float(v) for k, v in json.loads(self.baselines_path.read_text()).items()}

    @property
    def entries(self) -> tuple:
        return tuple(self._entries)

    def history(self, point_id: str) -> list[TrendEntry]:
        return [e for e in self._entries if e.point_id == point_id]

    def baseline(self, point_id: str) -> float | None:
        if point_id in self._baselines:
            return self._baselines[point_id]
        h = self.history(point_id)
        return h[0].v_rms_mm_s if h else None

    def set_baseline(self, point_id: str, v_rms_mm_s: float) -> None:
        self._baselines[point_id] = float(v_rms_mm_s)
        if self.path is not None:
            with _locked(self.path):
                self.baselines_path.write_text(json.dumps(self._baselines, indent=1, sort_keys=True))

    def append(self, entry: TrendEntry) -> None:
        h = self.history(entry.point_id)
        if h and entry.ts < h[-1].ts:
            raise OrderingError(f"timestamp {entry.ts} precedes last entry {h[-1].ts} for {entry.point_id!r}")
        if self.path is not None:
            with _locked(self.path):
                with self.path.open("a") as fh:
                    fh.write(entry.to_json() + "\n")
        self._entries.append(entry)


def trend_append(store: TrendStore, point_id: str, levels: dict, timestamp: float) -> TrendStore:
    entry = TrendEntry(float(timestamp), str(point_id), float(levels["v_rms_mm_s"]),
                       float(levels.get("a_rms_g", 0.0)), float(levels.get("d_rms_um", 0.0)))
    store.append(entry)
    return store


def trend_evaluate(store: TrendStore, point_id: str) -> str:
    """``ok``, ``alert`` (>= 2x baseline) or ``danger`` (>= 4x, or >= 11.2 mm/s)."""
    h = store.history(point_id)
    if not h:
        raise LengthError(f"no trend entries for {point_id!r}")
    rules = store.rules
    latest = h[-1].v_rms_mm_s
    if latest >= rules.trend_absolute_danger_mm_s:
        return "danger"
    base = store.baseline(point_id)
    if base is None or base <= 0:
        return "ok"
    if latest >= rules.trend_danger_factor * base:
        return "danger"
    if latest >= rules.trend_alert_factor * base:
        return "alert"
    return "ok"

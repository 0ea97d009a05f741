"""Seeded synthetic fault corpus built from Jeffcott rotor simulations.

Each case runs the rotor at constant speed with unbalance plus injected
rotating forces at other orders, sized through the rotor's receptance so
the response reaches chosen order ratios. A reference run at 60% speed
accompanies every case (the resonance rule compares against it).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnosis import FAULTS, OrderSpectrum, RuleConstants, diagnose, order_spectrum
from .frf import receptance_direct
from .orbit import detect_tacho
from .rotor import TACHO_AMPLITUDE, JeffcottParams, ModalModel, build_jeffcott, eigen_symmetric, simulate_rundown
from .signal_core import ChannelRecord, MultiChannelRecord

CORPUS_ROTOR = JeffcottParams(disc_mass=10.0, shaft_stiffness=1e6, damping_ratio=0.05, unbalance_mass_ecc=1e-4)
SIM_SAMPLES_PER_REV = 128
STEADY_REVS = 16
SETTLE_S = 0.5
REFERENCE_SPEED_FACTOR = 0.6
BASE_AMPLITUDE = 1e-5


@dataclass(frozen=True, eq=False)
class CorpusCase:
    label: str
    index: int
    speed: float
    spectrum: OrderSpectrum
    reference: OrderSpectrum
    snr_db: float


def _speed_ratio(label: str, rng: np.random.Generator) -> float:
    if label == "resonance":
        return rng.uniform(0.95, 1.05)
    if rng.random() < 0.5:
        return rng.uniform(0.45, 0.75)
    return rng.uniform(1.35, 1.8)


def _target_orders(label: str, rng: np.random.Generator) -> dict:
    """Response amplitude per order, relative to 1X."""
    if label in ("unbalance", "resonance"):
        return {1: 1.0, 2: rng.uniform(0.0, 0.1)}
    if label == "misalignment":
        return {1: 1.0, 2: rng.uniform(0.6, 1.5), 3: rng.uniform(0.0, 0.05)}
    if label == "looseness":
        top = int(rng.integers(4, 7))
        amps = {1: 1.0}
        amps.update({h: rng.uniform(0.3, 1.0) for h in range(2, top + 1)})
        amps[0.5] = rng.uniform(0.3, 0.6)
        return amps
    raise ValueError(f"unknown corpus label {label!r}")


def _forcing_for(sys, targets: dict, speed: float, base_amplitude: float, rng):
    """Rotating-force amplitudes (N) per order giving the target responses at ``speed``.

    1X is realised by the unbalance (its ``m e`` is returned separately).
    """
    forces = {}
    me = None
    for order, rel in targets.items():
        w = order * speed
        alpha = abs(receptance_direct(sys, w)[0, 0])
        f = rel * base_amplitude / alpha
        if order == 1:
            me = f / speed**2
        else:
            forces[order] = (f, rng.uniform(0, 2 * np.pi))
    return me, forces


def _simulate(sys, params, speed, me, forces, rng, snr_db) -> MultiChannelRecord:
    """Steady-state record (settling removed) with seeded measurement noise on y."""
    rev = 2 * np.pi / speed
    dt = rev / SIM_SAMPLES_PER_REV
    n_settle = int(np.ceil(SETTLE_S / rev))
    duration = (n_settle + STEADY_REVS + 1.5) * rev
    p = JeffcottParams(params.disc_mass, params.shaft_stiffness, params.damping_ratio,
                       unbalance_mass_ecc=me)

    def extra(t, omega, phase):
        F = np.zeros((t.size, sys.n))
        for order, (f, ph) in forces.items():
            F[:, 0] += f * np.cos(order * phase + ph)
            F[:, 1] += f * np.sin(order * phase + ph)
        return F

    rec = simulate_rundown(sys, p, (speed, speed), dt, duration, extra_forcing=extra)
    start = int(round(n_settle * rev / dt))
    y = rec["y"].samples[start:]
    signal_rms = np.sqrt(np.mean(y**2))
    noisy = y + rng.normal(0.0, signal_rms * 10 ** (-snr_db / 20), y.size)
    channels = (
        ChannelRecord("y", noisy, rec.sample_rate, "m", "vibration"),
        ChannelRecord("z", rec["z"].samples[start:], rec.sample_rate, "m", "vibration"),
        ChannelRecord("tacho", rec["tacho"].samples[start:], rec.sample_rate, "dimensionless", "tacho"),
    )
    return MultiChannelRecord(channels, rec.sample_rate)


def record_spectrum(rec: MultiChannelRecord, channel: str = "y") -> OrderSpectrum:
    train = detect_tacho(rec.tacho, 0.5 * TACHO_AMPLITUDE, start_time=rec.start_time)
    return order_spectrum(rec[channel], train, start_time=rec.start_time)


def case_records(label: str, index: int, seed: int = 0, params: JeffcottParams = CORPUS_ROTOR):
    """Operating and reference records of one corpus case, plus the running speed."""
    rng = np.random.default_rng([seed, FAULTS.index(label), index])
    sys = build_jeffcott(params)
    speed = _speed_ratio(label, rng) * params.natural_frequency
    snr_db = rng.uniform(25.0, 40.0)
    targets = _target_orders(label, rng)
    me, forces = _forcing_for(sys, targets, speed, BASE_AMPLITUDE, rng)
    record = _simulate(sys, params, speed, me, forces, rng, snr_db)
    reference = _simulate(sys, params, REFERENCE_SPEED_FACTOR * speed, me, forces, rng, snr_db)
    return record, reference, speed, snr_db


def generate_case(label: str, index: int, seed: int = 0, params: JeffcottParams = CORPUS_ROTOR) -> CorpusCase:
    record, reference, speed, snr_db = case_records(label, index, seed, params)
    return CorpusCase(label, index, speed, record_spectrum(record), record_spectrum(reference), snr_db)


def generate_corpus(n_per_fault: int = 25, seed: int = 0, params: JeffcottParams = CORPUS_ROTOR) -> list[CorpusCase]:
    return [generate_case(label, i, seed, params) for label in FAULTS for i in range(n_per_fault)]


def corpus_modal(params: JeffcottParams = CORPUS_ROTOR) -> ModalModel:
    return eigen_symmetric(build_jeffcott(params))


@dataclass(frozen=True)
class CorpusScore:
    n_cases: int
    recall: dict
    false_positive_rate: dict
    misses: tuple
    scale_failures: int

    @property
    def passed(self) -> bool:
        return (all(r == 1.0 for r in self.recall.values())
                and all(fp <= 0.04 for fp in self.false_positive_rate.values())
                and self.scale_failures == 0)

    def summary_lines(self) -> list[str]:
        lines = [f"corpus cases: {self.n_cases}"]
        for f in FAULTS:
            lines.append(f"  {f:<13} recall {self.recall[f]:.3f}  false-positive rate {self.false_positive_rate[f]:.3f}")
        lines.append(f"  scale-equivariance failures: {self.scale_failures}")
        return lines


def score_corpus(cases, modal: ModalModel | None = None, rules: RuleConstants | None = None,
                 n_scalings: int = 0, seed: int = 0) -> CorpusScore:
    """Recall per intended label, false-positive rate per non-target fault.

    With ``n_scalings`` > 0 every case is re-diagnosed after multiplying its
    spectra by random positive factors; any changed verdict is a failure.
    """
    modal = corpus_modal() if modal is None else modal
    rules = RuleConstants() if rules is None else rules
    rng = np.random.default_rng(seed)
    hits = {f: 0 for f in FAULTS}
    totals = {f: 0 for f in FAULTS}
    fps = {f: 0 for f in FAULTS}
    negatives = {f: 0 for f in FAULTS}
    misses = []
    scale_failures = 0
    for case in cases:
        report = diagnose(case.spectrum, modal, reference=case.reference, rules=rules)
        detected = set(report.detected)
        totals[case.label] += 1
        if case.label in detected:
            hits[case.label] += 1
        else:
            misses.append((case.label, case.index))
        for f in FAULTS:
            if f != case.label:
                negatives[f] += 1
                fps[f] += f in detected
        for c in np.exp(rng.uniform(np.log(1e-3), np.log(1e3), n_scalings)):
            scaled = diagnose(case.spectrum.scaled(c), modal, reference=case.reference.scaled(c), rules=rules)
            if set(scaled.detected) != detected:
                scale_failures += 1
    recall = {f: hits[f] / totals[f] if totals[f] else 1.0 for f in FAULTS}
    fpr = {f: fps[f] / negatives[f] if negatives[f] else 0.0 for f in FAULTS}
    return CorpusScore(len(cases), recall, fpr, tuple(misses), scale_failures)

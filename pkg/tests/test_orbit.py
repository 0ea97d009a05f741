import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotorvib.errors import (
    AliasingError,
    DegenerateOrbitError,
    DomainError,
    DropoutError,
    InsufficientPulsesError,
    RoleError,
    UnitError,
)
from rotorvib.orbit import (
    Orbit,
    RevolutionSlices,
    TachoTrain,
    average_orbit,
    detect_tacho,
    order_filter,
    slice_revolutions,
    speed_profile,
    whirl_direction,
    write_orbit_csv,
)
from rotorvib.rotor import JeffcottParams, TACHO_AMPLITUDE, build_jeffcott, simulate_rundown, tacho_signal
from rotorvib.signal_core import ChannelRecord, highpass_filter


def synchronous_record(omega=2 * np.pi * 20, fs=10240.0, duration=1.0, y_fn=None, z_fn=None, phase_fn=None):
    """y/z channels and an exact tacho (rising edge at phase 0 of every rev)."""
    t = np.arange(int(round(duration * fs)) + 1) / fs
    phase = omega * t if phase_fn is None else phase_fn(t)
    y = np.cos(phase) if y_fn is None else y_fn(phase)
    z = np.sin(phase) if z_fn is None else z_fn(phase)
    # pulse high for the first 5% of each rev: the rising edge sits at phase 0
    frac = np.mod(phase, 2 * np.pi) / (2 * np.pi)
    tach = np.where(frac < 0.05, TACHO_AMPLITUDE, 0.0)
    return (ChannelRecord("y", y, fs, "m"), ChannelRecord("z", z, fs, "m"),
            ChannelRecord("key", tach, fs, "dimensionless", "tacho"), t)


def exact_train(omega, t_end, offset=0.0):
    n = int(np.floor((t_end - offset) * omega / (2 * np.pi)))
    return TachoTrain(offset + 2 * np.pi * np.arange(n + 1) / omega, 2.5)




def test_detect_tacho_periods_and_speed():
    fs = 1000.0
    x = np.zeros(200)
    for i in (10, 60, 110):  # t = 0.00, 0.05, 0.10 with start_time = -0.01
        x[i:i + 5] = 2.0
    ch = ChannelRecord("key", x, fs, "dimensionless", "tacho")
    # threshold 1.0 sits halfway up the first sample step -> edge at i - 0.5 samples
    train = detect_tacho(ch, 1.0, start_time=-0.01 + 0.0005)
    np.testing.assert_allclose(train.pulse_times, [0.0, 0.05, 0.10], atol=1e-12)
    np.testing.assert_allclose(train.rev_periods, [0.05, 0.05], atol=1e-12)
    sp = speed_profile(train)
    assert sp.mean / (2 * np.pi) == pytest.approx(20.0)
    assert sp.mean * 60 / (2 * np.pi) == pytest.approx(1200.0)


def test_detect_tacho_subsample_interpolation():
    x = np.array([0.0, 0.0, 1.0, 4.0, 4.0, 0.0, 0.0, 2.0, 4.0, 0.0, 0.0, 3.0, 0.0])
    train = detect_tacho(ChannelRecord("k", x, 1.0, "dimensionless", "tacho"), 2.0)
    np.testing.assert_allclose(train.pulse_times, [2 + 1 / 3, 7.0, 10 + 2 / 3])


def test_detect_tacho_errors():
    with pytest.raises(InsufficientPulsesError):
        detect_tacho(ChannelRecord("k", np.zeros(100), 100.0, "dimensionless", "tacho"), 1.0)
    with pytest.raises(RoleError):
        detect_tacho(ChannelRecord("k", np.zeros(100), 100.0, "m", "vibration"), 1.0)


def test_detect_tacho_hysteresis_rejects_chatter():
    # noisy edge dipping just below threshold inside the pulse
    x = np.array([0, 3, 2.9, 3.1, 2.95, 3.2, 0, 0, 3.5, 0, 0, 3.5, 0, 0], dtype=float)
    ch = ChannelRecord("k", x, 1.0, "dimensionless", "tacho")
    assert len(detect_tacho(ch, 3.0, hysteresis=0.5)) == 3


def test_detect_matches_simulator_count():
    p = JeffcottParams(10.0, 1e6, 0.05, unbalance_mass_ecc=1e-4)
    rec = simulate_rundown(build_jeffcott(p), p, (400.0, 150.0), 2e-4, 4.0)
    train = detect_tacho(rec.tacho, 2.5)
    assert len(train) == rec.metadata["tacho_pulses"]


def test_speed_profile_constant_and_two_pulses():
    train = TachoTrain(np.arange(0, 1.0001, 0.04), 1.0)
    sp = speed_profile(train)
    np.testing.assert_allclose(sp(np.linspace(-1, 2, 30)), 157.0796, atol=1e-4)
    two = speed_profile(TachoTrain([0.0, 0.1], 1.0))
    np.testing.assert_allclose(two(np.array([-5.0, 0.05, 9.0])), 2 * np.pi / 0.1)


def test_speed_profile_follows_ramp():
    p = JeffcottParams(10.0, 1e6, 0.05, unbalance_mass_ecc=1e-4)
    # a rectangular tacho pulse puts +-dt/2 jitter on every edge: keep dt small
    rec = simulate_rundown(build_jeffcott(p), p, (500.0, 100.0), 5e-5, 4.0)
    sp = speed_profile(detect_tacho(rec.tacho, 2.5))
    t = np.linspace(0.3, 3.7, 50)
    commanded = 500.0 - 400.0 * t / 4.0
    assert np.max(np.abs(sp(t) - commanded) / commanded) < 0.01


def test_slices_phase_locked():
    y, z, _, t = synchronous_record()
    train = exact_train(2 * np.pi * 20, t[-1])
    sl = slice_revolutions(y, z, train)
    np.testing.assert_allclose(sl.y[:, 0], 1.0, atol=1e-3)
    np.testing.assert_allclose(sl.z[:, 0], 0.0, atol=1e-3)


def test_slices_minimum_p():
    y, z, _, t = synchronous_record(duration=0.2)
    with pytest.raises(DomainError):
        slice_revolutions(y, z, exact_train(2 * np.pi * 20, t[-1]), samples_per_rev=16)


def test_slices_reject_volts():
    y, z, _, t = synchronous_record(duration=0.2)
    with pytest.raises(UnitError):
        slice_revolutions(ChannelRecord("y", y.samples, y.sample_rate, "volt"),
                          z, exact_train(2 * np.pi * 20, t[-1]))


def test_slices_drop_revolutions_outside_record():
    y, z, _, t = synchronous_record(duration=0.5)
    train = TachoTrain(np.arange(-0.05, 0.6, 0.05), 1.0)
    sl = slice_revolutions(y, z, train)
    assert sl.n_dropped == 2
    assert len(sl) == len(train) - 1 - 2


def test_slices_dropout():
    train = TachoTrain([0.0, 0.05, 0.10, 0.20, 0.25], 1.0)
    y, z, _, _ = synchronous_record(duration=0.5)
    with pytest.raises(DropoutError, match="revolution 2"):
        slice_revolutions(y, z, train)


def test_chirp_slices_phase_aligned():
    fs = 20480.0
    phase_fn = lambda t: 2 * np.pi * (10 * t + 10 * t**2)  # 10 Hz -> 50 Hz over 2 s
    y, z, key, t = synchronous_record(fs=fs, duration=2.0, phase_fn=phase_fn,
                                      y_fn=lambda p: np.cos(p) + 0.5 * np.cos(3 * p + 0.3))
    sl = slice_revolutions(y, z, detect_tacho(key, 2.5))
    P = sl.samples_per_rev
    for a, b in zip(sl.y[:-1], sl.y[1:]):
        a0, b0 = a - a.mean(), b - b.mean()
        xc = np.fft.ifft(np.fft.fft(a0) * np.conj(np.fft.fft(b0))).real
        lag = int(np.argmax(xc))
        assert min(lag, P - lag) == 0


def test_average_identity_cases():
    rows = np.tile(np.cos(2 * np.pi * np.arange(64) / 64), (5, 1))
    sl = RevolutionSlices(rows, 2 * rows, np.full(5, 0.1))
    o = average_orbit(sl, 5)
    np.testing.assert_array_equal(o.y, rows[0])
    rng = np.random.default_rng(0)
    sl2 = RevolutionSlices(rng.normal(size=(4, 64)), rng.normal(size=(4, 64)), np.full(4, 0.1))
    np.testing.assert_array_equal(average_orbit(sl2, 1).y, sl2.y[0])
    with pytest.raises(DomainError):
        average_orbit(sl2, 0)
    with pytest.raises(DomainError):
        average_orbit(sl2, 5)


@pytest.mark.parametrize("n_revs", [4, 16, 64])
def test_average_noise_reduction(n_revs):
    sigma = 0.1
    omega = 2 * np.pi * 25
    fs = 6400.0
    rng = np.random.default_rng(n_revs)
    errs = []
    for _ in range(20):
        y, z, _, t = synchronous_record(omega, fs, (n_revs + 1) / 25)
        y = y.with_samples(y.samples + rng.normal(0, sigma, y.samples.size))
        z = z.with_samples(z.samples + rng.normal(0, sigma, z.samples.size))
        sl = slice_revolutions(y, z, exact_train(omega, t[-1]))
        o = average_orbit(sl, n_revs)
        phi = 2 * np.pi * np.arange(sl.samples_per_rev) / sl.samples_per_rev
        errs.append(np.concatenate([o.y - np.cos(phi), o.z - np.sin(phi)]))
    sigma_out = np.sqrt(np.mean(np.square(errs)))
    assert sigma_out <= 1.2 * sigma / np.sqrt(n_revs)


def _harmonic_slices(n=4, P=128):
    phi = 2 * np.pi * np.arange(P) / P
    y = np.tile(3 * np.cos(phi) + np.cos(2 * phi), (n, 1))
    z = np.tile(3 * np.sin(phi) - 0.5 * np.sin(2 * phi), (n, 1))
    return RevolutionSlices(y, z, np.full(n, 0.05))


def test_order_filter_amplitudes():
    sl = _harmonic_slices()
    o1 = order_filter(sl, 1)
    o2 = order_filter(sl, 2)
    assert np.max(np.abs(o1.y)) == pytest.approx(3.0, abs=1e-6)
    assert np.max(np.abs(o2.y)) == pytest.approx(1.0, abs=1e-6)
    assert o1.label == "order_filtered(1)"


def test_order_filter_errors():
    sl = _harmonic_slices(P=32)
    with pytest.raises(AliasingError):
        order_filter(sl, 16)
    with pytest.raises(DomainError):
        order_filter(RevolutionSlices(sl.y[:1], sl.z[:1], sl.periods[:1]), 1)


def test_order_filter_is_projection():
    rng = np.random.default_rng(4)
    sl = RevolutionSlices(rng.normal(size=(6, 64)), rng.normal(size=(6, 64)), np.full(6, 0.1))
    for h in (1, 2, 5):
        o = order_filter(sl, h)
        again = order_filter(RevolutionSlices(np.tile(o.y, (2, 1)), np.tile(o.z, (2, 1)), np.full(2, 0.1)), h)
        assert np.max(np.abs(again.y - o.y)) < 1e-12
        assert np.max(np.abs(again.z - o.z)) < 1e-12


def test_order_filter_commutes_with_average():
    rng = np.random.default_rng(9)
    sl = RevolutionSlices(rng.normal(size=(8, 64)), rng.normal(size=(8, 64)), np.full(8, 0.1))
    avg = average_orbit(sl)
    of_avg = order_filter(RevolutionSlices(np.tile(avg.y, (2, 1)), np.tile(avg.z, (2, 1)), np.full(2, 0.1)), 1)
    per_slice = [order_filter(RevolutionSlices(np.tile(a, (2, 1)), np.tile(b, (2, 1)), np.full(2, 0.1)), 1)
                 for a, b in sl]
    mean_y = np.mean([o.y for o in per_slice], axis=0)
    mean_z = np.mean([o.z for o in per_slice], axis=0)
    assert np.max(np.abs(of_avg.y - mean_y)) < 1e-9
    assert np.max(np.abs(of_avg.z - mean_z)) < 1e-9


def test_order_filter_matches_highpassed_average_on_unbalance():
    p = JeffcottParams(10.0, 1e6, 0.05, unbalance_mass_ecc=1e-4)
    speed = 200.0
    dt = 2 * np.pi / speed / 128
    rec = simulate_rundown(build_jeffcott(p), p, (speed, speed), dt, 3.0)
    train = detect_tacho(rec.tacho, 2.5)
    keep = TachoTrain(train.pulse_times[(train.pulse_times > 1.0) & (train.pulse_times < 2.6)], 2.5)
    raw = slice_revolutions(rec["y"], rec["z"], keep)
    cutoff = 0.3 * speed / (2 * np.pi)
    hp = slice_revolutions(highpass_filter(rec["y"], cutoff), highpass_filter(rec["z"], cutoff), keep,
                           filter_mode="highpass")
    o1 = order_filter(raw, 1)
    avg = average_orbit(hp)
    diff = np.sqrt(np.mean((o1.y - avg.y) ** 2 + (o1.z - avg.z) ** 2))
    assert diff / o1.rms_radius() < 0.02
    assert whirl_direction(o1) == "forward"
    assert avg.filter_mode == "highpass"


@settings(max_examples=25, deadline=None)
@given(st.floats(-np.pi, np.pi))
def test_rotation_equivariance(angle):
    y, z, key, _ = synchronous_record(duration=0.3, y_fn=lambda p: np.cos(p) + 0.2 * np.cos(2 * p),
                                      z_fn=lambda p: 0.5 * np.sin(p))
    c, s = np.cos(angle), np.sin(angle)
    yr = y.with_samples(c * y.samples - s * z.samples)
    zr = z.with_samples(s * y.samples + c * z.samples)
    train = detect_tacho(key, 2.5)
    for build in (average_orbit, lambda sl: order_filter(sl, 1)):
        base = build(slice_revolutions(y, z, train)).rotated(angle)
        rot = build(slice_revolutions(yr, zr, train))
        assert np.max(np.abs(base.y - rot.y)) < 1e-9
        assert np.max(np.abs(base.z - rot.z)) < 1e-9


@pytest.mark.parametrize("delay", [1e-3, 2.5e-3, 7e-3])
def test_tdc_anchoring(delay):
    omega = 2 * np.pi * 20
    y, z, _, t = synchronous_record(omega, fs=20480.0, duration=0.6)
    train = exact_train(omega, t[-1] - 0.02)
    base = order_filter(slice_revolutions(y, z, train), 1)
    late = order_filter(slice_revolutions(y, z, train.shifted(delay)), 1)
    expected = base.rotated(base.mean_speed * delay)
    # linear interpolation at shifted sub-sample positions: error ~ (w dt)^2 / 8
    assert np.max(np.abs(late.y - expected.y)) < 1e-4
    assert np.max(np.abs(late.z - expected.z)) < 1e-4


def _circle(z_sign=1.0, P=64):
    phi = 2 * np.pi * np.arange(P) / P
    return Orbit(np.cos(phi), z_sign * np.sin(phi), 1, "raw", 100.0)


def test_whirl_direction():
    assert whirl_direction(_circle()) == "forward"
    assert whirl_direction(_circle(-1.0)) == "backward"
    assert whirl_direction(_circle(), "cw") == "backward"
    phi = 2 * np.pi * np.arange(64) / 64
    assert whirl_direction(Orbit(np.cos(phi), np.cos(phi), 1, "raw", 1.0)) == "planar"
    with pytest.raises(DegenerateOrbitError):
        whirl_direction(Orbit(np.zeros(64), np.zeros(64), 1, "raw", 1.0))


def test_orbit_csv(tmp_path):
    p = tmp_path / "orbit.csv"
    write_orbit_csv(_circle(), p)
    lines = p.read_text().splitlines()
    assert lines[0] == "phase_index,y,z" and len(lines) == 65
    meta = json.loads(p.with_suffix(".json").read_text())
    assert meta == {"n_revs_averaged": 1, "filter_mode": "raw", "mean_speed_rad_s": 100.0, "samples_per_rev": 64}

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotorvib.errors import LengthError, SingularityError
from rotorvib.frf import (
    FrfCurve,
    estimate_frf_h1,
    frf_curve,
    peak_pick_modal,
    read_frf_csv,
    receptance_direct,
    receptance_general,
    receptance_symmetric,
    write_frf_csv,
)
from rotorvib.rotor import JeffcottParams, ModalModel, SystemMatrices, build_jeffcott, eigen_general, eigen_symmetric, integrate
from rotorvib.signal_core import ChannelRecord

K_SDOF = 3947.84


def sdof_system(zeta):
    return SystemMatrices([[1.0]], [[2 * zeta * np.sqrt(K_SDOF)]], [[K_SDOF]])


def proportional_system(rng, n):
    A = rng.normal(size=(n, n))
    M = A @ A.T + n * np.eye(n)
    B = rng.normal(size=(n, n))
    K = 1e4 * (B @ B.T + n * np.eye(n))
    return SystemMatrices(M, 1e-3 * K + 0.2 * M, K)


def gyroscopic_system(rng, n, omega_spin):
    sys = proportional_system(rng, n)
    S = rng.normal(size=(n, n))
    return SystemMatrices(sys.M, sys.C, sys.K, 0.05 * (S - S.T), omega_spin)


def _rel_dev(values, direct, scale):
    return np.max(np.abs(values - direct) / scale)


def test_static_compliance():
    m = eigen_symmetric(sdof_system(0.0))
    assert receptance_symmetric(m, 0.0, 0, 0) == pytest.approx(1 / K_SDOF, rel=1e-12)
    assert 1 / K_SDOF == pytest.approx(2.53303e-4, rel=1e-5)


def test_resonant_receptance_closed_form():
    sys = sdof_system(0.05)
    m = eigen_symmetric(sys)
    w1 = np.sqrt(K_SDOF)
    a = receptance_symmetric(m, w1, 0, 0)
    assert abs(a) == pytest.approx(1 / (2 * 0.05 * K_SDOF), rel=1e-10)
    assert abs(a) == pytest.approx(2.53303e-3, rel=1e-5)
    assert np.degrees(np.angle(a)) == pytest.approx(-90.0, abs=1e-8)
    assert abs(receptance_direct(sys, w1)[0, 0]) == pytest.approx(2.53303e-3, rel=1e-5)


def test_node_coordinate_zero():
    m = ModalModel([10.0, 20.0], [0.01, 0.02], [[1.0, 1.0], [0.0, 0.0]], [1.0, 2.0])
    w = np.linspace(0, 40, 50)
    assert np.all(receptance_symmetric(m, w, 1, 1) == 0)
    assert np.all(receptance_symmetric(m, w, 0, 1) == 0)


def test_index_errors():
    m = eigen_symmetric(sdof_system(0.05))
    with pytest.raises(IndexError):
        receptance_symmetric(m, 1.0, 0, 1)
    with pytest.raises(IndexError):
        receptance_general(eigen_general(sdof_system(0.05)), 1.0, 2, 0)


def test_direct_static_and_symmetry():
    rng = np.random.default_rng(3)
    sys = proportional_system(rng, 4)
    np.testing.assert_allclose(receptance_direct(sys, 0.0).real, np.linalg.inv(sys.K), rtol=1e-10, atol=1e-16)
    A = receptance_direct(sys, 37.0)
    assert np.abs(A - A.T).max() <= 1e-10 * np.abs(A).max()


def test_direct_singular_names_mode():
    sys = SystemMatrices([[1.0]], [[0.0]], [[4.0]])
    with pytest.raises(SingularityError, match="omega_r = 2"):
        receptance_direct(sys, 2.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_oracle_equivalence_symmetric(n, seed):
    rng = np.random.default_rng(seed)
    sys = proportional_system(rng, n)
    m = eigen_symmetric(sys)
    w = np.sort(rng.uniform(0, 2 * m.omega_r.max(), 40))
    direct = np.array([receptance_direct(sys, x) for x in w])
    scale = np.abs(direct).max(axis=(1, 2))
    for j in range(n):
        for k in range(n):
            assert _rel_dev(receptance_symmetric(m, w, j, k), direct[:, j, k], scale) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1), st.floats(10.0, 500.0))
def test_oracle_equivalence_gyroscopic(n, seed, spin):
    rng = np.random.default_rng(seed)
    sys = gyroscopic_system(rng, n, spin)
    cm = eigen_general(sys)
    w = np.sort(rng.uniform(0, 2 * cm.natural_frequencies.max(), 40))
    direct = np.array([receptance_direct(sys, x) for x in w])
    scale = np.abs(direct).max(axis=(1, 2))
    for j in range(n):
        for k in range(n):
            assert _rel_dev(receptance_general(cm, w, j, k), direct[:, j, k], scale) < 1e-8


def test_general_equals_symmetric_at_rest():
    rng = np.random.default_rng(11)
    sys = proportional_system(rng, 5)
    m, cm = eigen_symmetric(sys), eigen_general(sys)
    w = np.linspace(0, 2 * m.omega_r.max(), 300)
    for j in range(5):
        for k in range(5):
            a, b = receptance_symmetric(m, w, j, k), receptance_general(cm, w, j, k)
            assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(a))
            # residue asymmetry vanishes without gyroscopic coupling
    assert np.abs(cm.residues - np.transpose(cm.residues, (0, 2, 1))).max() < 1e-8 * np.abs(cm.residues).max()


def test_reciprocity_symmetric_and_gyroscopic_violation():
    rng = np.random.default_rng(5)
    sys = proportional_system(rng, 3)
    m = eigen_symmetric(sys)
    w = np.linspace(1, 2 * m.omega_r.max(), 200)
    a01, a10 = receptance_symmetric(m, w, 0, 1), receptance_symmetric(m, w, 1, 0)
    assert np.max(np.abs(a01 - a10)) <= 1e-10 * np.max(np.abs(a01))
    jeff = build_jeffcott(JeffcottParams(10.0, 1e6, 0.02, 0.1, 0.05, 0.0, 5e4)).at_speed(800.0)
    cm = eigen_general(jeff)
    w = np.linspace(1, 3000, 2000)
    b23, b32 = receptance_general(cm, w, 2, 3), receptance_general(cm, w, 3, 2)
    assert np.max(np.abs(b23 - b32)) > 1e-3 * np.max(np.abs(b23))


def test_gyroscopic_split_peaks_match_eigenvalues():
    jeff = build_jeffcott(JeffcottParams(10.0, 1e6, 0.01, 0.1, 0.05, 0.0, 5e4)).at_speed(400.0)
    cm = eigen_general(jeff)
    grid = np.arange(500.0, 2000.0, 0.5)
    curve = frf_curve(cm, grid, 2, 2)
    peaks = [p.omega for p in peak_pick_modal(curve, prominence=0.01)]
    tilt = sorted(f for f in cm.damped_frequencies if f > 500)
    assert len(peaks) == 2
    for p, f in zip(sorted(peaks), tilt):
        assert abs(p - f) <= 0.5


def test_truncation_monotone():
    rng = np.random.default_rng(21)
    for _ in range(10):
        n = int(rng.integers(2, 7))
        sys = proportional_system(rng, n)
        m = eigen_symmetric(sys)
        w = np.linspace(0, 2 * m.omega_r.max(), 400)
        direct = np.array([receptance_direct(sys, x)[0, 0] for x in w])
        errors = [np.max(np.abs(receptance_symmetric(m.truncated(range(r)), w, 0, 0) - direct))
                  for r in range(1, n + 1)]
        # strict monotonicity is not a theorem (an added mode's tail can nudge the
        # sup location); allow a 0.1% relative slack
        assert all(b <= a * (1 + 1e-3) for a, b in zip(errors, errors[1:]))
        assert errors[-1] < 1e-10 * np.abs(direct).max()


def test_low_frequency_limit():
    rng = np.random.default_rng(8)
    sys = proportional_system(rng, 4)
    m = eigen_symmetric(sys)
    Kinv = np.linalg.inv(sys.K)
    for j in range(4):
        for k in range(4):
            assert abs(receptance_symmetric(m, 0.0, j, k) - Kinv[j, k]) < 1e-10


def test_h1_static_gain():
    rng = np.random.default_rng(0)
    f = rng.normal(size=16384)
    est = estimate_frf_h1(ChannelRecord("f", f, 1024.0, "dimensionless", "force"), ChannelRecord("x", 2 * f, 1024.0, "m"))
    np.testing.assert_allclose(est.curve.values, 2.0 + 0j, atol=1e-10)
    assert np.all(est.coherence > 1 - 1e-9)


def test_h1_noise_coherence():
    rng = np.random.default_rng(1)
    f, x = rng.normal(size=(2, 32768))
    est = estimate_frf_h1(ChannelRecord("f", f, 1024.0, "dimensionless", "force"), ChannelRecord("x", x, 1024.0, "m"), n_averages=16)
    assert np.mean(est.coherence < 0.2) > 0.9
    assert np.all((est.coherence >= 0) & (est.coherence <= 1))


def test_h1_simulated_sdof():
    sys = sdof_system(0.05)
    fs = 1024.0
    rng = np.random.default_rng(2)
    nperseg = 32768
    n = int(nperseg * 8.5)
    force = rng.normal(size=n)
    resp = integrate(sys, lambda t: force[:, None], 1 / fs, (n - 1) / fs)
    est = estimate_frf_h1(ChannelRecord("f", force, fs, "dimensionless", "force"),
                          ChannelRecord("x", resp.q[:, 0], fs, "m"), n_averages=16)
    w = est.curve.frequencies
    wn = np.sqrt(K_SDOF)
    near = np.abs(w - wn) <= 0.1 * wn
    direct = np.array([receptance_direct(sys, x)[0, 0] for x in w[near]])
    assert np.max(np.abs(np.abs(est.curve.values[near]) - np.abs(direct)) / np.abs(direct)) < 0.05
    assert np.all(est.coherence[near] > 0.99)


def test_h1_insufficient_samples():
    x = ChannelRecord("f", np.ones(20), 100.0, "dimensionless", "force")
    with pytest.raises(LengthError):
        estimate_frf_h1(x, x, n_averages=16)


def test_peak_pick_two_modes():
    m = ModalModel([40.0, 90.0], [0.02, 0.05], [[1.0, 1.0], [1.0, -1.0]], [1.0, 1.0])
    grid = np.arange(1.0, 150.0, 0.1)
    peaks = peak_pick_modal(frf_curve(m, grid, 0, 0))
    assert len(peaks) == 2
    for p, w, z in zip(peaks, (40.0, 90.0), (0.02, 0.05)):
        assert abs(p.omega - w) <= 0.1 + 1e-9
        assert abs(p.zeta - z) / z <= 0.15
        assert not p.flagged


def test_peak_pick_refinement():
    m = ModalModel([40.0], [0.01], [[1.0]], [1.0])
    coarse = peak_pick_modal(frf_curve(m, np.arange(30.0, 50.0, 0.1), 0, 0))[0]
    fine = peak_pick_modal(frf_curve(m, np.arange(30.0, 50.0, 0.01), 0, 0))[0]
    assert abs(fine.zeta - 0.01) / 0.01 <= 0.05
    assert abs(fine.zeta - 0.01) <= abs(coarse.zeta - 0.01) + 1e-12


def test_peak_pick_flat_and_overlap():
    assert peak_pick_modal(FrfCurve(np.arange(10.0), np.ones(10), 0, 0, "direct")) == []
    m = ModalModel([40.0, 42.0], [0.05, 0.05], [[1.0, 1.0]], [1.0, 1.0])
    peaks = peak_pick_modal(frf_curve(m, np.arange(30.0, 55.0, 0.01), 0, 0), prominence=1e-4)
    assert all(p.flagged for p in peaks) or len(peaks) == 1


def test_frf_csv_round_trip(tmp_path):
    m = eigen_symmetric(sdof_system(0.05))
    curve = frf_curve(m, np.linspace(0, 120, 50), 0, 0)
    p = tmp_path / "frf.csv"
    write_frf_csv(curve, p)
    assert p.read_text().splitlines()[0] == "frequency_rad_s,real,imag,magnitude,phase_rad"
    back = read_frf_csv(p)
    np.testing.assert_allclose(back.values, curve.values, rtol=1e-11)
    assert (back.j, back.k, back.method) == (0, 0, "modal_symmetric")

"""Receptance synthesis, direct-inversion reference and H1 estimation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .errors import DomainError, LengthError, SingularityError
from .rotor import ComplexModalModel, ModalModel, SystemMatrices
from .signal_core import ChannelRecord

METHODS = ("modal_symmetric", "modal_general", "direct", "estimated_h1")


@dataclass(frozen=True, eq=False)
class FrfCurve:
    """Receptance ``alpha_jk`` sampled at ``frequencies`` (rad/s)."""

    frequencies: np.ndarray
    values: np.ndarray
    j: int
    k: int
    method: str

    def __post_init__(self):
        f = np.array(self.frequencies, dtype=float)
        v = np.array(self.values, dtype=complex)
        if f.shape != v.shape or f.ndim != 1:
            raise LengthError("frequencies and values must be 1-D and equal length")
        if np.any(np.diff(f) <= 0):
            raise DomainError("frequencies must be strictly ascending")
        if not np.all(np.isfinite(v)):
            raise DomainError("receptance values must be finite")
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}")
        f.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.values)


def _check_index(n: int, *idx: int) -> None:
    for i in idx:
        if not (0 <= i < n):
            raise IndexError(f"coordinate index {i} out of range for {n} DOFs")


def receptance_symmetric(m: ModalModel, omega, j: int, k: int):
    """Real-mode superposition::

        alpha_jk(w) = sum_r phi_jr phi_kr / (M_r (w_r^2 - w^2 + 2 i w zeta_r w_r))

    ``omega`` may be a scalar or an array; the result has the same shape.
    """
    _check_index(m.n_dof, j, k)
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise DomainError("omega must be >= 0")
    num = m.phi[j] * m.phi[k] / m.modal_mass
    wr = m.omega_r
    den = wr**2 - w[..., None] ** 2 + 2j * w[..., None] * m.zeta_r * wr
    out = np.sum(num / den, axis=-1)
    return complex(out) if out.ndim == 0 else out


def receptance_general(cm: ComplexModalModel, omega, j: int, k: int):
    """Complex-mode superposition over all 2n eigenvalues::

        alpha_jk(w) = sum_r R_jk^(r) / (i w - lambda_r)

    For real systems the modes come in conjugate pairs, so this equals
    ``sum_pairs [R/(iw - lam) + conj(R)/(iw - conj(lam))]``; each pair combines
    over the common denominator ``w_r^2 - w^2 + 2 i w w_r zeta_r``.
    """
    _check_index(cm.n_dof, j, k)
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise DomainError("omega must be >= 0")
    res = cm.residues[:, j, k]
    out = np.sum(res / (1j * w[..., None] - cm.eigenvalues), axis=-1)
    return complex(out) if out.ndim == 0 else out


def receptance_direct(sys: SystemMatrices, omega: float) -> np.ndarray:
    """Full receptance matrix ``[K - w^2 M + i w (C + Omega G)]^-1``."""
    if omega < 0:
        raise DomainError("omega must be >= 0")
    Z = sys.stiffness() - omega**2 * sys.M + 1j * omega * sys.damping_coupling()
    cond = np.linalg.cond(Z)
    if not np.isfinite(cond) or cond > 1e14:
        w2 = np.linalg.eigvals(np.linalg.solve(sys.M, sys.stiffness())).real
        wr = np.sqrt(np.clip(w2, 0, None))
        nearest = wr[np.argmin(np.abs(wr - omega))]
        raise SingularityError(
            f"dynamic stiffness is singular at omega = {omega:.6g} rad/s "
            f"(undamped natural frequency omega_r = {nearest:.6g} rad/s)"
        )
    return np.linalg.solve(Z, np.eye(sys.n, dtype=complex))


def frf_curve(source, omegas, j: int, k: int) -> FrfCurve:
    """Evaluate ``alpha_jk`` on a caller-supplied grid with the matching method."""
    omegas = np.asarray(omegas, dtype=float)
    if isinstance(source, ModalModel):
        return FrfCurve(omegas, receptance_symmetric(source, omegas, j, k), j, k, "modal_symmetric")
    if isinstance(source, ComplexModalModel):
        return FrfCurve(omegas, receptance_general(source, omegas, j, k), j, k, "modal_general")
    if isinstance(source, SystemMatrices):
        _check_index(source.n, j, k)
        vals = np.array([receptance_direct(source, w)[j, k] for w in omegas])
        return FrfCurve(omegas, vals, j, k, "direct")
    raise TypeError(f"unsupported FRF source {type(source).__name__}")


@dataclass(frozen=True, eq=False)
class H1Estimate:
    curve: FrfCurve
    coherence: np.ndarray


def _segment_length(n_samples: int, n_averages: int, overlap: float) -> int:
    if n_averages < 2:
        raise DomainError("n_averages must be >= 2")
    if not 0 <= overlap < 1:
        raise DomainError("overlap_fraction must lie in [0, 1)")
    nperseg = int(n_samples / (1 + (n_averages - 1) * (1 - overlap)))
    if nperseg < 8:
        raise LengthError(f"{n_samples} samples cannot supply {n_averages} segments of >= 8 samples")
    return nperseg


def estimate_frf_h1(force_ch: ChannelRecord, response_ch: ChannelRecord,
                    n_averages: int = 16, overlap_fraction: float = 0.5,
                    j: int = 0, k: int = 0) -> H1Estimate:
    """H1 = averaged cross-spectrum / averaged force auto-spectrum (Hann segments).

    The curve's frequency axis is in rad/s and excludes DC.
    """
    if len(force_ch) != len(response_ch) or force_ch.sample_rate != response_ch.sample_rate:
        raise LengthError("force and response channels must share length and sample rate")
    nperseg = _segment_length(len(force_ch), n_averages, overlap_fraction)
    noverlap = int(round(overlap_fraction * nperseg))
    kw = dict(fs=force_ch.sample_rate, window="hann", nperseg=nperseg, noverlap=noverlap,
              detrend=False, scaling="spectrum")
    f, Pxx = sps.welch(force_ch.samples, **kw)
    _, Pyy = sps.welch(response_ch.samples, **kw)
    _, Pxy = sps.csd(force_ch.samples, response_ch.samples, **kw)
    f, Pxx, Pyy, Pxy = f[1:], Pxx[1:], Pyy[1:], Pxy[1:]
    tiny = np.finfo(float).tiny
    H = np.where(Pxx > tiny, Pxy / np.maximum(Pxx, tiny), 0.0)
    denom = Pxx * Pyy
    coh = np.where(denom > tiny, np.abs(Pxy) ** 2 / np.maximum(denom, tiny), 0.0)
    coh = np.clip(coh, 0.0, 1.0)
    return H1Estimate(FrfCurve(2 * np.pi * f, H, j, k, "estimated_h1"), coh)


@dataclass(frozen=True)
class ModalPeak:
    omega: float
    zeta: float
    amplitude: float
    flagged: bool = False
    note: str = ""


def _crossing(w: np.ndarray, mag: np.ndarray, i_from: int, i_to: int, level: float):
    """Interpolated frequency where ``mag`` first falls to ``level`` walking from ``i_from`` to ``i_to``.

    Returns None when the curve turns upward (a neighbouring peak) first.
    """
    step = 1 if i_to > i_from else -1
    i = i_from
    while i != i_to:
        nxt = i + step
        if mag[nxt] <= level:
            frac = (mag[i] - level) / (mag[i] - mag[nxt])
            return w[i] + frac * (w[nxt] - w[i])
        if mag[nxt] > mag[i]:
            return None
        i = nxt
    return None


def peak_pick_modal(curve: FrfCurve, prominence: float = 0.05) -> list[ModalPeak]:
    """Local maxima of ``|alpha|`` with half-power damping estimates.

    Peaks are detected on ``|alpha|``; the reported ``omega`` is where the
    quadrature part ``|Im alpha|`` peaks inside the half-power band, which
    is insensitive to the real-valued tails of neighbouring modes.

    :param prominence: minimum peak prominence relative to the curve maximum.
    :returns: one :class:`ModalPeak` per peak; entries whose -3 dB band runs
        into a neighbouring peak are returned with ``flagged=True`` and
        ``zeta = nan``.
    """
    mag = curve.magnitude
    w = curve.frequencies
    if mag.size < 3 or mag.max() == 0:
        return []
    idx, _ = sps.find_peaks(mag, prominence=prominence * mag.max())
    peaks = []
    for i in idx:
        level = mag[i] / np.sqrt(2)
        lo = _crossing(w, mag, i, 0, level)
        hi = _crossing(w, mag, i, mag.size - 1, level)
        if lo is None or hi is None:
            peaks.append(ModalPeak(float(w[i]), float("nan"), float(mag[i]), True,
                                   "half-power band overlaps a neighbouring peak or the grid edge"))
            continue
        band = np.flatnonzero((w >= lo) & (w <= hi))
        quad = np.abs(curve.values[band].imag)
        i_q = band[int(np.argmax(quad))] if quad.max() > 0 else i
        w_r = float(w[i_q])
        peaks.append(ModalPeak(w_r, float((hi - lo) / (2 * w_r)), float(mag[i])))
    return peaks


def write_frf_csv(curve: FrfCurve, path) -> None:
    """CSV ``frequency_rad_s,real,imag,magnitude,phase_rad`` plus a ``.json`` sidecar."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("frequency_rad_s,real,imag,magnitude,phase_rad\n")
        for w, v in zip(curve.frequencies, curve.values):
            fh.write(f"{w:.12g},{v.real:.12g},{v.imag:.12g},{abs(v):.12g},{np.angle(v):.12g}\n")
    path.with_suffix(".json").write_text(json.dumps({"j": curve.j, "k": curve.k, "method": curve.method}))


def read_frf_csv(path) -> FrfCurve:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta = json.loads(path.with_suffix(".json").read_text())
    return FrfCurve(data[:, 0], data[:, 1] + 1j * data[:, 2], meta["j"], meta["k"], meta["method"])

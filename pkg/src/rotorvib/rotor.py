"""Rotor system matrices, modal extraction and Newmark time integration.

Equations of motion handled here::

    M q'' + (C + Omega G) q' + K(Omega) q = F(t)

with ``G`` skew-symmetric. At ``Omega = 0`` (or ``G = 0``) the system is
symmetric and :func:`eigen_symmetric` applies; otherwise use
:func:`eigen_general`, which works in first-order (state-space) form.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import linalg as la

from .errors import DomainError, MatrixError, StabilityError, SymmetryError
from .signal_core import ChannelRecord, MultiChannelRecord

MODAL_JSON_VERSION = 1

TACHO_PULSE_FRACTION = 0.05
TACHO_AMPLITUDE = 5.0
TACHO_BASELINE = 0.0


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _is_symmetric(a: np.ndarray, rtol: float = 1e-10) -> bool:
    scale = max(np.abs(a).max(), 1e-300)
    return np.abs(a - a.T).max() <= rtol * scale


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    """Mass, damping, stiffness and gyroscopic matrices at one spin speed.

    ``whirl_pairs`` lists ``(y, z)`` DOF index pairs describing lateral motion
    in two orthogonal directions; it is used only to classify whirl sense.
    ``stiffness_fn``, when given, returns ``K(Omega)`` and overrides ``K`` at
    nonzero speed.
    """

    M: np.ndarray
    C: np.ndarray
    K: np.ndarray
    G: np.ndarray | None = None
    omega_spin: float = 0.0
    dof_labels: tuple = ()
    whirl_pairs: tuple = ()
    stiffness_fn: Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        M = _frozen(self.M)
        n = M.shape[0]
        if M.shape != (n, n):
            raise MatrixError(f"M must be square, got shape {M.shape}")
        C = _frozen(self.C)
        K = _frozen(self.K)
        G = _frozen(np.zeros((n, n)) if self.G is None else self.G)
        for name, a in (("C", C), ("K", K), ("G", G)):
            if a.shape != (n, n):
                raise MatrixError(f"{name} has shape {a.shape}, expected {(n, n)}")
            if not np.all(np.isfinite(a)):
                raise MatrixError(f"{name} contains non-finite entries")
        if np.abs(G + G.T).max() > 1e-12 * max(1.0, np.abs(G).max()):
            raise SymmetryError("G must be skew-symmetric (G + G^T = 0)")
        if self.omega_spin < 0:
            raise DomainError(f"omega_spin must be >= 0, got {self.omega_spin}")
        labels = tuple(self.dof_labels) or tuple(f"q{i}" for i in range(n))
        if len(labels) != n:
            raise DomainError(f"{len(labels)} DOF labels for {n} DOFs")
        for name, a in (("M", M), ("C", C), ("K", K)):
            object.__setattr__(self, name, a)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "omega_spin", float(self.omega_spin))
        object.__setattr__(self, "dof_labels", labels)
        object.__setattr__(self, "whirl_pairs", tuple(tuple(p) for p in self.whirl_pairs))

    @property
    def n(self) -> int:
        return self.M.shape[0]

    def at_speed(self, omega_spin: float) -> "SystemMatrices":
        return replace(self, omega_spin=omega_spin)

    def damping_coupling(self, omega: float | None = None) -> np.ndarray:
        """``C + Omega G`` at ``omega`` (defaults to ``omega_spin``)."""
        omega = self.omega_spin if omega is None else omega
        return self.C + omega * self.G

    def stiffness(self, omega: float | None = None) -> np.ndarray:
        omega = self.omega_spin if omega is None else omega
        if self.stiffness_fn is not None:
            return np.asarray(self.stiffness_fn(omega), dtype=float)
        return self.K

    @property
    def is_gyroscopic(self) -> bool:
        return self.omega_spin != 0 and np.any(self.G != 0)

    def max_natural_frequency_hz(self) -> float:
        """Largest undamped natural frequency of ``(K, M)`` in Hz."""
        w2 = la.eigvalsh(_sym(self.stiffness()), _sym(self.M))
        return float(np.sqrt(max(w2.max(), 0.0)) / (2 * np.pi))


def _sym(a):
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class JeffcottParams:
    """Disc on a massless shaft, optionally with tilt (gyroscopic) DOFs.

    With ``diametral_inertia == 0`` the tilt DOFs carry no inertia and decouple,
    so the model condenses to the two lateral translations.
    """

    disc_mass: float
    shaft_stiffness: float
    damping_ratio: float = 0.0
    polar_inertia: float = 0.0
    diametral_inertia: float = 0.0
    unbalance_mass_ecc: float = 0.0
    tilt_stiffness: float = 0.0

    def __post_init__(self):
        for name in ("disc_mass", "shaft_stiffness"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("damping_ratio", "polar_inertia", "diametral_inertia",
                     "unbalance_mass_ecc", "tilt_stiffness"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.damping_ratio >= 1:
            raise DomainError("damping_ratio must be < 1")
        if self.diametral_inertia > 0 and not self.tilt_stiffness > 0:
            raise DomainError("tilt_stiffness must be > 0 when diametral_inertia > 0")
        if self.polar_inertia > 0 and not self.diametral_inertia > 0:
            raise DomainError("polar_inertia > 0 requires diametral_inertia > 0")

    @property
    def natural_frequency(self) -> float:
        """Translational undamped natural frequency sqrt(k/m), rad/s."""
        return float(np.sqrt(self.shaft_stiffness / self.disc_mass))


def build_jeffcott(p: JeffcottParams) -> SystemMatrices:
    """Assemble a Jeffcott rotor.

    DOFs are ``(y, z)`` translations and, when the disc has diametral inertia,
    the disc slopes ``(beta, gamma)`` = ``(dy/dx, dz/dx)``. Spin is about +x,
    counter-clockwise from y toward z, so forward whirl has the same sense.
    """
    m, k, zeta = p.disc_mass, p.shaft_stiffness, p.damping_ratio
    c = 2 * zeta * np.sqrt(k * m)
    if p.diametral_inertia == 0:
        M = np.diag([m, m])
        K = np.diag([k, k])
        C = np.diag([c, c])
        return SystemMatrices(M, C, K, np.zeros((2, 2)), 0.0,
                              dof_labels=("y", "z"), whirl_pairs=((0, 1),))
    Id, Ip, kt = p.diametral_inertia, p.polar_inertia, p.tilt_stiffness
    ct = 2 * zeta * np.sqrt(kt * Id)
    M = np.diag([m, m, Id, Id])
    K = np.diag([k, k, kt, kt])
    C = np.diag([c, c, ct, ct])
    G = np.zeros((4, 4))
    G[2, 3] = Ip
    G[3, 2] = -Ip
    return SystemMatrices(M, C, K, G, 0.0, dof_labels=("y", "z", "beta", "gamma"),
                          whirl_pairs=((0, 1), (2, 3)))


# --------------------------------------------------------------------------
# modal models


@dataclass(frozen=True, eq=False)
class ModalModel:
    """Real (undamped) modes with projected modal damping.

    ``phi`` columns are scaled so the largest-magnitude entry is +1;
    ``modal_mass`` is the matching diagonal of ``phi.T @ M @ phi``.
    ``nonproportionality`` is the largest normalised off-diagonal of
    ``phi.T @ C @ phi``; zero for proportional damping.
    """

    omega_r: np.ndarray
    zeta_r: np.ndarray
    phi: np.ndarray
    modal_mass: np.ndarray
    nonproportionality: float = 0.0

    def __post_init__(self):
        for name in ("omega_r", "zeta_r", "phi", "modal_mass"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        r = self.omega_r.size
        if self.phi.ndim != 2 or self.phi.shape[1] != r or self.zeta_r.size != r or self.modal_mass.size != r:
            raise DomainError("inconsistent modal model dimensions")
        if np.any(self.omega_r < 0) or np.any(np.diff(self.omega_r) < 0):
            raise DomainError("omega_r must be non-negative and ascending")
        if np.any(self.zeta_r < 0) or np.any(self.zeta_r >= 1):
            raise DomainError("every zeta_r must lie in [0, 1)")
        if np.any(self.modal_mass <= 0):
            raise DomainError("modal masses must be positive")

    @property
    def n_modes(self) -> int:
        return self.omega_r.size

    @property
    def n_dof(self) -> int:
        return self.phi.shape[0]

    @property
    def proportional(self) -> bool:
        return self.nonproportionality <= 1e-6

    @property
    def damped_frequencies(self) -> np.ndarray:
        return self.omega_r * np.sqrt(1 - self.zeta_r**2)

    def truncated(self, modes: Sequence[int]) -> "ModalModel":
        idx = np.asarray(modes, dtype=int)
        return ModalModel(self.omega_r[idx], self.zeta_r[idx], self.phi[:, idx],
                          self.modal_mass[idx], self.nonproportionality)


def _canonical_subspace_basis(V: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Deterministic M-orthogonal basis for the span of ``V``.

    Unit vectors are projected onto the subspace in ascending DOF order and
    Gram-Schmidt orthogonalised in the mass inner product.
    """
    n, m = V.shape
    P = V @ (V.T @ M)  # M-orthogonal projector for M-orthonormal V
    basis = []
    for i in range(n):
        v = P[:, i].copy()
        for b in basis:
            v -= (b @ M @ v) * b
        nv = np.sqrt(max(v @ M @ v, 0.0))
        if nv > 1e-8 * np.sqrt(M[i, i]):
            basis.append(v / nv)
        if len(basis) == m:
            break
    return np.column_stack(basis)


def eigen_symmetric(sys: SystemMatrices, cluster_rtol: float = 1e-8) -> ModalModel:
    """Undamped real modes of ``(K - w^2 M) phi = 0`` with projected damping.

    Damping ratios come from the diagonal of ``phi.T C phi``; the off-diagonal
    part is reported as ``nonproportionality`` and a warning is issued when it
    exceeds 1e-6.
    """
    if sys.is_gyroscopic:
        raise SymmetryError("gyroscopic coupling present (omega_spin > 0 and G != 0); use eigen_general")
    K = sys.stiffness()
    for name, a in (("M", sys.M), ("C", sys.C), ("K", K)):
        if not _is_symmetric(a):
            raise SymmetryError(f"{name} is not symmetric; use eigen_general")
    try:
        w2, V = la.eigh(_sym(K), _sym(sys.M))
    except la.LinAlgError as exc:
        raise MatrixError(f"mass matrix is not positive definite: {exc}") from None
    w2 = np.where(np.abs(w2) < 1e-12 * max(np.abs(w2).max(), 1e-300), 0.0, w2)
    if np.any(w2 < 0):
        raise MatrixError("stiffness matrix is not positive semi-definite")
    omega = np.sqrt(w2)

    # repeated eigenvalues: replace eigh's arbitrary rotation by a canonical one
    start = 0
    while start < omega.size:
        stop = start + 1
        while stop < omega.size and abs(omega[stop] - omega[start]) <= cluster_rtol * max(omega[start], 1e-300):
            stop += 1
        if stop - start > 1:
            V[:, start:stop] = _canonical_subspace_basis(V[:, start:stop], sys.M)
        start = stop

    # scale: largest |entry| -> +1 (first such index wins ties)
    for r in range(V.shape[1]):
        i = int(np.argmax(np.abs(V[:, r]) * (1 - 1e-12 * np.arange(V.shape[0]))))
        V[:, r] /= V[i, r]
    modal_mass = np.einsum("ir,ij,jr->r", V, sys.M, V)
    Cm = V.T @ sys.C @ V
    diag_c = np.diag(Cm).copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        zeta = np.where(omega > 0, diag_c / (2 * modal_mass * omega), 0.0)
    off = Cm - np.diag(diag_c)
    scale = np.sqrt(np.outer(modal_mass, modal_mass)) * np.maximum(omega[:, None], omega[None, :])
    scale = np.where(scale > 0, scale, 1.0)
    nonprop = float(np.abs(off / scale).max()) if off.size else 0.0
    if nonprop > 1e-6:
        warnings.warn(
            f"damping is not proportional (off-diagonal modal damping ratio {nonprop:.3g}); "
            "projected zeta_r are approximate, eigen_general is exact",
            stacklevel=2,
        )
    return ModalModel(omega, zeta, V, modal_mass, nonprop)


@dataclass(frozen=True, eq=False)
class ComplexModalModel:
    """State-space eigen-solution of ``M q'' + (C + Omega G) q' + K q = 0``.

    ``eigenvalues`` has length 2n: the n members with ``Im >= 0`` in ascending
    ``|Im|`` order, followed by their conjugates in the same order (for real
    systems). ``residues[r]`` is the n x n matrix with
    ``alpha(w) = sum_r residues[r] / (i w - eigenvalues[r])``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residues: np.ndarray
    whirl_sense: tuple
    omega_spin: float = 0.0

    def __post_init__(self):
        for name in ("eigenvalues", "eigenvectors", "residues"):
            object.__setattr__(self, name, _frozen(getattr(self, name), complex))

    @property
    def n_dof(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    @property
    def natural_frequencies(self) -> np.ndarray:
        """Undamped-equivalent |lambda| of the upper-half-plane modes."""
        return np.abs(self.eigenvalues[: self.n_dof])

    @property
    def damped_frequencies(self) -> np.ndarray:
        return np.abs(self.eigenvalues[: self.n_dof].imag)

    @property
    def damping_ratios(self) -> np.ndarray:
        lam = self.eigenvalues[: self.n_dof]
        return -lam.real / np.abs(lam)


def _whirl(vec: np.ndarray, lam: complex, pairs, rtol: float = 1e-6) -> str:
    """Whirl sense of one complex mode from its (y, z) components.

    Motion ``y = Re(Y e^{i w t})``, ``z = Re(Z e^{i w t})`` with ``w = Im lam``
    sweeps signed area proportional to ``-w Im(conj(Y) Z)``; positive is
    counter-clockwise (y toward z), the spin sense.
    """
    if not pairs or lam.imag == 0:
        return "planar"
    area = 0.0
    norm = 0.0
    for iy, iz in pairs:
        Y, Z = vec[iy], vec[iz]
        area += -np.sign(lam.imag) * (np.conj(Y) * Z).imag
        norm += abs(Y) ** 2 + abs(Z) ** 2
    if norm == 0 or abs(area) < rtol * norm:
        return "planar"
    return "forward" if area > 0 else "backward"


def eigen_general(sys: SystemMatrices) -> ComplexModalModel:
    """Complex modes of the (possibly gyroscopic) system in first-order form."""
    n = sys.n
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", la.LinAlgWarning)
            lu = la.lu_factor(sys.M, check_finite=True)
        if np.abs(np.diag(lu[0])).min() <= 1e-14 * np.abs(sys.M).max():
            raise la.LinAlgError("singular")
    except (la.LinAlgError, ValueError):
        raise MatrixError("mass matrix is singular") from None
    Minv_K = la.lu_solve(lu, sys.stiffness())
    Minv_D = la.lu_solve(lu, sys.damping_coupling())
    Minv = la.lu_solve(lu, np.eye(n))
    A = np.block([[np.zeros((n, n)), np.eye(n)], [-Minv_K, -Minv_D]])
    lam, V = la.eig(A)

    order = _pair_order(lam)
    lam = lam[order]
    V = V[:, order]
    # left factors: rows of V^-1 applied to the input matrix [0; M^-1]
    W = la.solve(V, np.vstack([np.zeros((n, n)), Minv]))
    residues = np.einsum("ir,rj->rij", V[:n, :], W)
    # conjugate partners carry exactly conjugate data for real systems
    upper, lower = order_split(lam, n)
    if lower is not None:
        lam[n:] = np.conj(lam[:n])
        residues[n:] = np.conj(residues[:n])
        V[:, n:] = np.conj(V[:, :n])
    senses = [_whirl(V[:n, r], lam[r], sys.whirl_pairs) for r in range(2 * n)]
    return ComplexModalModel(lam, V[:n, :], residues, tuple(senses), sys.omega_spin)


def _pair_order(lam: np.ndarray) -> np.ndarray:
    """Order eigenvalues as [upper half-plane ascending |Im|, conjugates].

    Real eigenvalues (overdamped modes) are split evenly between the halves
    by magnitude so the layout stays 2n long.
    """
    idx = np.arange(lam.size)
    upper = idx[lam.imag > 0]
    lower = idx[lam.imag < 0]
    real = idx[lam.imag == 0]
    upper = upper[np.lexsort((lam[upper].real, np.abs(lam[upper].imag)))]
    # match each upper eigenvalue with its nearest conjugate
    remaining = list(lower)
    matched = []
    for u in upper:
        target = np.conj(lam[u])
        j = min(remaining, key=lambda k: abs(lam[k] - target))
        remaining.remove(j)
        matched.append(j)
    real = real[np.argsort(np.abs(lam[real]))]
    half = real.size // 2
    first = np.concatenate([upper, real[:half]]).astype(int)
    second = np.concatenate([matched, remaining, real[half:]]).astype(int)
    return np.concatenate([first, second])


def order_split(lam: np.ndarray, n: int):
    """Return the upper block and, when the lower block is its exact mirror, the lower block."""
    upper, lower = lam[:n], lam[n:]
    if np.all(upper.imag > 0) and np.allclose(lower, np.conj(upper), rtol=1e-8, atol=0):
        return upper, lower
    return upper, None


def modal_to_json(model) -> str:
    """Serialise a :class:`ModalModel` or :class:`ComplexModalModel` as versioned JSON."""
    if isinstance(model, ModalModel):
        modes = [
            {
                "omega_r_rad_s": float(model.omega_r[r]),
                "zeta_r": float(model.zeta_r[r]),
                "phi": [float(v) for v in model.phi[:, r]],
                "modal_mass": float(model.modal_mass[r]),
            }
            for r in range(model.n_modes)
        ]
        doc = {"version": MODAL_JSON_VERSION, "kind": "real", "n_modes": model.n_modes, "modes": modes}
    elif isinstance(model, ComplexModalModel):
        modes = [
            {
                "lambda_re": float(model.eigenvalues[r].real),
                "lambda_im": float(model.eigenvalues[r].imag),
                "residues": [[[float(v.real), float(v.imag)] for v in row] for row in model.residues[r]],
                "whirl_sense": model.whirl_sense[r],
            }
            for r in range(model.n_modes)
        ]
        doc = {"version": MODAL_JSON_VERSION, "kind": "complex", "n_modes": model.n_modes,
               "omega_spin_rad_s": model.omega_spin, "modes": modes}
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    return json.dumps(doc, indent=1)


def modal_from_json(text: str):
    doc = json.loads(text)
    if doc.get("version") != MODAL_JSON_VERSION:
        raise DomainError(f"unsupported modal JSON version {doc.get('version')!r}")
    modes = doc["modes"]
    if doc.get("kind", "real") == "real":
        return ModalModel(
            [m["omega_r_rad_s"] for m in modes],
            [m["zeta_r"] for m in modes],
            np.array([m["phi"] for m in modes]).T,
            [m["modal_mass"] for m in modes],
        )
    lam = np.array([complex(m["lambda_re"], m["lambda_im"]) for m in modes])
    res = np.array([[[complex(*v) for v in row] for row in m["residues"]] for m in modes])
    return ComplexModalModel(lam, np.zeros((res.shape[1], lam.size), complex), res,
                             tuple(m.get("whirl_sense", "planar") for m in modes),
                             doc.get("omega_spin_rad_s", 0.0))


# --------------------------------------------------------------------------
# time integration

NEWMARK_BETA = 0.25
NEWMARK_GAMMA = 0.5


def stability_bound(sys: SystemMatrices, omega_max: float | None = None) -> float:
    """Largest admissible time step: 1 / (20 * highest natural frequency in Hz)."""
    if omega_max is None:
        f = sys.max_natural_frequency_hz()
    else:
        f = max(sys.at_speed(w).max_natural_frequency_hz() for w in (0.0, omega_max))
    return np.inf if f == 0 else 1.0 / (20.0 * f)


def _as_forcing(forcing, n: int) -> Callable[[np.ndarray], np.ndarray]:
    """Normalise ``forcing`` to a function of a time array returning (steps, n)."""
    if forcing is None:
        return lambda t: np.zeros((t.size, n))
    if callable(forcing):
        def f(t):
            out = np.asarray(forcing(t), dtype=float)
            if out.shape == (n, t.size):
                out = out.T
            if out.shape != (t.size, n):
                raise DomainError(f"forcing returned shape {out.shape}, expected {(t.size, n)} or {(n, t.size)}")
            return out
        return f
    arr = np.asarray(forcing, dtype=float)
    if arr.shape == (n,):
        return lambda t: np.broadcast_to(arr, (t.size, n))
    raise DomainError("forcing must be None, a length-n constant, or a callable of a time array")


def _newmark_constant(M, D, K, F, dt, q0, v0):
    """Average-acceleration Newmark for constant matrices as one linear recurrence."""
    n = M.shape[0]
    a0 = 1.0 / (NEWMARK_BETA * dt**2)
    a1 = NEWMARK_GAMMA / (NEWMARK_BETA * dt)
    a2 = 1.0 / (NEWMARK_BETA * dt)
    a3 = 1.0 / (2 * NEWMARK_BETA) - 1
    a4 = NEWMARK_GAMMA / NEWMARK_BETA - 1
    a5 = dt / 2 * (NEWMARK_GAMMA / NEWMARK_BETA - 2)
    a6 = dt * (1 - NEWMARK_GAMMA)
    a7 = NEWMARK_GAMMA * dt
    Keff_inv = la.inv(K + a0 * M + a1 * D)
    # q_{k+1} = Keff^-1 (F_{k+1} + M(a0 q + a2 v + a3 a) + D(a1 q + a4 v + a5 a))
    Pq = Keff_inv @ (a0 * M + a1 * D)
    Pv = Keff_inv @ (a2 * M + a4 * D)
    Pa = Keff_inv @ (a3 * M + a5 * D)
    I = np.eye(n)
    # state s = [q, v, a]
    T = np.zeros((3 * n, 3 * n))
    L = np.zeros((3 * n, n))
    T[:n] = np.hstack([Pq, Pv, Pa])
    L[:n] = Keff_inv
    # a_{k+1} = a0 (q_{k+1} - q) - a2 v - a3 a
    Tq1, Lq1 = T[:n], L[:n]
    T[2 * n:] = a0 * (Tq1 - np.hstack([I, 0 * I, 0 * I])) - np.hstack([0 * I, a2 * I, a3 * I])
    L[2 * n:] = a0 * Lq1
    # v_{k+1} = v + a6 a + a7 a_{k+1}
    T[n:2 * n] = np.hstack([0 * I, I, a6 * I]) + a7 * T[2 * n:]
    L[n:2 * n] = a7 * L[2 * n:]

    steps = F.shape[0]
    a_init = la.solve(M, F[0] - D @ v0 - K @ q0)
    s = np.concatenate([q0, v0, a_init])
    out = np.empty((steps, 3 * n))
    out[0] = s
    LF = F @ L.T
    Tt = T.T
    for k in range(1, steps):
        s = s @ Tt + LF[k]
        out[k] = s
    return out[:, :n], out[:, n:2 * n], out[:, 2 * n:]


def _newmark_varying(sys, omega_t, F, dt, q0, v0):
    """Average-acceleration Newmark with speed-dependent ``C + Omega G`` and ``K(Omega)``."""
    n = sys.n
    M = sys.M
    a0 = 1.0 / (NEWMARK_BETA * dt**2)
    a1 = NEWMARK_GAMMA / (NEWMARK_BETA * dt)
    a2 = 1.0 / (NEWMARK_BETA * dt)
    a3 = 1.0 / (2 * NEWMARK_BETA) - 1
    a4 = NEWMARK_GAMMA / NEWMARK_BETA - 1
    a5 = dt / 2 * (NEWMARK_GAMMA / NEWMARK_BETA - 2)
    a6 = dt * (1 - NEWMARK_GAMMA)
    a7 = NEWMARK_GAMMA * dt
    steps = F.shape[0]
    q = np.empty((steps, n))
    v = np.empty((steps, n))
    a = np.empty((steps, n))
    q[0], v[0] = q0, v0
    a[0] = la.solve(M, F[0] - sys.damping_coupling(omega_t[0]) @ v0 - sys.stiffness(omega_t[0]) @ q0)
    for k in range(steps - 1):
        D = sys.damping_coupling(omega_t[k + 1])
        K = sys.stiffness(omega_t[k + 1])
        rhs = F[k + 1] + M @ (a0 * q[k] + a2 * v[k] + a3 * a[k]) + D @ (a1 * q[k] + a4 * v[k] + a5 * a[k])
        q[k + 1] = np.linalg.solve(K + a0 * M + a1 * D, rhs)
        a[k + 1] = a0 * (q[k + 1] - q[k]) - a2 * v[k] - a3 * a[k]
        v[k + 1] = v[k] + a6 * a[k] + a7 * a[k + 1]
    return q, v, a


@dataclass(frozen=True, eq=False)
class Response:
    """Full integration output; ``record`` is the channel view of it."""

    t: np.ndarray
    q: np.ndarray
    v: np.ndarray
    a: np.ndarray
    force: np.ndarray
    record: MultiChannelRecord


def integrate(sys: SystemMatrices, forcing, dt: float, duration: float,
              q0=None, v0=None, omega_t=None) -> Response:
    """Newmark average-acceleration integration (beta = 1/4, gamma = 1/2).

    :param forcing: None, a constant length-n force vector, or a callable
        ``f(t_array) -> (steps, n)`` array.
    :param omega_t: optional spin speed per time step; when given, the
        ``C + Omega G`` and ``K(Omega)`` terms follow it.
    """
    n = sys.n
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    if not duration >= 10 * dt:
        raise DomainError(f"duration {duration} s must be at least 10 time steps ({10 * dt} s)")
    omega_max = None if omega_t is None else float(np.max(omega_t))
    bound = stability_bound(sys, omega_max)
    if dt > bound * (1 + 1e-12):
        raise StabilityError(f"dt = {dt:.6g} s exceeds the accuracy bound {bound:.6g} s "
                             "(1 / (20 * highest natural frequency))")
    steps = int(round(duration / dt)) + 1
    t = np.arange(steps) * dt
    F = _as_forcing(forcing, n)(t)
    q0 = np.zeros(n) if q0 is None else np.asarray(q0, dtype=float)
    v0 = np.zeros(n) if v0 is None else np.asarray(v0, dtype=float)
    if omega_t is None:
        q, v, a = _newmark_constant(sys.M, sys.damping_coupling(), sys.stiffness(), F, dt, q0, v0)
    else:
        omega_t = np.asarray(omega_t, dtype=float)
        if omega_t.shape != t.shape:
            raise DomainError("omega_t must have one value per time step")
        if not sys.is_gyroscopic and np.all(sys.G == 0) and sys.stiffness_fn is None:
            q, v, a = _newmark_constant(sys.M, sys.C, sys.K, F, dt, q0, v0)
        else:
            q, v, a = _newmark_varying(sys, omega_t, F, dt, q0, v0)
    rate = 1.0 / dt
    channels = [ChannelRecord(label, q[:, i], rate, "m", "vibration") for i, label in enumerate(sys.dof_labels)]
    channels += [ChannelRecord(f"F_{label}", F[:, i], rate, "dimensionless", "force")
                 for i, label in enumerate(sys.dof_labels)]
    record = MultiChannelRecord(tuple(channels), rate)
    return Response(t, q, v, a, F, record)


def simulate_response(sys: SystemMatrices, forcing, dt: float, duration: float,
                      q0=None, v0=None) -> MultiChannelRecord:
    """Integrate from rest (or ``q0``/``v0``) and return displacement and force channels."""
    return integrate(sys, forcing, dt, duration, q0, v0).record


def _speed_samples(omega_profile, t: np.ndarray) -> np.ndarray:
    if callable(omega_profile):
        omega = np.asarray(omega_profile(t), dtype=float)
    else:
        w0, w1 = omega_profile
        omega = w0 + (w1 - w0) * t / t[-1]
    d = np.diff(omega)
    if not (np.all(d >= 0) or np.all(d <= 0)):
        raise DomainError("omega_profile must be monotone")
    if np.any(omega < 0):
        raise DomainError("omega_profile must be non-negative")
    return omega


def unbalance_forcing(me: float, omega: np.ndarray, phase: np.ndarray, n: int) -> np.ndarray:
    """Rotating unbalance force ``me Omega^2`` on DOFs 0 (y) and 1 (z)."""
    F = np.zeros((omega.size, n))
    mag = me * omega**2
    F[:, 0] = mag * np.cos(phase)
    F[:, 1] = mag * np.sin(phase)
    return F


def tacho_signal(phase: np.ndarray) -> np.ndarray:
    """One rectangular pulse per revolution, high for the first 5% of each rev."""
    frac = np.mod(phase, 2 * np.pi) / (2 * np.pi)
    return np.where(frac < TACHO_PULSE_FRACTION, TACHO_AMPLITUDE, TACHO_BASELINE)


def _rising_edges(x: np.ndarray, level: float) -> int:
    high = x > level
    return int(np.count_nonzero(high[1:] & ~high[:-1]))


def simulate_rundown(sys: SystemMatrices, p: JeffcottParams, omega_profile, dt: float,
                     duration: float, extra_forcing=None) -> MultiChannelRecord:
    """Unbalance response while the spin speed follows ``omega_profile``.

    :param omega_profile: ``(omega_start, omega_end)`` for a linear ramp in
        rad/s, or a monotone callable ``omega(t_array)``.
    :param extra_forcing: optional callable ``f(t, omega, phase) -> (steps, n)``
        added to the unbalance force (used to inject other synchronous faults).
    :returns: record with ``y``, ``z`` displacement channels and a ``tacho``
        channel; ``metadata`` holds ``omega`` samples, ``revolutions`` and the
        emitted ``tacho_pulses`` (rising edges).
    """
    if not dt > 0 or not duration >= 10 * dt:
        raise DomainError("duration must be at least 10 time steps")
    steps = int(round(duration / dt)) + 1
    t = np.arange(steps) * dt
    omega = _speed_samples(omega_profile, t)
    phase = np.concatenate([[0.0], np.cumsum(0.5 * (omega[1:] + omega[:-1]) * dt)])
    F = unbalance_forcing(p.unbalance_mass_ecc, omega, phase, sys.n)
    if extra_forcing is not None:
        F = F + np.asarray(extra_forcing(t, omega, phase), dtype=float)
    resp = integrate(sys, lambda _t: F, dt, duration, omega_t=omega)
    tacho = tacho_signal(phase)
    rate = 1.0 / dt
    channels = (
        ChannelRecord("y", resp.q[:, 0], rate, "m", "vibration"),
        ChannelRecord("z", resp.q[:, 1], rate, "m", "vibration"),
        ChannelRecord("tacho", tacho, rate, "dimensionless", "tacho"),
    )
    meta = {
        "omega": omega,
        "revolutions": float(phase[-1] / (2 * np.pi)),
        "tacho_pulses": _rising_edges(tacho, 0.5 * (TACHO_AMPLITUDE + TACHO_BASELINE)),
    }
    return MultiChannelRecord(channels, rate, 0.0, meta)


def harmonic_amplitude(x: np.ndarray, t: np.ndarray, omega: float) -> float:
    """Least-squares amplitude of the ``omega`` component of ``x(t)``."""
    A = np.column_stack([np.cos(omega * t), np.sin(omega * t), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(A, x, rcond=None)
    return float(np.hypot(coef[0], coef[1]))


def envelope_peak_speed(record: MultiChannelRecord, channel: str = "y") -> tuple[float, float]:
    """Time and spin speed at the maximum amplitude envelope of ``channel``.

    The envelope is the per-revolution peak |x| taken between tacho pulses;
    the speed is the mean over that revolution, both derived from the tacho.
    """
    from .orbit import detect_tacho

    train = detect_tacho(record.tacho, threshold=0.5 * TACHO_AMPLITUDE)
    x = np.abs(record[channel].samples)
    t = record.times()
    best = (-1.0, 0.0, 0.0)
    for t0, t1 in zip(train.pulse_times[:-1], train.pulse_times[1:]):
        sel = (t >= t0) & (t < t1)
        peak = x[sel].max()
        if peak > best[0]:
            best = (peak, 0.5 * (t0 + t1), 2 * np.pi / (t1 - t0))
    return best[1], best[2]

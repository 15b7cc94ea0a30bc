"""NV ground-state Hamiltonian and labeled electron eigenstates |0>, |->, |+>.

Conventions: couplings are given in MHz (gamma_N in kHz/G) and converted to
rad/us internally; fields in gauss; angles in degrees at the API boundary.
The field lies in the XZ plane, ``theta_B`` measured from the NV axis z.
Electron basis order is ``|m_S=+1>, |0>, |-1>``; the 6-level space is
electron (x) nucleus.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ContinuityError, DegenerateLabelError
from .spin import eigh, kron, spin_operators

TWO_PI = 2 * np.pi

LABELS = ("zero", "minus", "plus")

SX, SY, SZ = spin_operators(1)
IX, IY, IZ = spin_operators(0.5)
S_OPS = (SX, SY, SZ)
I_OPS = (IX, IY, IZ)
ID2 = np.eye(2, dtype=complex)
ID3 = np.eye(3, dtype=complex)

KET_P1 = np.array([1, 0, 0], dtype=complex)
KET_0 = np.array([0, 1, 0], dtype=complex)
KET_M1 = np.array([0, 0, 1], dtype=complex)
KET_ANTI = (KET_P1 - KET_M1) / np.sqrt(2)
KET_SYM = (KET_P1 + KET_M1) / np.sqrt(2)

# relative overlap tie that makes labeling ambiguous
DEGENERACY_TOL = 1e-9
# largest angular step used when walking a label path away from 90 deg
_PATH_STEP_DEG = 0.5
_MAX_BISECT = 12  # 0.5 deg / 2^12 ~ 1e-4 deg


@dataclass(frozen=True)
class PhysicalConstants:
    """Spin Hamiltonian parameters of the 15N-NV ground state.

    The hyperfine tensor is diagonal with ``A_xx = A_yy``. In the shorthand
    ``A_par I_x <S_x> + A_perp I_z <S_z>`` the transverse component pairs with
    ``I_x`` (3.65 MHz) and the axial one with ``I_z`` (3.03 MHz); the code
    always uses the explicit tensor.
    """

    D_gs: float = 2870.0  # MHz
    gamma_B: float = 2.8  # MHz/G
    gamma_N: float = 0.4316  # kHz/G
    A_xx: float = 3.65  # MHz
    A_zz: float = 3.03  # MHz

    def __post_init__(self):
        for name in ("D_gs", "gamma_B", "gamma_N", "A_xx", "A_zz"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be non-negative, got {value!r}")

    @property
    def A_yy(self) -> float:
        return self.A_xx

    @property
    def hyperfine_diag(self) -> np.ndarray:
        """(A_xx, A_yy, A_zz) in MHz."""
        return np.array([self.A_xx, self.A_xx, self.A_zz])

    @property
    def gamma_N_mhz(self) -> float:
        return self.gamma_N * 1e-3


@dataclass(frozen=True)
class FieldConfig:
    """Bias field of ``magnitude`` gauss at ``theta_B`` degrees from z, in XZ."""

    magnitude: float
    theta_B: float

    def __post_init__(self):
        if not self.magnitude >= 0:
            raise ValueError(f"field magnitude must be >= 0, got {self.magnitude!r}")
        if not 0.0 <= self.theta_B <= 180.0:
            raise ValueError(f"theta_B must lie in [0, 180] deg, got {self.theta_B!r}")

    @property
    def delta_theta(self) -> float:
        return self.theta_B - 90.0

    @property
    def vector(self) -> np.ndarray:
        """(B_x, B_y, B_z) in gauss; B_y is always zero."""
        th = np.deg2rad(self.theta_B)
        if self.theta_B == 90.0:
            # cos(pi/2) is 6e-17 in floating point; keep B_z exactly zero
            return np.array([self.magnitude, 0.0, 0.0])
        return self.magnitude * np.array([np.sin(th), 0.0, np.cos(th)])

    @property
    def bx(self) -> float:
        return float(self.vector[0])

    @property
    def bz(self) -> float:
        return float(self.vector[2])

    def at(self, theta_B: float) -> "FieldConfig":
        return FieldConfig(self.magnitude, theta_B)


def build_electron_hamiltonian(c: PhysicalConstants, f: FieldConfig) -> np.ndarray:
    """3x3 electron Hamiltonian in rad/us."""
    b = f.vector
    h = c.D_gs * SZ @ SZ + c.gamma_B * (b[0] * SX + b[2] * SZ)
    return TWO_PI * h


def build_full_hamiltonian(c: PhysicalConstants, f: FieldConfig) -> np.ndarray:
    """6x6 electron-nuclear Hamiltonian in rad/us, electron (x) nucleus order."""
    b = f.vector
    h = kron(build_electron_hamiltonian(c, f), ID2)
    for a_ii, s_op, i_op in zip(c.hyperfine_diag, S_OPS, I_OPS):
        h = h + TWO_PI * a_ii * kron(s_op, i_op)
    nuc = c.gamma_N_mhz * (b[0] * IX + b[2] * IZ)
    return h + TWO_PI * kron(ID3, nuc)


def spin_expectations(states: np.ndarray) -> np.ndarray:
    """<S_x>, <S_y>, <S_z> for each column of ``states``; shape (n_states, 3)."""
    states = np.asarray(states, dtype=complex)
    out = np.empty((states.shape[1], 3))
    for i, op in enumerate(S_OPS):
        out[:, i] = np.einsum("ik,ij,jk->k", states.conj(), op, states).real
    return out


@dataclass(frozen=True)
class EigenSystem:
    """Electron eigenstates in label order (zero, minus, plus).

    ``energies`` are in MHz, ``states`` holds one 3-vector per column and
    ``expectations[k]`` is ``<S>`` of the k-th labeled state.
    ``hybridization_eps`` is the admixture of (|+1>+|-1>)/sqrt(2) into |0>
    relative to its |m_S=0> amplitude.
    """

    theta_B: float
    magnitude: float
    energies: np.ndarray
    states: np.ndarray
    expectations: np.ndarray
    hybridization_eps: float
    labels: tuple = field(default=LABELS)

    def index(self, label: str) -> int:
        try:
            return LABELS.index(label)
        except ValueError:
            raise KeyError(f"unknown electron label {label!r}; use one of {LABELS}") from None

    def energy(self, label: str) -> float:
        return float(self.energies[self.index(label)])

    def state(self, label: str) -> np.ndarray:
        return self.states[:, self.index(label)]

    def expectation(self, label: str) -> np.ndarray:
        return self.expectations[self.index(label)]


def _diagonalize(c, f):
    dec = eigh(build_electron_hamiltonian(c, f))
    return dec.eigenvalues / TWO_PI, dec.eigenvectors


def _analytic_order(vecs) -> list[int]:
    """Column indices for (zero, minus, plus) from overlaps with the 90 deg basis."""
    w0 = np.abs(KET_0.conj() @ vecs) ** 2
    order = np.argsort(-w0, kind="stable")
    if w0[order[0]] - w0[order[1]] <= DEGENERACY_TOL * max(w0[order[0]], 1e-300):
        raise DegenerateLabelError("cannot identify |0>: two states share the |m_S=0> weight")
    zero = int(order[0])
    rest = [int(k) for k in order[1:]]
    wa = np.abs(KET_ANTI.conj() @ vecs[:, rest]) ** 2
    if abs(wa[0] - wa[1]) <= DEGENERACY_TOL * max(wa.max(), 1e-300):
        raise DegenerateLabelError(
            "cannot separate |-> from |+>: equal overlap with (|+1>-|-1>)/sqrt(2)"
        )
    minus = rest[int(np.argmax(wa))]
    plus = rest[int(np.argmin(wa))]
    return [zero, minus, plus]


def _match(prev_states, vecs) -> tuple[list[int], float]:
    """Assign columns of ``vecs`` to labels by maximal overlap with ``prev_states``.

    Returns the column order and the smallest same-label overlap.
    """
    ov = np.abs(prev_states.conj().T @ vecs)
    order = [int(np.argmax(ov[k])) for k in range(3)]
    if len(set(order)) != 3:
        # overlap maxima collide: fall back to the best full assignment
        best, best_score = None, -1.0
        for perm in ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
            score = min(ov[k, perm[k]] for k in range(3))
            if score > best_score:
                best, best_score = list(perm), score
        order = best
    return order, float(min(ov[k, order[k]] for k in range(3)))


def _track(c, magnitude, prev_states, theta_prev, theta_new, depth=0):
    energies, vecs = _diagonalize(c, FieldConfig(magnitude, theta_new))
    order, worst = _match(prev_states, vecs)
    if worst < 0.9 and depth < _MAX_BISECT:
        mid = 0.5 * (theta_prev + theta_new)
        _, mid_states = _track(c, magnitude, prev_states, theta_prev, mid, depth + 1)
        return _track(c, magnitude, mid_states, mid, theta_new, depth + 1)
    if worst <= 0.5:
        raise ContinuityError(theta_prev, theta_new, worst)
    return energies[order], vecs[:, order]


@lru_cache(maxsize=4096)
def _anchor(c, magnitude, k):
    """Labeled eigensystem at 90 + k * _PATH_STEP_DEG, tracked from 90 deg.

    Anchors sit on a fixed grid and are cached, so labeling a new angle only
    costs the last leg of the path.
    """
    theta = 90.0 + k * _PATH_STEP_DEG
    if k == 0:
        energies, vecs = _diagonalize(c, FieldConfig(magnitude, 90.0))
        order = _analytic_order(vecs)
        return energies[order], vecs[:, order]
    step = 1 if k > 0 else -1
    _, prev = _anchor(c, magnitude, k - step)
    return _track(c, magnitude, prev, theta - step * _PATH_STEP_DEG, theta)


def _labeled_at(c, f):
    k = int(np.trunc(f.delta_theta / _PATH_STEP_DEG))
    energies, vecs = _anchor(c, f.magnitude, k)
    theta_k = 90.0 + k * _PATH_STEP_DEG
    if f.theta_B == theta_k:
        return energies.copy(), vecs.copy()
    # walk from the last anchor so the labels stay on the same physical branch
    return _track(c, f.magnitude, vecs, theta_k, f.theta_B)


def _make_system(f, energies, vecs) -> EigenSystem:
    vecs = np.array(vecs)
    zero = vecs[:, 0]
    den = KET_0.conj() @ zero
    eps = (KET_SYM.conj() @ zero) / den if abs(den) > 1e-300 else np.nan
    return EigenSystem(
        theta_B=f.theta_B,
        magnitude=f.magnitude,
        energies=np.array(energies, dtype=float),
        states=vecs,
        expectations=spin_expectations(vecs),
        hybridization_eps=float(eps.real),
    )


def solve_electron(c: PhysicalConstants, f: FieldConfig) -> EigenSystem:
    """Diagonalize the electron Hamiltonian and label the eigenstates.

    At 90 deg, |0> has the largest |m_S=0> weight and |-> the largest overlap
    with (|+1>-|-1>)/sqrt(2). Elsewhere the labels are carried by eigenvector
    continuity along a path of field angles starting at 90 deg, because energy
    ordering alone does not follow the physical branches.
    """
    energies, vecs = _labeled_at(c, f)
    return _make_system(f, energies, vecs)


def sweep_eigensystem(c: PhysicalConstants, thetas, magnitude: float) -> list[EigenSystem]:
    """Labeled eigensystems along a strictly monotone angle sweep.

    The first point is labeled as in :func:`solve_electron`; every later point
    inherits labels from its predecessor by maximal eigenvector overlap.
    """
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim != 1 or thetas.size == 0:
        raise ValueError("thetas must be a non-empty 1-D array")
    steps = np.diff(thetas)
    if thetas.size > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
        raise ValueError("thetas must be strictly monotone")

    raw = [_diagonalize(c, FieldConfig(magnitude, th)) for th in thetas]

    first = solve_electron(c, FieldConfig(magnitude, thetas[0]))
    out = [first]
    prev = first.states
    for i in range(1, thetas.size):
        energies, vecs = raw[i]
        order, worst = _match(prev, vecs)
        if worst <= 0.5:
            raise ContinuityError(thetas[i - 1], thetas[i], worst)
        prev = vecs[:, order]
        out.append(_make_system(FieldConfig(magnitude, thetas[i]), energies[order], prev))
    return out

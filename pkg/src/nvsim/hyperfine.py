"""Nuclear sublevels conditioned on the electron state.

For each electron eigenstate the 15N spin sees an effective field
``h = A . <S> + gamma_N B`` and the conditional Hamiltonian is ``h . I``.
Its splitting is ``|h|`` and its quantization axis is ``h/|h|``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .hamiltonian import (
    ID2,
    LABELS,
    SX,
    TWO_PI,
    EigenSystem,
    FieldConfig,
    PhysicalConstants,
    build_full_hamiltonian,
    solve_electron,
)
from .spin import eigh, kron

FD_STEP_DEG = 1e-3


class UnreliableDerivativeWarning(UserWarning):
    """The finite-difference slope was taken inside the omega_- minimum cusp."""


@dataclass(frozen=True)
class NuclearLevels:
    electron_label: str
    effective_field: np.ndarray  # rad/us
    splitting_omega: float  # rad/us
    axis_unit: np.ndarray
    theta_I: float  # deg, atan2(<I_z>, <I_x>) of the upper sublevel

    @property
    def splitting_mhz(self) -> float:
        return self.splitting_omega / TWO_PI


def nuclear_hamiltonian(
    c: PhysicalConstants, f: FieldConfig, e: EigenSystem | None, label: str
) -> NuclearLevels:
    """Effective-field nuclear levels for electron state ``label``.

    ``e`` must come from the same constants and field; pass ``None`` to solve
    the electron problem here.
    """
    if e is None:
        e = solve_electron(c, f)
    s = e.expectation(label)
    h = TWO_PI * (c.hyperfine_diag * s + c.gamma_N_mhz * f.vector)
    h_2x2 = 0.5 * np.array([[h[2], h[0] - 1j * h[1]], [h[0] + 1j * h[1], -h[2]]])
    w = np.linalg.eigvalsh(h_2x2)
    omega = float(w[1] - w[0])
    norm = float(np.linalg.norm(h))
    axis = h / norm if norm > 0 else np.array([1.0, 0.0, 0.0])
    theta_i = float(np.degrees(np.arctan2(axis[2], axis[0])))
    if theta_i <= -180.0:
        theta_i += 360.0
    return NuclearLevels(label, h, omega, axis, theta_i)


def all_nuclear_levels(c: PhysicalConstants, f: FieldConfig) -> dict[str, NuclearLevels]:
    e = solve_electron(c, f)
    return {lab: nuclear_hamiltonian(c, f, e, lab) for lab in LABELS}


def omega_minus(c: PhysicalConstants, magnitude: float, theta_B: float) -> float:
    f = FieldConfig(magnitude, theta_B)
    return nuclear_hamiltonian(c, f, None, "minus").splitting_omega


def gamma_theta(
    c: PhysicalConstants, magnitude: float, theta_B: float, label: str = "minus"
) -> float:
    """Slope d(omega)/d(theta_B) in rad/us per degree (default: omega_-).

    Central differences at 1e-3 and 2e-3 deg combined by Richardson
    extrapolation. Inside the narrow cusp around the omega_- minimum the two
    estimates disagree; the value is still returned but an
    :class:`UnreliableDerivativeWarning` is emitted.
    """
    h = FD_STEP_DEG
    if not 2 * h <= theta_B <= 180.0 - 2 * h:
        raise ValueError(f"theta_B={theta_B} too close to the [0, 180] deg boundary")

    def omega(th):
        f = FieldConfig(magnitude, th)
        return nuclear_hamiltonian(c, f, None, label).splitting_omega

    d1 = (omega(theta_B + h) - omega(theta_B - h)) / (2 * h)
    d2 = (omega(theta_B + 2 * h) - omega(theta_B - 2 * h)) / (4 * h)
    slope = (4 * d1 - d2) / 3
    if slope == 0.0 or abs(d1 - d2) > 1e-3 * abs(slope):
        warnings.warn(
            f"d omega/d theta at theta_B={theta_B} deg, |B|={magnitude} G lies in the "
            "minimum cusp; finite-difference slope is unreliable",
            UnreliableDerivativeWarning,
            stacklevel=2,
        )
    return float(slope)


@dataclass(frozen=True)
class Sublevels:
    """Eigenstates of the full 6x6 Hamiltonian grouped by electron label.

    ``vectors[label]`` has two columns ordered by ascending energy (MHz).
    """

    energies: dict
    vectors: dict

    def splitting_mhz(self, label: str) -> float:
        lo, hi = self.energies[label]
        return float(hi - lo)

    def state(self, label: str, nuclear_index: int) -> np.ndarray:
        return self.vectors[label][:, nuclear_index]


def exact_sublevels(c: PhysicalConstants, f: FieldConfig, e: EigenSystem | None = None) -> Sublevels:
    """Diagonalize the 6x6 Hamiltonian and group eigenstates by electron weight."""
    if e is None:
        e = solve_electron(c, f)
    dec = eigh(build_full_hamiltonian(c, f))
    weights = np.empty((3, 6))
    for k, lab in enumerate(LABELS):
        proj = kron(np.outer(e.state(lab), e.state(lab).conj()), ID2)
        weights[k] = np.einsum("ij,ik,kj->j", dec.eigenvectors.conj(), proj, dec.eigenvectors).real
    owner = np.argmax(weights, axis=0)
    energies, vectors = {}, {}
    for k, lab in enumerate(LABELS):
        cols = np.flatnonzero(owner == k)
        if cols.size != 2:
            raise ValueError(
                f"could not assign two sublevels to electron state {lab!r} "
                f"at theta_B={f.theta_B} deg"
            )
        energies[lab] = dec.eigenvalues[cols] / TWO_PI
        vectors[lab] = dec.eigenvectors[:, cols]
    return Sublevels(energies, vectors)


def transition_efficiency(
    c: PhysicalConstants,
    f: FieldConfig,
    initial: tuple[str, int],
    final: tuple[str, int],
    drive: np.ndarray | None = None,
) -> float:
    """Relative driving strength ``|<f|H'|i>|^2`` between two sublevels.

    Sublevels are ``(electron_label, nuclear_index)`` with nuclear index 0 the
    lower of the pair. ``drive`` is a 3x3 electron operator, default ``S_x``;
    it acts as ``drive (x) 1`` because the microwave field couples to the
    electron far more strongly than to the nucleus.
    """
    if tuple(initial) == tuple(final):
        raise ValueError("initial and final sublevels must differ")
    op = kron(SX if drive is None else drive, ID2)
    sub = exact_sublevels(c, f)
    vi = sub.state(*initial)
    vf = sub.state(*final)
    return float(abs(vf.conj() @ op @ vi) ** 2)

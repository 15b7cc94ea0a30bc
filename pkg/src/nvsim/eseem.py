"""Spin-echo envelope modulation from the 15N nuclear spin.

Two routes to the echo amplitude ``P(theta_B, tau)``:

* ``closed_form``: from the conditional nuclear splittings and axes,
  ``P = 1 - |n0 x ne|^2 sin^2(w0 tau/4) sin^2(we tau/4)``.
* ``unitary_exact``: the pi/2 - tau/2 - pi - tau/2 sequence propagated on the
  full 6-level Hamiltonian with an unpolarized nucleus.

Amplitudes are normalized populations in [0, 1], not fluorescence contrast.
The pi pulse is instantaneous and ideal; real ~50 ns pulses are not modeled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import (
    ID2,
    FieldConfig,
    PhysicalConstants,
    build_full_hamiltonian,
    solve_electron,
)
from .hyperfine import nuclear_hamiltonian
from .spin import eigh, kron

TRANSITIONS = {"minus_zero": "minus", "plus_zero": "plus"}
MODEL_TAGS = ("closed_form", "unitary_exact", "lindblad")


def partner_label(transition: str) -> str:
    try:
        return TRANSITIONS[transition]
    except KeyError:
        raise ValueError(
            f"unknown transition {transition!r}; expected one of {sorted(TRANSITIONS)}"
        ) from None


@dataclass(frozen=True)
class EchoGrid:
    """Echo amplitude table, rows indexed by theta (deg), columns by tau (us)."""

    thetas: np.ndarray
    taus: np.ndarray
    values: np.ndarray
    model_tag: str
    transition: str = "minus_zero"
    magnitude: float = float("nan")
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (len(self.thetas), len(self.taus)):
            raise ValueError(
                f"values shape {self.values.shape} does not match axes "
                f"({len(self.thetas)}, {len(self.taus)})"
            )
        if self.model_tag not in MODEL_TAGS:
            raise ValueError(f"unknown model tag {self.model_tag!r}")


def modulation_depth(c: PhysicalConstants, f: FieldConfig, transition: str) -> float:
    """``|n0 x ne|^2`` for the two conditional nuclear axes."""
    e = solve_electron(c, f)
    n0 = nuclear_hamiltonian(c, f, e, "zero").axis_unit
    ne = nuclear_hamiltonian(c, f, e, partner_label(transition)).axis_unit
    return float(np.sum(np.cross(n0, ne) ** 2))


def _closed_form_params(c, f, transition):
    e = solve_electron(c, f)
    lz = nuclear_hamiltonian(c, f, e, "zero")
    le = nuclear_hamiltonian(c, f, e, partner_label(transition))
    depth = float(np.sum(np.cross(lz.axis_unit, le.axis_unit) ** 2))
    return depth, lz.splitting_omega, le.splitting_omega


def echo_closed_form(c: PhysicalConstants, f: FieldConfig, transition: str, tau) -> np.ndarray | float:
    """Closed-form echo amplitude; ``tau`` (us) may be a scalar or an array."""
    depth, w0, we = _closed_form_params(c, f, transition)
    tau = np.asarray(tau, dtype=float)
    p = 1.0 - depth * np.sin(w0 * tau / 4) ** 2 * np.sin(we * tau / 4) ** 2
    return float(p) if p.ndim == 0 else p


def echo_operators(c: PhysicalConstants, f: FieldConfig, transition: str):
    """Initial state, pi pulse and readout projector for an echo on ``transition``.

    Returns ``(rho0, r_pi, proj)``, all 6x6. The pi pulse swaps |0> and the
    partner state and leaves the third electron state alone, each tensored
    with the nuclear identity.
    """
    e = solve_electron(c, f)
    label = partner_label(transition)
    k0 = e.state("zero")
    ke = e.state(label)
    other = next(lab for lab in ("minus", "plus") if lab != label)
    ko = e.state(other)
    psi = (k0 + ke) / np.sqrt(2)
    rho_e = np.outer(psi, psi.conj())
    rho0 = kron(rho_e, ID2 / 2)
    swap = np.outer(k0, ke.conj()) + np.outer(ke, k0.conj()) + np.outer(ko, ko.conj())
    r_pi = kron(swap, ID2)
    proj = kron(rho_e, ID2)
    return rho0, r_pi, proj


def echo_unitary_exact(c: PhysicalConstants, f: FieldConfig, transition: str, tau) -> np.ndarray | float:
    """Echo amplitude from exact 6-level propagation.

    The refocusing pulse cancels the deterministic electron phase
    ``exp(-i E_e0 tau)`` between the two halves, so projecting onto the
    initial electron superposition gives a real amplitude directly.
    """
    rho0, r_pi, proj = echo_operators(c, f, transition)
    dec = eigh(build_full_hamiltonian(c, f))
    v, w = dec.eigenvectors, dec.eigenvalues
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    # half-step propagators for every tau at once: (n, 6, 6)
    phases = np.exp(-1j * np.outer(tau_arr / 2, w))
    u_half = np.einsum("ij,nj,kj->nik", v, phases, v.conj())
    u = u_half @ r_pi @ u_half
    rho = u @ rho0 @ np.conj(np.transpose(u, (0, 2, 1)))
    p = np.einsum("ij,nji->n", proj, rho).real
    return float(p[0]) if np.ndim(tau) == 0 else p


def echo_grid(
    c: PhysicalConstants,
    magnitude: float,
    thetas,
    taus,
    transition: str = "minus_zero",
    model_tag: str = "closed_form",
    **model_options,
) -> EchoGrid:
    """Evaluate the chosen echo model on a theta x tau grid.

    ``model_options`` is forwarded to the Lindblad model (``collapse_mode``
    and integrator options); the other models take none.
    """
    thetas = np.asarray(thetas, dtype=float)
    taus = np.asarray(taus, dtype=float)
    for name, axis in (("thetas", thetas), ("taus", taus)):
        if axis.ndim != 1:
            raise ValueError(f"{name} must be 1-D")
        if axis.size > 1 and not (np.all(np.diff(axis) > 0) or np.all(np.diff(axis) < 0)):
            raise ValueError(f"{name} must be monotone")
    partner_label(transition)
    values = np.empty((thetas.size, taus.size))
    if model_tag == "lindblad":
        from .lindblad import echo_lindblad_curve

        for i, th in enumerate(thetas):
            values[i] = echo_lindblad_curve(c, FieldConfig(magnitude, th), transition, taus, **model_options)
    else:
        if model_options:
            raise TypeError(f"model {model_tag!r} takes no options, got {sorted(model_options)}")
        if model_tag == "closed_form":
            fn = echo_closed_form
        elif model_tag == "unitary_exact":
            fn = echo_unitary_exact
        else:
            raise ValueError(f"unknown model tag {model_tag!r}")
        for i, th in enumerate(thetas):
            values[i] = fn(c, FieldConfig(magnitude, th), transition, taus)
    return EchoGrid(thetas, taus, values, model_tag, transition, float(magnitude), dict(model_options))

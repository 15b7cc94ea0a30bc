"""Lindblad master-equation spin echo with classical magnetic-noise dephasing.

The 6-level electron-nuclear density matrix evolves under

    d rho/dt = -i[H, rho] + sum_k (L_k rho L_k^+ - 1/2 {L_k^+ L_k, rho})

with time-independent collapse operators ``L_k = sqrt(Gamma) S_n (x) 1``
built from lab-frame electron spin projections. White (Markovian) noise is
assumed, so decay shapes are not meant to match experiments where the noise
has a finite correlation time.

By default the collapse operators are reduced to their secular part, the
blocks diagonal in the electron eigenstates. That keeps pure dephasing,
whose rate is set by ``<S_n>_e - <S_n>_0``, and drops the GHz-detuned
population transfer that a literal white-noise operator would drive between
|0> and |+->. Pass ``secular=False`` for the literal operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import IntegrationError, InvariantViolation
from .hamiltonian import ID2, SX, SZ, FieldConfig, PhysicalConstants, build_full_hamiltonian, solve_electron
from .spin import kron

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-9
ABORT_TOL = 1e-6
EXPM_SEGMENT_US = 0.5


@dataclass(frozen=True)
class DensityMatrix:
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("density matrix must be square")
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > HERMITIAN_TOL:
            raise InvariantViolation(f"density matrix not Hermitian (deviation {herm:.2e})")
        tr = np.trace(rho).real
        if abs(tr - 1) > TRACE_TOL:
            raise InvariantViolation(f"density matrix trace {tr!r} != 1")
        lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
        if lam < -POSITIVITY_TOL:
            raise InvariantViolation(f"density matrix has negative eigenvalue {lam:.2e}")
        object.__setattr__(self, "rho", rho)


@dataclass(frozen=True)
class CollapseSpec:
    """Collapse operators ``sqrt(rate_k) * operators[k]``; rates in 1/us."""

    operators: tuple = ()
    rates_Gamma: tuple = ()

    def __post_init__(self):
        ops = tuple(np.asarray(o, dtype=complex) for o in self.operators)
        rates = tuple(float(r) for r in self.rates_Gamma)
        if len(ops) != len(rates):
            raise ValueError("need one rate per collapse operator")
        if any(r < 0 for r in rates):
            raise ValueError("collapse rates must be non-negative")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "rates_Gamma", rates)

    def scaled(self) -> list[np.ndarray]:
        return [np.sqrt(r) * op for r, op in zip(self.rates_Gamma, self.operators)]


@dataclass(frozen=True)
class CollapseMode:
    """Noise model for the echo.

    ``kind`` is ``"line_noise"`` (noise along a line at ``angle`` degrees from
    +x toward +z), ``"isotropic"`` (independent x and z noise) or ``"none"``.
    """

    kind: str
    gamma: float = 0.0
    angle: float = -45.0

    def __post_init__(self):
        if self.kind not in ("line_noise", "isotropic", "none"):
            raise ValueError(f"unknown collapse mode {self.kind!r}")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")

    def electron_operators(self) -> list[np.ndarray]:
        """Unit-rate 3x3 electron operators for this noise model."""
        if self.kind == "line_noise":
            a = np.deg2rad(self.angle)
            return [np.cos(a) * SX + np.sin(a) * SZ]
        if self.kind == "isotropic":
            return [SX, SZ]
        return []


def line_noise(angle: float, gamma: float) -> CollapseMode:
    return CollapseMode("line_noise", gamma, angle)


def isotropic(gamma: float) -> CollapseMode:
    return CollapseMode("isotropic", gamma)


@dataclass
class IntegrationStats:
    """Invariant bookkeeping over all accepted steps of one or more runs."""

    steps: int = 0
    rejected: int = 0
    max_trace_error: float = 0.0
    max_hermiticity_error: float = 0.0
    min_eigenvalue: float = np.inf

    def record(self, rho: np.ndarray):
        tr_err = abs(np.trace(rho).real - 1)
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        lam = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
        if tr_err > ABORT_TOL or herm > ABORT_TOL or lam < -ABORT_TOL:
            raise InvariantViolation(
                f"density matrix drifted: trace error {tr_err:.2e}, "
                f"Hermiticity {herm:.2e}, min eigenvalue {lam:.2e}"
            )
        self.steps += 1
        self.max_trace_error = max(self.max_trace_error, tr_err)
        self.max_hermiticity_error = max(self.max_hermiticity_error, herm)
        self.min_eigenvalue = min(self.min_eigenvalue, lam)


def liouvillian(h: np.ndarray, ops) -> np.ndarray:
    """Superoperator acting on row-major ``rho.reshape(-1)``."""
    n = h.shape[0]
    eye = np.eye(n)
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op in ops:
        cdc = op.conj().T @ op
        sup += np.kron(op, op.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T)
    return sup


def lindblad_rhs(h: np.ndarray, ops):
    ops = [np.asarray(o) for o in ops]
    ops_dag = [o.conj().T for o in ops]
    cdc = sum((od @ o for o, od in zip(ops, ops_dag)), np.zeros_like(h))

    def rhs(rho):
        out = -1j * (h @ rho - rho @ h)
        for o, od in zip(ops, ops_dag):
            out += o @ rho @ od
        return out - 0.5 * (cdc @ rho + rho @ cdc)

    return rhs


def _clean(rho):
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def _dopri5(rhs, rho, t_end, rtol, atol, stats, max_steps=10_000_000):
    """Adaptive Dormand-Prince integration with projection after each accepted step."""
    t = 0.0
    scale0 = atol + rtol * np.max(np.abs(rho))
    k1 = rhs(rho)
    h = min(t_end, 0.01 * scale0 / max(np.max(np.abs(k1)), 1e-300)) if t_end > 0 else 0.0
    h = max(h, 1e-12 * max(t_end, 1.0))
    n = 0
    while t < t_end:
        if n >= max_steps:
            raise IntegrationError("maximum number of Lindblad steps exceeded")
        h = min(h, t_end - t)
        ks = [k1]
        for i in range(1, 7):
            y = rho + h * sum(a * k for a, k in zip(_A[i], ks))
            ks.append(rhs(y))
        y5 = rho + h * sum(b * k for b, k in zip(_B5, ks))
        err = h * sum((b5 - b4) * k for b5, b4, k in zip(_B5, _B4, ks))
        scale = atol + rtol * np.maximum(np.abs(rho), np.abs(y5))
        err_norm = float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))
        if err_norm <= 1.0:
            t += h
            rho = _clean(y5)
            stats.record(rho)
            k1 = rhs(rho)
            n += 1
        else:
            stats.rejected += 1
        factor = 0.9 * err_norm ** (-0.2) if err_norm > 0 else 5.0
        h *= min(5.0, max(0.2, factor))
        if h < 1e-14 * max(t_end, 1.0) and t < t_end:
            raise IntegrationError(f"step size underflow at t={t:g} us")
    return rho


def _expm_steps(sup, rho, t_end, stats, segment=EXPM_SEGMENT_US):
    n_seg = max(1, int(np.ceil(t_end / segment)))
    dt = t_end / n_seg
    step = expm(sup * dt)
    dim = rho.shape[0]
    for _ in range(n_seg):
        rho = _clean((step @ rho.reshape(-1)).reshape(dim, dim))
        stats.record(rho)
    return rho


def evolve_lindblad(
    rho0: DensityMatrix,
    h: np.ndarray,
    collapse: CollapseSpec,
    t: float,
    method: str = "dopri5",
    rtol: float = 1e-8,
    atol: float = 1e-10,
    stats: IntegrationStats | None = None,
) -> DensityMatrix:
    """Propagate ``rho0`` for ``t`` microseconds.

    ``method="dopri5"`` is adaptive embedded Runge-Kutta with the state
    re-Hermitized and renormalized after every accepted step. It needs steps
    shorter than the inverse level spacing, which for the full NV Hamiltonian
    (GHz zero-field splitting) means ~10^5 steps per microsecond.
    ``method="expm"`` applies the exact exponential of the constant
    Liouvillian over 0.5 us segments, with the same per-segment clean-up and
    checks; it is the practical choice for the NV problem.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    stats = stats if stats is not None else IntegrationStats()
    h = np.asarray(h, dtype=complex)
    ops = collapse.scaled()
    rho = np.array(rho0.rho)
    if t == 0:
        return DensityMatrix(rho)
    if method == "dopri5":
        rho = _dopri5(lindblad_rhs(h, ops), rho, t, rtol, atol, stats)
    elif method == "expm":
        rho = _expm_steps(liouvillian(h, ops), rho, t, stats)
    else:
        raise ValueError(f"unknown method {method!r}")
    return DensityMatrix(rho)


def echo_collapse_spec(c: PhysicalConstants, f: FieldConfig, mode: CollapseMode, secular: bool = True) -> CollapseSpec:
    """6x6 collapse operators for ``mode`` at field ``f``."""
    ops = [kron(op, ID2) for op in mode.electron_operators()]
    if secular and ops:
        e = solve_electron(c, f)
        projs = [kron(np.outer(e.states[:, k], e.states[:, k].conj()), ID2) for k in range(3)]
        ops = [sum(p @ op @ p for p in projs) for op in ops]
    return CollapseSpec(tuple(ops), tuple(mode.gamma for _ in ops))


def _as_mode(collapse_mode) -> CollapseMode:
    if isinstance(collapse_mode, CollapseMode):
        return collapse_mode
    if isinstance(collapse_mode, dict):
        return CollapseMode(**collapse_mode)
    raise TypeError(f"cannot interpret collapse mode {collapse_mode!r}")


def echo_lindblad_curve(
    c: PhysicalConstants,
    f: FieldConfig,
    transition: str,
    taus,
    collapse_mode,
    secular: bool = True,
    stats: IntegrationStats | None = None,
) -> np.ndarray:
    """Echo amplitude for each tau: evolve tau/2, ideal pi swap, evolve tau/2.

    The amplitude is the overlap with the initial electron superposition,
    normalized like the other echo models: 1 for full coherence and 1/2 when
    the coherence has fully decayed.
    """
    from .eseem import echo_operators

    mode = _as_mode(collapse_mode)
    stats = stats if stats is not None else IntegrationStats()
    rho0, r_pi, proj = echo_operators(c, f, transition)
    sup = liouvillian(build_full_hamiltonian(c, f), echo_collapse_spec(c, f, mode, secular).scaled())
    out = np.empty(len(np.atleast_1d(taus)))
    for i, tau in enumerate(np.atleast_1d(np.asarray(taus, dtype=float))):
        if tau < 0:
            raise ValueError("tau must be non-negative")
        if tau == 0:
            out[i] = np.trace(proj @ rho0).real
            continue
        rho = _expm_steps(sup, rho0, tau / 2, stats)
        rho = r_pi @ rho @ r_pi.conj().T
        rho = _expm_steps(sup, rho, tau / 2, stats)
        out[i] = np.trace(proj @ rho).real
    return out


def echo_lindblad(c: PhysicalConstants, f: FieldConfig, transition: str, tau: float, collapse_mode,
                  secular: bool = True) -> float:
    return float(echo_lindblad_curve(c, f, transition, [tau], collapse_mode, secular)[0])


def echo_lindblad_grid(c: PhysicalConstants, magnitude: float, thetas, taus, transition: str, collapse_mode,
                       secular: bool = True):
    from .eseem import echo_grid

    return echo_grid(c, magnitude, thetas, taus, transition, "lindblad",
                     collapse_mode=_as_mode(collapse_mode), secular=secular)


@dataclass(frozen=True)
class Ridge:
    theta: float
    decay_rates: np.ndarray = field(repr=False)


def coherence_ridge(noisy, clean, min_contrast: float = 0.2) -> Ridge:
    """Angle of slowest decoherence from a noisy and a noiseless echo grid.

    For each angle the echo contrast ``2P - 1`` is compared with the
    noiseless one and an exponential decay rate is fitted through the origin
    in ``tau``, skipping points near ESEEM nodes. The ridge is the angle with
    the smallest rate.
    """
    c_noisy = 2 * np.asarray(noisy.values) - 1
    c_clean = 2 * np.asarray(clean.values) - 1
    taus = np.asarray(noisy.taus)
    rates = np.empty(len(noisy.thetas))
    for i in range(len(noisy.thetas)):
        ok = (np.abs(c_clean[i]) > min_contrast) & (taus > 0)
        ratio = np.clip(c_noisy[i, ok] / c_clean[i, ok], 1e-12, None)
        w = c_clean[i, ok] ** 2
        t = taus[ok]
        rates[i] = -np.sum(w * t * np.log(ratio)) / np.sum(w * t * t) if t.size else np.nan
    return Ridge(float(noisy.thetas[int(np.nanargmin(rates))]), rates)

"""Angle sensitivity of nuclear-assisted echo sensing and of conventional
Zeeman magnetometry.

Both methods share the shot-noise form

    eta = prefactor / (g_eff * C) * sqrt(1/(F T_r tau) * (t_ini + tau)/tau)

with ``prefactor = 4`` and ``g_eff = d omega_-/d theta`` for the nuclear
method, and ``prefactor = 2/pi`` and ``g_eff = gamma_Bz |B| sin(theta)`` for
the conventional one. Decoherence is not included, so the optimum over tau
keeps improving with longer tau; real optima saturate near T2.

Ensemble scaling: N independent NVs improve eta by sqrt(N).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import SensitivityLostError
from .hamiltonian import FieldConfig, PhysicalConstants, solve_electron
from .hyperfine import UnreliableDerivativeWarning, gamma_theta, nuclear_hamiltonian

GAUSS_TO_NT = 1e5
SINE_FLOOR = 1e-6
NUCLEAR_PREFACTOR = 4.0
CONVENTIONAL_PREFACTOR = 2.0 / np.pi


@dataclass(frozen=True)
class ReadoutParams:
    """Optical readout settings: F in kcps, T_r in ns, t_ini in us."""

    fluorescence_F: float = 100.0
    contrast_C: float = 0.3
    readout_Tr: float = 300.0
    init_tini: float = 2.0

    def __post_init__(self):
        for name in ("fluorescence_F", "contrast_C", "readout_Tr", "init_tini"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.contrast_C > 1:
            raise ValueError("contrast_C must be <= 1")


@dataclass(frozen=True)
class SensitivityCurve:
    axis_name: str
    axis: np.ndarray
    eta: np.ndarray  # mdeg/sqrt(Hz)
    eta_star: np.ndarray  # mdeg/sqrt(Hz)
    method_tag: str
    metadata: dict = field(default_factory=dict)


def shot_noise_factor(r: ReadoutParams, tau_us) -> np.ndarray:
    """``sqrt(1/(F T_r tau) * (t_ini + tau)/tau)`` in 1/sqrt(s)."""
    tau_us = np.asarray(tau_us, dtype=float)
    photons_per_shot = r.fluorescence_F * 1e3 * r.readout_Tr * 1e-9
    tau_s = tau_us * 1e-6
    return np.sqrt(1.0 / (photons_per_shot * tau_s) * (r.init_tini + tau_us) / tau_us)


def sensitivity_kernel(prefactor: float, coupling_per_deg_us, r: ReadoutParams, tau_us) -> np.ndarray:
    """Shared shot-noise sensitivity in mdeg/sqrt(Hz).

    ``coupling_per_deg_us`` is the effective angle coupling in rad/us per
    degree; its sign is irrelevant.
    """
    g = np.abs(np.asarray(coupling_per_deg_us, dtype=float)) * 1e6  # rad/s per deg
    with np.errstate(divide="ignore"):
        eta_deg = prefactor / (g * r.contrast_C) * shot_noise_factor(r, tau_us)
    return eta_deg * 1e3


def _slope(c, f):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnreliableDerivativeWarning)
        return gamma_theta(c, f.magnitude, f.theta_B)


def _splittings(c, f):
    e = solve_electron(c, f)
    w0 = nuclear_hamiltonian(c, f, e, "zero").splitting_omega
    wm = nuclear_hamiltonian(c, f, e, "minus").splitting_omega
    return w0, wm


def sine_factor(w0: float, wm: float, tau_us) -> np.ndarray:
    tau_us = np.asarray(tau_us, dtype=float)
    return np.abs(np.sin(w0 * tau_us / 4) ** 2 * np.sin(wm * tau_us / 2))


def eta_star_nuclear(c: PhysicalConstants, f: FieldConfig, r: ReadoutParams, tau_us) -> np.ndarray | float:
    """Envelope of the nuclear-assisted sensitivity (mdeg/sqrt(Hz))."""
    out = sensitivity_kernel(NUCLEAR_PREFACTOR, _slope(c, f), r, tau_us)
    return float(out) if np.ndim(out) == 0 else out


def eta_nuclear(c: PhysicalConstants, f: FieldConfig, r: ReadoutParams, tau_us: float) -> float:
    """Nuclear-assisted angle sensitivity at one tau, in mdeg/sqrt(Hz).

    Raises :class:`SensitivityLostError` where the echo modulation factor
    ``|sin^2(w0 tau/4) sin(w- tau/2)|`` drops below 1e-6.
    """
    w0, wm = _splittings(c, f)
    s = float(sine_factor(w0, wm, tau_us))
    if s < SINE_FLOOR:
        raise SensitivityLostError(
            f"sensitivity lost at tau={tau_us} us: modulation factor {s:.2e} < {SINE_FLOOR:g}"
        )
    return float(eta_star_nuclear(c, f, r, tau_us)) / s


def eta_nuclear_curve(c: PhysicalConstants, f: FieldConfig, r: ReadoutParams, taus) -> SensitivityCurve:
    """eta and eta* along tau; lost points are reported as +inf."""
    taus = np.asarray(taus, dtype=float)
    w0, wm = _splittings(c, f)
    star = np.atleast_1d(eta_star_nuclear(c, f, r, taus))
    s = sine_factor(w0, wm, taus)
    eta = np.where(s >= SINE_FLOOR, star / np.where(s > 0, s, 1.0), np.inf)
    return SensitivityCurve("tau_us", taus, eta, star, "nuclear_assisted",
                            {"theta_B": f.theta_B, "magnitude": f.magnitude})


def best_eta_over_theta(c: PhysicalConstants, magnitude: float, r: ReadoutParams, tau_us: float, thetas,
                        refine: bool = True):
    """Smallest eta over candidate angles, i.e. the steepest echo slope.

    Returns ``(theta, eta)``; angles where sensitivity is lost are skipped.
    With ``refine`` the best grid point is polished by a bounded scalar
    search between its neighbours.
    """
    thetas = np.asarray(thetas, dtype=float)

    def eta_at(th):
        try:
            return eta_nuclear(c, FieldConfig(magnitude, float(th)), r, tau_us)
        except SensitivityLostError:
            return np.inf

    etas = np.array([eta_at(th) for th in thetas])
    if not np.any(np.isfinite(etas)):
        return float("nan"), np.inf
    i = int(np.argmin(etas))
    best = (float(thetas[i]), float(etas[i]))
    if refine and thetas.size > 2:
        lo, hi = thetas[max(i - 1, 0)], thetas[min(i + 1, thetas.size - 1)]
        res = minimize_scalar(eta_at, bounds=(min(lo, hi), max(lo, hi)), method="bounded",
                              options={"xatol": 1e-5})
        if res.fun < best[1]:
            best = (float(res.x), float(res.fun))
    return best


def bz_coupling_ratio(c: PhysicalConstants, f: FieldConfig, transition: str = "minus_zero") -> float:
    """``gamma_Bz(theta)/gamma_B``: the drop of ``|<S_z>_e - <S_z>_0|`` from 1."""
    e = solve_electron(c, f)
    partner = "minus" if transition == "minus_zero" else "plus"
    return float(abs(e.expectation(partner)[2] - e.expectation("zero")[2]))


def conventional_angle_coupling(c: PhysicalConstants, f: FieldConfig, transition: str = "minus_zero") -> float:
    """``gamma_Bz |B| sin(theta)`` in rad/us per degree."""
    gamma_bz = 2 * np.pi * c.gamma_B * bz_coupling_ratio(c, f, transition)  # rad/us/G
    return gamma_bz * f.magnitude * np.sin(np.deg2rad(f.theta_B)) * np.pi / 180


def eta_conventional(
    c: PhysicalConstants,
    f: FieldConfig,
    r: ReadoutParams | None = None,
    tau_us: float | None = None,
    eta_Bz_parallel: float | None = None,
    transition: str = "minus_zero",
) -> float:
    """Angle sensitivity of conventional Zeeman magnetometry (mdeg/sqrt(Hz)).

    With ``eta_Bz_parallel`` (nT/sqrt(Hz), the field sensitivity under a
    parallel bias) the value is scaled by the loss of ``<S_z>`` coupling and
    divided by ``|B| sin(theta)``. Without it, the field sensitivity follows
    from the shot-noise formula using ``r`` and ``tau_us``.
    """
    if not 0.0 < f.theta_B < 180.0:
        raise ZeroDivisionError("conventional angle sensitivity diverges at theta_B = 0 or 180 deg")
    ratio = bz_coupling_ratio(c, f, transition)
    with np.errstate(divide="ignore"):
        if eta_Bz_parallel is not None:
            eta_bz = eta_Bz_parallel / ratio
            eta_rad = eta_bz / (f.magnitude * GAUSS_TO_NT * np.sin(np.deg2rad(f.theta_B)))
            return float(np.degrees(eta_rad) * 1e3)
        if r is None or tau_us is None:
            raise ValueError("shot-noise mode needs readout parameters and tau")
        g = conventional_angle_coupling(c, f, transition)
        return float(sensitivity_kernel(CONVENTIONAL_PREFACTOR, g, r, tau_us))


def eta_Bz_shot_noise(c: PhysicalConstants, r: ReadoutParams, tau_us: float) -> float:
    """Parallel-field magnetic sensitivity ``2/(pi gamma_B C) sqrt(...)`` in nT/sqrt(Hz)."""
    gamma = 2 * np.pi * c.gamma_B * 1e6 / GAUSS_TO_NT  # rad/s per nT
    return float(CONVENTIONAL_PREFACTOR / (gamma * r.contrast_C) * shot_noise_factor(r, tau_us))


def _golden(fun, a, b, c_, tol):
    res = minimize_scalar(fun, bracket=(a, b, c_), method="golden", tol=tol)
    return float(res.x), float(res.fun)


def optimal_tau(
    c: PhysicalConstants, f: FieldConfig, r: ReadoutParams, tau_max: float, step: float = 0.002
) -> tuple[float, float]:
    """Global minimizer of eta over (0, tau_max]: 2 ns grid plus golden refinement."""
    if not tau_max > 0:
        raise ValueError("tau_max must be positive")
    w0, wm = _splittings(c, f)
    g = _slope(c, f)

    def eta_of(tau):
        tau = np.asarray(tau, dtype=float)
        s = sine_factor(w0, wm, tau)
        star = sensitivity_kernel(NUCLEAR_PREFACTOR, g, r, tau)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(s >= SINE_FLOOR, star / s, np.inf)

    n = max(2, int(np.ceil(tau_max / step)))
    grid = np.linspace(tau_max / n, tau_max, n)
    vals = eta_of(grid)
    i = int(np.argmin(vals))
    if 0 < i < n - 1 and vals[i] < vals[i - 1] and vals[i] < vals[i + 1]:
        tau, eta = _golden(lambda t: float(eta_of(t)), grid[i - 1], grid[i], grid[i + 1], 1e-10)
        if eta <= vals[i] and grid[i - 1] <= tau <= grid[i + 1]:
            return tau, eta
    return float(grid[i]), float(vals[i])

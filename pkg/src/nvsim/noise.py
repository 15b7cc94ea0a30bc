"""Anisotropic magnetic-noise coupling of the |0> <-> |+-> transitions.

A field fluctuation dB shifts the transition energy by
``gamma_B dB . (<S>_e - <S>_0)``, so for a noise covariance ``sigma``
(G^2) the quasi-static dephasing proxy is the quadratic form
``v^T sigma v``. The proxy is proportional to the accumulated phase variance
at fixed tau; the spectrum-dependent constant is not modeled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .hamiltonian import TWO_PI, EigenSystem, FieldConfig, PhysicalConstants, solve_electron

SEARCH_WINDOW = (88.0, 92.0)
ANGLE_TOL_DEG = 1e-4


@dataclass(frozen=True)
class NoiseCovariance:
    """Symmetric PSD matrix of ``<dB_i dB_j>`` in G^2, axes (x, y, z)."""

    sigma: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=float)
        if s.shape != (3, 3):
            raise ValueError(f"covariance must be 3x3, got {s.shape}")
        if not np.allclose(s, s.T, rtol=0, atol=1e-12 * max(np.abs(s).max(), 1e-300)):
            raise ValueError("covariance must be symmetric")
        tr = np.trace(s)
        if np.linalg.eigvalsh(s).min() < -1e-12 * max(tr, 1e-300):
            raise ValueError("covariance must be positive semidefinite")
        object.__setattr__(self, "sigma", 0.5 * (s + s.T))

    @property
    def xz_correlation(self) -> float:
        return float(self.sigma[0, 2])

    @classmethod
    def isotropic(cls, variance: float) -> "NoiseCovariance":
        return cls(variance * np.eye(3))


@dataclass(frozen=True)
class DipolarSource:
    """A randomly flipping spin along unit vector ``direction_u``.

    ``prefactor_DS`` is the product of the dipolar constant
    ``mu0 mu_B g_e / (4 pi r^3)`` and the spin length, in gauss.
    """

    direction_u: np.ndarray
    prefactor_DS: float

    def __post_init__(self):
        u = np.asarray(self.direction_u, dtype=float)
        if u.shape != (3,) or abs(np.linalg.norm(u) - 1) > 1e-12:
            raise ValueError("direction_u must be a unit 3-vector")
        if self.prefactor_DS < 0:
            raise ValueError("prefactor_DS must be non-negative")
        object.__setattr__(self, "direction_u", u)

    @property
    def coupling_matrix(self) -> np.ndarray:
        """``M`` with ``dB = D M S`` for noise-spin operators ``S``."""
        u = self.direction_u
        return 3 * np.outer(u, u) - np.eye(3)


def coupling_vector(e: EigenSystem, transition: str, gamma_B: float) -> np.ndarray:
    """``gamma_B (<S>_e - <S>_0)`` in rad/us per gauss."""
    partner = {"minus_zero": "minus", "plus_zero": "plus"}[transition]
    return TWO_PI * gamma_B * (e.expectation(partner) - e.expectation("zero"))


def delta_E_variance(
    e: EigenSystem, transition: str, sigma: NoiseCovariance, gamma_B: float = PhysicalConstants.gamma_B
) -> float:
    """Variance of the transition-energy fluctuation in (rad/us)^2."""
    v = coupling_vector(e, transition, gamma_B)
    return float(v @ sigma.sigma @ v)


def dipolar_covariance(src: DipolarSource) -> NoiseCovariance:
    """Covariance of the field from one randomly flipping dipole.

    With uncorrelated spin components of equal variance ``S^2``,
    ``sigma = (D S)^2 (3 u u^T + 1)``.
    """
    u = src.direction_u
    return NoiseCovariance(src.prefactor_DS**2 * (3 * np.outer(u, u) + np.eye(3)))


def dipolar_covariance_monte_carlo(src: DipolarSource, n_samples: int, rng=None):
    """Sample covariance from random +-S spin components on each axis.

    Returns ``(mean, standard_error)``, both 3x3, with ``D S`` folded into the
    samples so the result is comparable to :func:`dipolar_covariance`.
    """
    rng = np.random.default_rng(rng)
    spins = rng.choice([-1.0, 1.0], size=(n_samples, 3))
    db = src.prefactor_DS * spins @ src.coupling_matrix.T
    prods = db[:, :, None] * db[:, None, :]
    return prods.mean(axis=0), prods.std(axis=0, ddof=1) / np.sqrt(n_samples)


def line_noise_covariance(angle_from_x: float, amplitude: float) -> NoiseCovariance:
    """Rank-1 noise fluctuating along a line in the XZ plane.

    ``angle_from_x`` is measured from +x toward +z in degrees; -45 deg gives
    ``dB_x + dB_z = 0``.
    """
    a = np.deg2rad(angle_from_x)
    n = np.array([np.cos(a), 0.0, np.sin(a)])
    return NoiseCovariance(amplitude**2 * np.outer(n, n))


class OptimalAngle(NamedTuple):
    theta_opt: float
    residual_variance: float
    flat: bool


def _golden_section(fun, a, b, xtol):
    invphi = (np.sqrt(5) - 1) / 2
    c_ = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c_), fun(d)
    while abs(b - a) > xtol:
        if fc <= fd:
            b, d, fd = d, c_, fc
            c_ = b - invphi * (b - a)
            fc = fun(c_)
        else:
            a, c_, fc = c_, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


def optimal_off_angle(
    c: PhysicalConstants,
    magnitude: float,
    transition: str,
    sigma: NoiseCovariance,
    window: tuple[float, float] = SEARCH_WINDOW,
    n_scan: int = 401,
) -> OptimalAngle:
    """Angle in ``window`` minimizing :func:`delta_E_variance`.

    A coarse scan locates the basin and golden-section search refines it to
    1e-4 deg, using exact eigenstates at every angle. When the objective is
    flat across the window the result is 90 deg with ``flat=True``.
    """

    def objective(th):
        e = solve_electron(c, FieldConfig(magnitude, float(th)))
        return delta_E_variance(e, transition, sigma, c.gamma_B)

    scan = np.linspace(window[0], window[1], n_scan)
    vals = np.array([objective(th) for th in scan])
    vmax = vals.max()
    # variation is judged against the largest possible variance, |v| <= 2 gamma_B
    scale = (2 * TWO_PI * c.gamma_B) ** 2 * np.trace(sigma.sigma)
    if vmax - vals.min() <= 1e-12 * max(scale, 1e-300):
        return OptimalAngle(90.0, float(objective(90.0)), True)
    i = int(np.argmin(vals))
    lo = scan[max(i - 1, 0)]
    hi = scan[min(i + 1, n_scan - 1)]
    th, val = _golden_section(objective, lo, hi, ANGLE_TOL_DEG)
    if vals[i] < val:
        th, val = scan[i], vals[i]
    return OptimalAngle(float(th), float(val), False)


def small_angle_coefficients(c: PhysicalConstants, magnitude: float, step_deg: float = 1e-3) -> tuple[float, float]:
    """Linear-response constants near 90 deg.

    Returns ``(k, sxC)`` with ``<S_z>_- ~ k (theta_B - 90)`` (k per degree)
    and ``sxC = |<S_x>_0|`` at 90 deg. The name ``sxC`` keeps it apart from
    the optical contrast.
    """
    up = solve_electron(c, FieldConfig(magnitude, 90.0 + step_deg)).expectation("minus")[2]
    dn = solve_electron(c, FieldConfig(magnitude, 90.0 - step_deg)).expectation("minus")[2]
    k = (up - dn) / (2 * step_deg)
    sxc = abs(solve_electron(c, FieldConfig(magnitude, 90.0)).expectation("zero")[0])
    return float(k), float(sxc)


def linearized_variance(k: float, sxC: float, delta_theta: float, transition: str, sigma: NoiseCovariance,
                        gamma_B: float = PhysicalConstants.gamma_B) -> float:
    """Small-angle expansion of :func:`delta_E_variance`."""
    s = sigma.sigma
    kd = k * delta_theta
    if transition == "minus_zero":
        var = kd**2 * s[2, 2] + sxC**2 * s[0, 0] + 2 * sxC * kd * s[0, 2]
    else:
        var = kd**2 * s[2, 2] + 4 * sxC**2 * s[0, 0] - 4 * sxC * kd * s[0, 2]
    return float((TWO_PI * gamma_B) ** 2 * var)

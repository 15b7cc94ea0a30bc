import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvsim.hamiltonian import FieldConfig, solve_electron
from nvsim.noise import (
    DipolarSource,
    NoiseCovariance,
    coupling_vector,
    delta_E_variance,
    dipolar_covariance,
    dipolar_covariance_monte_carlo,
    line_noise_covariance,
    linearized_variance,
    optimal_off_angle,
    small_angle_coefficients,
)

S2 = 1 / np.sqrt(2)


@pytest.mark.parametrize(
    "u, expected",
    [
        ((1, 0, 0), np.diag([4.0, 1.0, 1.0])),
        ((0, 0, 1), np.diag([1.0, 1.0, 4.0])),
        ((S2, 0, S2), np.array([[2.5, 0, 1.5], [0, 1, 0], [1.5, 0, 2.5]])),
    ],
)
def test_dipolar_closed_form(u, expected):
    ds = 0.7
    sigma = dipolar_covariance(DipolarSource(np.array(u, dtype=float), ds)).sigma
    np.testing.assert_allclose(sigma, ds**2 * expected, atol=1e-14)


def test_dipolar_monte_carlo_small(rng):
    src = DipolarSource(np.array([0.6, 0.0, 0.8]), 1.3)
    mean, err = dipolar_covariance_monte_carlo(src, 20_000, rng)
    exact = dipolar_covariance(src).sigma
    assert np.all(np.abs(mean - exact) <= 4 * err + 1e-12)


def test_dipolar_ensemble_is_isotropic(rng):
    """Averaged over random source directions the covariance is 2 (DS)^2 I."""
    u = rng.normal(size=(20_000, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    avg = np.mean([dipolar_covariance(DipolarSource(v, 1.0)).sigma for v in u], axis=0)
    np.testing.assert_allclose(avg, 2 * np.eye(3), atol=0.03)


def test_dipolar_validation():
    with pytest.raises(ValueError):
        DipolarSource(np.array([1.0, 1.0, 0.0]), 1.0)
    with pytest.raises(ValueError):
        DipolarSource(np.array([1.0, 0.0, 0.0]), -1.0)


def test_covariance_validation():
    with pytest.raises(ValueError):
        NoiseCovariance(np.array([[1.0, 0.5, 0], [0, 1, 0], [0, 0, 1]]))
    with pytest.raises(ValueError):
        NoiseCovariance(np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(ValueError):
        NoiseCovariance(np.eye(2))


def test_line_noise_shape():
    s = line_noise_covariance(-45.0, 2.0)
    assert np.linalg.matrix_rank(s.sigma) == 1
    assert s.xz_correlation == pytest.approx(-2.0)
    np.testing.assert_allclose(s.sigma @ np.array([1.0, 0.0, 1.0]), 0.0, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), theta=st.floats(85.0, 95.0), transition=st.sampled_from(["minus_zero", "plus_zero"]))
def test_variance_is_quadratic_form(consts, seed, theta, transition):
    a = np.random.default_rng(seed).normal(size=(3, 3))
    sigma = NoiseCovariance(a @ a.T)
    e = solve_electron(consts, FieldConfig(65.0, theta))
    v = coupling_vector(e, transition, consts.gamma_B)
    var = delta_E_variance(e, transition, sigma, consts.gamma_B)
    assert var >= 0
    assert var == pytest.approx(float(v @ a @ a.T @ v), rel=1e-12)


def test_isotropic_variance_is_norm(consts):
    e = solve_electron(consts, FieldConfig(65.0, 89.0))
    v = coupling_vector(e, "plus_zero", consts.gamma_B)
    assert delta_E_variance(e, "plus_zero", NoiseCovariance.isotropic(0.25)) == pytest.approx(0.25 * v @ v)


def test_small_angle_coefficients(consts):
    k, sxc = small_angle_coefficients(consts, 65.0)
    assert k == pytest.approx(0.5504, rel=1e-3)
    assert sxc == pytest.approx(0.1258213455, rel=1e-8)


@pytest.mark.parametrize("transition", ["minus_zero", "plus_zero"])
@pytest.mark.parametrize("delta", [-0.05, 0.02, 0.05])
def test_linearized_variance_tracks_exact(consts, transition, delta):
    k, sxc = small_angle_coefficients(consts, 65.0)
    sigma = NoiseCovariance(np.array([[1.0, 0, -0.4], [0, 0.5, 0], [-0.4, 0, 2.0]]))
    exact = delta_E_variance(solve_electron(consts, FieldConfig(65.0, 90.0 + delta)), transition, sigma)
    approx = linearized_variance(k, sxc, delta, transition, sigma)
    assert approx == pytest.approx(exact, rel=0.03)


def test_flat_objective_returns_perpendicular(consts):
    res = optimal_off_angle(consts, 65.0, "minus_zero", NoiseCovariance(np.diag([0.0, 1.0, 0.0])))
    assert res.flat and res.theta_opt == 90.0


def test_positive_correlation_mirrors_optimum(consts):
    neg = optimal_off_angle(consts, 65.0, "minus_zero", line_noise_covariance(-45.0, 1.0))
    pos = optimal_off_angle(consts, 65.0, "minus_zero", line_noise_covariance(45.0, 1.0))
    assert neg.theta_opt - 90 == pytest.approx(90 - pos.theta_opt, abs=1e-3)
    assert neg.theta_opt == pytest.approx(90.231, abs=2e-3)


@settings(max_examples=5, deadline=None)
@given(angle=st.floats(-80.0, -10.0))
def test_opposite_sides_for_anticorrelated_line_noise(consts, angle):
    sigma = line_noise_covariance(angle, 1.0)
    m = optimal_off_angle(consts, 65.0, "minus_zero", sigma)
    p = optimal_off_angle(consts, 65.0, "plus_zero", sigma)
    assert (m.theta_opt - 90.0) * (p.theta_opt - 90.0) < 0

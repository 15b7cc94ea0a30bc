import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import nvsim.hamiltonian as ham
from nvsim.errors import ContinuityError, DegenerateLabelError
from nvsim.hamiltonian import (
    TWO_PI,
    FieldConfig,
    PhysicalConstants,
    build_electron_hamiltonian,
    build_full_hamiltonian,
    solve_electron,
    sweep_eigensystem,
)
from nvsim.spin import is_hermitian


def char_poly_energies(c, magnitude, theta):
    """Oracle: roots of det(H - E) for the hand-written 3x3 matrix (MHz)."""
    th = np.deg2rad(theta)
    bx, bz = magnitude * np.sin(th), magnitude * np.cos(th)
    g = c.gamma_B
    off = g * bx / np.sqrt(2)
    m = np.array([[c.D_gs + g * bz, off, 0], [off, 0, off], [0, off, c.D_gs - g * bz]])
    return np.sort(np.roots(np.poly(m)).real)


@pytest.mark.parametrize("magnitude", [0.0, 10.0, 65.0, 93.0, 200.0, 1000.0])
@pytest.mark.parametrize("theta", [0.0, 30.0, 89.0, 90.0, 91.0, 150.0, 180.0])
def test_energies_match_characteristic_polynomial(consts, magnitude, theta):
    h = build_electron_hamiltonian(consts, FieldConfig(magnitude, theta))
    w = np.linalg.eigvalsh(h) / TWO_PI
    np.testing.assert_allclose(w, char_poly_energies(consts, magnitude, theta), atol=1e-6)


def test_parallel_field_levels(consts):
    e = solve_electron(consts, FieldConfig(65.0, 0.0))
    assert e.energy("zero") == pytest.approx(0.0, abs=1e-9)
    assert e.energy("minus") == pytest.approx(2870 - 2.8 * 65)
    assert e.energy("plus") == pytest.approx(2870 + 2.8 * 65)
    np.testing.assert_allclose(e.expectation("minus"), [0, 0, -1], atol=1e-12)


def test_perpendicular_field_frozen_values(consts):
    e = solve_electron(consts, FieldConfig(65.0, 90.0))
    assert e.expectation("zero")[0] == pytest.approx(-0.1258213455, abs=1e-9)
    assert e.expectation("plus")[0] == pytest.approx(0.1258213455, abs=1e-9)
    assert abs(e.expectation("minus")[0]) < 1e-12
    assert e.energy("plus") - e.energy("minus") == pytest.approx(11.49541997, abs=1e-6)
    # |-> is the antisymmetric combination, decoupled from |0>
    assert e.energy("minus") == pytest.approx(2870.0, abs=1e-9)


@pytest.mark.parametrize("magnitude", [20.0, 65.0, 100.0, 200.0])
def test_hybridization_relation(consts, magnitude):
    """<S_x>_0 = 2 eps / (1 + eps^2) exactly for |0> = (|0> + eps |sym>)/norm."""
    e = solve_electron(consts, FieldConfig(magnitude, 90.0))
    eps = e.hybridization_eps
    assert e.expectation("zero")[0] == pytest.approx(2 * eps / (1 + eps**2), rel=1e-10)
    # leading-order estimate; the correction is second order in gamma_B B / D
    x = consts.gamma_B * magnitude / consts.D_gs
    assert eps == pytest.approx(-x, rel=2 * x**2 + 1e-3)


def test_field_vector_and_validation():
    f = FieldConfig(65.0, 90.0)
    assert f.bz == 0.0 and f.bx == 65.0
    assert FieldConfig(10.0, 0.0).bz == 10.0
    assert FieldConfig(10.0, 92.0).delta_theta == pytest.approx(2.0)
    for bad in (-0.1, 180.1, float("nan")):
        with pytest.raises(ValueError):
            FieldConfig(1.0, bad)
    with pytest.raises(ValueError):
        FieldConfig(-1.0, 90.0)
    with pytest.raises(ValueError):
        PhysicalConstants(D_gs=-1.0)


def test_full_hamiltonian_structure(consts):
    f = FieldConfig(65.0, 89.3)
    h = build_full_hamiltonian(consts, f)
    assert h.shape == (6, 6) and is_hermitian(h)
    bare = PhysicalConstants(A_xx=0.0, A_zz=0.0, gamma_N=0.0)
    np.testing.assert_allclose(
        build_full_hamiltonian(bare, f), np.kron(build_electron_hamiltonian(bare, f), np.eye(2)), atol=1e-12
    )


def test_zero_field_labels_are_degenerate(consts):
    with pytest.raises(DegenerateLabelError):
        solve_electron(consts, FieldConfig(0.0, 90.0))


@settings(max_examples=40, deadline=None)
@given(delta=st.floats(0.01, 2.0), magnitude=st.floats(30.0, 200.0))
def test_mirror_symmetry_about_perpendicular(consts, delta, magnitude):
    up = solve_electron(consts, FieldConfig(magnitude, 90.0 + delta))
    dn = solve_electron(consts, FieldConfig(magnitude, 90.0 - delta))
    np.testing.assert_allclose(up.energies, dn.energies, atol=1e-9)
    assert up.expectation("minus")[2] == pytest.approx(-dn.expectation("minus")[2], abs=1e-9)
    assert up.expectation("zero")[0] == pytest.approx(dn.expectation("zero")[0], abs=1e-9)
    assert np.all(np.abs(up.expectations[:, 1]) < 1e-12)


@settings(max_examples=25, deadline=None)
@given(theta=st.floats(0.0, 180.0), magnitude=st.floats(1.0, 300.0))
def test_labels_are_a_permutation_of_eigenvalues(consts, theta, magnitude):
    e = solve_electron(consts, FieldConfig(magnitude, theta))
    np.testing.assert_allclose(np.sort(e.energies), char_poly_energies(consts, magnitude, theta), atol=1e-6)
    gram = e.states.conj().T @ e.states
    np.testing.assert_allclose(gram, np.eye(3), atol=1e-10)


def test_sweep_agrees_with_pointwise_solver(consts):
    thetas = np.linspace(88.0, 92.0, 81)
    for e in sweep_eigensystem(consts, thetas, 65.0)[::10]:
        ref = solve_electron(consts, FieldConfig(65.0, e.theta_B))
        np.testing.assert_allclose(e.energies, ref.energies, atol=1e-9)
        np.testing.assert_allclose(e.expectations, ref.expectations, atol=1e-9)


def test_sweep_validation(consts):
    with pytest.raises(ValueError):
        sweep_eigensystem(consts, [89.0, 91.0, 90.0], 65.0)
    with pytest.raises(ValueError):
        sweep_eigensystem(consts, [], 65.0)


def test_sweep_continuity_error(consts, monkeypatch):
    monkeypatch.setattr(ham, "_match", lambda prev, vecs: ([0, 1, 2], 0.3))
    with pytest.raises(ContinuityError) as info:
        sweep_eigensystem(consts, [89.0, 90.0], 65.0)
    assert info.value.overlap == pytest.approx(0.3)

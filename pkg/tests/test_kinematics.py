import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from biotiter import kinematics as kin

mats = arrays(np.float64, (2, 2), elements=st.floats(-0.3, 0.3))
c_cubic = lambda x: x**3 + x
dc_cubic = lambda x: 3 * x**2 + 1


def rot(t):
    return np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])


@given(st.floats(-math.pi, math.pi))
def test_rigid_rotation_is_stress_free(theta):
    F = rot(theta)
    E = kin.green_strain(F)
    assert np.abs(E).max() <= 1e-15
    assert np.abs(F @ kin.svk_stress(E, 1.0, c_cubic)).max() <= 1e-12


def test_identity_pullbacks():
    I = np.eye(2)
    assert np.array_equal(kin.pullback_permeability(I, 0.3), 0.3 * I)
    assert np.allclose(kin.inverse_pullback_permeability(I, 0.3), I / 0.3, rtol=0, atol=1e-14)
    assert np.array_equal(kin.gravity_pullback(I, [1.0, -2.0]), [1.0, -2.0])
    assert kin.fluid_content_rate_coeffs(I, 2.0, 0.5, 1.0) == (1.0, 1.0)


@given(mats)
@settings(max_examples=60)
def test_green_strain_forms_agree(G):
    E1 = kin.green_strain(kin.deformation_gradient(G))
    E2 = kin.green_strain_from_grad(G)
    assert np.allclose(E1, E2, atol=1e-15)
    assert np.allclose(E1, E1.T)


@given(mats)
@settings(max_examples=60)
def test_permeability_inverse_pair(G):
    F = kin.deformation_gradient(G)
    K = kin.pullback_permeability(F, 0.7)
    Kinv = kin.inverse_pullback_permeability(F, 0.7)
    assert np.allclose(K @ Kinv, np.eye(2), atol=1e-12)


@given(mats, st.floats(-1, 1))
@settings(max_examples=60)
def test_first_piola_is_F_times_second(G, p):
    F = kin.deformation_gradient(G)
    S, Pi = kin.total_stresses(F, kin.svk_stress(kin.green_strain(F), 1.0, c_cubic), p)
    assert np.allclose(Pi, F @ S)
    assert np.allclose(S, S.T)


@given(mats, st.floats(-1, 1), mats, st.floats(-1, 1))
@settings(max_examples=60, deadline=None)
def test_directional_derivatives_fd(G, p, dG, dp):
    eps = 1e-6
    mu, k = 1.2, 0.8

    def fields(t):
        F = kin.deformation_gradient(G + t * dG)
        _, Pi = kin.total_stresses(F, kin.svk_stress(kin.green_strain(F), mu, c_cubic), p + t * dp)
        return Pi, kin.pullback_permeability(F, k), np.linalg.det(F)

    dPi, dK, dJ = kin.directional_derivatives(G, p, dG, dp, mu, c_cubic, dc_cubic, k)
    plus, minus = fields(eps), fields(-eps)
    for exact, a, b in zip((dPi, dK, dJ), plus, minus):
        assert np.allclose(exact, (a - b) / (2 * eps), atol=1e-7)


def test_small_strain_limit_order():
    rng = np.random.default_rng(3)
    G = rng.standard_normal((2, 2))
    errs = []
    eps = np.array([1e-1, 1e-2, 1e-3])
    for e in eps:
        F = kin.deformation_gradient(e * G)
        _, Pi = kin.total_stresses(F, kin.svk_stress(kin.green_strain(F), 1.0, lambda x: 2 * x), 0.5 * e)
        errs.append(np.abs(Pi - kin.small_strain_stress(e * G, 0.5 * e, 1.0, 1.0, lambda x: 2 * x)).max())
    ratios = np.log10(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(ratios - 2) < 0.05)


def test_batched_shapes():
    G = np.zeros((4, 3, 2, 2))
    assert kin.green_strain_from_grad(G).shape == G.shape
    kp = kin.KinematicPoint.from_grad(G)
    assert np.allclose(kp.J, 1.0)


def test_singular_deformation():
    with pytest.raises(kin.NonInvertibleDeformation):
        kin.total_stresses(np.zeros((2, 2)), np.zeros((2, 2)), 1.0)


def test_admissibility_guard():
    kin.check_admissible(np.array([1.0, 0.5]))
    with pytest.raises(kin.ElementInversion) as info:
        kin.check_admissible(np.array([1.0, 0.04, -1.0]))
    assert info.value.cell == 1
    assert info.value.J == pytest.approx(0.04)

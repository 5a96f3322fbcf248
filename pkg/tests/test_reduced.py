import math

import numpy as np
import pytest

from crownlab.crown import bubble
from crownlab.energy import constants
from crownlab.errors import OutOfRegimeError, ParameterError
from crownlab.fields import ScalarField
from crownlab.kelvin import ReducedPoint
from crownlab.reduced import (d_critical, expansion_check, from_vector, golden_section_argmin, optimize, psi,
                              psi_coefficients, psi_d_derivative, psi_vector, richardson_gradient,
                              richardson_hessian, tau_a_hessian, to_vector)


@pytest.fixture(scope="module")
def consts3():
    return constants(3)


@pytest.fixture(scope="module")
def consts4_crown(crown4):
    return constants(4, crown4)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_d_critical_of_bubble_is_one(n):
    # B = alpha^2 / gamma and C = c2 alpha with c2 = (n-2)|S| alpha, so C / B = 1
    c = constants(n)
    zt = (0.0,) * (2 * n - 3)
    assert d_critical(np.zeros(n), (0, 0), zt, c, bubble(n)) == pytest.approx(1.0, abs=1e-12)


def test_golden_section_agrees_with_closed_form(consts3):
    U = bubble(3)
    tau = np.array([0.1, -0.05, 0.0])
    B, C = psi_coefficients(tau, (0, 0), (0, 0, 0), consts3, U)
    d0 = d_critical(tau, (0, 0), (0, 0, 0), consts3, U)
    assert golden_section_argmin(B, C, 3, 0.3, 3.0) == pytest.approx(d0, abs=1e-10)


def test_psi_derivative_vanishes_at_d0(consts3):
    U = bubble(3)
    tau = (0.1, 0.0, 0.0)
    d0 = d_critical(np.array(tau), (0, 0), (0, 0, 0), consts3, U)
    pt = ReducedPoint(d0, tau)
    assert abs(psi_d_derivative(pt, consts3, U)) < 1e-10
    h = 1e-4
    num = (psi(pt.replace(d=d0 + h), consts3, U) - psi(pt.replace(d=d0 - h), consts3, U)) / (2 * h)
    assert abs(num) < 1e-6
    assert psi(pt.replace(d=1.5 * d0), consts3, U) > psi(pt, consts3, U)


def test_negative_far_field_has_no_critical_point(consts3):
    U = bubble(3)
    neg = ScalarField(n=3, value=lambda y: -U.value(y), gradient=lambda y: -U.grad(y), far_field=-U.far_field,
                      kelvin_invariant=True)
    with pytest.raises(OutOfRegimeError) as info:
        d_critical(np.zeros(3), (0, 0), (0, 0, 0), consts3, neg)
    assert info.value.value < 0


def test_psi_box(consts3):
    with pytest.raises(ParameterError):
        psi(ReducedPoint(1.0, (0, 0, 0), eta=0.25).replace(d=10.0), consts3, bubble(3))


def test_vector_roundtrip():
    pt = ReducedPoint(1.2, (0.1, 0.0, -0.05, 0.0), (0.1, 0.2), (0.1, 0.2, 0.3, 0.4, 0.5))
    assert from_vector(to_vector(pt), 4) == pt


def test_richardson_helpers_on_quadratic():
    A = np.array([[2.0, 0.5, 0.0], [0.5, -1.0, 0.3], [0.0, 0.3, 4.0]])
    f = lambda x: 0.5 * x @ A @ x + x[0]
    x = np.array([0.1, -0.2, 0.3])
    assert richardson_gradient(f, x) == pytest.approx(A @ x + np.array([1.0, 0, 0]), abs=1e-9)
    assert richardson_hessian(f, x, [0, 1, 2]) == pytest.approx(A, abs=1e-6)


def test_tau_a_hessian_negative_definite_for_crown(crown4, consts4_crown):
    d0 = d_critical(np.zeros(4), (0, 0), (0,) * 5, consts4_crown, crown4)
    H = tau_a_hessian(ReducedPoint.origin(4, d0), consts4_crown, crown4)
    assert np.allclose(H, H.T, atol=1e-6 * np.max(np.abs(H)))
    assert np.max(np.linalg.eigvalsh(H)) < 0


def test_saddle_search_returns_to_symmetric_point(crown4, consts4_crown):
    start = ReducedPoint(1.0, (0.05, -0.03, 0.02, 0.0), (0.1, 0.05), (0.1, 0.2, 0.0, 0.0, 0.1))
    res = optimize(consts4_crown, crown4, start)
    assert res.converged and res.grad_norm < 1e-9
    assert np.max(np.abs(res.point.tau)) < 1e-8 and np.max(np.abs(res.point.a)) < 1e-8
    assert res.d_curvature > 0 and np.all(res.tau_a_eigenvalues < 0)
    assert res.theta_flat
    assert res.value == pytest.approx(psi_vector(to_vector(res.point), consts4_crown, crown4))


def test_energy_expansion_coefficient(consts3):
    pt = ReducedPoint.origin(3, 1.0)
    rep = expansion_check(pt, [1e-4, 1e-5, 1e-6, 1e-7], consts3, bubble(3))
    assert rep.coefficient_ok
    assert rep.notes["sign"] == 1 and rep.notes["all_positive"]
    assert math.isclose(rep.target_coefficient, psi(pt, consts3, bubble(3)))

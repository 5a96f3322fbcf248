import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from analytic_integrals import CASES
from crownlab.crown import bubble
from crownlab.errors import ParameterError, QuadratureError
from crownlab.fields import ScalarField
from crownlab.geometry import critical_exponent, sphere_area
from crownlab.quadrature import (QuadratureSpec, adaptive_box, gauss_kronrod15, genz_malik, integrate_annulus,
                                 integrate_rn, integrate_sector, norm_exponents, probe_grid, weighted_norm)


@pytest.mark.parametrize("name, run, exact", CASES, ids=[c[0] for c in CASES])
def test_analytic_integral(name, run, exact):
    res = run()
    assert abs(float(res.value) - exact) <= max(2 * res.error, 4e-16 * abs(exact))
    assert abs(float(res.value) / exact - 1) < 1e-6


@pytest.mark.parametrize("d", [2, 3, 4])
def test_genz_malik_degree_seven(d):
    rule = genz_malik(d)
    rng = np.random.default_rng(d)
    for _ in range(5):
        powers = rng.multinomial(7, np.ones(d) / d) * (rng.integers(0, 2, d))
        powers = powers - powers % 2  # odd monomials vanish on [-1,1]^d, test the even ones
        mean = np.prod([1 / (k + 1) for k in powers])
        val = float(rule.high @ np.prod(rule.nodes**powers, axis=1))
        assert val == pytest.approx(mean, rel=1e-13)
    # the embedded rule is exact only to degree five
    x = rule.nodes[:, 0]
    assert float(rule.low @ x**4) == pytest.approx(1 / 5, rel=1e-13)
    assert float(rule.low @ x**6) != pytest.approx(1 / 7, rel=1e-6)


def test_gauss_kronrod_exact_for_polynomials():
    rule = gauss_kronrod15()
    x = rule.nodes[:, 0]
    assert float(rule.high @ x**22) == pytest.approx(1 / 23, rel=1e-13)
    assert float(rule.low @ x**12) == pytest.approx(1 / 13, rel=1e-13)


def test_spec_validation():
    for bad in (dict(rel_tol=0), dict(max_depth=0), dict(symmetry="cubic"), dict(exterior="wrap"),
                dict(split_radius=-1.0)):
        with pytest.raises(ParameterError):
            QuadratureSpec(**bad)


def test_budget_exhaustion_raises():
    f = lambda x: np.abs(x[:, 0] - 1 / 3) ** -0.9
    with pytest.raises(QuadratureError) as info:
        adaptive_box(f, [0], [1], rel_tol=1e-12, max_regions=20)
    assert info.value.error > 0
    res = adaptive_box(f, [0], [1], rel_tol=1e-12, max_regions=20, raise_on_failure=False)
    assert res.error > 0


def test_vector_valued_integrand():
    res = adaptive_box(lambda x: np.stack([x[:, 0], x[:, 1] ** 2], axis=1), [0, 0], [1, 1])
    assert res.value == pytest.approx([0.5, 1 / 3], rel=1e-12)


@pytest.mark.parametrize("symmetry", ["none", "full_even", "radial"])
def test_charts_agree_on_radial_integrand(symmetry):
    n = 3
    res = integrate_rn(lambda y: np.exp(-np.sum(y * y, axis=1)), QuadratureSpec(rel_tol=1e-9, symmetry=symmetry), n=n)
    assert float(res.value) == pytest.approx(math.pi**1.5, rel=1e-8)


def test_cutoff_exterior_drops_tail():
    n = 3
    spec = QuadratureSpec(rel_tol=1e-10, symmetry="radial", exterior="cutoff", split_radius=2.0)
    res = integrate_rn(lambda y: np.ones(len(y)), spec, n=n)
    assert float(res.value) == pytest.approx(4 * math.pi / 3 * 8, rel=1e-10)


def test_dihedral_chart_on_anisotropic_integrand():
    n = 4
    k = 6
    f = lambda y: np.exp(-np.sum(y * y, axis=1)) * (1 + np.cos(k * np.arctan2(y[:, 1], y[:, 0])))
    res = integrate_rn(f, QuadratureSpec(rel_tol=1e-9, symmetry="dihedral", k=k), n=n)
    assert float(res.value) == pytest.approx(math.pi**2, rel=1e-7)


def test_sectors_sum_to_whole_space():
    n = 3
    f = lambda y: np.exp(-np.sum((y - np.array([0.3, 0.2, 0.0])) ** 2, axis=1))
    spec = QuadratureSpec(rel_tol=1e-9)
    total = sum(float(integrate_sector(f, n, (j * math.pi / 2, (j + 1) * math.pi / 2), spec).value) for j in range(4))
    assert total == pytest.approx(math.pi**1.5, rel=1e-7)


def test_annulus_errors():
    with pytest.raises(ParameterError):
        integrate_annulus(lambda y: np.ones(len(y)), 0.0, QuadratureSpec(), n=3)
    with pytest.raises(ParameterError):
        integrate_annulus(lambda y: np.ones(len(y)), 0.1, QuadratureSpec())


def test_deterministic_repeat():
    U = bubble(4)
    p = critical_exponent(4)
    spec = QuadratureSpec(rel_tol=1e-9, symmetry="radial")
    a = integrate_rn(lambda y: U.value(y) ** (p + 1), spec, n=4)
    b = integrate_rn(lambda y: U.value(y) ** (p + 1), spec, n=4)
    assert a.value == b.value and a.error == b.error and a.regions == b.regions


def test_norm_exponents_and_probe_grid():
    a, b = norm_exponents(5, 0.1)
    assert a < b
    g = probe_grid(3, 0.1, 10.0, n_radii=5, n_dirs=6, extra_directions=[[1.0, 1.0, 0.0]])
    assert g.points().shape == (5 * 7, 3)
    with pytest.raises(ParameterError):
        probe_grid(3, 0.1, 1.0, n_radii=0)


def test_fundamental_norm_of_bubble():
    U = bubble(3)
    # (1 + r) alpha / sqrt(1 + r^2) peaks at r = 1 with value alpha sqrt 2
    val = weighted_norm(U, "fundamental", n_radii=401, n_dirs=8)
    assert val == pytest.approx(3 ** 0.25 * math.sqrt(2), rel=1e-4)


def test_weighted_norm_rejects_unknown():
    with pytest.raises(ParameterError):
        weighted_norm(bubble(3), "sup")
    with pytest.raises(ParameterError):
        weighted_norm(bubble(3), "starstar", eps=2.0)


@given(c=st.floats(-50, 50).filter(lambda c: abs(c) > 1e-3), which=st.sampled_from(["star", "starstar"]))
def test_norm_homogeneity(c, which):
    U = bubble(4)
    cU = ScalarField(n=4, value=lambda y: c * U.value(y), gradient=lambda y: c * U.grad(y))
    base = weighted_norm(U, which, eps=1e-3, n_radii=40, n_dirs=8)
    assert weighted_norm(cU, which, eps=1e-3, n_radii=40, n_dirs=8) == pytest.approx(abs(c) * base, rel=1e-12)


def test_sphere_area_by_quadrature():
    res = integrate_rn(lambda y: np.exp(-np.sum(y * y, axis=1)), QuadratureSpec(rel_tol=1e-10), n=5)
    assert float(res.value) == pytest.approx(math.pi**2.5, rel=1e-8)
    assert sphere_area(5) * math.gamma(2.5) / 2 == pytest.approx(math.pi**2.5)

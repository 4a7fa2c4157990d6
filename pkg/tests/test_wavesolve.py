"""Test cone geometry, factorization checks and sampled solutions."""
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from cone_kernel.errors import ConeError, DomainError, SolvabilityError
from cone_kernel.wavesolve import (
    ORIGIN,
    SOLUTION_COLUMNS,
    ConeSpec,
    RightHandSide,
    ellipticity_check,
    factorization_estimate_check,
    factorization_product_residual,
    identity_factorization,
    rational_factorization,
    sobolev_condition_check,
    solve_theorem2,
)

from tests.conftest import SQRT_PI

XI_GRID = [(x1, x2) for x1 in (-2.0, 0.3, 5.0) for x2 in (-3.0, 0.2, 1.7)]


def rational_symbol(xi1, xi2):
    return (xi2 * xi2 + 4.0) / (xi2 * xi2 + 1.0)


def test_cone_geometry():
    cone = ConeSpec(10.0)
    assert cone.contains((0.1, 2.0))
    assert not cone.contains((1.0, 2.0))
    assert cone.conjugate_contains((1.0, 0.2))
    assert not cone.conjugate_contains((1.0, 0.05))
    assert cone.on_excluded_set((2.0, -0.2))
    with pytest.raises(DomainError):
        ConeSpec(0.0)


def test_sobolev_condition():
    assert sobolev_condition_check(0.0, 0.4)
    assert not sobolev_condition_check(0.0, 0.5)
    assert sobolev_condition_check(1.0, 0.6)


def test_identity_solution_at_origin(xi1_gaussian, spec):
    """PV of eta exp(-eta^2) / (0 - eta) is -sqrt(pi)."""
    [sample] = solve_theorem2(identity_factorization(), RightHandSide(xi1_gaussian), 0, [(0.0, 0.0)], spec=spec)
    assert sample.error == ""
    assert sample.value == pytest.approx(-1j * SQRT_PI / (2 * math.pi), rel=1e-9)
    assert sample.correction == 0j


def test_identity_solution_matches_cauchy_quadrature(gaussian, spec):
    """scipy's Cauchy-weighted quadrature integrates f / (x - c), the opposite sign."""
    xi1, xi2 = 0.5, 0.3
    [sample] = solve_theorem2(identity_factorization(), RightHandSide(gaussian), 0, [(xi1, xi2)], spec=spec)
    cauchy, _ = integrate.quad(lambda x: math.exp(-x * x - xi2 * xi2), -10.0, 10.0,
                               weight="cauchy", wvar=xi1, epsabs=1e-13, epsrel=1e-12)
    assert sample.value == pytest.approx(-1j / (2 * math.pi) * cauchy, rel=1e-8)


def test_rational_solution_scales_identity(gaussian, spec):
    """A_minus^{-1} is constant in eta, so at order 0 the solution is V-part / A(xi2)."""
    points = [(0.5, 0.3), (-1.2, 1.5)]
    V = RightHandSide(gaussian)
    identity = solve_theorem2(identity_factorization(), V, 0, points, spec=spec)
    rational = solve_theorem2(rational_factorization(), V, 0, points, spec=spec)
    for (xi1, xi2), base, scaled in zip(points, identity, rational):
        expected = base.value * (xi2 ** 2 + 1.0) / (xi2 ** 2 + 4.0)
        assert scaled.value == pytest.approx(expected, rel=1e-9)


def test_corrections_shrink_with_a(xi1_gaussian, spec):
    V = RightHandSide(xi1_gaussian)
    [wide] = solve_theorem2(identity_factorization(10.0), V, 2, [(0.5, 0.0)], spec=spec)
    [narrow] = solve_theorem2(identity_factorization(100.0), V, 2, [(0.5, 0.0)], spec=spec)
    assert abs(wide.correction) > 0
    assert abs(narrow.correction) < abs(wide.correction)
    # only the b^2 lemma entry survives: the polynomial entry pairs with an odd integrand
    assert abs(wide.correction) == pytest.approx(100.0 * abs(narrow.correction), rel=1e-6)
    assert narrow.leading == pytest.approx(wide.leading)


def test_solve_rejects_unsolvable_index(gaussian):
    with pytest.raises(SolvabilityError):
        solve_theorem2(identity_factorization(), RightHandSide(gaussian), 0, [(0.5, 0.0)], s=0.6)


def test_solve_records_point_failures(bump, spec):
    """The bump supports six derivatives; order 8 fails per point, in input order."""
    points = [(0.2, 0.0), (0.4, 0.1)]
    samples = solve_theorem2(identity_factorization(), RightHandSide(bump), 8, points, spec=spec)
    assert [(s.xi1, s.xi2) for s in samples] == points
    for sample in samples:
        assert "DerivativeOrderError" in sample.error
        assert sample.value is None
        assert tuple(sample.to_row()) == SOLUTION_COLUMNS


def test_rational_ellipticity():
    fact = rational_factorization()
    grid = [(0.0, x2) for x2 in np.linspace(-50.0, 50.0, 201)]
    result = ellipticity_check(fact.symbol, fact.alpha, grid)
    assert result.passed
    assert 1.0 <= result.c1 < 1.01
    assert result.c2 == pytest.approx(4.0)


def test_ellipticity_failure_reports_location():
    result = ellipticity_check(lambda x1, x2: math.inf if x2 == 0.0 else 1.0, 0.0, [(1.0, 1.0), (1.0, 0.0)])
    assert not result.passed
    assert result.location == (1.0, 0.0)
    with pytest.raises(DomainError):
        ellipticity_check(rational_symbol, 0.0, [])


def test_factorization_estimate_identity():
    estimate = factorization_estimate_check(identity_factorization(), [(0.0, 1.0), (0.5, 0.2)], XI_GRID)
    assert estimate.passed
    assert estimate.worst_constants == (1.0, 1.0)


def test_factorization_estimate_rejects_tau_outside_cone():
    with pytest.raises(ConeError) as excinfo:
        factorization_estimate_check(identity_factorization(10.0), [(1.0, 0.05)], XI_GRID)
    assert excinfo.value.sample == (1.0, 0.05)


def test_rational_product_residual():
    assert factorization_product_residual(rational_factorization(), rational_symbol, XI_GRID) <= 1e-14


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_minus_inverse_derivative_matches_differences(n):
    exact = rational_factorization()
    approximate = replace(exact, minus_inverse_derivative=None)
    assert approximate.minus_inverse_xi2(n, 0.3, 0.7) == pytest.approx(
        exact.minus_inverse_xi2(n, 0.3, 0.7), rel=1e-5)


@pytest.mark.parametrize("xi1, xi2", [(-1.5, 0.0), (-0.4, 0.7), (0.25, -0.2), (0.9, 1.1), (2.0, 0.5)])
def test_identity_solution_consistent_with_cauchy_quadrature(gaussian, spec, xi1, xi2):
    """Order-0 identity solutions agree with an independent Cauchy-weighted quadrature."""
    [sample] = solve_theorem2(identity_factorization(), RightHandSide(gaussian), 0, [(xi1, xi2)], spec=spec)
    cauchy, _ = integrate.quad(lambda x: math.exp(-x * x - xi2 * xi2), -10.0, 10.0,
                               weight="cauchy", wvar=xi1, epsabs=1e-13, epsrel=1e-12)
    assert sample.error == ""
    assert sample.value == pytest.approx(-1j / (2 * math.pi) * cauchy, rel=1e-6)


def test_solution_is_linear_in_rhs(gaussian, offaxis_gaussian, spec):
    """Solving for u V1 + v V2 gives u and v times the separate solutions, point by point."""
    fact = rational_factorization()
    points = [(0.5, 0.3), (-1.0, 0.1), (1.5, -0.6)]
    u, v = 1.5, -0.5
    first = solve_theorem2(fact, RightHandSide(gaussian), 2, points, spec=spec)
    second = solve_theorem2(fact, RightHandSide(offaxis_gaussian), 2, points, spec=spec)
    combined = solve_theorem2(fact, RightHandSide(u * gaussian + v * offaxis_gaussian), 2, points, spec=spec)
    for s1, s2, s in zip(first, second, combined):
        assert s.error == ""
        scale = abs(u * s1.value) + abs(v * s2.value)
        assert abs(s.value - (u * s1.value + v * s2.value)) <= 1e-8 * scale
        assert abs(s.correction - (u * s1.correction + v * s2.correction)) <= 1e-8 * scale


def test_rational_correction_block_matches_differenced_factor(offaxis_gaussian, spec):
    """Order 2 with a non-identity factor: exact and differenced A_minus^{-1} derivatives agree."""
    exact = rational_factorization()
    differenced = replace(exact, minus_inverse_derivative=None)
    points = [(0.5, 0.3), (-1.0, 0.8)]
    V = RightHandSide(offaxis_gaussian)
    by_formula = solve_theorem2(exact, V, 2, points, spec=spec)
    by_differences = solve_theorem2(differenced, V, 2, points, spec=spec)
    for a, b in zip(by_formula, by_differences):
        assert a.error == b.error == ""
        assert abs(a.correction) > 1e-6
        assert b.correction == pytest.approx(a.correction, rel=1e-5)
        assert b.leading == a.leading


def test_bump_solution_to_order_four(bump, spec):
    """Differenced bump derivatives up to order four give finite corrections."""
    samples = solve_theorem2(identity_factorization(), RightHandSide(bump), 4, [(0.2, 0.0), (0.4, 0.1)], spec=spec)
    for sample in samples:
        assert sample.error == ""
        assert math.isfinite(abs(sample.value))
        assert math.isfinite(abs(sample.correction))


def _factor(fn):
    return lambda x1, x2: fn((x1, x2), ORIGIN)


@settings(max_examples=30, deadline=None)
@given(grid=st.lists(st.tuples(st.floats(-100.0, 100.0), st.floats(-100.0, 100.0)), min_size=1, max_size=20))
def test_factor_ellipticity_implies_symbol_ellipticity(grid):
    """When both factor checks pass, the product passes with constants bounded by theirs."""
    fact = rational_factorization()
    plus = ellipticity_check(_factor(fact.plus), fact.kappa, grid)
    minus = ellipticity_check(_factor(fact.minus), fact.alpha - fact.kappa, grid)
    assert plus.passed and minus.passed
    product = ellipticity_check(fact.symbol, fact.alpha, grid)
    assert product.passed
    assert product.c1 >= plus.c1 * minus.c1 * (1 - 1e-12)
    assert product.c2 <= plus.c2 * minus.c2 * (1 + 1e-12)

"""Test the Gaussian-Hermite and bump test functions."""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from cone_kernel.errors import DerivativeOrderError, DomainError
from cone_kernel.testfn import (
    Combination,
    Decay,
    Parity,
    axis_moment,
    central_difference,
    central_difference_weights,
    make_bump,
    make_gaussian_hermite,
    moment_noise_floor,
)

from tests.conftest import SQRT_PI


def test_gaussian_values(gaussian, xi1_gaussian):
    """Point values of the registered Gaussians."""
    assert gaussian.eval(0.0, 0.0) == pytest.approx(1.0)
    assert xi1_gaussian.eval(1.0, 0.0) == pytest.approx(math.exp(-1.0))
    assert xi1_gaussian.eval(-1.0, 0.5) == pytest.approx(-math.exp(-1.25))


def test_eval_broadcasts_arrays(gaussian):
    """Array arguments of different shapes broadcast."""
    xi1 = np.linspace(-1.0, 1.0, 5)
    values = gaussian.eval(xi1, 0.0)
    np.testing.assert_allclose(values, np.exp(-xi1 ** 2))


def test_gaussian_xi2_derivatives(gaussian, xi2_gaussian):
    """Hermite derivatives of exp(-xi2^2) and of xi2 * exp(-xi2^2)."""
    assert gaussian.derivative_xi2(1, 0.0, 0.5) == pytest.approx(-math.exp(-0.25))
    assert gaussian.derivative_xi2(2, 0.0, 0.0) == pytest.approx(-2.0)
    # d/dxi2 [xi2 exp(-xi2^2)] = (1 - 2 xi2^2) exp(-xi2^2)
    assert xi2_gaussian.derivative_xi2(1, 0.0, 0.0) == pytest.approx(1.0)
    assert xi2_gaussian.derivative_xi2(1, 0.0, 1.0) == pytest.approx(-math.exp(-1.0))


def test_axis_derivative_matches_finite_differences(offaxis_gaussian):
    """Exact xi2-derivatives agree with central differences."""
    for n in range(1, 5):
        exact = offaxis_gaussian.axis_derivative(n, 0.3)
        approx = central_difference(lambda y: offaxis_gaussian.eval(0.3, y), 0.0, n, 1e-2)
        assert exact == pytest.approx(approx, rel=1e-5, abs=1e-6)


def test_parity_detection(gaussian, xi1_gaussian, shifted_gaussian, xi2_gaussian, offaxis_gaussian, bump):
    """Parity in xi1 follows the center and the polynomial rows."""
    assert gaussian.parity_xi1 is Parity.EVEN
    assert xi1_gaussian.parity_xi1 is Parity.ODD
    assert shifted_gaussian.parity_xi1 is Parity.NONE
    assert xi2_gaussian.parity_xi1 is Parity.EVEN
    assert offaxis_gaussian.parity_xi1 is Parity.EVEN
    assert bump.parity_xi1 is Parity.EVEN
    assert make_gaussian_hermite(poly=((1.0,), (1.0,))).parity_xi1 is Parity.NONE


def test_decay_metadata(shifted_gaussian, bump):
    """Schwartz decay scales with the truncation radius; compact support does not."""
    assert shifted_gaussian.decay.xi1_interval(10.0) == (-9.0, 11.0)
    assert bump.decay.xi1_interval(10.0) == (-1.0, 1.0)
    assert bump.decay.xi2_reach(10.0) == 1.0
    with pytest.raises(DomainError):
        Decay("polynomial", 1.0)


def test_invalid_gaussian_parameters():
    """Scale must be positive and coefficients finite."""
    with pytest.raises(DomainError):
        make_gaussian_hermite(scale=0.0)
    with pytest.raises(DomainError):
        make_gaussian_hermite(poly=((1.0, math.nan),))
    with pytest.raises(DomainError):
        make_gaussian_hermite(center=(math.inf, 0.0))
    with pytest.raises(DomainError):
        make_bump(support_radius=-1.0)


def test_gaussian_moments_closed_form(shifted_gaussian, gaussian, offaxis_gaussian):
    """exact_moment against hand-derived integrals."""
    # integral of xi^2 exp(-(xi - 1)^2) = sqrt(pi) (1 + 1/2)
    assert shifted_gaussian.exact_moment(2, 0) == pytest.approx(1.5 * SQRT_PI)
    assert gaussian.exact_moment(0, 2) == pytest.approx(-2.0 * SQRT_PI)
    assert gaussian.exact_moment(1, 0) == 0.0
    assert offaxis_gaussian.exact_moment(0, 1) == pytest.approx(math.exp(-0.25) * SQRT_PI)


def test_axis_moment_quadrature_matches_exact(shifted_gaussian, offaxis_gaussian, xi1_gaussian, spec):
    """Quadrature and closed-form moments agree."""
    for fn, m, n in ((shifted_gaussian, 3, 0), (offaxis_gaussian, 2, 2), (xi1_gaussian, 1, 2)):
        quadrature = axis_moment(fn, m, n, spec)
        exact = axis_moment(fn, m, n, spec, exact=True)
        assert quadrature == pytest.approx(exact, rel=1e-9, abs=1e-12)


def test_axis_moment_mismatched_parity_vanishes(xi1_gaussian, gaussian, spec):
    """Odd integrands on the symmetric decay interval integrate to zero."""
    assert abs(axis_moment(xi1_gaussian, 0, 0, spec)) <= 1e-10
    assert abs(axis_moment(xi1_gaussian, 2, 2, spec)) <= 1e-10
    assert abs(axis_moment(gaussian, 1, 0, spec)) <= 1e-10


def test_central_difference_weights_small_stencils():
    """Weights of the classic three-point stencils."""
    offsets, weights = central_difference_weights(1, 2)
    assert offsets == (-1, 0, 1)
    assert weights == (Fraction(-1, 2), Fraction(0), Fraction(1, 2))
    offsets, weights = central_difference_weights(2, 2)
    assert weights == (Fraction(1), Fraction(-2), Fraction(1))


@given(order=st.integers(min_value=1, max_value=8), accuracy=st.sampled_from([2, 4, 6, 8]))
def test_central_difference_weights_annihilate_constants(order, accuracy):
    """Derivative weights sum to zero and reproduce x^order / order! exactly."""
    offsets, weights = central_difference_weights(order, accuracy)
    assert sum(weights) == 0
    assert sum(w * Fraction(k) ** order for k, w in zip(offsets, weights)) == math.factorial(order)


def test_central_difference_accuracy():
    """Order-8 differences of sin at step 1e-2."""
    assert central_difference(math.sin, 0.3, 1, 1e-2) == pytest.approx(math.cos(0.3), rel=1e-10)
    assert central_difference(math.sin, 0.3, 2, 1e-2) == pytest.approx(-math.sin(0.3), rel=1e-8)


def test_bump_values_and_derivatives(bump):
    """Bump is exp(-1) at the origin, zero outside its support, and even."""
    assert bump.eval(0.0, 0.0) == pytest.approx(math.exp(-1.0))
    assert bump.eval(1.0, 0.0) == 0.0
    assert bump.eval(2.0, 3.0) == 0.0
    assert bump.axis_derivative(1, 0.0) == 0.0
    # d^2/dxi2^2 exp(-1/(1 - xi2^2)) at 0 is -2 exp(-1)
    assert bump.axis_derivative(2, 0.0) == pytest.approx(-2.0 * math.exp(-1.0), rel=1e-6)


def test_bump_derivative_order_limit(bump):
    """Derivatives beyond max_exact_derivative_order are refused."""
    with pytest.raises(DerivativeOrderError) as excinfo:
        bump.derivative_xi2(7, 0.0, 0.0)
    assert excinfo.value.max_order == 6
    with pytest.raises(DomainError):
        bump.derivative_xi2(-1, 0.0, 0.0)


def test_combination_is_linear(gaussian, xi1_gaussian):
    """Sums and scalar multiples evaluate and differentiate term by term."""
    combo = gaussian + 2.0 * xi1_gaussian
    assert isinstance(combo, Combination)
    assert combo.eval(0.5, 0.2) == pytest.approx(gaussian.eval(0.5, 0.2) + 2.0 * xi1_gaussian.eval(0.5, 0.2))
    assert combo.axis_derivative(2, 0.5) == pytest.approx(
        gaussian.axis_derivative(2, 0.5) + 2.0 * xi1_gaussian.axis_derivative(2, 0.5))
    assert combo.parity_xi1 is Parity.NONE
    assert (xi1_gaussian + xi1_gaussian).parity_xi1 is Parity.ODD


def test_combination_decay_covers_members(shifted_gaussian, gaussian):
    """The combined decay interval contains every member's interval."""
    combo = shifted_gaussian + gaussian
    lo, hi = combo.decay.xi1_interval(10.0)
    assert lo <= -10.0 and hi >= 11.0


@settings(max_examples=25, deadline=None)
@given(u=st.floats(-3.0, 3.0), v=st.floats(-3.0, 3.0), m=st.integers(0, 4), n=st.integers(0, 3))
def test_exact_moments_are_linear(u, v, m, n):
    """exact_moment of a combination is the combination of exact moments."""
    f = make_gaussian_hermite(center=(0.5, 0.0))
    g = make_gaussian_hermite(poly=((0.0, 1.0), (1.0,)))
    combo = u * f + v * g
    expected = u * f.exact_moment(m, n) + v * g.exact_moment(m, n)
    assert combo.exact_moment(m, n) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_bump_has_no_closed_form_moments(bump):
    assert bump.exact_moment(0, 0) is None


def test_test_functions_are_hashable(gaussian):
    """Frozen instances hash by value (pairings cache per function)."""
    assert hash(gaussian) == hash(make_gaussian_hermite())


def test_ragged_poly_rows_are_padded():
    """Rows of different lengths are zero-padded; a bare number is a constant polynomial."""
    g = make_gaussian_hermite(poly=((0.0, 1.0), (1.0,)))
    assert g.poly == ((0.0, 1.0), (1.0, 0.0))
    assert g.eval(0.5, 0.25) == pytest.approx((0.25 + 0.5) * math.exp(-0.3125))
    assert make_gaussian_hermite(poly=2.0).poly == ((2.0,),)
    assert make_gaussian_hermite(poly=[[1.0], [0.0, 0.0, 3.0]]).poly == ((1.0, 0.0, 0.0), (0.0, 0.0, 3.0))


def _bump_profile_derivative(j: int, u: float) -> float:
    """j-th derivative of B(u) = exp(-1/(1 - u)) for u < 1."""
    if u >= 1.0:
        return 0.0
    v = 1.0 / (1.0 - u)
    polynomial = {1: -v ** 2, 2: v ** 4 - 2.0 * v ** 3, 3: -v ** 6 + 6.0 * v ** 5 - 6.0 * v ** 4}[j]
    return polynomial * math.exp(-v)


@pytest.mark.parametrize("n, tolerance", [(2, 1e-6), (4, 1e-5), (6, 1e-2)])
def test_bump_moments_match_radial_identity(bump, spec, n, tolerance):
    """d^(2j)/dxi2^(2j) B(xi1^2 + xi2^2) at xi2 = 0 is (2j)! / j! * B^(j)(xi1^2)."""
    j = n // 2
    factor = math.factorial(n) / math.factorial(j)

    def exact(x):
        return factor * _bump_profile_derivative(j, x * x)

    expected, _ = integrate.quad(exact, -1.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=500)
    scale, _ = integrate.quad(lambda x: abs(exact(x)), -1.0, 1.0, epsabs=1e-13, epsrel=1e-10, limit=500)
    value = axis_moment(bump, 0, n, spec)
    assert abs(value - expected) <= tolerance * scale


def test_bump_derivative_noise(bump, gaussian):
    """Differenced derivatives carry a rounding bound growing with the order; closed forms carry none."""
    assert bump.derivative_noise(0) == 0.0
    noises = [bump.derivative_noise(n) for n in range(1, 7)]
    assert all(later > earlier for earlier, later in zip(noises, noises[1:]))
    assert noises[-1] > 1e6 * noises[0]
    assert gaussian.derivative_noise(4) == 0.0
    combo = gaussian + (-3.0) * bump
    assert combo.derivative_noise(4) == pytest.approx(3.0 * bump.derivative_noise(4))


def test_moment_noise_floor(bump, gaussian):
    assert moment_noise_floor(gaussian, 0, 4, (-10.0, 10.0)) == 0.0
    assert moment_noise_floor(bump, 0, 4, (-1.0, 1.0)) == pytest.approx(2.0 * bump.derivative_noise(4))
    assert moment_noise_floor(bump, 2, 4, (-2.0, 2.0)) == pytest.approx(16.0 * bump.derivative_noise(4))

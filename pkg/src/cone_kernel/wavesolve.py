"""
Fourier-side solution of the model equation in the cone C^a_+ = {x2 > a|x1|}.

Given a wave factorization A = A_plus * A_minus of an elliptic symbol with
respect to the cone, the solution is sampled as

    u(xi) = A_plus^{-1}(xi) * [ (i/2pi) PV integral of (A_minus^{-1} V)(eta1, xi2) / (xi1 - eta1) d eta1
                                + sum over c_{m,n}(a) of integral (xi1 - eta1)^m
                                  d^n/dxi2^n (A_minus^{-1} V)(eta1, xi2) d eta1 ]

Only the Fourier transform of the solution is evaluated; the inverse transform
and Sobolev-space membership are not.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.special import binom

from .errors import ConeError, ConeKernelError, DerivativeOrderError, DomainError, SolvabilityError
from .kernel import TknMode, coeff_table
from .logging_config import get_logger
from .quad import QuadratureSpec, integrate_adaptive, integrate_pv
from .testfn import TestFunction, central_difference

logger = get_logger(__name__, component="WaveSolve")

# step for xi2-derivatives of A_minus^{-1} when the factorization gives none
FACTOR_DIFFERENCE_STEP = 1e-2
ORIGIN = (0.0, 0.0)


@dataclass(frozen=True)
class ConeSpec:
    """The cone C^a_+ and its conjugate *C^a_+ = {a * tau2 > |tau1|}."""
    a: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0):
            raise DomainError(f"cone parameter a must be finite and > 0, got {self.a}")

    def contains(self, x) -> bool:
        return x[1] > self.a * abs(x[0])

    def conjugate_contains(self, tau) -> bool:
        return self.a * tau[1] > abs(tau[0])

    def on_excluded_set(self, xi, rtol: float = 1e-8) -> bool:
        """xi on {|xi1| = a |xi2|}, where the product property is not required."""
        return abs(abs(xi[0]) - self.a * abs(xi[1])) <= rtol * max(1.0, abs(xi[0]))


@dataclass(frozen=True)
class SymbolFactorization:
    """
    A_plus(xi + i tau) and A_minus(xi - i tau) with order alpha and index kappa.

    minus_inverse_derivative(n, xi1, xi2), when given, is the exact n-th
    xi2-derivative of 1 / A_minus at tau = 0; otherwise central differences are used.
    """
    alpha: float
    kappa: float
    plus: Callable
    minus: Callable
    cone: ConeSpec
    name: str = "custom"
    minus_inverse_derivative: Optional[Callable] = None

    def symbol(self, xi1, xi2) -> complex:
        """A_plus * A_minus on the real space."""
        return self.plus((xi1, xi2), ORIGIN) * self.minus((xi1, xi2), ORIGIN)

    def minus_inverse(self, xi1, xi2) -> complex:
        return 1.0 / self.minus((xi1, xi2), ORIGIN)

    def minus_inverse_xi2(self, n: int, xi1, xi2) -> complex:
        if n == 0:
            return self.minus_inverse(xi1, xi2)
        if self.minus_inverse_derivative is not None:
            return self.minus_inverse_derivative(n, xi1, xi2)
        return central_difference(lambda y: self.minus_inverse(xi1, y), xi2, n, FACTOR_DIFFERENCE_STEP)


def identity_factorization(a: float = 10.0) -> SymbolFactorization:
    """A_plus = A_minus = 1, alpha = kappa = 0."""
    return SymbolFactorization(alpha=0.0, kappa=0.0, plus=lambda xi, tau: 1.0 + 0j,
                               minus=lambda xi, tau: 1.0 + 0j, cone=ConeSpec(a), name="identity",
                               minus_inverse_derivative=lambda n, xi1, xi2: 0j)


def rational_factorization(a: float = 10.0) -> SymbolFactorization:
    """
    A(xi) = (xi2^2 + 4) / (xi2^2 + 1) split as
    A_plus(z) = (z2 + 2i) / (z2 + i), A_minus(z) = (z2 - 2i) / (z2 - i); alpha = kappa = 0.
    """
    def plus(xi, tau):
        z2 = xi[1] + 1j * tau[1]
        return (z2 + 2j) / (z2 + 1j)

    def minus(xi, tau):
        z2 = xi[1] - 1j * tau[1]
        return (z2 - 2j) / (z2 - 1j)

    def minus_inverse_derivative(n, xi1, xi2):
        # 1 / A_minus = 1 + i / (xi2 - 2i)
        return 1j * (-1) ** n * math.factorial(n) / (xi2 - 2j) ** (n + 1)

    return SymbolFactorization(alpha=0.0, kappa=0.0, plus=plus, minus=minus, cone=ConeSpec(a),
                               name="rational", minus_inverse_derivative=minus_inverse_derivative)


@dataclass(frozen=True)
class RightHandSide:
    """Fourier transform V of the right-hand side, backed by a test function."""
    fn: TestFunction

    def eval(self, xi1, xi2):
        return self.fn.eval(xi1, xi2)

    def derivative_xi2(self, n: int, xi1, xi2):
        return self.fn.derivative_xi2(n, xi1, xi2)

    @property
    def decay(self):
        return self.fn.decay


@dataclass(frozen=True)
class EllipticityResult:
    c1: float
    c2: float
    passed: bool
    location: Optional[tuple] = None


def ellipticity_check(symbol: Callable, alpha: float, sample_grid: Iterable) -> EllipticityResult:
    """
    c1 <= |A(xi)| (1 + |xi|)^(-alpha) <= c2 over the grid.

    Fails with the location of the first non-finite symbol value.
    """
    weighted = []
    for xi in sample_grid:
        xi = (float(xi[0]), float(xi[1]))
        value = complex(symbol(*xi))
        if not (math.isfinite(value.real) and math.isfinite(value.imag)):
            logger.warning("symbol not finite", method="ellipticity_check", xi=xi)
            return EllipticityResult(c1=math.nan, c2=math.nan, passed=False, location=xi)
        weighted.append(abs(value) * (1.0 + math.hypot(*xi)) ** -alpha)
    if not weighted:
        raise DomainError("sample grid is empty")
    c1, c2 = min(weighted), max(weighted)
    return EllipticityResult(c1=c1, c2=c2, passed=c1 > 0 and math.isfinite(c2))


@dataclass(frozen=True)
class FactorizationEstimate:
    plus_constant: float
    minus_constant: float
    passed: bool

    @property
    def worst_constants(self) -> tuple[float, float]:
        return self.plus_constant, self.minus_constant


def factorization_estimate_check(fact: SymbolFactorization, tau_samples: Sequence, xi_grid: Sequence,
                                 spec: Optional[QuadratureSpec] = None) -> FactorizationEstimate:
    """
    Smallest constants with
    |A_plus^{+-1}(xi + i tau)| <= c_plus (1 + |xi| + |tau|)^(+-kappa) and
    |A_minus^{+-1}(xi - i tau)| <= c_minus (1 + |xi| + |tau|)^(+-(alpha - kappa))
    over the sampled tube.

    Raises:
        ConeError: a tau sample outside the conjugate cone
    """
    for tau in tau_samples:
        if not fact.cone.conjugate_contains(tau):
            logger.warning("tau outside conjugate cone", method="factorization_estimate_check", tau=tuple(tau))
            raise ConeError(tau, fact.cone.a)
    plus_constant = minus_constant = 0.0
    for tau in tau_samples:
        for xi in xi_grid:
            weight = 1.0 + math.hypot(*xi) + math.hypot(*tau)
            plus = abs(complex(fact.plus(xi, tau)))
            minus = abs(complex(fact.minus(xi, tau)))
            plus_constant = max(plus_constant, plus * weight ** -fact.kappa, weight ** fact.kappa / plus)
            minus_power = fact.alpha - fact.kappa
            minus_constant = max(minus_constant, minus * weight ** -minus_power, weight ** minus_power / minus)
    passed = math.isfinite(plus_constant) and math.isfinite(minus_constant)
    return FactorizationEstimate(plus_constant, minus_constant, passed)


def factorization_product_residual(fact: SymbolFactorization, symbol: Callable, xi_grid: Sequence) -> float:
    """Largest relative |A_plus A_minus - A| / |A| on the grid, off the excluded set."""
    worst = 0.0
    for xi in xi_grid:
        if fact.cone.on_excluded_set(xi):
            continue
        target = complex(symbol(*xi))
        worst = max(worst, abs(fact.symbol(*xi) - target) / max(abs(target), 1e-300))
    return worst


def sobolev_condition_check(kappa: float, s: float) -> bool:
    """|kappa - s| < 1/2, the condition for existence and uniqueness."""
    return abs(kappa - s) < 0.5


@dataclass
class SolutionSample:
    xi1: float
    xi2: float
    value: Optional[complex] = None
    leading: Optional[complex] = None
    correction: Optional[complex] = None
    error: str = ""

    def to_row(self) -> dict:
        def parts(z):
            return (z.real, z.imag) if z is not None else (None, None)
        u_re, u_im = parts(self.value)
        l_re, l_im = parts(self.leading)
        c_re, c_im = parts(self.correction)
        return {"xi1": self.xi1, "xi2": self.xi2, "u_re": u_re, "u_im": u_im,
                "leading_re": l_re, "leading_im": l_im, "correction_re": c_re, "correction_im": c_im,
                "error": self.error}


SOLUTION_COLUMNS = ("xi1", "xi2", "u_re", "u_im", "leading_re", "leading_im",
                    "correction_re", "correction_im", "error")


def _reduced_rhs_derivative(fact: SymbolFactorization, V: RightHandSide, n: int, eta1, xi2) -> complex:
    """d^n/dxi2^n of A_minus^{-1} V by the product rule."""
    return sum(binom(n, j) * fact.minus_inverse_xi2(j, eta1, xi2) * V.derivative_xi2(n - j, eta1, xi2)
               for j in range(n + 1))


def _correction_noise(fact: SymbolFactorization, V: RightHandSide, m: int, n: int, xi1: float, xi2: float,
                      interval: tuple[float, float]) -> float:
    """Rounding bound of a correction integral from differenced derivatives of V."""
    lo, hi = interval
    weight = max(abs(xi1 - lo), abs(xi1 - hi)) ** m
    noise = sum(binom(n, j) * abs(fact.minus_inverse_xi2(j, xi1, xi2)) * V.fn.derivative_noise(n - j)
                for j in range(n + 1))
    return float(noise) * (hi - lo) * weight


def _solve_point(fact: SymbolFactorization, V: RightHandSide, table, point, spec: QuadratureSpec) -> SolutionSample:
    xi1, xi2 = float(point[0]), float(point[1])
    sample = SolutionSample(xi1=xi1, xi2=xi2)
    lo, hi = V.decay.xi1_interval(spec.truncation_radius)
    try:
        pv_interval = (min(lo, xi1 - 1.0), max(hi, xi1 + 1.0))
        pv, _ = integrate_pv(lambda eta: fact.minus_inverse(eta, xi2) * V.eval(eta, xi2) / (xi1 - eta),
                             (xi1,), pv_interval, spec)
        leading = 1j / (2 * math.pi) * pv
        top_order = max((entry.n for entry in table.entries), default=0)
        if top_order > V.fn.max_exact_derivative_order:
            raise DerivativeOrderError(top_order, V.fn.max_exact_derivative_order)
        corrections = []
        for entry in table.entries:
            noise = _correction_noise(fact, V, entry.m, entry.n, xi1, xi2, (lo, hi))
            integral, _ = integrate_adaptive(
                lambda eta, e=entry: (xi1 - eta) ** e.m * _reduced_rhs_derivative(fact, V, e.n, eta, xi2),
                (lo, hi), spec.with_noise_floor(noise))
            corrections.append(entry.value * integral)
        correction = complex(math.fsum(c.real for c in corrections), math.fsum(c.imag for c in corrections))
        plus_inverse = 1.0 / complex(fact.plus((xi1, xi2), ORIGIN))
        sample.leading = plus_inverse * leading
        sample.correction = plus_inverse * correction
        sample.value = sample.leading + sample.correction
    except ConeKernelError as exc:
        logger.warning(f"point failed: {exc}", method="solve_theorem2", xi=(xi1, xi2))
        sample.error = f"{type(exc).__name__}: {exc}"
    return sample


def solve_theorem2(fact: SymbolFactorization, V: RightHandSide, order: int, eval_points: Sequence,
                   mode: TknMode | str = TknMode.DERIVED, spec: Optional[QuadratureSpec] = None,
                   s: float = 0.0, workers: Optional[int] = None) -> list[SolutionSample]:
    """
    Sample the Fourier-side solution at eval_points (one SolutionSample each, input order).

    Coefficients come from coeff_table(fact.cone.a, order, mode). Failures at a
    point are recorded on that sample.

    Raises:
        SolvabilityError: |kappa - s| >= 1/2
    """
    spec = spec or QuadratureSpec()
    if not sobolev_condition_check(fact.kappa, s):
        logger.error("solvability condition violated", method="solve_theorem2", kappa=fact.kappa, s=s)
        raise SolvabilityError(f"|kappa - s| = {abs(fact.kappa - s)} must be < 1/2 (kappa={fact.kappa}, s={s})")
    table = coeff_table(fact.cone.a, order, mode)
    points = [tuple(p) for p in eval_points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        samples = list(pool.map(lambda p: _solve_point(fact, V, table, p, spec), points))
    logger.info("solution sampled", method="solve_theorem2", factorization=fact.name, points=len(samples),
                failed=sum(bool(x.error) for x in samples))
    return samples

"""
Basic functions phi(xi1, xi2) paired against the kernel.

Two families:
- GaussianHermite: polynomial times a Gaussian (Schwartz class). Every
  xi2-derivative is exact: product rule over the polynomial and the Hermite
  recurrence for derivatives of exp(-v^2/s^2).
- Bump: exp(-1/(1 - r^2/R^2)) inside radius R (compact support). Derivatives
  use order-8 central differences with step h = R * 1e-2 and exact rational
  weights.

All instances are frozen dataclasses: immutable, hashable (pairings are cached
per function) and safe to share between threads.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import hermite as herm
from numpy.polynomial import polynomial as poly
from scipy.special import binom, gamma

from .errors import DerivativeOrderError, DomainError
from .logging_config import get_logger

logger = get_logger(__name__, component="TestFunction")

BUMP_STEP_FRACTION = 1e-2
BUMP_DIFFERENCE_ACCURACY = 8
BUMP_DEFAULT_MAX_ORDER = 6
# per-sample rounding of a bump value, in units of eps * sup phi
ROUNDING_FACTOR = 4.0


class Parity(str, Enum):
    """Symmetry of phi in xi1."""
    EVEN = "even"
    ODD = "odd"
    NONE = "none"


@dataclass(frozen=True)
class Decay:
    """
    Decay metadata.

    kind is "compact" (radius = support radius) or "schwartz"
    (radius = decay scale). center is where the function concentrates.
    """
    kind: str
    radius: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("compact", "schwartz"):
            raise DomainError(f"unknown decay kind {self.kind!r}")
        if not self.radius > 0:
            raise DomainError(f"decay radius must be > 0, got {self.radius}")

    def _reach(self, truncation_radius: float) -> float:
        if self.kind == "compact":
            return self.radius
        return truncation_radius * self.radius

    def xi1_interval(self, truncation_radius: float) -> tuple[float, float]:
        """Interval outside of which phi(., xi2) vanishes or is negligible."""
        reach = self._reach(truncation_radius)
        return self.center[0] - reach, self.center[0] + reach

    def xi2_reach(self, truncation_radius: float) -> float:
        """Largest |xi2| at which phi is not negligible."""
        return abs(self.center[1]) + self._reach(truncation_radius)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "radius": self.radius, "center": list(self.center)}


class TestFunction(ABC):
    """
    A basic function phi(xi1, xi2) with exact xi2-derivatives.

    Subclasses implement eval and derivative_xi2; axis_derivative is the
    xi2 = 0 restriction. Functions add and scale into Combination objects.
    """

    __test__ = False  # not a pytest class

    @abstractmethod
    def eval(self, xi1, xi2):
        """Value of phi at (xi1, xi2); numpy arrays broadcast."""

    @abstractmethod
    def derivative_xi2(self, n: int, xi1, xi2):
        """n-th derivative of phi in xi2 at (xi1, xi2)."""

    @property
    @abstractmethod
    def parity_xi1(self) -> Parity:
        ...

    @property
    @abstractmethod
    def decay(self) -> Decay:
        ...

    @property
    def max_exact_derivative_order(self) -> float:
        return math.inf

    def axis_derivative(self, n: int, xi1):
        """n-th xi2-derivative on the axis xi2 = 0."""
        return self.derivative_xi2(n, xi1, 0.0)

    def exact_moment(self, m: int, n: int) -> Optional[float]:
        """Closed-form integral of xi1^m * d^n phi(xi1, 0); None when unavailable."""
        return None

    def derivative_noise(self, n: int) -> float:
        """Bound on the rounding error of derivative_xi2(n, ...); 0 for closed forms."""
        return 0.0

    def _check_order(self, n: int):
        if n < 0:
            raise DomainError(f"derivative order must be >= 0, got {n}")
        if n > self.max_exact_derivative_order:
            logger.warning("derivative order too high", method="derivative_xi2",
                           order=n, max_order=self.max_exact_derivative_order)
            raise DerivativeOrderError(n, self.max_exact_derivative_order)

    def __add__(self, other: "TestFunction") -> "Combination":
        if not isinstance(other, TestFunction):
            return NotImplemented
        return Combination(_terms_of(self) + _terms_of(other))

    def __rmul__(self, weight: float) -> "Combination":
        return Combination(tuple((weight * w, fn) for w, fn in _terms_of(self)))

    def describe(self) -> dict:
        return {"family": type(self).__name__}


def _same_shape(xi1, xi2):
    """polyval2d needs arguments of identical shape."""
    if np.shape(xi1) == np.shape(xi2):
        return xi1, xi2
    return np.broadcast_arrays(xi1, xi2)


def _terms_of(fn: TestFunction) -> tuple:
    if isinstance(fn, Combination):
        return fn.terms
    return ((1.0, fn),)


@dataclass(frozen=True)
class GaussianHermite(TestFunction):
    """
    phi = P(xi1, xi2) * exp(-((xi1 - c1)^2 + (xi2 - c2)^2) / s^2).

    poly[i][j] multiplies xi1^i * xi2^j (absolute coordinates).
    """
    center: tuple[float, float] = (0.0, 0.0)
    scale: float = 1.0
    poly: tuple[tuple[float, ...], ...] = ((1.0,),)

    @cached_property
    def _coeffs(self) -> np.ndarray:
        return np.array(self.poly, dtype=float)

    def eval(self, xi1, xi2):
        xi1, xi2 = _same_shape(xi1, xi2)
        c1, c2 = self.center
        s2 = self.scale * self.scale
        weight = np.exp(-((xi1 - c1) ** 2 + (xi2 - c2) ** 2) / s2)
        return poly.polyval2d(xi1, xi2, self._coeffs) * weight

    def _gaussian_derivative(self, order: int, xi2):
        """d^order/dxi2^order of exp(-(xi2 - c2)^2 / s^2)."""
        s = self.scale
        v = (xi2 - self.center[1]) / s
        hermite_m = herm.hermval(v, [0.0] * order + [1.0])
        return (-1.0 / s) ** order * hermite_m * np.exp(-v * v)

    def derivative_xi2(self, n: int, xi1, xi2):
        self._check_order(n)
        xi1, xi2 = _same_shape(xi1, xi2)
        c1 = self.center[0]
        gauss1 = np.exp(-((xi1 - c1) ** 2) / (self.scale * self.scale))
        total = 0.0
        coeffs = self._coeffs
        for j in range(n + 1):
            if j >= coeffs.shape[1]:
                break
            dpoly = poly.polyder(coeffs, m=j, axis=1) if j else coeffs
            total = total + binom(n, j) * poly.polyval2d(xi1, xi2, dpoly) \
                * self._gaussian_derivative(n - j, xi2)
        return total * gauss1

    @property
    def parity_xi1(self) -> Parity:
        if self.center[0] != 0.0:
            return Parity.NONE
        rows = [i for i, row in enumerate(self._coeffs) if np.any(row != 0.0)]
        if not rows or all(i % 2 == 0 for i in rows):
            return Parity.EVEN
        if all(i % 2 == 1 for i in rows):
            return Parity.ODD
        return Parity.NONE

    @property
    def decay(self) -> Decay:
        return Decay("schwartz", self.scale, self.center)

    def _gaussian_moment(self, p: int) -> float:
        """Integral of xi1^p * exp(-(xi1 - c1)^2 / s^2) over the real line."""
        c1, s = self.center[0], self.scale
        total = []
        for r in range(0, p + 1, 2):
            total.append(binom(p, r) * c1 ** (p - r) * s ** (r + 1) * gamma((r + 1) / 2))
        return math.fsum(total)

    def exact_moment(self, m: int, n: int) -> float:
        self._check_order(n)
        c2, s = self.center[1], self.scale
        v0 = -c2 / s
        axis_gauss = math.exp(-v0 * v0)
        coeffs = self._coeffs
        pieces = []
        for j in range(min(n, coeffs.shape[1] - 1) + 1):
            dpoly = poly.polyder(coeffs, m=j, axis=1) if j else coeffs
            hermite_m = herm.hermval(v0, [0.0] * (n - j) + [1.0])
            factor = binom(n, j) * (-1.0 / s) ** (n - j) * hermite_m * axis_gauss
            for i, a_i0 in enumerate(dpoly[:, 0]):
                if a_i0 != 0.0:
                    pieces.append(factor * a_i0 * self._gaussian_moment(m + i))
        return math.fsum(pieces)

    def describe(self) -> dict:
        return {"family": "gaussian", "center": list(self.center), "scale": self.scale,
                "poly": [list(row) for row in self.poly]}


@lru_cache(maxsize=None)
def central_difference_weights(order: int, accuracy: int = BUMP_DIFFERENCE_ACCURACY) \
        -> tuple[tuple[int, ...], tuple[Fraction, ...]]:
    """
    Exact central-difference weights for the order-th derivative (Fornberg's algorithm).

    Returns (offsets, weights) on the unit-spaced stencil -p..p with
    p = (2 * floor((order + 1) / 2) - 1 + accuracy) // 2.
    """
    if order < 0 or accuracy < 2 or accuracy % 2:
        raise DomainError(f"need order >= 0 and even accuracy >= 2, got {order}, {accuracy}")
    half = max((2 * ((order + 1) // 2) - 1 + accuracy) // 2, 1)
    nodes = [Fraction(k) for k in range(-half, half + 1)]
    size = len(nodes)
    c = [[Fraction(0)] * (order + 1) for _ in range(size)]
    c[0][0] = Fraction(1)
    c1 = Fraction(1)
    c4 = nodes[0]
    for i in range(1, size):
        mn = min(i, order)
        c2 = Fraction(1)
        c5, c4 = c4, nodes[i]
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2
            for k in range(mn, 0, -1):
                c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3
            c[j][0] = c4 * c[j][0] / c3
        c1 = c2
    return tuple(range(-half, half + 1)), tuple(c[i][order] for i in range(size))


def central_difference(fn, x, order: int, step: float, accuracy: int = BUMP_DIFFERENCE_ACCURACY):
    """
    order-th derivative of fn at x by central differences.

    Mirrored stencil points are summed in pairs, so an even fn gives exactly 0
    for odd orders at x = 0.
    """
    if order == 0:
        return fn(x)
    offsets, weights = central_difference_weights(order, accuracy)
    half = len(offsets) // 2
    sign = -1.0 if order % 2 else 1.0
    total = float(weights[half]) * fn(x) if weights[half] else 0.0
    for k in range(half, 0, -1):
        w = float(weights[half + k])
        if w:
            plus, minus = fn(x + k * step), fn(x - k * step)
            total = total + w * (plus + sign * minus)
    return total / step ** order


@dataclass(frozen=True)
class Bump(TestFunction):
    """Smooth bump exp(-1/(1 - r^2/R^2)) on r < R, zero outside."""
    support_radius: float = 1.0
    max_order: int = BUMP_DEFAULT_MAX_ORDER

    def eval(self, xi1, xi2):
        rho = (np.asarray(xi1) ** 2 + np.asarray(xi2) ** 2) / (self.support_radius ** 2)
        inside = rho < 1.0
        safe = np.where(inside, rho, 0.0)
        value = np.where(inside, np.exp(-1.0 / (1.0 - safe)), 0.0)
        return value if value.ndim else float(value)

    @property
    def step(self) -> float:
        return self.support_radius * BUMP_STEP_FRACTION

    def derivative_xi2(self, n: int, xi1, xi2):
        self._check_order(n)
        return central_difference(lambda y: self.eval(xi1, y), xi2, n, self.step)

    def derivative_noise(self, n: int) -> float:
        # stencil weights times the rounding of each sample, sup phi = exp(-1)
        if n == 0:
            return 0.0
        _, weights = central_difference_weights(n)
        total = float(sum(abs(w) for w in weights))
        return ROUNDING_FACTOR * np.finfo(float).eps * total * math.exp(-1.0) / self.step ** n

    @property
    def parity_xi1(self) -> Parity:
        return Parity.EVEN

    @property
    def decay(self) -> Decay:
        return Decay("compact", self.support_radius)

    @property
    def max_exact_derivative_order(self) -> int:
        return self.max_order

    def describe(self) -> dict:
        return {"family": "bump", "support_radius": self.support_radius}


@dataclass(frozen=True)
class Combination(TestFunction):
    """Finite linear combination sum(w * phi)."""
    terms: tuple = field(default_factory=tuple)

    def eval(self, xi1, xi2):
        return sum(w * fn.eval(xi1, xi2) for w, fn in self.terms)

    def derivative_xi2(self, n: int, xi1, xi2):
        self._check_order(n)
        return sum(w * fn.derivative_xi2(n, xi1, xi2) for w, fn in self.terms)

    def derivative_noise(self, n: int) -> float:
        return math.fsum(abs(w) * fn.derivative_noise(n) for w, fn in self.terms)

    @property
    def parity_xi1(self) -> Parity:
        parities = {fn.parity_xi1 for _, fn in self.terms}
        return parities.pop() if len(parities) == 1 else Parity.NONE

    @property
    def decay(self) -> Decay:
        decays = [fn.decay for _, fn in self.terms]
        kind = "compact" if all(d.kind == "compact" for d in decays) else "schwartz"
        lo = min(d.xi1_interval(1.0)[0] for d in decays)
        hi = max(d.xi1_interval(1.0)[1] for d in decays)
        # recentred; radius covers every member at any truncation_radius >= 1
        reach2 = max(d.xi2_reach(1.0) for d in decays)
        radius = max((hi - lo) / 2, reach2)
        return Decay(kind, radius, ((lo + hi) / 2, 0.0))

    @property
    def max_exact_derivative_order(self):
        return min(fn.max_exact_derivative_order for _, fn in self.terms)

    def exact_moment(self, m: int, n: int) -> Optional[float]:
        values = [fn.exact_moment(m, n) for _, fn in self.terms]
        if any(v is None for v in values):
            return None
        return math.fsum(w * v for (w, _), v in zip(self.terms, values))

    def describe(self) -> dict:
        return {"family": "combination",
                "terms": [{"weight": w, **fn.describe()} for w, fn in self.terms]}


def _check_finite(values: Sequence[float], name: str):
    if not all(math.isfinite(v) for v in values):
        raise DomainError(f"{name} must be finite, got {list(values)}")


def make_gaussian_hermite(center=(0.0, 0.0), scale: float = 1.0, poly=((1.0,),)) -> GaussianHermite:
    """
    Build a Gaussian-Hermite test function.

    Args:
        center: (c1, c2) center of the Gaussian factor
        scale: Gaussian width s > 0
        poly: bivariate coefficients, poly[i][j] multiplies xi1^i * xi2^j

    Raises:
        DomainError: scale <= 0 or any non-finite coefficient
    """
    center = tuple(float(c) for c in center)
    if len(center) != 2:
        raise DomainError(f"center must have two coordinates, got {center}")
    _check_finite(center, "center")
    if not (math.isfinite(scale) and scale > 0):
        raise DomainError(f"scale must be finite and > 0, got {scale}")
    if isinstance(poly, (int, float)):
        rows = [[float(poly)]]
    else:
        rows = [[float(v) for v in np.atleast_1d(row)] for row in poly]
    width = max(len(row) for row in rows)
    coeffs = tuple(tuple(row + [0.0] * (width - len(row))) for row in rows)
    _check_finite([v for row in coeffs for v in row], "poly coefficients")
    fn = GaussianHermite(center=center, scale=float(scale), poly=coeffs)
    logger.debug("built gaussian-hermite", method="make_gaussian_hermite",
                 center=center, scale=scale, parity=fn.parity_xi1.value)
    return fn


def make_bump(support_radius: float = 1.0, max_order: int = BUMP_DEFAULT_MAX_ORDER) -> Bump:
    """Build the standard bump of radius support_radius."""
    if not (math.isfinite(support_radius) and support_radius > 0):
        raise DomainError(f"support_radius must be finite and > 0, got {support_radius}")
    return Bump(support_radius=float(support_radius), max_order=int(max_order))


def moment_noise_floor(f: TestFunction, m: int, n: int, interval: tuple[float, float]) -> float:
    """Rounding bound of the integral of xi1^m * d^n phi(xi1, 0) over interval."""
    noise = f.derivative_noise(n)
    if not noise:
        return 0.0
    lo, hi = interval
    return noise * (hi - lo) * max(abs(lo), abs(hi)) ** m


def axis_moment(f: TestFunction, m: int, n: int, spec=None, exact: bool = False) -> float:
    """
    Integral over the real line of xi1^m * d^n phi(xi1, 0) / dxi2^n.

    Integrated adaptively over the decay interval of f, with the absolute
    tolerance raised to moment_noise_floor when derivatives are differenced.
    With exact=True a closed form is used when the family provides one.

    Raises:
        DerivativeOrderError: n above f.max_exact_derivative_order
        NonConvergenceError: quadrature did not reach tolerance
    """
    from .quad import QuadratureSpec, integrate_adaptive

    if m < 0:
        raise DomainError(f"moment order must be >= 0, got {m}")
    f._check_order(n)
    if exact:
        value = f.exact_moment(m, n)
        if value is not None:
            return value
    spec = spec or QuadratureSpec()
    interval = f.decay.xi1_interval(spec.truncation_radius)
    spec = spec.with_noise_floor(moment_noise_floor(f, m, n, interval))
    value, _ = integrate_adaptive(lambda x: x ** m * f.axis_derivative(n, x), interval, spec)
    return value

"""
Distributional pairings with a test function phi.

- leading_pairing: (i/2pi) PV integral of phi(xi1, 0) / xi1, the a -> infinity limit
- moment_delta_pairing: integral of xi1^m d^n phi(xi1, 0) (delta^(n) pairs without (-1)^n)
- rough_expansion: sum over n of (i/2pi) (-1)^n / (n! a^n) PV integral of d^n phi(xi1, 0) / xi1
- sharp_expansion: leading term plus coeff_table entries times moments
- lemma1_dft_check: moments computed directly and through the discrete
  Fourier transform (forward transform exp(+i x xi), no 2pi, so F(delta) = 1)
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.fft import fftfreq, ifft

from .errors import DomainError, GridResolutionError
from .kernel import TknMode, coeff_table, rough_coefficients
from .logging_config import get_logger
from .quad import PairingResult, QuadratureSpec, integrate_adaptive, integrate_pv
from .testfn import TestFunction, axis_moment, central_difference_weights, moment_noise_floor

logger = get_logger(__name__, component="Pairing")

# accuracy of the stencil that differentiates the sampled transform at 0
DFT_STENCIL_ACCURACY = 16

__all__ = [
    "PairingResult", "leading_pairing", "moment_delta_pairing", "rough_expansion",
    "sharp_expansion", "compare_expansions", "lemma1_dft_check", "Lemma1Check",
]


def complex_fsum(values: Sequence[complex]) -> complex:
    """Exactly rounded sum of complex values, independent of order."""
    values = [complex(v) for v in values]
    return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))


def _symmetric_interval(f: TestFunction, spec: QuadratureSpec) -> tuple[float, float]:
    lo, hi = f.decay.xi1_interval(spec.truncation_radius)
    half_width = max(abs(lo), abs(hi))
    return -half_width, half_width


def _pv_over_xi1(f: TestFunction, n: int, spec: QuadratureSpec):
    """PV integral of d^n phi(xi1, 0) / xi1."""
    interval = _symmetric_interval(f, spec)
    noise = f.derivative_noise(n)
    if noise:
        # differencing noise divided by |xi1| integrates to a log over the excised range
        spec = spec.with_noise_floor(2.0 * noise * math.log(interval[1] / spec.excision_schedule[-1]))
    return integrate_pv(lambda x: f.axis_derivative(n, x) / x, (0.0,), interval, spec)


def leading_pairing(f: TestFunction, spec: Optional[QuadratureSpec] = None) -> PairingResult:
    """(i/2pi) * PV integral of phi(xi1, 0) / xi1."""
    spec = spec or QuadratureSpec()
    pv, error = _pv_over_xi1(f, 0, spec)
    value = 1j / (2 * math.pi) * pv
    logger.debug("leading term", method="leading_pairing", pv=pv)
    return PairingResult(value=value, error_estimate=error / (2 * math.pi), terms=(("leading", value),))


def moment_delta_pairing(f: TestFunction, m: int, n: int, spec: Optional[QuadratureSpec] = None,
                         exact: bool = False) -> PairingResult:
    """
    (tilde-delta^(m) x delta^(n), phi) = integral of xi1^m * d^n phi(xi1, 0) / dxi2^n.

    The n-th axis derivative enters with no (-1)^n factor. The error estimate
    is at least the rounding bound of differenced derivatives.
    """
    spec = spec or QuadratureSpec()
    value = axis_moment(f, m, n, spec, exact=exact)
    floor = moment_noise_floor(f, m, n, f.decay.xi1_interval(spec.truncation_radius))
    error = max(spec.abs_tol, spec.rel_tol * abs(value), floor)
    return PairingResult(value=complex(value), error_estimate=error, terms=((f"moment(m={m},n={n})", complex(value)),))


def rough_expansion(f: TestFunction, a: float, order: int, spec: Optional[QuadratureSpec] = None) -> PairingResult:
    """
    Truncated rough expansion through xi2-derivative order `order`.

    Term n is (i/2pi) (-1)^n / (n! a^n) * PV integral of d^n phi(xi1, 0) / xi1.
    """
    spec = spec or QuadratureSpec()
    if order < 0:
        raise DomainError(f"order must be >= 0, got {order}")
    terms, error = [], 0.0
    for coefficient in rough_coefficients(a, order):
        pv, pv_error = _pv_over_xi1(f, coefficient.n, spec)
        terms.append((f"rough(n={coefficient.n})", coefficient.value * pv))
        error += abs(coefficient.value) * pv_error
    return PairingResult(value=complex_fsum(v for _, v in terms), error_estimate=error, terms=tuple(terms))


def sharp_expansion(f: TestFunction, a: float, order: int, mode: TknMode | str = TknMode.DERIVED,
                    spec: Optional[QuadratureSpec] = None, nb: float = 1.0,
                    exact_moments: bool = False) -> PairingResult:
    """
    leading_pairing + sum of c_{m,n}(a) * moment_delta_pairing(f, m, n) over coeff_table(a, order, mode).

    The logarithmic block is omitted (it vanishes as N -> infinity). Terms are
    listed in coeff_table order, so a lower order's terms are a prefix of a
    higher order's.
    """
    spec = spec or QuadratureSpec()
    table = coeff_table(a, order, mode, nb)
    leading = leading_pairing(f, spec)
    terms = [("leading", leading.value)]
    error = leading.error_estimate
    for entry in table.entries:
        moment = moment_delta_pairing(f, entry.m, entry.n, spec, exact=exact_moments)
        terms.append((entry.label, entry.value * moment.value))
        error += abs(entry.value) * moment.error_estimate
    logger.debug("sharp expansion", method="sharp_expansion", a=a, order=order, terms=len(terms))
    return PairingResult(value=complex_fsum(v for _, v in terms), error_estimate=error, terms=tuple(terms))


@dataclass(frozen=True)
class ExpansionComparison:
    a: float
    order: int
    rough: PairingResult
    sharp: PairingResult

    @property
    def difference(self) -> float:
        return abs(self.rough.value - self.sharp.value)

    def to_dict(self) -> dict:
        return {"a": self.a, "order": self.order, "rough": self.rough.to_dict(),
                "sharp": self.sharp.to_dict(), "difference": self.difference}


def compare_expansions(f: TestFunction, a: float, order: int, mode: TknMode | str = TknMode.DERIVED,
                       spec: Optional[QuadratureSpec] = None) -> ExpansionComparison:
    """Rough and sharp expansions of the same order, side by side."""
    spec = spec or QuadratureSpec()
    return ExpansionComparison(a=float(a), order=order, rough=rough_expansion(f, a, order, spec),
                               sharp=sharp_expansion(f, a, order, mode, spec))


@dataclass(frozen=True)
class Lemma1Check:
    k: int
    direct: float
    dft: complex
    discrepancy: float

    def __float__(self):
        return self.discrepancy


def lemma1_dft_check(k: int, f1d: TestFunction, grid_size: int = 4096, domain_halfwidth: float = 20.0,
                     spec: Optional[QuadratureSpec] = None) -> Lemma1Check:
    """
    Integral of xi^k phi(xi) computed by adaptive quadrature and by the DFT.

    phi is the axis trace xi -> f1d.eval(xi, 0). The DFT route samples the
    transform F(x) = integral of phi(xi) exp(i x xi) on the FFT frequency grid
    x_j = j * pi / L and differentiates it at x = 0 with a central-difference
    stencil of accuracy DFT_STENCIL_ACCURACY over those samples: the moment is
    (-i)^k F^(k)(0). The transform is never inverted.

    Raises:
        GridResolutionError: halfwidth below |center| + 10 * scale, step above
            scale / 4, or fewer frequencies than the stencil needs
    """
    spec = spec or QuadratureSpec()
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    decay = f1d.decay
    L = float(domain_halfwidth)
    h = 2.0 * L / grid_size
    if L < abs(decay.center[0]) + 10.0 * decay.radius:
        raise GridResolutionError(
            f"halfwidth {L} does not cover |center| + 10 * scale = {abs(decay.center[0]) + 10 * decay.radius}")
    if h > decay.radius / 4.0:
        raise GridResolutionError(f"grid step {h:.4g} exceeds scale / 4 = {decay.radius / 4:.4g}")

    offsets, weights = central_difference_weights(k, DFT_STENCIL_ACCURACY)
    half = len(offsets) // 2
    if 2 * half + 1 > grid_size:
        raise GridResolutionError(f"{grid_size} frequencies cannot hold the {2 * half + 1}-point stencil for k={k}")

    xi = -L + h * np.arange(grid_size)
    samples = np.asarray(f1d.eval(xi, np.zeros_like(xi)), dtype=complex)
    x = 2.0 * np.pi * fftfreq(grid_size, d=h)
    transform = h * grid_size * ifft(samples) * np.exp(-1j * x * L)
    # F(p * dx) sits at index p mod grid_size
    dx = np.pi / L
    sign = -1.0 if k % 2 else 1.0
    derivative = complex(float(weights[half]) * transform[0]) if weights[half] else 0j
    for p in range(half, 0, -1):
        w = float(weights[half + p])
        if w:
            derivative += w * (transform[p] + sign * transform[-p])
    dft_moment = complex((-1j) ** k * derivative / dx ** k)

    direct, _ = integrate_adaptive(lambda t: t ** k * f1d.eval(t, 0.0), (-L, L), spec)
    discrepancy = abs(dft_moment - direct)
    logger.debug("lemma 1 check", method="lemma1_dft_check", k=k, direct=direct, discrepancy=discrepancy)
    return Lemma1Check(k=k, direct=direct, dft=dft_moment, discrepancy=discrepancy)

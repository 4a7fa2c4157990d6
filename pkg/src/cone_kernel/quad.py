"""
Quadrature engine.

- integrate_adaptive: scipy QUADPACK with explicit non-convergence reporting
- integrate_pv: principal values by symmetric excision plus extrapolation
  eps -> 0 over QuadratureSpec.excision_schedule
- limit_extrapolate: polynomial (Neville) extrapolation to parameter 0
- inner_t_integral: the t-integral of phi(xi1, b t) / (xi1^2 - t^2) under one
  of the PrescriptionMode interpretations of the singular lines t = +-xi1
- inner_pv_subtracted: the PV of inner_t_integral by singularity
  subtraction, bounded down to xi1 -> 0 (used for the real part of pairings)
- regularized_inner_integral: the same integral with kernel
  1 / (xi1^2 - (t + i tau)^2), extrapolated tau -> 0+ (independent oracle)
- pairing_exact: (K_a, phi) = (1/2pi^2) * double integral after the
  substitution a * xi2 = t

PV values are assembled from mirrored pieces with math.fsum, so odd
integrands on symmetric intervals come out as exact zeros.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Callable, Optional, Sequence, TYPE_CHECKING

import numpy as np
from scipy import integrate

from .errors import DomainError, NonConvergenceError, PoleSeparationError
from .logging_config import get_logger

if TYPE_CHECKING:
    from .testfn import TestFunction

logger = get_logger(__name__, component="Quadrature")


def _halving(start: float, count: int) -> tuple[float, ...]:
    return tuple(start * 2.0 ** -j for j in range(count))


@dataclass(frozen=True)
class QuadratureSpec:
    """
    Tolerances, schedules and truncation for every quadrature in the toolkit.

    Attributes:
        abs_tol, rel_tol: QUADPACK epsabs / epsrel
        max_subdivisions: QUADPACK limit
        excision_schedule: decreasing eps values for principal values
        truncation_radius: Schwartz tails are cut at truncation_radius * decay scale
        tau_schedule: decreasing tau values for the regularized-kernel oracle
        extrapolation_order: polynomial degree used by limit_extrapolate
    """
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 2000
    excision_schedule: tuple[float, ...] = field(default_factory=lambda: _halving(1e-2, 6))
    truncation_radius: float = 10.0
    tau_schedule: tuple[float, ...] = field(default_factory=lambda: _halving(0.02, 5))
    extrapolation_order: int = 4

    def __post_init__(self):
        object.__setattr__(self, "excision_schedule", tuple(float(e) for e in self.excision_schedule))
        object.__setattr__(self, "tau_schedule", tuple(float(t) for t in self.tau_schedule))
        problems = self.problems()
        if problems:
            raise DomainError("invalid QuadratureSpec: " + "; ".join(problems))

    def problems(self) -> list[str]:
        """Every violated invariant, as readable strings."""
        problems = []
        if not self.abs_tol > 0:
            problems.append(f"abs_tol must be > 0, got {self.abs_tol}")
        if not self.rel_tol > 0:
            problems.append(f"rel_tol must be > 0, got {self.rel_tol}")
        if int(self.max_subdivisions) < 1:
            problems.append(f"max_subdivisions must be >= 1, got {self.max_subdivisions}")
        if not self.truncation_radius > 0:
            problems.append(f"truncation_radius must be > 0, got {self.truncation_radius}")
        if int(self.extrapolation_order) < 1:
            problems.append(f"extrapolation_order must be >= 1, got {self.extrapolation_order}")
        for name in ("excision_schedule", "tau_schedule"):
            schedule = getattr(self, name)
            if len(schedule) < 3:
                problems.append(f"{name} needs at least 3 entries")
            elif not all(e > 0 for e in schedule) or any(
                    later >= earlier for earlier, later in zip(schedule, schedule[1:])):
                problems.append(f"{name} must be positive and strictly decreasing")
        return problems

    def relaxed(self, factor: float) -> "QuadratureSpec":
        """Copy with both tolerances multiplied by factor."""
        return replace(self, abs_tol=self.abs_tol * factor, rel_tol=self.rel_tol * factor)

    def with_noise_floor(self, noise: float) -> "QuadratureSpec":
        """Copy whose abs_tol is at least `noise`, the rounding bound of the integral."""
        if not noise > self.abs_tol:
            return self
        return replace(self, abs_tol=float(noise))

    @property
    def max_excision(self) -> float:
        return self.excision_schedule[0]

    def for_pole_separation(self, separation: float) -> "QuadratureSpec":
        """Copy whose excision schedule fits between poles `separation` apart."""
        limit = separation / 4.0
        if self.max_excision <= limit:
            return self
        factor = limit / self.max_excision
        return replace(self, excision_schedule=tuple(e * factor for e in self.excision_schedule))

    def to_dict(self) -> dict:
        data = asdict(self)
        data["excision_schedule"] = list(self.excision_schedule)
        data["tau_schedule"] = list(self.tau_schedule)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "QuadratureSpec":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise DomainError(f"unknown QuadratureSpec fields: {unknown}")
        return cls(**known)


class PrescriptionMode(str, Enum):
    """How 1/(xi1^2 - t^2) is read on its singular lines t = +-xi1."""
    PV = "pv"
    PLUS_I0 = "plus_i0"
    MINUS_I0 = "minus_i0"
    PAPER = "paper"
    SIGNED = "signed"

    @classmethod
    def parse(cls, value) -> "PrescriptionMode":
        try:
            return cls(value)
        except ValueError:
            raise DomainError(f"unknown prescription mode {value!r}; "
                              f"choose from {[m.value for m in cls]}") from None

    def boundary_term(self, phi_plus, phi_minus):
        """Bracket multiplying i*pi/(2 xi1), from phi(xi1, +-b xi1)."""
        if self is PrescriptionMode.PV:
            return 0.0 * phi_plus
        if self is PrescriptionMode.PLUS_I0:
            return phi_plus - phi_minus
        if self is PrescriptionMode.MINUS_I0:
            return phi_minus - phi_plus
        if self is PrescriptionMode.PAPER:
            return 0.5 * (phi_plus + phi_minus)
        return phi_plus + phi_minus


def _is_complex(g: Callable, interval: tuple[float, float]) -> bool:
    sample = g(interval[0] + 0.6180339887 * (interval[1] - interval[0]))
    return np.iscomplexobj(sample)


def integrate_adaptive(g: Callable, interval: tuple[float, float], spec: Optional[QuadratureSpec] = None,
                       points: Optional[Sequence[float]] = None):
    """
    Adaptive Gauss-Kronrod integration of g over a finite interval.

    Complex-valued g is integrated as two real integrals.

    Args:
        g: integrand, finite on the interval
        interval: (lo, hi)
        spec: tolerances and subdivision budget
        points: optional interior breakpoints (near-singular features)

    Returns:
        (value, error_estimate)

    Raises:
        NonConvergenceError: budget exhausted and error estimate above tolerance
    """
    spec = spec or QuadratureSpec()
    lo, hi = float(interval[0]), float(interval[1])
    if lo == hi:
        return 0.0, 0.0
    if _is_complex(g, (lo, hi)):
        re, re_err = integrate_adaptive(lambda t: np.real(g(t)), (lo, hi), spec, points)
        im, im_err = integrate_adaptive(lambda t: np.imag(g(t)), (lo, hi), spec, points)
        return complex(re, im), math.hypot(re_err, im_err)

    inner = [p for p in (points or ()) if lo < p < hi]
    logger.trace_event("integrate_adaptive", method="integrate_adaptive")
    value, error, converged = _quadpack(g, lo, hi, spec, inner)
    tolerance = max(spec.abs_tol, spec.rel_tol * abs(value))
    if not converged and error > 10 * tolerance:
        logger.warning("adaptive quadrature did not converge", method="integrate_adaptive",
                       interval=(lo, hi), value=value, error=error)
        raise NonConvergenceError(
            f"adaptive quadrature on [{lo}, {hi}] stopped with error {error:.3g} "
            f"above tolerance {tolerance:.3g}", value=value, error_estimate=error)
    return float(value), float(error)


def quadrature_call_counts() -> dict:
    """Adaptive quadrature calls made so far in this process."""
    return logger.get_event_counts()


def _quadpack(g, lo, hi, spec, points):
    kwargs = dict(epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=int(spec.max_subdivisions),
                  full_output=1)
    if points:
        kwargs["points"] = points
    result = integrate.quad(lambda t: float(g(t)), lo, hi, **kwargs)
    # full_output: (value, error, infodict) on success, a message is appended otherwise
    return result[0], result[1], len(result) == 3


def limit_extrapolate(values: Sequence[tuple[float, complex]], order: Optional[int] = None,
                      noise_floor: float = 0.0):
    """
    Extrapolate a sequence (parameter, value) to parameter -> 0.

    Polynomial interpolation (Neville) through the last order + 1 points,
    evaluated at 0; all points when order is None.

    Returns:
        (limit, error_estimate) where error_estimate is the size of the last
        Neville correction

    Raises:
        DomainError: fewer than 3 points or parameters not strictly decreasing to 0
        NonConvergenceError: values oscillate without settling
    """
    if len(values) < 3:
        raise DomainError(f"limit_extrapolate needs at least 3 points, got {len(values)}")
    params = [float(p) for p, _ in values]
    if any(p <= 0 for p in params) or any(b >= a for a, b in zip(params, params[1:])):
        raise DomainError(f"parameters must be positive and strictly decreasing, got {params}")
    ys = [v for _, v in values]

    diffs = [abs(b - a) for a, b in zip(ys, ys[1:])]
    signs = [np.sign(np.real(b - a)) for a, b in zip(ys, ys[1:])]
    alternating = all(s1 * s2 < 0 for s1, s2 in zip(signs, signs[1:]))
    if alternating and diffs[-1] >= diffs[0] and diffs[-1] > noise_floor:
        logger.warning("oscillating sequence", method="limit_extrapolate", diffs=diffs)
        raise NonConvergenceError("extrapolation sequence oscillates without converging",
                                  value=ys[-1], error_estimate=max(diffs))

    if order is not None:
        keep = min(len(ys), int(order) + 1)
        params, ys = params[-keep:], ys[-keep:]
    tableau = list(ys)
    previous = tableau[-1]
    for level in range(1, len(ys)):
        # newest estimate of the previous degree
        previous = tableau[-1]
        for i in range(len(ys) - level):
            x_i, x_j = params[i], params[i + level]
            tableau[i] = (x_j * tableau[i] - x_i * tableau[i + 1]) / (x_j - x_i)
        tableau.pop()
    value = tableau[0]
    return value, float(abs(value - previous))


def _pole_layout(poles: Sequence[float], interval: tuple[float, float], spec: QuadratureSpec):
    lo, hi = interval
    inside = []
    for p in sorted(set(float(p) for p in poles)):
        if p < lo or p > hi:
            continue
        if p == lo or p == hi:
            raise PoleSeparationError(f"pole {p} lies on an end of the interval [{lo}, {hi}]")
        inside.append(p)
    eps0 = spec.max_excision
    for left, right in zip(inside, inside[1:]):
        if right - left <= 2 * eps0:
            raise PoleSeparationError(
                f"poles {left} and {right} are closer than 2 * max excision ({2 * eps0})")
    for p in inside:
        if p - lo <= eps0 or hi - p <= eps0:
            raise PoleSeparationError(f"pole {p} is within the excision radius of an interval end")
    return inside


def integrate_pv(g: Callable, poles: Sequence[float], interval: tuple[float, float],
                 spec: Optional[QuadratureSpec] = None):
    """
    Principal-value integral of g across simple poles.

    For each eps in the excision schedule the integral over the interval minus
    (p - eps, p + eps) is formed from the outer pieces plus the annuli
    integral of g(p + s) + g(p - s) over s in [eps, eps0]; the values are then
    extrapolated to eps -> 0. Poles outside the closed interval are ignored.

    Returns:
        (value, error_estimate)

    Raises:
        PoleSeparationError: poles closer than 2 * max excision or on an interval end
        NonConvergenceError: excision values do not form a Cauchy sequence
    """
    spec = spec or QuadratureSpec()
    lo, hi = float(interval[0]), float(interval[1])
    if _is_complex(g, (lo, hi)):
        re, re_err = integrate_pv(lambda t: np.real(g(t)), poles, (lo, hi), spec)
        im, im_err = integrate_pv(lambda t: np.imag(g(t)), poles, (lo, hi), spec)
        return complex(re, im), math.hypot(re_err, im_err)

    inside = _pole_layout(poles, (lo, hi), spec)
    if not inside:
        return integrate_adaptive(g, (lo, hi), spec)

    schedule = spec.excision_schedule
    eps0 = schedule[0]
    pieces, errors = [], []
    edges = [lo] + [x for p in inside for x in (p - eps0, p + eps0)] + [hi]
    for start, stop in zip(edges[::2], edges[1::2]):
        value, error = integrate_adaptive(g, (start, stop), spec)
        pieces.append(value)
        errors.append(error)

    excised = [(eps0, math.fsum(pieces))]
    for outer, inner_eps in zip(schedule, schedule[1:]):
        for p in inside:
            value, error = integrate_adaptive(lambda s, p=p: g(p + s) + g(p - s), (inner_eps, outer), spec)
            pieces.append(value)
            errors.append(error)
        excised.append((inner_eps, math.fsum(pieces)))

    quad_error = math.fsum(errors)
    diffs = [abs(b[1] - a[1]) for a, b in zip(excised, excised[1:])]
    floor = 10 * max(spec.abs_tol, spec.rel_tol * abs(excised[-1][1]), quad_error)
    for d_prev, d_next in zip(diffs, diffs[1:]):
        if d_next > 0.9 * d_prev + floor:
            logger.warning("excision sequence is not Cauchy", method="integrate_pv",
                           poles=inside, diffs=diffs)
            raise NonConvergenceError(
                "principal-value excision values do not converge; the singularity is not a simple pole",
                value=excised[-1][1], error_estimate=max(diffs))
    if max(diffs) <= floor:
        return excised[-1][1], max(diffs) + quad_error

    value, extrapolation_error = limit_extrapolate(excised, spec.extrapolation_order, noise_floor=floor)
    logger.debug("excision sweep done", method="integrate_pv", poles=len(inside),
                 value=value, error=extrapolation_error)
    return float(value), extrapolation_error + quad_error


def _resolve_truncation(f: "TestFunction", xi1: float, b: float, N: float, spec: QuadratureSpec) -> float:
    if math.isinf(N):
        reach = f.decay.xi2_reach(spec.truncation_radius)
        return max(reach / b, 2.0 * abs(xi1) + 1.0)
    return float(N)


def _check_inner_domain(xi1: float, b: float, N: float):
    if xi1 == 0:
        raise DomainError("xi1 must be nonzero")
    if not b > 0:
        raise DomainError(f"b must be > 0, got {b}")
    if not math.isinf(N) and N <= abs(xi1):
        raise DomainError(f"N={N} must exceed |xi1|={abs(xi1)}")


def inner_t_integral(f: "TestFunction", xi1: float, b: float, N: float,
                     mode: PrescriptionMode | str = PrescriptionMode.PV,
                     spec: Optional[QuadratureSpec] = None) -> complex:
    """
    Integral over t in [-N, N] of phi(xi1, b t) / (xi1^2 - t^2).

    The principal value is taken across t = +-xi1; the mode adds
    i*pi/(2 xi1) times its combination of phi(xi1, +-b xi1). Infinite N is
    replaced by the truncation reach of f.

    Raises:
        DomainError: xi1 == 0, b <= 0 or N <= |xi1|
        PoleSeparationError: |xi1| too small for the excision schedule
    """
    spec = spec or QuadratureSpec()
    mode = PrescriptionMode.parse(mode)
    xi1, b = float(xi1), float(b)
    _check_inner_domain(xi1, b, N)
    N = _resolve_truncation(f, xi1, b, N, spec)
    pole = abs(xi1)

    def integrand(t):
        return f.eval(xi1, b * t) / (xi1 * xi1 - t * t)

    pv, _ = integrate_pv(integrand, (-pole, pole), (-N, N), spec)
    if mode is PrescriptionMode.PV:
        return complex(pv, 0.0)
    bracket = mode.boundary_term(f.eval(xi1, b * xi1), f.eval(xi1, -b * xi1))
    return complex(pv) + 1j * math.pi / (2.0 * xi1) * bracket


def regularized_inner_integral(f: "TestFunction", xi1: float, b: float, N: float,
                               spec: Optional[QuadratureSpec] = None):
    """
    tau -> 0+ limit of the integral of phi(xi1, b t) / (xi1^2 - (t + i tau)^2).

    Independent of integrate_pv: each tau is a smooth adaptive integral with
    breakpoints at t = +-xi1. Real part is the PV, imaginary part the plus_i0 term.

    Returns:
        (value, error_estimate)
    """
    spec = spec or QuadratureSpec()
    xi1, b = float(xi1), float(b)
    _check_inner_domain(xi1, b, N)
    N = _resolve_truncation(f, xi1, b, N, spec)
    samples = []
    for tau in spec.tau_schedule:
        def integrand(t, tau=tau):
            z = t + 1j * tau
            return f.eval(xi1, b * t) / (xi1 * xi1 - z * z)
        value, _ = integrate_adaptive(integrand, (-N, N), spec, points=(-abs(xi1), abs(xi1)))
        samples.append((tau, value))
    value, error = limit_extrapolate(samples, spec.extrapolation_order)
    logger.debug("tau oracle done", method="regularized_inner_integral", xi1=xi1, value=value)
    return complex(value), error


@dataclass(frozen=True)
class PairingResult:
    """
    A pairing value with its error estimate.

    terms, when present, is the per-term breakdown (label, value) whose
    math.fsum equals value.
    """
    value: complex
    error_estimate: float = 0.0
    terms: tuple[tuple[str, complex], ...] = ()

    def to_dict(self) -> dict:
        data = {"value": {"re": self.value.real, "im": self.value.imag},
                "error_estimate": self.error_estimate}
        if self.terms:
            data["terms"] = [{"label": label, "re": v.real, "im": v.imag} for label, v in self.terms]
        return data


def _outer_setup(f: "TestFunction", a: float, spec: QuadratureSpec):
    lo, hi = f.decay.xi1_interval(spec.truncation_radius)
    half_width = max(abs(lo), abs(hi))
    radius = max(half_width, f.decay.xi2_reach(spec.truncation_radius))
    return half_width, max(a, 2.0) * radius


def inner_pv_subtracted(f: "TestFunction", xi1: float, b: float, N: float,
                        spec: Optional[QuadratureSpec] = None) -> tuple[float, float]:
    """
    Principal value over t in [-N, N] of phi(xi1, b t) / (xi1^2 - t^2), by
    subtracting the singularity.

    With g(t) = (phi(xi1, b t) + phi(xi1, -b t)) / 2 and x = |xi1|:

        2 * int_0^N (g(t) - g(x)) / (x^2 - t^2) dt + g(x) * log1p(2x / (N - x)) / x

    The remaining integrand is bounded at t = x (a breakpoint) and the whole
    expression stays finite as xi1 -> 0, where inner_t_integral runs out of
    room for its excision schedule. The absolute tolerance is floored at the
    cancellation error of g(t) - g(x), which grows like 1/x.

    Returns:
        (value, error_estimate)

    Raises:
        DomainError: xi1 == 0, b <= 0 or N <= |xi1|
    """
    spec = spec or QuadratureSpec()
    xi1, b = float(xi1), float(b)
    _check_inner_domain(xi1, b, N)
    N = _resolve_truncation(f, xi1, b, N, spec)
    x = abs(xi1)

    def g(t):
        return 0.5 * (f.eval(xi1, b * t) + f.eval(xi1, -b * t))

    g_pole = float(g(x))
    scale = abs(g_pole) + abs(float(g(0.0)))
    floor = 1e2 * np.finfo(float).eps * scale / x
    local = spec.with_noise_floor(floor)

    def integrand(t):
        denominator = (x - t) * (x + t)
        if denominator == 0.0:
            return 0.0
        return (g(t) - g_pole) / denominator

    body, error = integrate_adaptive(integrand, (0.0, N), local, points=(x,))
    value = 2.0 * body + g_pole * math.log1p(2.0 * x / (N - x)) / x
    return value, 2.0 * error


@lru_cache(maxsize=256)
def _real_part(f: "TestFunction", a: float, spec: QuadratureSpec) -> tuple[float, float]:
    from .testfn import Parity

    if f.parity_xi1 is Parity.ODD:
        # the inner PV is odd in xi1, so the outer integral vanishes
        return 0.0, 0.0
    b = 1.0 / a
    half_width, N = _outer_setup(f, a, spec)
    # inner values carry their own quadrature noise
    outer = spec.relaxed(100.0)

    def inner(x):
        return inner_pv_subtracted(f, x, b, N, spec)[0]

    # the inner PV is bounded at xi1 = 0; QUADPACK never samples the end points
    left, left_err = integrate_adaptive(inner, (-half_width, 0.0), outer)
    right, right_err = integrate_adaptive(inner, (0.0, half_width), outer)
    total = math.fsum((left, right))
    logger.info("real part done", method="pairing_exact", a=a, value=total)
    return total, left_err + right_err


def pairing_exact(f: "TestFunction", a: float, mode: PrescriptionMode | str = PrescriptionMode.PAPER,
                  spec: Optional[QuadratureSpec] = None) -> PairingResult:
    """
    (K_a, phi) for K_a = (a / 2pi^2) / (xi1^2 - a^2 xi2^2).

    Equals (1/2pi^2) * integral over xi1 of inner_t_integral(f, xi1, 1/a, N, mode)
    with N = max(a, 2) * R (R the truncation reach of f). The real part is
    mode-independent and cached, with inner values from inner_pv_subtracted;
    the imaginary part carries the 1/xi1 factor and is an outer principal
    value at xi1 = 0.

    Raises:
        DomainError: a <= 0
    """
    spec = spec or QuadratureSpec()
    mode = PrescriptionMode.parse(mode)
    a = float(a)
    if not (math.isfinite(a) and a > 0):
        raise DomainError(f"a must be finite and > 0, got {a}")
    b = 1.0 / a
    half_width, N = _outer_setup(f, a, spec)
    real, real_err = _real_part(f, a, spec)

    imag, imag_err = 0.0, 0.0
    if mode is not PrescriptionMode.PV:
        def boundary(x):
            bracket = mode.boundary_term(f.eval(x, b * x), f.eval(x, -b * x))
            return math.pi / (2.0 * x) * bracket

        imag, imag_err = integrate_pv(boundary, (0.0,), (-half_width, half_width), spec)

    scale = 1.0 / (2.0 * math.pi ** 2)
    value = complex(scale * real, scale * imag)
    logger.debug("pairing done", method="pairing_exact", a=a, mode=mode.value, N=N, value=value)
    return PairingResult(value=value, error_estimate=scale * (real_err + imag_err))

"""
Closed forms of the truncated kernel integrals.

T_{k,N}(xi1) = PV integral over [-N, N] of t^k / (xi1^2 - t^2) dt, with the
imaginary part i*pi/2 * xi1^(k-1) attached to every even k. Odd k vanish.

Two modes are kept side by side:
- derived: generated by T_{2n} = -2 N^(2n-1) / (2n-1) + xi1^2 T_{2n-2},
  T_0 = -(1/xi1) ln((N - xi1)/(N + xi1)) + i*pi/(2 xi1)
- paper_literal: the displayed closed forms for k = 2, 4, 6 and the general
  display (harmonic coefficients, log coefficient 1/2) for k >= 8

discrepancy_report arbitrates both against principal-value quadrature.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

from .errors import ConeKernelError, DomainError
from .logging_config import get_logger
from .quad import QuadratureSpec, integrate_pv

logger = get_logger(__name__, component="Kernel")


class TknMode(str, Enum):
    PAPER_LITERAL = "paper_literal"
    DERIVED = "derived"

    @classmethod
    def parse(cls, value) -> "TknMode":
        try:
            return cls(value)
        except ValueError:
            raise DomainError(f"unknown coefficient mode {value!r}; "
                              f"choose from {[m.value for m in cls]}") from None


@dataclass(frozen=True)
class TknForm:
    """T_{k,N} in one mode; N may be math.inf (k = 0 and odd k only)."""
    k: int
    N: float
    mode: TknMode = TknMode.DERIVED

    def __post_init__(self):
        object.__setattr__(self, "mode", TknMode.parse(self.mode))
        if self.k < 0:
            raise DomainError(f"k must be >= 0, got {self.k}")
        if not self.N > 0:
            raise DomainError(f"N must be > 0, got {self.N}")
        if math.isinf(self.N) and self.k % 2 == 0 and self.k >= 2:
            raise DomainError(f"T_{{{self.k},N}} diverges as N -> infinity; only k = 0 has a limit")


@dataclass(frozen=True)
class PolyTerm:
    n_power: int
    xi_power: int
    coefficient: Fraction


@dataclass(frozen=True)
class PPoly:
    """Polynomial part P_{2n-1}(N, xi1) with exact rational coefficients."""
    n: int
    mode: TknMode
    terms: tuple[PolyTerm, ...]

    def evaluate(self, N: float, xi1: float) -> float:
        return math.fsum(float(t.coefficient) * N ** t.n_power * xi1 ** t.xi_power for t in self.terms)

    def coefficient_of(self, n_power: int) -> Fraction:
        return sum((t.coefficient for t in self.terms if t.n_power == n_power), Fraction(0))

    def __str__(self):
        return " + ".join(f"({t.coefficient})*N^{t.n_power}*xi1^{t.xi_power}" for t in self.terms)


def harmonic_odd(k: int) -> Fraction:
    """1 + 1/3 + ... + 1/(2k-1)."""
    return sum((Fraction(1, 2 * j - 1) for j in range(1, k + 1)), Fraction(0))


@lru_cache(maxsize=None)
def p_poly(n: int, mode: TknMode | str = TknMode.DERIVED) -> PPoly:
    """
    The polynomial part of T_{2n,N}.

    derived: sum over j of (-2/(2j-1)) N^(2j-1) xi1^(2(n-j)).
    paper_literal: c_{2k-1} N^(2k-1) xi1^(2(n-k)) with c_{2k-1} = -2 * harmonic_odd(k),
    except the last term c_1 N xi1^(2n-1) as displayed (c_1 N alone for n = 1).
    """
    mode = TknMode.parse(mode)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    terms = []
    for k in range(n, 0, -1):
        if mode is TknMode.DERIVED:
            terms.append(PolyTerm(2 * k - 1, 2 * (n - k), Fraction(-2, 2 * k - 1)))
        else:
            xi_power = 2 * (n - k) if k > 1 else (2 * n - 1 if n > 1 else 0)
            terms.append(PolyTerm(2 * k - 1, xi_power, -2 * harmonic_odd(k)))
    return PPoly(n=n, mode=mode, terms=tuple(terms))


def log_factor(N: float, xi1: float) -> float:
    """ln((N - xi1)/(N + xi1)); tends to 0 as N grows."""
    return math.log((N - xi1) / (N + xi1))


def _check_point(form: TknForm, xi1: float):
    if xi1 == 0:
        raise DomainError("xi1 must be nonzero")
    if not math.isinf(form.N) and abs(xi1) >= form.N:
        raise DomainError(f"|xi1|={abs(xi1)} must be below N={form.N}")


def _recurrence_step(n: int, N: float, xi1: float, previous: complex) -> complex:
    return -2.0 * N ** (2 * n - 1) / (2 * n - 1) + xi1 * xi1 * previous


def _derived_sequence(n: int, N: float, xi1: float) -> list[complex]:
    """[T_0, T_2, ..., T_2n] from the recurrence."""
    values = [complex(-log_factor(N, xi1) / xi1, math.pi / (2.0 * xi1))]
    for j in range(1, n + 1):
        values.append(_recurrence_step(j, N, xi1, values[-1]))
    return values


def _paper_literal(n: int, N: float, xi1: float) -> complex:
    L = log_factor(N, xi1)
    if n == 0:
        return complex(-L / xi1, math.pi / (2.0 * xi1))
    if n == 1:
        return complex(-2 * N - 0.5 / xi1 * L, math.pi / 2 / xi1)
    if n == 2:
        return complex(-2 / 3 * N ** 3 - 2 * xi1 ** 2 * N - 0.5 * xi1 ** 3 * L, math.pi / 2 * xi1 ** 3)
    if n == 3:
        return complex(-2 / 5 * N ** 5 - 2 / 3 * xi1 ** 2 * N ** 3 - 2 * xi1 ** 5 * N - 0.5 * xi1 ** 5 * L,
                       math.pi / 2 * xi1 ** 5)
    power = 2 * n - 1
    return complex(p_poly(n, TknMode.PAPER_LITERAL).evaluate(N, xi1) - 0.5 * xi1 ** power * L,
                   math.pi / 2 * xi1 ** power)


def tkn_eval(form: TknForm, xi1: float) -> complex:
    """
    Evaluate T_{k,N}(xi1).

    Raises:
        DomainError: xi1 == 0 or |xi1| >= N
    """
    xi1 = float(xi1)
    _check_point(form, xi1)
    if form.k % 2:
        return 0j
    n = form.k // 2
    if math.isinf(form.N):
        return complex(0.0, math.pi / (2.0 * xi1))
    if form.mode is TknMode.DERIVED:
        return _derived_sequence(n, form.N, xi1)[-1]
    return _paper_literal(n, form.N, xi1)


def log_term(n: int, N: float, xi1: float, mode: TknMode | str = TknMode.DERIVED) -> float:
    """The logarithmic summand of T_{2n,N}: -c * xi1^(2n-1) * ln((N-xi1)/(N+xi1))."""
    weight = 1.0 if TknMode.parse(mode) is TknMode.DERIVED else 0.5
    return -weight * xi1 ** (2 * n - 1) * log_factor(N, xi1)


def tkn_oracle(k: int, N: float, xi1: float, spec: Optional[QuadratureSpec] = None) -> float:
    """PV quadrature of t^k / (xi1^2 - t^2) over [-N, N]."""
    spec = spec or QuadratureSpec()
    pole = abs(float(xi1))
    spec = spec.for_pole_separation(2.0 * pole)
    value, _ = integrate_pv(lambda t: t ** k / (xi1 * xi1 - t * t), (-pole, pole), (-N, N), spec)
    return value


@dataclass(frozen=True)
class RecurrenceResidual:
    n: int
    N: float
    xi1: float
    closed_form: float
    quadrature: float
    quadrature_relative: float


def tkn_recurrence_check(n: int, N: float, xi1: float,
                         spec: Optional[QuadratureSpec] = None) -> RecurrenceResidual:
    """
    Residual of T_{2n} = -2 N^(2n-1)/(2n-1) + xi1^2 T_{2n-2}, once with the
    derived closed forms and once with both sides from PV quadrature.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    _check_point(TknForm(2 * n, N), xi1)
    values = _derived_sequence(n, N, xi1)
    closed = abs(values[n] - _recurrence_step(n, N, xi1, values[n - 1]))
    high = tkn_oracle(2 * n, N, xi1, spec)
    low = tkn_oracle(2 * n - 2, N, xi1, spec)
    quadrature = abs(high - _recurrence_step(n, N, xi1, low).real)
    logger.debug("recurrence residuals", method="tkn_recurrence_check", n=n, closed=closed,
                 quadrature=quadrature)
    return RecurrenceResidual(n, N, xi1, closed, quadrature, quadrature / abs(high))


@dataclass(frozen=True)
class CoeffEntry:
    """
    One c_{m,n}(a): pairs with the moment of xi1^m against the n-th xi2-derivative.

    block is "lemma1" (the (i/4pi) series) or "poly" (from P_{2n-1});
    value is proportional to b^b_power, b = 1/a.
    """
    m: int
    n: int
    value: complex
    mode: TknMode
    block: str
    b_power: int
    k: Optional[int] = None

    @property
    def label(self) -> str:
        suffix = f",k={self.k}" if self.k is not None else ""
        return f"{self.block}(m={self.m},n={self.n}{suffix})"


@dataclass(frozen=True)
class CoeffTable:
    a: float
    truncation_order: int
    mode: TknMode
    nb: float
    entries: tuple[CoeffEntry, ...]

    def to_rows(self) -> list[dict]:
        rows = []
        for e in self.entries:
            row = asdict(e)
            row.update(mode=e.mode.value, value_re=e.value.real, value_im=e.value.imag)
            del row["value"]
            rows.append(row)
        return rows


def coeff_table(a: float, truncation_order: int, mode: TknMode | str = TknMode.DERIVED,
                nb: float = 1.0) -> CoeffTable:
    """
    Expansion coefficients c_{m,n}(a) up to xi2-derivative order truncation_order.

    For each block index j = 1 .. truncation_order // 2 (derivative order 2j):
    - lemma1 entry (m = 2j-1, n = 2j): (i/4pi) b^(2j) / (2j)!
    - poly entries k = 1..j: (1/2pi^2) b^(2j-2k+1) c_k / (2j)! * nb^(2k-1), with
      derived: m = 2(j-k), c_k = -2/(2k-1); paper_literal: m = 2k-1, c_k = -2 * harmonic_odd(k)

    nb is the product N*b of the special limit (1 by default).
    """
    mode = TknMode.parse(mode)
    if not (math.isfinite(a) and a > 0):
        raise DomainError(f"a must be finite and > 0, got {a}")
    if truncation_order < 0:
        raise DomainError(f"truncation_order must be >= 0, got {truncation_order}")
    b = 1.0 / a
    entries = []
    for j in range(1, truncation_order // 2 + 1):
        factorial = math.factorial(2 * j)
        entries.append(CoeffEntry(m=2 * j - 1, n=2 * j, value=1j / (4 * math.pi) * b ** (2 * j) / factorial,
                                  mode=mode, block="lemma1", b_power=2 * j))
        for k in range(1, j + 1):
            if mode is TknMode.DERIVED:
                m, c = 2 * (j - k), Fraction(-2, 2 * k - 1)
            else:
                m, c = 2 * k - 1, -2 * harmonic_odd(k)
            power = 2 * j - 2 * k + 1
            value = float(c) * b ** power / factorial * nb ** (2 * k - 1) / (2 * math.pi ** 2)
            entries.append(CoeffEntry(m=m, n=2 * j, value=complex(value), mode=mode, block="poly",
                                      b_power=power, k=k))
    return CoeffTable(a=float(a), truncation_order=truncation_order, mode=mode, nb=nb,
                      entries=tuple(entries))


@dataclass(frozen=True)
class RoughCoefficient:
    n: int
    value: complex


def rough_coefficients(a: float, order: int) -> list[RoughCoefficient]:
    """(i/2pi) (-1)^n / (n! a^n) for n = 0..order, the coefficients of the rough expansion."""
    if not (math.isfinite(a) and a > 0):
        raise DomainError(f"a must be finite and > 0, got {a}")
    return [RoughCoefficient(n, 1j / (2 * math.pi) * (-1) ** n / (math.factorial(n) * a ** n))
            for n in range(order + 1)]


@dataclass
class DiscrepancyRow:
    k: int
    N: float
    xi1: float
    paper_literal: Optional[float] = None
    derived: Optional[float] = None
    oracle: Optional[float] = None
    paper_error: Optional[float] = None
    derived_error: Optional[float] = None
    verdict: str = ""
    error: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


DISCREPANCY_COLUMNS = tuple(DiscrepancyRow.__dataclass_fields__)
DEFAULT_DISCREPANCY_GRID = ((10.0, 0.3), (10.0, 1.0), (10.0, 2.0), (100.0, 0.3), (100.0, 1.0), (100.0, 2.0))
AGREEMENT_RTOL = 1e-8


def _discrepancy_row(k: int, N: float, xi1: float, spec: QuadratureSpec) -> DiscrepancyRow:
    row = DiscrepancyRow(k=k, N=N, xi1=xi1)
    try:
        row.paper_literal = tkn_eval(TknForm(k, N, TknMode.PAPER_LITERAL), xi1).real
        row.derived = tkn_eval(TknForm(k, N, TknMode.DERIVED), xi1).real
        row.oracle = tkn_oracle(k, N, xi1, spec)
    except ConeKernelError as exc:
        logger.warning(f"row failed: {exc}", method="discrepancy_report", k=k, N=N, xi1=xi1)
        row.verdict, row.error = "error", str(exc)
        return row
    row.paper_error = abs(row.paper_literal - row.oracle)
    row.derived_error = abs(row.derived - row.oracle)
    tolerance = max(AGREEMENT_RTOL * abs(row.oracle), 1e-10)
    if row.paper_error <= tolerance and row.derived_error <= tolerance:
        row.verdict = "agree"
    elif row.derived_error < row.paper_error:
        row.verdict = "derived"
    else:
        row.verdict = "paper_literal"
    return row


def discrepancy_report(n_max: int, grid: Sequence[tuple[float, float]] = DEFAULT_DISCREPANCY_GRID,
                       spec: Optional[QuadratureSpec] = None, workers: Optional[int] = None) -> list[DiscrepancyRow]:
    """
    Compare paper_literal and derived T_{k,N} against PV quadrature.

    One row per k = 1 .. 2 * n_max and grid point (N, xi1), ordered by k then grid
    order. Failing rows carry verdict "error" and the message; the report always completes.
    """
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    spec = spec or QuadratureSpec()
    jobs = [(k, float(N), float(xi1)) for k in range(1, 2 * n_max + 1) for N, xi1 in grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda job: _discrepancy_row(*job, spec), jobs))
    logger.info("discrepancy report done", method="discrepancy_report", rows=len(rows),
                derived=sum(r.verdict == "derived" for r in rows))
    return rows

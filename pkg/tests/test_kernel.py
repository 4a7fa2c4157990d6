"""Test the closed forms of T_{k,N}, the expansion coefficients and the discrepancy report."""
import math
from fractions import Fraction

import pytest

from cone_kernel.errors import DomainError
from cone_kernel.kernel import (
    DEFAULT_DISCREPANCY_GRID,
    TknForm,
    TknMode,
    coeff_table,
    discrepancy_report,
    harmonic_odd,
    log_term,
    p_poly,
    rough_coefficients,
    tkn_eval,
    tkn_oracle,
    tkn_recurrence_check,
)

GRID_N = (10.0, 100.0)
GRID_XI1 = (0.3, 1.0, 2.0)


def test_odd_k_vanish_in_both_modes():
    """T_{k,N} is identically zero for odd k."""
    for mode in TknMode:
        for k in (1, 3, 5):
            assert tkn_eval(TknForm(k, 10.0, mode), 0.7) == 0j


def test_t2_closed_forms():
    """T_{2,10}(1): derived -20 + ln(11/9), paper-literal -20 + ln(11/9)/2."""
    derived = tkn_eval(TknForm(2, 10.0, TknMode.DERIVED), 1.0)
    assert derived.real == pytest.approx(-20.0 + math.log(11.0 / 9.0), rel=1e-14)
    assert derived.real == pytest.approx(-19.7993293, abs=1e-7)
    assert derived.imag == pytest.approx(math.pi / 2)
    literal = tkn_eval(TknForm(2, 10.0, TknMode.PAPER_LITERAL), 1.0)
    assert literal.real == pytest.approx(-19.8996646, abs=1e-7)


def test_t0_limit_and_divergent_forms():
    """T_{0,inf} is i*pi/(2 xi1); larger even k have no N -> infinity limit."""
    assert tkn_eval(TknForm(0, math.inf), 0.5) == pytest.approx(1j * math.pi)
    with pytest.raises(DomainError):
        TknForm(2, math.inf)
    assert tkn_eval(TknForm(3, math.inf), 0.5) == 0j


def test_tkn_domain_errors():
    with pytest.raises(DomainError):
        tkn_eval(TknForm(2, 10.0), 0.0)
    with pytest.raises(DomainError):
        tkn_eval(TknForm(2, 10.0), 10.0)
    with pytest.raises(DomainError):
        TknForm(-1, 10.0)
    with pytest.raises(DomainError):
        TknForm(2, 10.0, "verbatim")


@pytest.mark.parametrize("k", [2, 4, 6])
def test_derived_matches_quadrature(k, spec):
    """Derived closed forms against principal-value quadrature of t^k / (xi1^2 - t^2)."""
    for N in GRID_N:
        for xi1 in GRID_XI1:
            closed = tkn_eval(TknForm(k, N, TknMode.DERIVED), xi1).real
            assert closed == pytest.approx(tkn_oracle(k, N, xi1, spec), rel=1e-8)


@pytest.mark.parametrize("k", [1, 3, 5])
def test_odd_quadrature_annihilates(k, spec):
    for N in GRID_N:
        for xi1 in GRID_XI1:
            assert abs(tkn_oracle(k, N, xi1, spec)) <= 1e-10


def test_recurrence_residuals(spec):
    """Closed forms satisfy the recurrence exactly; quadrature to 1e-8."""
    for n in (1, 2, 3):
        residual = tkn_recurrence_check(n, 10.0, 1.0, spec)
        assert residual.closed_form == 0.0
        assert residual.quadrature_relative <= 1e-8
    with pytest.raises(DomainError):
        tkn_recurrence_check(0, 10.0, 1.0)


def test_p_poly_derived():
    """P_1 = -2N and P_3 = -2/3 N^3 - 2 xi1^2 N."""
    assert p_poly(1).evaluate(10.0, 1.0) == pytest.approx(-20.0)
    poly = p_poly(2, TknMode.DERIVED)
    assert poly.coefficient_of(3) == Fraction(-2, 3)
    assert poly.coefficient_of(1) == Fraction(-2)
    assert poly.evaluate(10.0, 1.0) == pytest.approx(-2000.0 / 3.0 - 20.0)
    # degree 2n - 1 in (N, xi1) jointly
    for n in range(1, 6):
        assert all(t.n_power + t.xi_power == 2 * n - 1 for t in p_poly(n).terms)


def test_p_poly_paper_literal_harmonic_coefficients():
    poly = p_poly(3, TknMode.PAPER_LITERAL)
    assert poly.coefficient_of(5) == -2 * (1 + Fraction(1, 3) + Fraction(1, 5))
    assert poly.coefficient_of(1) == Fraction(-2)
    assert harmonic_odd(2) == Fraction(4, 3)
    with pytest.raises(DomainError):
        p_poly(0)


def test_log_term_weights():
    """The logarithmic summand carries weight 1 (derived) or 1/2 (paper literal)."""
    derived = log_term(1, 10.0, 1.0, TknMode.DERIVED)
    literal = log_term(1, 10.0, 1.0, TknMode.PAPER_LITERAL)
    assert derived == pytest.approx(math.log(11.0 / 9.0))
    assert literal == pytest.approx(0.5 * derived)


def test_coeff_table_entries():
    """Order-2 table at a = 10: one lemma entry and one polynomial entry."""
    table = coeff_table(10.0, 2, TknMode.DERIVED)
    assert [(e.block, e.m, e.n) for e in table.entries] == [("lemma1", 1, 2), ("poly", 0, 2)]
    lemma, poly = table.entries
    assert lemma.value == pytest.approx(1j / (4 * math.pi) * 0.01 / 2)
    assert poly.value == pytest.approx(-2.0 * 0.1 / 2 / (2 * math.pi ** 2))
    assert poly.b_power == 1
    assert coeff_table(10.0, 0).entries == ()
    assert coeff_table(10.0, 1).entries == ()


def test_coeff_table_orders_are_nested():
    """Lower truncation orders are prefixes of higher ones."""
    low = coeff_table(30.0, 2).entries
    high = coeff_table(30.0, 6).entries
    assert high[:len(low)] == low
    # block j holds one lemma entry and j polynomial entries
    assert len(high) == sum(1 + j for j in (1, 2, 3))


def test_coeff_table_nb_multiplier():
    """Polynomial entries scale by (N b)^(2k - 1)."""
    plain = coeff_table(10.0, 4, nb=1.0).entries
    scaled = coeff_table(10.0, 4, nb=2.0).entries
    for p, s in zip(plain, scaled):
        factor = 1.0 if p.block == "lemma1" else 2.0 ** (2 * p.k - 1)
        assert s.value == pytest.approx(p.value * factor)


def test_coeff_table_rejects_bad_input():
    with pytest.raises(DomainError):
        coeff_table(0.0, 2)
    with pytest.raises(DomainError):
        coeff_table(10.0, -1)


def test_rough_coefficients():
    values = [c.value for c in rough_coefficients(10.0, 2)]
    assert values[0] == pytest.approx(1j / (2 * math.pi))
    assert values[1] == pytest.approx(-1j / (2 * math.pi * 10.0))
    assert values[2] == pytest.approx(1j / (2 * math.pi * 2 * 100.0))


@pytest.mark.regression
def test_discrepancy_report_flags_log_coefficient(spec):
    """The k = 2 rows side with the derived form by orders of magnitude."""
    rows = discrepancy_report(1, DEFAULT_DISCREPANCY_GRID, spec)
    assert len(rows) == 2 * len(DEFAULT_DISCREPANCY_GRID)
    assert [r.k for r in rows] == [1] * 6 + [2] * 6
    assert all(r.verdict == "agree" for r in rows if r.k == 1)

    decisive = [r for r in rows if r.k == 2 and r.verdict == "derived"
                and r.derived_error <= 1e-8 * abs(r.oracle)
                and r.paper_error > 1e3 * 1e-8 * abs(r.oracle)]
    assert decisive
    assert all(r.error == "" for r in rows)


def test_discrepancy_report_records_failures(spec):
    """Grid points outside the domain produce error rows instead of aborting."""
    rows = discrepancy_report(1, ((1.0, 2.0), (10.0, 1.0)), spec)
    failed = [r for r in rows if r.verdict == "error"]
    assert len(failed) == 2
    assert all("N" in r.error for r in failed)
    with pytest.raises(DomainError):
        discrepancy_report(0)

"""Tests for the exact conservation ledger"""

from decimal import Decimal
from fractions import Fraction

import numpy as np
import pytest

from value_ledger import (
    MAX_MICRO, AggregateLedger, CycleLedger, OwnerMismatchError, StockSnapshot, TickFlows,
    ValueAmount, ValueOverflowError, ZERO, conservation_residual, merge_ledgers, record_tick,
    total, value_gained,
)

U = ValueAmount.units


@pytest.mark.parametrize("va, ve, vl, vg", [
    (100, 50, 30, 120),
    (0, 0, 0, 0),
    (10, 0, 25, -15),
])
def test_record_tick_derives_vg(va, ve, vl, vg):
    ledger = CycleLedger("c")
    flows = record_tick(ledger, U(va), U(ve), U(vl))
    assert flows.vg == U(vg)
    assert conservation_residual(flows) == ZERO
    assert ledger.cumulative == flows
    assert ledger.tick_count == 1


def test_negative_gain_is_flagged_not_rejected():
    flows = CycleLedger("c").record_tick(U(10), ZERO, U(25))
    assert flows.has_negative


@pytest.mark.parametrize("flows, expected", [
    (TickFlows(U(100), U(50), U(30), U(120)), ZERO),
    (TickFlows(U(100), U(50), U(30), U(119)), U(1)),
    (TickFlows(), ZERO),
])
def test_conservation_residual(flows, expected):
    assert conservation_residual(flows) == expected
    assert flows.residual == expected


def test_merge_two_balanced_ledgers():
    a, b = CycleLedger("a"), CycleLedger("b")
    a.record_tick(U(100), U(50), U(30))
    b.record_tick(U(7), U(3), U(12))
    merged = merge_ledgers([a, b])
    assert merged.member_count == 2
    assert merged.residual == ZERO
    assert merged.totals.vg == U(120 - 2)


def test_merge_empty_list():
    merged = merge_ledgers([])
    assert merged == AggregateLedger(0, TickFlows())


def test_merge_opposite_residuals_cancel():
    plus = CycleLedger("p", TickFlows(U(3), ZERO, ZERO, ZERO), 1)
    minus = CycleLedger("m", TickFlows(ZERO, ZERO, U(3), ZERO), 1)
    assert plus.cumulative.residual == U(3)
    assert minus.cumulative.residual == U(-3)
    assert merge_ledgers([plus, minus]).residual == ZERO


def test_merge_accepts_aggregates():
    a = CycleLedger("a")
    a.record_tick(U(1), U(2), U(3))
    inner = merge_ledgers([a, a.copy()])
    outer = merge_ledgers([inner, a])
    assert outer.member_count == 3
    assert outer.totals == a.cumulative + a.cumulative + a.cumulative


def test_merge_residual_is_sum_of_member_residuals():
    rng = np.random.default_rng(7)
    for _ in range(200):
        members = []
        for i in range(int(rng.integers(0, 8))):
            va, ve, vl, vg = (ValueAmount(int(x)) for x in rng.integers(-10**9, 10**9, size=4))
            members.append(CycleLedger(f"m{i}", TickFlows(va, ve, vl, vg), 1))
        merged = merge_ledgers(members)
        assert merged.residual == total(m.cumulative.residual for m in members)


def test_recording_order_does_not_matter():
    rng = np.random.default_rng(11)
    for _ in range(100):
        a = [ValueAmount(int(x)) for x in rng.integers(-10**8, 10**8, size=3)]
        b = [ValueAmount(int(x)) for x in rng.integers(-10**8, 10**8, size=3)]
        first, second = CycleLedger("x"), CycleLedger("y")
        first.record_tick(*a)
        first.record_tick(*b)
        second.record_tick(*b)
        second.record_tick(*a)
        assert first.cumulative == second.cumulative
        assert first.cumulative.residual == ZERO


def test_overflow_is_reported_and_leaves_ledger_untouched():
    ledger = CycleLedger("c")
    ledger.record_tick(ValueAmount(MAX_MICRO), ZERO, ZERO)
    before = ledger.cumulative
    with pytest.raises(ValueOverflowError):
        ledger.record_tick(ValueAmount(1), ZERO, ZERO)
    assert ledger.cumulative == before
    assert ledger.tick_count == 1


def test_amount_out_of_range():
    with pytest.raises(ValueOverflowError):
        ValueAmount(MAX_MICRO + 1)
    with pytest.raises(ValueOverflowError):
        ValueAmount(MAX_MICRO) + ValueAmount(1)


def test_gain_checked_on_exact_result():
    big = ValueAmount(MAX_MICRO)
    flows = TickFlows.balanced(big, big, big)
    assert flows.vg == big
    assert flows.residual == ZERO
    with pytest.raises(ValueOverflowError):
        TickFlows.balanced(big, ValueAmount(1), ZERO)


@pytest.mark.parametrize("initial, final, gained", [
    (100, 150, 50),
    (100, 100, 0),
    (100, 40, -60),
])
def test_value_gained(initial, final, gained):
    assert value_gained(StockSnapshot("firm", U(initial), 0), StockSnapshot("firm", U(final), 9)) == U(gained)


def test_value_gained_owner_mismatch():
    with pytest.raises(OwnerMismatchError):
        value_gained(StockSnapshot("a", U(1)), StockSnapshot("b", U(2)))


@pytest.mark.parametrize("text, micro", [
    ("12.5", 12_500_000),
    ("-0.000001", -1),
    ("7", 7_000_000),
    ("+3.250000", 3_250_000),
])
def test_parse(text, micro):
    assert ValueAmount.parse(text).micro == micro


@pytest.mark.parametrize("text", ["1.0000001", "abc", "1e3", "", "1."])
def test_parse_rejects(text):
    with pytest.raises(ValueError):
        ValueAmount.parse(text)


def test_display_has_six_fractional_digits():
    assert ValueAmount.parse("-12.5").display() == "-12.500000"
    assert str(ValueAmount(1)) == "0.000001"
    assert ZERO.display() == "0.000000"


def test_display_parse_round_trip():
    rng = np.random.default_rng(3)
    samples = [int(x) for x in rng.integers(-2**62, 2**62, size=500)] + [0, 1, -1, MAX_MICRO]
    for micro in samples:
        amount = ValueAmount(micro)
        assert ValueAmount.parse(amount.display()) == amount


@pytest.mark.parametrize("value, micro", [
    ("0.0000005", 0),
    ("0.0000015", 2),
    ("0.0000025", 2),
    (Decimal("-0.0000015"), -2),
    (0.1, 100_000),
    (Fraction(1, 3), 333_333),
    (7, 7_000_000),
])
def test_from_decimal_rounds_half_to_even(value, micro):
    assert ValueAmount.from_decimal(value).micro == micro


def test_from_decimal_rejects_non_finite():
    with pytest.raises(ValueError):
        ValueAmount.from_decimal("NaN")


def test_scaled_and_fraction_helpers():
    amount = U(10)
    assert amount.scaled(Fraction(1, 4)) == ValueAmount.parse("2.5")
    assert amount.to_fraction() == 10
    assert amount.to_float() == 10.0
    assert ValueAmount.from_fraction(Fraction(5, 2_000_000)) == ValueAmount(2)


def test_non_int_micro_rejected():
    with pytest.raises(TypeError):
        ValueAmount(1.5)

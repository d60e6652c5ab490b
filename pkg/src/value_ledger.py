"""
Value Ledger - exact conservation accounting for cycles of value

Every amount is an integer count of micro-units (10^-6 value units), so the
conservation law VA + VE = VL + VG holds as an integer identity.
"""

import re
from dataclasses import dataclass, field
from decimal import Decimal, ROUND_HALF_EVEN, InvalidOperation
from fractions import Fraction
from typing import Iterable, List, Union

MICRO = 1_000_000
MAX_MICRO = 2**63 - 1
MIN_MICRO = -(2**63)

_FIXED_POINT = re.compile(r"^([+-]?)(\d+)(?:\.(\d{1,6}))?$")


class ValueOverflowError(OverflowError):
    """Amount left the signed 64-bit micro-unit range"""


class OwnerMismatchError(ValueError):
    """Snapshots of two different owners were compared"""


def _checked(micro: int) -> int:
    if micro > MAX_MICRO or micro < MIN_MICRO:
        raise ValueOverflowError(f"value overflow: {micro} micro-units")
    return micro


@dataclass(frozen=True, order=True)
class ValueAmount:
    """Signed quantity of value in micro-units"""
    micro: int = 0

    def __post_init__(self):
        if isinstance(self.micro, bool) or not isinstance(self.micro, int):
            raise TypeError(f"ValueAmount requires int micro-units, got {type(self.micro).__name__}")
        _checked(self.micro)

    @classmethod
    def units(cls, amount: int) -> "ValueAmount":
        return cls(_checked(amount * MICRO))

    @classmethod
    def parse(cls, text: str) -> "ValueAmount":
        """Strict fixed-point parse, at most 6 fractional digits"""
        match = _FIXED_POINT.match(text.strip())
        if not match:
            raise ValueError(f"not a fixed-point value: {text!r}")
        sign, whole, frac = match.groups()
        micro = int(whole) * MICRO + int((frac or "").ljust(6, "0"))
        return cls(_checked(-micro if sign == "-" else micro))

    @classmethod
    def from_decimal(cls, value: Union[str, int, float, Decimal, Fraction]) -> "ValueAmount":
        """Convert an external decimal input, rounding half-to-even to micro-units"""
        if isinstance(value, Fraction):
            return cls.from_fraction(value)
        try:
            dec = Decimal(str(value)) if isinstance(value, float) else Decimal(value)
        except InvalidOperation:
            raise ValueError(f"not a decimal value: {value!r}")
        if not dec.is_finite():
            raise ValueError(f"value must be finite, got {value!r}")
        micro = (dec * MICRO).quantize(Decimal(1), rounding=ROUND_HALF_EVEN)
        return cls(_checked(int(micro)))

    @classmethod
    def from_fraction(cls, value: Fraction) -> "ValueAmount":
        # round() on a Fraction is round-half-to-even
        return cls(_checked(round(Fraction(value) * MICRO)))

    def to_fraction(self) -> Fraction:
        return Fraction(self.micro, MICRO)

    def to_float(self) -> float:
        return self.micro / MICRO

    def scaled(self, factor: Fraction) -> "ValueAmount":
        """Multiply by an exact rational, rounding half-to-even"""
        return ValueAmount(_checked(round(self.micro * Fraction(factor))))

    def display(self) -> str:
        sign = "-" if self.micro < 0 else ""
        whole, frac = divmod(abs(self.micro), MICRO)
        return f"{sign}{whole}.{frac:06d}"

    def __str__(self) -> str:
        return self.display()

    def __add__(self, other: "ValueAmount") -> "ValueAmount":
        if not isinstance(other, ValueAmount):
            return NotImplemented
        return ValueAmount(_checked(self.micro + other.micro))

    def __sub__(self, other: "ValueAmount") -> "ValueAmount":
        if not isinstance(other, ValueAmount):
            return NotImplemented
        return ValueAmount(_checked(self.micro - other.micro))

    def __neg__(self) -> "ValueAmount":
        return ValueAmount(_checked(-self.micro))

    def __abs__(self) -> "ValueAmount":
        return ValueAmount(_checked(abs(self.micro)))

    def __bool__(self) -> bool:
        return self.micro != 0

    def is_negative(self) -> bool:
        return self.micro < 0


ZERO = ValueAmount(0)


def total(amounts: Iterable[ValueAmount]) -> ValueAmount:
    """Exact sum; intermediate values are unbounded, only the result is checked"""
    return ValueAmount(_checked(sum(a.micro for a in amounts)))


@dataclass(frozen=True)
class TickFlows:
    """The four flows of one cycle over one tick (or a running sum of them)"""
    va: ValueAmount = ZERO
    ve: ValueAmount = ZERO
    vl: ValueAmount = ZERO
    vg: ValueAmount = ZERO

    @classmethod
    def balanced(cls, va: ValueAmount, ve: ValueAmount, vl: ValueAmount) -> "TickFlows":
        """VG is the balancing item: vg = va + ve - vl, range-checked on the exact result"""
        return cls(va=va, ve=ve, vl=vl, vg=ValueAmount(_checked(va.micro + ve.micro - vl.micro)))

    @property
    def residual(self) -> ValueAmount:
        return conservation_residual(self)

    @property
    def has_negative(self) -> bool:
        return any(x.is_negative() for x in (self.va, self.ve, self.vl, self.vg))

    def __add__(self, other: "TickFlows") -> "TickFlows":
        if not isinstance(other, TickFlows):
            return NotImplemented
        return TickFlows(
            va=self.va + other.va,
            ve=self.ve + other.ve,
            vl=self.vl + other.vl,
            vg=self.vg + other.vg,
        )

    def as_row(self) -> List[str]:
        return [self.va.display(), self.ve.display(), self.vl.display(), self.vg.display()]


def conservation_residual(flows: TickFlows) -> ValueAmount:
    """(va + ve) - (vl + vg); zero for every engine-produced TickFlows"""
    return ValueAmount(_checked(
        (flows.va.micro + flows.ve.micro) - (flows.vl.micro + flows.vg.micro)
    ))


@dataclass
class CycleLedger:
    """Running totals of one cycle of value"""
    cycle_id: str
    cumulative: TickFlows = field(default_factory=TickFlows)
    tick_count: int = 0

    def record_tick(self, va: ValueAmount, ve: ValueAmount, vl: ValueAmount) -> TickFlows:
        """Record one tick; VG is derived so the tick balances exactly"""
        flows = TickFlows.balanced(va, ve, vl)
        # fails before mutating, so an overflow leaves the ledger untouched
        self.cumulative = self.cumulative + flows
        self.tick_count += 1
        return flows

    def copy(self) -> "CycleLedger":
        return CycleLedger(self.cycle_id, self.cumulative, self.tick_count)


def record_tick(ledger: CycleLedger, va: ValueAmount, ve: ValueAmount, vl: ValueAmount) -> TickFlows:
    return ledger.record_tick(va, ve, vl)


@dataclass(frozen=True)
class AggregateLedger:
    """Field-wise sum of several cycle ledgers (a market of cycles)"""
    member_count: int = 0
    totals: TickFlows = field(default_factory=TickFlows)

    @property
    def residual(self) -> ValueAmount:
        return conservation_residual(self.totals)


def merge_ledgers(members: Iterable[Union[CycleLedger, AggregateLedger]]) -> AggregateLedger:
    """Exact field-wise sums; the residual is the sum of member residuals"""
    count = 0
    sums = [0, 0, 0, 0]
    for member in members:
        flows = member.cumulative if isinstance(member, CycleLedger) else member.totals
        count += 1 if isinstance(member, CycleLedger) else member.member_count
        sums[0] += flows.va.micro
        sums[1] += flows.ve.micro
        sums[2] += flows.vl.micro
        sums[3] += flows.vg.micro
    va, ve, vl, vg = (ValueAmount(_checked(s)) for s in sums)
    return AggregateLedger(member_count=count, totals=TickFlows(va, ve, vl, vg))


@dataclass(frozen=True)
class StockSnapshot:
    """Value held by one owner at one tick"""
    owner: str
    amount: ValueAmount
    tick: int = 0


def value_gained(initial: StockSnapshot, final: StockSnapshot) -> ValueAmount:
    """Value Gained = Value Final - Value Initial"""
    if initial.owner != final.owner:
        raise OwnerMismatchError(f"owner mismatch: {initial.owner!r} vs {final.owner!r}")
    return final.amount - initial.amount

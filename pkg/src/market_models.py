"""
Market Models - reported aggregates, supply/demand equilibrium and savings

Reported aggregates add zero-mean measurement error to exact member ledgers;
the mean residual per member then shrinks like 1/sqrt(n).
"""

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from value_ledger import MICRO, CycleLedger, TickFlows, ValueAmount, merge_ledgers

SIGNS = np.array([1.0, 1.0, -1.0, -1.0])  # va + ve - vl - vg
ERROR_FAMILIES = ("uniform", "normal")


class DegenerateEquilibriumError(ValueError):
    """Supply and demand lines are parallel and never meet"""


# ---------------------------------------------------------------------------
# Reported aggregates and the law of large numbers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorModel:
    """Zero-mean measurement error: uniform on [-scale, scale] or normal with sd scale"""
    family: str = "uniform"
    scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in ERROR_FAMILIES:
            raise ValueError(f"unknown error family '{self.family}' (expected uniform or normal)")
        if self.scale < 0:
            raise ValueError(f"error scale must be non-negative, got {self.scale}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")

    def generator(self, *stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, *stream] if stream else self.seed)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """(n, 4) error matrix, one row per member in va, ve, vl, vg order"""
        if self.family == "uniform":
            return rng.uniform(-self.scale, self.scale, size=(n, 4))
        return rng.normal(0.0, self.scale, size=(n, 4))

    def expected_sigma(self, n: int) -> float:
        """Standard deviation of the per-member mean residual"""
        if self.family == "uniform":
            return 2 * self.scale / math.sqrt(3 * n)
        return 2 * self.scale / math.sqrt(n)


@dataclass(frozen=True, eq=False)
class ReportedAggregate:
    true_totals: TickFlows
    reported_totals: Tuple[float, float, float, float]
    residual: float
    errors: np.ndarray

    @property
    def member_count(self) -> int:
        return len(self.errors)


def aggregate_with_errors(members: Sequence[Union[CycleLedger, TickFlows]], model: ErrorModel) -> ReportedAggregate:
    """Exact true totals plus reported totals perturbed by one error row per member"""
    ledgers = [m if isinstance(m, CycleLedger) else CycleLedger("member", m, 1) for m in members]
    true_totals = merge_ledgers(ledgers).totals
    errors = model.draw(model.generator(), len(ledgers))
    error_sums = errors.sum(axis=0)
    true_values = (true_totals.va, true_totals.ve, true_totals.vl, true_totals.vg)
    reported = tuple(a.to_float() + float(e) for a, e in zip(true_values, error_sums))
    residual = true_totals_residual(true_totals) + float(error_sums @ SIGNS)
    return ReportedAggregate(true_totals, reported, residual, errors)


def true_totals_residual(totals: TickFlows) -> float:
    return (totals.va.micro + totals.ve.micro - totals.vl.micro - totals.vg.micro) / MICRO


@dataclass(frozen=True, eq=False)
class LlnStatistics:
    n: int
    mean_residual_per_member: float
    abs_mean: float
    expected_sigma: float
    sample_sigma: float
    per_replica: np.ndarray


def _replica_residual(n: int, model: ErrorModel, replica: int) -> float:
    """Mean residual per member of n random balanced ledgers in one replica"""
    rng = model.generator(replica)
    flows = rng.integers(0, 1000 * MICRO, size=(n, 3))
    vg = flows[:, 0] + flows[:, 1] - flows[:, 2]
    exact = int((flows[:, 0] + flows[:, 1] - flows[:, 2] - vg).sum())
    errors = model.draw(rng, n)
    return (exact / MICRO + float(errors.sum(axis=0) @ SIGNS)) / n


def lln_experiment(n: int, model: ErrorModel, replicas: int = 1, workers: int = 1) -> LlnStatistics:
    """Replicas run on independent streams seeded by (seed, replica); results merge by index"""
    if n < 1 or replicas < 1:
        raise ValueError("n and replicas must be at least 1")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(lambda r: _replica_residual(n, model, r), range(replicas)))
    else:
        values = [_replica_residual(n, model, r) for r in range(replicas)]
    per_replica = np.array(values)
    return LlnStatistics(
        n=n,
        mean_residual_per_member=float(per_replica.mean()),
        abs_mean=float(np.abs(per_replica).mean()),
        expected_sigma=model.expected_sigma(n),
        sample_sigma=float(per_replica.std(ddof=1)) if replicas > 1 else 0.0,
        per_replica=per_replica,
    )


def lln_slope(ns: Iterable[int], model: ErrorModel, replicas: int = 200, workers: int = 1) -> float:
    """Slope of log(mean |residual per member|) against log n; about -0.5"""
    ns = list(ns)
    means = [lln_experiment(n, model, replicas, workers).abs_mean for n in ns]
    slope, _ = np.polyfit(np.log(ns), np.log(means), 1)
    return float(slope)


def experiment_to_json(stats: LlnStatistics, model: ErrorModel) -> str:
    """{params, statistics} record of one experiment, stable key order"""
    payload = {
        "params": {"n": stats.n, "replicas": int(stats.per_replica.size), "family": model.family,
                   "scale": model.scale, "seed": model.seed},
        "statistics": {"mean_residual_per_member": stats.mean_residual_per_member, "abs_mean": stats.abs_mean,
                       "expected_sigma": stats.expected_sigma, "sample_sigma": stats.sample_sigma},
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Supply and demand
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SupplyDemandParams:
    """Demand pd = kd*q + cd, supply ps = ks*q + cs"""
    kd: float
    cd: float
    ks: float
    cs: float

    def demand_price(self, q: float) -> float:
        return self.kd * q + self.cd

    def supply_price(self, q: float) -> float:
        return self.ks * q + self.cs


@dataclass(frozen=True)
class Equilibrium:
    qe: float
    pe: float


@dataclass(frozen=True)
class EquilibriumResidual:
    """residual is (ks - kd) * qe; flag names a special case or is empty"""
    residual: float
    qe: Optional[float]
    flag: str = ""


def solve_equilibrium(p: SupplyDemandParams) -> Equilibrium:
    if p.kd == p.ks:
        raise DegenerateEquilibriumError(
            f"degenerate: supply and demand have the same slope {p.kd} and never meet"
            if p.cd != p.cs else "degenerate: supply and demand coincide, every q is an equilibrium"
        )
    qe = (p.cs - p.cd) / (p.kd - p.ks)
    return Equilibrium(qe=qe, pe=p.demand_price(qe))


def cov_equilibrium_residual(p: SupplyDemandParams) -> EquilibriumResidual:
    """VA - VL at equilibrium with VA = ks*q, VL = kd*q, VE = pe; equals VG - VE"""
    if p.kd == p.ks:
        if p.cd == p.cs:
            return EquilibriumResidual(0.0, None, "all-q equilibrium")
        raise DegenerateEquilibriumError(f"degenerate: parallel supply and demand (slope {p.kd})")
    qe = solve_equilibrium(p).qe
    flag = ""
    if abs(p.ks - p.kd) <= 1e-9 * max(abs(p.ks), abs(p.kd), 1.0):
        flag = "degenerate-approach"
    elif qe == 0:
        flag = "zero-quantity equilibrium"
    return EquilibriumResidual((p.ks - p.kd) * qe, qe, flag)


def equilibrium_curve(p: SupplyDemandParams, qs: Iterable[float]) -> List[Tuple[float, float]]:
    """(q, pd - ps) rows; the gap is zero at qe"""
    return [(q, p.demand_price(q) - p.supply_price(q)) for q in qs]


# ---------------------------------------------------------------------------
# Savings
# ---------------------------------------------------------------------------

def _exact_rate(r) -> Fraction:
    return r if isinstance(r, Fraction) else Fraction(str(r))


@dataclass(frozen=True)
class SavingsParams:
    """Initial balance x, annual rate r, monthly fee y, horizon in years"""
    x: ValueAmount
    r: Union[Fraction, float, str]
    y: ValueAmount
    years: int

    def __post_init__(self):
        if self.years < 0:
            raise ValueError(f"years must be non-negative, got {self.years}")

    @property
    def rate(self) -> Fraction:
        return _exact_rate(self.r)


@dataclass(frozen=True)
class SavingsComparison:
    """closed_form_vg and abs_diff are reals; the oracle stays in micro-units"""
    compounding: str
    years: int
    closed_form_vg: float
    oracle_vg: ValueAmount
    abs_diff: float
    losses_term: float


def _annual_oracle(p: SavingsParams) -> Fraction:
    vg = p.x.to_fraction()
    for _ in range(p.years):
        vg = (1 + p.rate) * vg - 12 * p.y.to_fraction()
    return vg


def _annual_closed(p: SavingsParams) -> Tuple[Fraction, Fraction]:
    x, y, r, t = p.x.to_fraction(), p.y.to_fraction(), p.rate, p.years
    if t == 1:
        return x * (r + 1) - 12 * y, 12 * y
    if t == 2:
        return x * (r + 1) ** 2 - 12 * y * (r + 2), 12 * y * (r + 2)
    losses = 12 * y * sum((1 + r) ** j for j in range(t))
    return x * (1 + r) ** t - losses, losses


def _monthly_oracle(p: SavingsParams) -> Fraction:
    vg, monthly = p.x.to_fraction(), 1 + p.rate / 12
    for _ in range(12 * p.years):
        vg = monthly * vg - p.y.to_fraction()
    return vg


def savings_closed_form(p: SavingsParams, compounding: str = "annual") -> SavingsComparison:
    """Closed form against the month/year loop oracle, all in exact rationals"""
    if compounding == "annual":
        closed, losses = _annual_closed(p)
        oracle = _annual_oracle(p)
    elif compounding == "monthly":
        monthly = 1 + p.rate / 12
        # the closed form keeps the principal; the fee stream is reported separately
        closed = p.x.to_fraction() * monthly ** (12 * p.years)
        losses = p.y.to_fraction() * sum(monthly ** j for j in range(12 * p.years))
        oracle = _monthly_oracle(p)
    else:
        raise ValueError(f"unknown compounding '{compounding}' (expected annual or monthly)")
    # abs_diff compares exact rationals before any rounding
    return SavingsComparison(
        compounding=compounding,
        years=p.years,
        closed_form_vg=float(closed),
        oracle_vg=ValueAmount.from_fraction(oracle),
        abs_diff=float(abs(closed - oracle)),
        losses_term=float(losses),
    )


def savings_curve(p: SavingsParams) -> List[Tuple[int, str]]:
    """(year, balance) rows from the annual oracle"""
    rows = []
    for year in range(p.years + 1):
        rows.append((year, ValueAmount.from_fraction(_annual_oracle(SavingsParams(p.x, p.r, p.y, year))).display()))
    return rows


def write_curve_csv(path: Path, header: Tuple[str, str], rows: Iterable[Tuple]) -> Path:
    """Two-column CSV for plotting"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    return path

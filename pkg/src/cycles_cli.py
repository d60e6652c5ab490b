#!/usr/bin/env python3
"""
cycles - command-line front end for the cycles-of-value simulator

    cycles_cli.py check <file>
    cycles_cli.py run <file> [--out DIR] [--seed N] [--format csv|json] [--detect NAME ...]
    cycles_cli.py detect <csv> --detector NAME [--col-map role=column,...] [--cumulative] [--tol X]
    cycles_cli.py demo <name|all> [--out [DIR]]

Exit codes: 0 success, 1 domain failure, 2 I/O or usage failure.
"""

import argparse
import json
import re
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

import cycles_config as config
import value_calculus as vc
from cycle_engine import EngineError, SimulationResult, run, run_detectors, write_run
from demo_scenarios import DEMO_NAMES, demo_source
from market_models import (
    ErrorModel, SavingsParams, SupplyDemandParams, aggregate_with_errors,
    cov_equilibrium_residual, equilibrium_curve, experiment_to_json, lln_experiment, savings_closed_form,
    savings_curve, solve_equilibrium, write_curve_csv,
)
from scenario_dsl import (
    DETECTORS, Const, DetectorDecl, Diagnostic, Prop, ScenarioAst, ScenarioError,
    check_scenario, parse_scenario,
)
from value_ledger import ZERO, ValueOverflowError

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_IO = 2

_quiet = config.QUIET


def say(message: str):
    """Progress line on stdout, silenced by --quiet"""
    if not _quiet:
        print(message)


def print_diagnostics(diagnostics: Sequence[Diagnostic], source: str):
    for diag in diagnostics:
        print(diag.render(source), file=sys.stderr)


def _read_scenario(path: Path) -> str:
    return Path(path).read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def cmd_check(path: Path) -> int:
    try:
        text = _read_scenario(path)
    except (OSError, UnicodeDecodeError) as e:
        print(f"❌ cannot read {path}: {e}", file=sys.stderr)
        return EXIT_IO
    try:
        ast = parse_scenario(text)
    except ScenarioError as e:
        print_diagnostics(e.diagnostics, str(path))
        return EXIT_FAIL
    notes = check_scenario(ast)
    print_diagnostics(notes, str(path))
    warnings = sum(1 for d in notes if d.severity == "warning")
    say(f"✓ {path}: {len(ast.cycles)} cycles, {len(ast.agents)} agents, {len(ast.pools)} pools"
        f" ({warnings} warnings)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    scenario_path: Path
    output_dir: Path = config.OUTPUT_DIR
    seed: Optional[int] = None
    format: str = "csv"
    detectors: Optional[List[str]] = None

    def __post_init__(self):
        if self.format not in ("csv", "json"):
            raise ValueError(f"format must be csv or json, got {self.format!r}")


_DETECTOR_ARG = re.compile(r"^\s*(\w+)\s*(?:\(([\w\s,]*)\))?\s*$")


def parse_detector_override(spec: str, ast: ScenarioAst) -> DetectorDecl:
    """'name' or 'name(a, b)' checked like a detect item"""
    match = _DETECTOR_ARG.match(spec)
    if not match:
        raise ValueError(f"invalid detector '{spec}'")
    name = match.group(1)
    args = tuple(a.strip() for a in (match.group(2) or "").split(",") if a.strip())
    if name not in DETECTORS:
        raise ValueError(f"unknown detector '{name}' (expected one of: {', '.join(sorted(DETECTORS))})")
    low, high, tags = DETECTORS[name]
    if args and (len(args) < low or (high is not None and len(args) > high)):
        raise ValueError(f"detector '{name}' takes {low} cycle arguments")
    for arg in args:
        if ast.cycle(arg) is None:
            raise ValueError(f"unresolved reference '{arg}'")
    if not args:
        for tag in tags:
            if not ast.cycles_tagged(tag):
                raise ValueError(f"detector '{name}' needs a cycle tagged '{tag}'")
    return DetectorDecl(name, args)


def cmd_run(run_config: RunConfig) -> int:
    path = run_config.scenario_path
    try:
        text = _read_scenario(path)
    except (OSError, UnicodeDecodeError) as e:
        print(f"❌ cannot read {path}: {e}", file=sys.stderr)
        return EXIT_IO
    try:
        ast = parse_scenario(text)
    except ScenarioError as e:
        print_diagnostics(e.diagnostics, str(path))
        return EXIT_FAIL
    if run_config.seed is not None:
        ast = replace(ast, seed=run_config.seed)

    detectors = None
    if run_config.detectors is not None:
        try:
            detectors = [parse_detector_override(d, ast) for d in run_config.detectors]
        except ValueError as e:
            print(f"{path}: error: {e}", file=sys.stderr)
            return EXIT_FAIL

    print_diagnostics([d for d in check_scenario(ast) if d.severity != "info"], str(path))
    say(f"🔍 Running '{ast.name}': {ast.horizon} ticks, dt = {ast.dt}")
    try:
        result = run(ast)
        events = run_detectors(result, detectors)
    except (EngineError, ValueOverflowError, vc.SeriesTooShortError, vc.GridMismatchError) as e:
        print(f"❌ {path}: run failed: {e}", file=sys.stderr)
        return EXIT_FAIL
    print_diagnostics(result.diagnostics, str(path))

    try:
        written = write_run(result, run_config.output_dir, run_config.format, events)
    except OSError as e:
        print(f"❌ cannot write {run_config.output_dir}: {e}", file=sys.stderr)
        return EXIT_IO
    say(f"✓ Wrote {len(written)} files to {run_config.output_dir}/")
    say(f"📊 {len(events)} events")
    return EXIT_OK


# ---------------------------------------------------------------------------
# detect
# ---------------------------------------------------------------------------

# detector -> role -> default column
DETECT_COLUMNS: Dict[str, Dict[str, str]] = {
    "max_vg": {"vg": "vg", "va": "va", "vl": "vl"},
    "peak_marginal_vg": {"vg": "vg", "va": "va", "vl": "vl"},
    "stable_market": {"va_m": "va", "vl_m": "vl"},
    "subsidy_cross": {"veg": "veg", "vgn": "vgn"},
    "org_optimum": {"vgn": "vgn", "vgg": "vgg"},
    "gov_optimum": {"vgg": "vgg", "vgc": "vgc"},
    "motion": {"series": "vg"},
}


def parse_col_map(items: Optional[Sequence[str]]) -> Dict[str, str]:
    mapping = {}
    for item in items or ():
        for pair in item.split(","):
            if not pair.strip():
                continue
            role, sep, column = pair.partition("=")
            if not sep or not role.strip() or not column.strip():
                raise ValueError(f"invalid column mapping '{pair}' (expected role=column)")
            mapping[role.strip()] = column.strip()
    return mapping


def _run_detector(name: str, series: Dict[str, vc.Series], tol: Optional[float]) -> List[vc.Event]:
    if name == "max_vg":
        return vc.detect_max_vg(series["vg"], series["va"], series["vl"], tol)
    if name == "peak_marginal_vg":
        return vc.detect_peak_marginal_vg(series["vg"], series["va"], series["vl"], tol)
    if name == "stable_market":
        if tol is None:
            tol = vc.default_tolerance(vc.derivative(series["va_m"], 1))
        return vc.detect_stable_market(series["va_m"], series["vl_m"], tol)
    if name == "subsidy_cross":
        event = vc.detect_subsidy_cross(series["veg"], series["vgn"])
        return [] if event is None else [event]
    if name == "org_optimum":
        return vc.detect_org_optimum(series["vgn"], series["vgg"])
    if name == "gov_optimum":
        return vc.detect_gov_optimum(series["vgg"], series["vgc"])
    return vc.detect_motion_changes(series["series"])


def cmd_detect(csv_path: Path, detector: str, col_map: Optional[Dict[str, str]] = None,
               cumulative: bool = False, tol: Optional[float] = None) -> int:
    """Run one detector over CSV columns; --cumulative turns per-tick flows into running totals"""
    if detector not in DETECT_COLUMNS:
        print(f"❌ unknown detector '{detector}' (expected one of: {', '.join(sorted(DETECT_COLUMNS))})",
              file=sys.stderr)
        return EXIT_FAIL
    roles = dict(DETECT_COLUMNS[detector])
    unknown = set(col_map or {}) - set(roles)
    if unknown:
        print(f"❌ unknown role(s) {', '.join(sorted(unknown))} for '{detector}'"
              f" (expected: {', '.join(roles)})", file=sys.stderr)
        return EXIT_FAIL
    roles.update(col_map or {})

    try:
        frame = pd.read_csv(csv_path, dtype=str)
    except (OSError, UnicodeDecodeError) as e:
        print(f"❌ cannot read {csv_path}: {e}", file=sys.stderr)
        return EXIT_IO
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        print(f"❌ {csv_path}: not a series CSV: {e}", file=sys.stderr)
        return EXIT_FAIL

    required = ["tick", "time", *roles.values()]
    columns = list(frame.columns)
    if columns[:2] != ["tick", "time"] or any(c not in columns for c in required):
        print(f"❌ {csv_path}: expected columns {','.join(dict.fromkeys(required))}, got {','.join(columns)}",
              file=sys.stderr)
        return EXIT_FAIL

    try:
        times = [Fraction(t) for t in frame["time"]]
        if not times:
            raise ValueError("no rows")
        dt = times[1] - times[0] if len(times) > 1 else Fraction(1)
        series = {}
        for role, column in roles.items():
            values = frame[column].astype(float).to_numpy()
            if cumulative:
                values = np.concatenate([[0.0], np.cumsum(values[:-1])])
            series[role] = vc.Series(t0=float(times[0]), dt=float(dt), values=values)
        events = _run_detector(detector, series, tol)
    except (ValueError, ZeroDivisionError) as e:
        print(f"❌ {csv_path}: {e}", file=sys.stderr)
        return EXIT_FAIL

    sys.stdout.write(vc.events_to_json(events))
    return EXIT_OK


# ---------------------------------------------------------------------------
# demo
# ---------------------------------------------------------------------------

# demo -> quantity kind -> tolerance rule
#   exact: 0; rel:X: X * max(1, |expected|); dt / dt2:X: one dt / X dt^2 * max(1, |expected|);
#   sigma:X: X standard deviations of the estimate
DEMO_TOLERANCES: Dict[str, Dict[str, str]] = {
    "savings": {"balance": "exact"},
    "supply_demand": {"price": "rel:1e-12"},
    "lln": {"residual": "exact", "mean": "sigma:3"},
    "shale": {"time": "dt", "refinement": "dt"},
    "government": {"time": "dt", "witness": "dt2:10"},
    "bankchain": {"total": "exact", "residual": "exact"},
}


def demo_tolerance(demo: str, kind: str, ast: ScenarioAst, expected: float = 0.0, sigma: float = 0.0) -> float:
    rule = DEMO_TOLERANCES[demo][kind]
    name, _, arg = rule.partition(":")
    scale = max(1.0, abs(expected))
    if name == "exact":
        return 0.0
    if name == "rel":
        return float(arg) * scale
    if name == "dt":
        return float(ast.dt)
    if name == "dt2":
        return float(arg) * float(ast.dt) ** 2 * scale
    return float(arg) * sigma


@dataclass(frozen=True)
class DemoCheck:
    quantity: str
    expected: float
    observed: float
    tolerance: float

    @property
    def abs_diff(self) -> float:
        return abs(self.observed - self.expected)

    @property
    def rel_diff(self) -> float:
        return self.abs_diff / max(abs(self.expected), 1e-300)

    @property
    def passed(self) -> bool:
        # nan never passes
        return self.abs_diff <= self.tolerance


@dataclass
class DemoReport:
    name: str
    checks: List[DemoCheck] = field(default_factory=list)
    events: List[vc.Event] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def to_dict(self) -> Dict:
        return {
            "demo": self.name,
            "passed": self.passed,
            "checks": [
                {"quantity": c.quantity, "expected": c.expected, "observed": c.observed,
                 "abs_diff": c.abs_diff, "rel_diff": c.rel_diff, "tolerance": c.tolerance,
                 "passed": c.passed}
                for c in self.checks
            ],
        }


def _check(demo: str, kind: str, ast: ScenarioAst, quantity: str, expected: float, observed: float,
           sigma: float = 0.0) -> DemoCheck:
    return DemoCheck(quantity, expected, observed, demo_tolerance(demo, kind, ast, expected, sigma))


def _max_tick_residual(result: SimulationResult) -> float:
    worst = 0
    for rows in result.flows.values():
        for flows in rows:
            worst = max(worst, abs(flows.residual.micro))
    return worst / 1e6


def _first_event(events: List[vc.Event], kind: str) -> Optional[vc.Event]:
    return next((e for e in events if e.kind == kind), None)


def _demo_savings(ast: ScenarioAst, result: SimulationResult) -> List[DemoCheck]:
    cycle = ast.cycle("account")
    x = ast.agent("saver").initial
    r = cycle.ve.k if isinstance(cycle.ve, Prop) else Fraction(0)
    y = cycle.vl.rate if isinstance(cycle.vl, Const) else ZERO
    checks = []
    for year in (1, 2):
        closed = savings_closed_form(SavingsParams(x, r, y, year))
        tick = 12 * year
        checks.append(_check("savings", "balance", ast, f"stock at tick {tick} (year {year})",
                             closed.closed_form_vg, result.stocks["saver"][tick].to_float()))
        checks.append(_check("savings", "balance", ast, f"VG at tick {tick - 1}",
                             closed.closed_form_vg, result.flows["account"][tick - 1].vg.to_float()))
        checks.append(_check("savings", "balance", ast, f"closed form vs recurrence (year {year})",
                             0.0, closed.abs_diff))
    return checks


SUPPLY_DEMAND = SupplyDemandParams(kd=-2.0, cd=100.0, ks=3.0, cs=25.0)


def _demo_supply_demand(ast: ScenarioAst, result: SimulationResult) -> List[DemoCheck]:
    eq = solve_equilibrium(SUPPLY_DEMAND)
    cov = cov_equilibrium_residual(SUPPLY_DEMAND)
    flows = result.flows["market"][0]
    return [
        _check("supply_demand", "price", ast, "VE = equilibrium price", eq.pe, flows.ve.to_float()),
        _check("supply_demand", "price", ast, "VA = ks * qe", SUPPLY_DEMAND.ks * eq.qe, flows.va.to_float()),
        _check("supply_demand", "price", ast, "VL = kd * qe", SUPPLY_DEMAND.kd * eq.qe, flows.vl.to_float()),
        _check("supply_demand", "price", ast, "VG - VE = (ks - kd) * qe", cov.residual,
               (flows.vg - flows.ve).to_float()),
    ]


def _demo_lln(ast: ScenarioAst, result: SimulationResult) -> List[DemoCheck]:
    model = ErrorModel("uniform", 1.0, ast.seed)
    members = [result.final_state.ledgers[c.id] for c in ast.cycles]
    reported = aggregate_with_errors(members, model)
    true_residual = reported.true_totals.residual.to_float()
    stats = lln_experiment(10_000, model, replicas=1, workers=config.LLN_WORKERS)
    return [
        _check("lln", "residual", ast, "per-tick residual", 0.0, _max_tick_residual(result)),
        _check("lln", "residual", ast, "true aggregate residual", 0.0, true_residual),
        _check("lln", "mean", ast, "|mean residual per member| (n = 10000)", 0.0,
               abs(stats.mean_residual_per_member), sigma=stats.expected_sigma),
    ]


def refined(ast: ScenarioAst) -> ScenarioAst:
    """Same scenario on a grid with half the step and the same end time"""
    policies = tuple(replace(p, tick=p.tick * 2) for p in ast.policies)
    return replace(ast, dt=ast.dt / 2, horizon=ast.horizon * 2, policies=policies)


def _demo_shale(ast: ScenarioAst, result: SimulationResult) -> List[DemoCheck]:
    events = run_detectors(result)
    fine_events = run_detectors(run(refined(ast)))
    crossing = _first_event(events, "SubsidyCross")
    checks = [_check("shale", "time", ast, "SubsidyCross t* (VEg' = VGn' at 10/3)", 10 / 3,
                     crossing.time if crossing else float("nan"))]
    for coarse, fine in zip(events, fine_events):
        checks.append(_check("shale", "refinement", ast, f"{coarse.kind} shift when dt is halved",
                             0.0, abs(coarse.time - fine.time)))
    if len(events) != len(fine_events):
        checks.append(_check("shale", "refinement", ast, "event count when dt is halved",
                             float(len(events)), float(len(fine_events))))
    return checks


def _demo_government(ast: ScenarioAst, result: SimulationResult) -> List[DemoCheck]:
    optimum = _first_event(run_detectors(result), "GovOptimum")
    if optimum is None:
        return [_check("government", "time", ast, "GovOptimum t*", 3.5, float("nan"))]
    return [
        _check("government", "time", ast, "GovOptimum t*", 3.5, optimum.time),
        _check("government", "witness", ast, "VGg' + VGc' at t*", 0.0, optimum.witness["sum"]),
        _check("government", "witness", ast, "VGg' at t*", 3.0, optimum.witness["vgg_prime"]),
    ]


def _demo_bankchain(ast: ScenarioAst, result: SimulationResult) -> List[DemoCheck]:
    totals = result.total_value_series()
    drift = max(abs(t.micro - totals[0].micro) for t in totals) / 1e6
    return [
        _check("bankchain", "total", ast, "total system value drift", 0.0, drift),
        _check("bankchain", "residual", ast, "per-tick residual", 0.0, _max_tick_residual(result)),
    ]


DEMO_CHECKS = {
    "savings": _demo_savings,
    "supply_demand": _demo_supply_demand,
    "lln": _demo_lln,
    "shale": _demo_shale,
    "government": _demo_government,
    "bankchain": _demo_bankchain,
}


def run_demo(name: str, out_dir: Optional[Path] = None) -> DemoReport:
    ast = parse_scenario(demo_source(name))
    result = run(ast)
    report = DemoReport(name, DEMO_CHECKS[name](ast, result), run_detectors(result))
    if out_dir is not None:
        demo_dir = Path(out_dir) / name
        write_run(result, demo_dir, "csv", report.events)
        (demo_dir / "report.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        if name == "savings":
            cycle = ast.cycle("account")
            params = SavingsParams(ast.agent("saver").initial, cycle.ve.k, cycle.vl.rate, 30)
            write_curve_csv(demo_dir / "savings_curve.csv", ("year", "balance"), savings_curve(params))
        elif name == "supply_demand":
            qs = [float(q) for q in range(0, 31)]
            write_curve_csv(demo_dir / "equilibrium_curve.csv", ("q", "price_gap"),
                            equilibrium_curve(SUPPLY_DEMAND, qs))
        elif name == "lln":
            model = ErrorModel("uniform", 1.0, ast.seed)
            stats = lln_experiment(10_000, model, replicas=1, workers=config.LLN_WORKERS)
            (demo_dir / "lln_experiment.json").write_text(experiment_to_json(stats, model), encoding="utf-8")
    return report


def print_report(report: DemoReport):
    print("\n" + "=" * 80)
    print(f"DEMO: {report.name}")
    print("=" * 80)
    for c in report.checks:
        glyph = "✓" if c.passed else "❌"
        print(f"  {glyph} {c.quantity:45} expected {c.expected:.6f}  observed {c.observed:.6f}"
              f"  |diff| {c.abs_diff:.3e}  tol {c.tolerance:.3e}")
    print(f"  {'✅ PASS' if report.passed else '❌ FAIL'}")


def cmd_demo(name: str, out_dir: Optional[Path] = None) -> int:
    names = list(DEMO_NAMES) if name == "all" else [name]
    if any(n not in DEMO_NAMES for n in names):
        print(f"❌ unknown demo '{name}' (expected one of: all, {', '.join(DEMO_NAMES)})", file=sys.stderr)
        return EXIT_FAIL
    passed = True
    for demo in names:
        say(f"🔍 Running demo '{demo}'...")
        try:
            report = run_demo(demo, out_dir)
        except OSError as e:
            print(f"❌ cannot write demo output: {e}", file=sys.stderr)
            return EXIT_IO
        print_report(report)
        passed = passed and report.passed
    return EXIT_OK if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cycles", description="Cycles-of-value simulator")
    parser.add_argument("--quiet", action="store_true", help="suppress progress lines")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse and statically check a scenario")
    p.add_argument("file", type=Path)

    p = sub.add_parser("run", help="simulate a scenario and write its series")
    p.add_argument("file", type=Path)
    p.add_argument("--out", type=Path, default=config.OUTPUT_DIR)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--detect", action="append", metavar="NAME",
                   help="replace the scenario's detect items (repeatable)")

    p = sub.add_parser("detect", help="run a detector over series columns of a CSV")
    p.add_argument("csv", type=Path)
    p.add_argument("--detector", required=True)
    p.add_argument("--col-map", action="append", metavar="ROLE=COLUMN,...")
    p.add_argument("--cumulative", action="store_true",
                   help="columns hold per-tick flows; use their running totals")
    p.add_argument("--tol", type=float)

    p = sub.add_parser("demo", help="run a built-in demo and compare against closed forms")
    p.add_argument("name", help=f"one of: all, {', '.join(DEMO_NAMES)}")
    p.add_argument("--out", type=Path, nargs="?", const=config.OUTPUT_DIR)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    global _quiet
    args = build_parser().parse_args(argv)
    _quiet = config.QUIET or args.quiet

    if args.command == "check":
        return cmd_check(args.file)
    if args.command == "run":
        return cmd_run(RunConfig(args.file, args.out, args.seed, args.format, args.detect))
    if args.command == "detect":
        try:
            col_map = parse_col_map(args.col_map)
        except ValueError as e:
            print(f"❌ {e}", file=sys.stderr)
            return EXIT_IO
        return cmd_detect(args.csv, args.detector, col_map, args.cumulative, args.tol)
    return cmd_demo(args.name, args.out)


if __name__ == "__main__":
    sys.exit(main())

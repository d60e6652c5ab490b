"""
Cycle Engine - deterministic tick loop over a scenario

Each tick, every cycle (in declaration order) evaluates its flows from the
tick-start snapshot, debits VA from its actor and VE from its source, routes
VL and the balancing VG, and records the tick in its ledger. Abundant pools
are the only breach of closure and are tracked by cumulative outflow, so

    sum(stocks) + sum(finite pool levels) + sink - sum(abundant outflows)

stays constant to the micro-unit for the whole run.
"""

import csv
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

import numpy as np

import value_calculus as vc
from scenario_dsl import (
    DETECTORS, Const, CycleDecl, Diagnostic, DetectorDecl, Jolt, PolicyDecl, Prop, Ramp, RateExpr,
    ScenarioAst, SetParam,
)
from value_ledger import (
    AggregateLedger, CycleLedger, TickFlows, ValueAmount, ZERO, merge_ledgers, total,
)

FLOW_FIELDS = ("va", "ve", "vl", "vg")


class EngineError(RuntimeError):
    """Scenario cannot be executed"""


@dataclass(frozen=True)
class PoolState:
    """level None means abundant"""
    level: Optional[ValueAmount]
    cumulative_outflow: ValueAmount = ZERO

    @property
    def abundant(self) -> bool:
        return self.level is None


@dataclass
class WorldState:
    tick: int
    stocks: Dict[str, ValueAmount]
    pools: Dict[str, PoolState]
    sink: ValueAmount
    ledgers: Dict[str, CycleLedger]
    exprs: Dict[Tuple[str, str], RateExpr]
    pending_jolts: List[Tuple[Jolt, int]] = field(default_factory=list)  # (jolt, policy_log index)
    policy_log: List[Dict] = field(default_factory=list)
    diagnostics: List[Diagnostic] = field(default_factory=list)
    flagged: Set[Tuple[str, ...]] = field(default_factory=set)

    def copy(self) -> "WorldState":
        return WorldState(
            tick=self.tick,
            stocks=dict(self.stocks),
            pools=dict(self.pools),
            sink=self.sink,
            ledgers={k: v.copy() for k, v in self.ledgers.items()},
            exprs=dict(self.exprs),
            pending_jolts=list(self.pending_jolts),
            policy_log=list(self.policy_log),
            diagnostics=list(self.diagnostics),
            flagged=set(self.flagged),
        )


def initial_state(ast: ScenarioAst) -> WorldState:
    exprs = {}
    for cycle in ast.cycles:
        for flow in ("va", "ve", "vl"):
            exprs[(cycle.id, flow)] = cycle.expr(flow)
    return WorldState(
        tick=0,
        stocks={a.id: a.initial for a in ast.agents},
        pools={p.id: PoolState(p.initial) for p in ast.pools},
        sink=ZERO,
        ledgers={c.id: CycleLedger(c.id) for c in ast.cycles},
        exprs=exprs,
    )


def total_system_value(state: WorldState) -> ValueAmount:
    """Closed-system identity: constant across every tick of a run"""
    parts = list(state.stocks.values())
    for pool in state.pools.values():
        parts.append(-pool.cumulative_outflow if pool.abundant else pool.level)
    parts.append(state.sink)
    return total(parts)


# ---------------------------------------------------------------------------
# Tick mechanics
# ---------------------------------------------------------------------------

def _holder_level(state: WorldState, ref_name: str) -> ValueAmount:
    if ref_name in state.stocks:
        return state.stocks[ref_name]
    pool = state.pools.get(ref_name)
    if pool is None:
        raise EngineError(f"unknown reference '{ref_name}'")
    if pool.abundant:
        raise EngineError(f"prop() cannot read the level of abundant pool '{ref_name}'")
    return pool.level


def tick_amount(expr: RateExpr, snapshot: WorldState, tick: int, dt: Fraction) -> ValueAmount:
    """Per-tick amount of a rate expression: rate * dt, rounded half-to-even"""
    if isinstance(expr, Const):
        rate = expr.rate.to_fraction()
    elif isinstance(expr, Ramp):
        rate = expr.a + expr.b * tick * dt
    elif isinstance(expr, Prop):
        rate = expr.k * _holder_level(snapshot, expr.ref.name).to_fraction()
    else:
        raise EngineError(f"unsupported rate expression {expr!r}")
    return ValueAmount.from_fraction(rate * dt)


def _warn(state: WorldState, ast: ScenarioAst, key: Tuple[str, ...], message: str):
    """Warning emitted once per key and run"""
    if key in state.flagged:
        return
    state.flagged.add(key)
    decl = ast.cycle(key[1]) or ast.agent(key[1]) or ast.pool(key[1])
    line, column = (decl.line, decl.column) if decl is not None else (1, 1)
    state.diagnostics.append(Diagnostic("warning", line, column, message))


def _draw(state: WorldState, ast: ScenarioAst, holder: str, amount: ValueAmount,
          key: Optional[Tuple[str, ...]] = None) -> ValueAmount:
    """Take value out of an agent or pool; finite pools clamp at their level"""
    if holder in state.stocks:
        state.stocks[holder] = state.stocks[holder] - amount
        return amount
    pool = state.pools.get(holder)
    if pool is None:
        raise EngineError(f"unknown source '{holder}'")
    if pool.abundant:
        state.pools[holder] = replace(pool, cumulative_outflow=pool.cumulative_outflow + amount)
        return amount
    drawn = amount
    if amount > pool.level:
        drawn = max(pool.level, ZERO)
        _warn(state, ast, key or ("clamp", holder),
              f"pool '{holder}' depleted at tick {state.tick}: draw of {amount} clamped to {drawn}")
    state.pools[holder] = replace(pool, level=pool.level - drawn,
                                  cumulative_outflow=pool.cumulative_outflow + drawn)
    return drawn


def _credit(state: WorldState, holder: Optional[str], amount: ValueAmount):
    """Put value into an agent, a pool or (holder None) the environment sink"""
    if holder is None:
        state.sink = state.sink + amount
    elif holder in state.stocks:
        state.stocks[holder] = state.stocks[holder] + amount
    elif holder in state.pools:
        pool = state.pools[holder]
        if pool.abundant:
            state.pools[holder] = replace(pool, cumulative_outflow=pool.cumulative_outflow - amount)
        else:
            state.pools[holder] = replace(pool, level=pool.level + amount,
                                          cumulative_outflow=pool.cumulative_outflow - amount)
    else:
        raise EngineError(f"unknown target '{holder}'")


def apply_policy(state: WorldState, policy: PolicyDecl) -> WorldState:
    """Schedule a jolt for this tick or rewrite a rate parameter from now on"""
    if policy.tick != state.tick:
        raise EngineError(f"policy for tick {policy.tick} applied at tick {state.tick}")
    new = state.copy()
    action = policy.action
    if isinstance(action, Jolt):
        if action.amount:
            new.pending_jolts.append((action, len(new.policy_log)))
        new.policy_log.append({
            "tick": policy.tick, "kind": "jolt", "cycle": action.cycle, "flow": action.flow,
            "amount": action.amount.display(), "applied": ZERO.display(), "source": action.source,
        })
    elif isinstance(action, SetParam):
        key = (action.cycle, action.flow)
        if key not in new.exprs:
            raise EngineError(f"unknown parameter '{action.cycle}.{action.flow}'")
        old = new.exprs[key]
        if isinstance(old, Const):
            new.exprs[key] = Const(ValueAmount.from_fraction(action.value))
        elif isinstance(old, Prop):
            new.exprs[key] = Prop(old.ref, action.value)
        else:
            new.exprs[key] = Ramp(action.value, old.b)
        new.policy_log.append({
            "tick": policy.tick, "kind": "set", "cycle": action.cycle, "flow": action.flow,
            "value": str(action.value),
        })
    return new


def _run_cycle(state: WorldState, snapshot: WorldState, ast: ScenarioAst, cycle: CycleDecl) -> TickFlows:
    va = tick_amount(state.exprs[(cycle.id, "va")], snapshot, state.tick, ast.dt)
    ve = tick_amount(state.exprs[(cycle.id, "ve")], snapshot, state.tick, ast.dt)
    vl = tick_amount(state.exprs[(cycle.id, "vl")], snapshot, state.tick, ast.dt)

    if cycle.actor not in state.stocks:
        raise EngineError(f"cycle '{cycle.id}' has unknown actor '{cycle.actor}'")
    state.stocks[cycle.actor] = state.stocks[cycle.actor] - va
    ve = _draw(state, ast, cycle.ve_source, ve)

    # jolts: the named pool funds extra VA/VE, or receives extra VL
    jolt_va = jolt_ve = jolt_vl = ZERO
    for jolt, log_index in [(j, i) for j, i in state.pending_jolts if j.cycle == cycle.id]:
        if jolt.flow == "vl":
            _credit(state, jolt.source, jolt.amount)
            jolt_vl = jolt_vl + jolt.amount
            applied = jolt.amount
        else:
            applied = _draw(state, ast, jolt.source, jolt.amount,
                            key=("jolt_clamp", cycle.id, str(state.tick), str(log_index)))
            if jolt.flow == "va":
                jolt_va = jolt_va + applied
            else:
                jolt_ve = jolt_ve + applied
        state.policy_log[log_index] = {**state.policy_log[log_index], "applied": applied.display()}

    flows = state.ledgers[cycle.id].record_tick(va + jolt_va, ve + jolt_ve, vl + jolt_vl)
    _credit(state, cycle.vl_target, vl)
    _credit(state, cycle.vg_target or cycle.actor, flows.vg)

    if flows.vg.is_negative():
        _warn(state, ast, ("negative_vg", cycle.id),
              f"cycle '{cycle.id}' recorded negative value gained at tick {state.tick}")
    return flows


def step(state: WorldState, ast: ScenarioAst) -> Tuple[WorldState, Dict[str, TickFlows]]:
    """Advance one tick; Prop expressions read the tick-start snapshot"""
    if state.tick >= ast.horizon:
        raise EngineError(f"tick {state.tick} is past the horizon {ast.horizon}")
    snapshot = state
    new = state.copy()
    flows = {}
    for cycle in ast.cycles:
        flows[cycle.id] = _run_cycle(new, snapshot, ast, cycle)
        for agent, stock in new.stocks.items():
            if stock.is_negative():
                _warn(new, ast, ("negative_stock", agent),
                      f"agent '{agent}' stock went negative at tick {new.tick} (debt)")
    new.pending_jolts = []
    new.tick += 1
    return new, flows


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------

@dataclass
class SimulationResult:
    """Per-tick series of one run; stock, pool and sink rows are tick-start snapshots"""
    ast: ScenarioAst
    flows: Dict[str, List[TickFlows]]
    stocks: Dict[str, List[ValueAmount]]
    pools: Dict[str, List[PoolState]]
    sink: List[ValueAmount]
    policy_log: List[Dict]
    diagnostics: List[Diagnostic]
    final_state: WorldState

    @property
    def ticks(self) -> int:
        return len(self.sink)

    def time(self, tick: int) -> Fraction:
        return tick * self.ast.dt

    def flow_series(self, cycle_id: str, flow: str) -> List[ValueAmount]:
        return [getattr(f, flow) for f in self.flows[cycle_id]]

    def value_series(self, cycle_id: str, flow: str) -> List[ValueAmount]:
        """Running total of a flow at tick start: 0, f0, f0+f1, ..."""
        out, running = [], 0
        for amount in self.flow_series(cycle_id, flow):
            out.append(ValueAmount(running))
            running += amount.micro
        return out

    def series(self, cycle_id: str, flow: str) -> vc.Series:
        values = np.array([a.micro for a in self.value_series(cycle_id, flow)], dtype=float) / 1e6
        return vc.Series(t0=0.0, dt=float(self.ast.dt), values=values)

    def market_series(self, cycle_ids: List[str], flow: str) -> vc.Series:
        micro = np.zeros(self.ticks)
        for cycle_id in cycle_ids:
            micro += np.array([a.micro for a in self.value_series(cycle_id, flow)], dtype=float)
        return vc.Series(t0=0.0, dt=float(self.ast.dt), values=micro / 1e6)

    def total_value_series(self) -> List[ValueAmount]:
        """Closed-system total at every tick start, plus the final state"""
        out = []
        for tick in range(self.ticks):
            parts = [self.stocks[a][tick] for a in self.stocks]
            for pool_states in self.pools.values():
                p = pool_states[tick]
                parts.append(-p.cumulative_outflow if p.abundant else p.level)
            parts.append(self.sink[tick])
            out.append(total(parts))
        out.append(total_system_value(self.final_state))
        return out

    def aggregate_by_tag(self) -> Dict[str, AggregateLedger]:
        """Market aggregation of the final ledgers per cycle tag ('none' for untagged)"""
        groups: Dict[str, List[CycleLedger]] = {}
        for cycle in self.ast.cycles:
            groups.setdefault(cycle.tag or "none", []).append(self.final_state.ledgers[cycle.id])
        return {tag: merge_ledgers(members) for tag, members in groups.items()}


def run(ast: ScenarioAst) -> SimulationResult:
    """Execute horizon ticks; identical AST and seed give identical results"""
    state = initial_state(ast)
    flows: Dict[str, List[TickFlows]] = {c.id: [] for c in ast.cycles}
    stocks: Dict[str, List[ValueAmount]] = {a.id: [] for a in ast.agents}
    pools: Dict[str, List[PoolState]] = {p.id: [] for p in ast.pools}
    sink: List[ValueAmount] = []

    by_tick: Dict[int, List[PolicyDecl]] = {}
    for policy in ast.policies:
        by_tick.setdefault(policy.tick, []).append(policy)

    for tick in range(ast.horizon):
        for agent_id, stock in state.stocks.items():
            stocks[agent_id].append(stock)
        for pool_id, pool in state.pools.items():
            pools[pool_id].append(pool)
        sink.append(state.sink)

        for policy in by_tick.get(tick, []):
            state = apply_policy(state, policy)
        state, tick_flows = step(state, ast)
        for cycle_id, f in tick_flows.items():
            flows[cycle_id].append(f)

    return SimulationResult(
        ast=ast,
        flows=flows,
        stocks=stocks,
        pools=pools,
        sink=sink,
        policy_log=state.policy_log,
        diagnostics=state.diagnostics,
        final_state=state,
    )


# ---------------------------------------------------------------------------
# Post-hoc detectors
# ---------------------------------------------------------------------------

def _pair(result: SimulationResult, args: Tuple[str, ...], tags: Tuple[str, str]) -> Tuple[str, str]:
    if args:
        return args[0], args[1]
    return result.ast.cycles_tagged(tags[0])[0].id, result.ast.cycles_tagged(tags[1])[0].id


# samples each detector needs for its widest stencil
MIN_SAMPLES = {"motion": 5}
DEFAULT_MIN_SAMPLES = 3


def _skip_detector(result: SimulationResult, det: DetectorDecl, needed: int):
    diag = Diagnostic("info", det.line, det.column,
                      f"detector '{det.name}' skipped: needs at least {needed} ticks, got {result.ticks}")
    if diag not in result.diagnostics:
        result.diagnostics.append(diag)


def run_detectors(result: SimulationResult, detectors=None) -> List[vc.Event]:
    """Run the scenario's detect items over the recorded value series; short runs skip with an info note"""
    events: List[vc.Event] = []
    all_cycles = [c.id for c in result.ast.cycles]
    for det in (detectors if detectors is not None else result.ast.detectors):
        name, args = det.name, tuple(det.args)
        if name not in DETECTORS:
            raise EngineError(f"unknown detector '{name}'")
        needed = MIN_SAMPLES.get(name, DEFAULT_MIN_SAMPLES)
        if result.ticks < needed:
            _skip_detector(result, det, needed)
            continue
        if name in ("max_vg", "peak_marginal_vg", "motion"):
            for cycle_id in (args or all_cycles):
                vg = result.series(cycle_id, "vg")
                if name == "motion":
                    found = vc.detect_motion_changes(vg)
                else:
                    va, vl = result.series(cycle_id, "va"), result.series(cycle_id, "vl")
                    detector = vc.detect_max_vg if name == "max_vg" else vc.detect_peak_marginal_vg
                    found = detector(vg, va, vl)
                events.extend(replace(e, subject=cycle_id) for e in found)
        elif name == "stable_market":
            members = list(args or all_cycles)
            va_m = result.market_series(members, "va")
            vl_m = result.market_series(members, "vl")
            tol = vc.default_tolerance(vc.derivative(va_m, 1))
            found = vc.detect_stable_market(va_m, vl_m, tol)
            events.extend(replace(e, subject=",".join(members)) for e in found)
        elif name == "subsidy_cross":
            g, n = _pair(result, args, ("g", "n"))
            event = vc.detect_subsidy_cross(result.series(g, "ve"), result.series(n, "vg"))
            if event is not None:
                events.append(replace(event, subject=f"{g},{n}"))
        elif name == "org_optimum":
            n, g = _pair(result, args, ("n", "g"))
            found = vc.detect_org_optimum(result.series(n, "vg"), result.series(g, "vg"))
            events.extend(replace(e, subject=f"{n},{g}") for e in found)
        elif name == "gov_optimum":
            g, c = _pair(result, args, ("g", "c"))
            found = vc.detect_gov_optimum(result.series(g, "vg"), result.series(c, "vg"))
            events.extend(replace(e, subject=f"{g},{c}") for e in found)
    return events


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _fixed(value: Fraction) -> str:
    return ValueAmount.from_fraction(value).display()


def write_run(result: SimulationResult, out_dir: Path, fmt: str = "csv",
              events: Optional[List[vc.Event]] = None) -> List[Path]:
    """Write the run directory; returns the files written"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    if fmt == "csv":
        for cycle_id, rows in result.flows.items():
            path = out_dir / f"cycle_{cycle_id}.csv"
            with open(path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(["tick", "time", *FLOW_FIELDS])
                for tick, flows in enumerate(rows):
                    writer.writerow([tick, _fixed(result.time(tick)), *flows.as_row()])
            written.append(path)

        for agent_id, rows in result.stocks.items():
            path = out_dir / f"agent_{agent_id}.csv"
            with open(path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(["tick", "time", "stock"])
                for tick, stock in enumerate(rows):
                    writer.writerow([tick, _fixed(result.time(tick)), stock.display()])
            written.append(path)

        path = out_dir / "pools.csv"
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["tick", "time", "pool", "level", "cumulative_outflow"])
            for tick in range(result.ticks):
                for pool_id, rows in result.pools.items():
                    p = rows[tick]
                    level = "abundant" if p.abundant else p.level.display()
                    writer.writerow([tick, _fixed(result.time(tick)), pool_id, level,
                                     p.cumulative_outflow.display()])
        written.append(path)

        path = out_dir / "sink.csv"
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["tick", "time", "sink"])
            for tick, amount in enumerate(result.sink):
                writer.writerow([tick, _fixed(result.time(tick)), amount.display()])
        written.append(path)
    elif fmt == "json":
        payload = {
            "scenario": result.ast.name,
            "dt": _fixed(result.ast.dt),
            "horizon": result.ast.horizon,
            "seed": result.ast.seed,
            "cycles": {
                cycle_id: {flow: [getattr(f, flow).display() for f in rows] for flow in FLOW_FIELDS}
                for cycle_id, rows in result.flows.items()
            },
            "agents": {a: [s.display() for s in rows] for a, rows in result.stocks.items()},
            "pools": {
                p: [{"level": "abundant" if s.abundant else s.level.display(),
                     "cumulative_outflow": s.cumulative_outflow.display()} for s in rows]
                for p, rows in result.pools.items()
            },
            "sink": [s.display() for s in result.sink],
        }
        path = out_dir / "result.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(path)
    else:
        raise ValueError(f"unknown output format '{fmt}' (expected csv or json)")

    path = out_dir / "policies.json"
    path.write_text(json.dumps(result.policy_log, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(path)

    if events is not None:
        path = out_dir / "events.json"
        path.write_text(vc.events_to_json(events), encoding="utf-8")
        written.append(path)
    return written

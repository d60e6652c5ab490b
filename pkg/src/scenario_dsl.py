"""
Scenario DSL - parse, check and format scenario files

A scenario declares pools, agents, cycles of value, policies and detectors:

    scenario "bankchain" {
      dt = 1
      horizon = 120
      pool future { initial = abundant }
      agent firm { initial = 100 role = producer }
      cycle produce tag = n {
        actor = firm
        va = 10  ve = prop(nature, 0.01) from nature
        vl = 3 to bank
      }
      at 10 jolt produce va 500 from future
      detect max_vg(produce)
    }

Comments run from "--" to the end of the line.
"""

import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Dict, List, Optional, Tuple, Union

from lark import Lark, Token, Tree
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken

from value_ledger import ValueAmount, ZERO

GRAMMAR = r"""
start: "scenario" STRING "{" item* "}"

?item: setting
     | pool
     | agent
     | cycle
     | policy
     | detector

setting: SETTING "=" NUMBER
pool: "pool" IDENT "{" "initial" "=" (NUMBER | ABUNDANT) "}"
agent: "agent" IDENT "{" "initial" "=" NUMBER ("role" "=" IDENT)? "}"
cycle: "cycle" IDENT ("tag" "=" IDENT)? "{" clause* "}"

?clause: actor_clause
       | va_clause
       | ve_clause
       | vl_clause
       | vg_clause

actor_clause: "actor" "=" IDENT
va_clause: "va" "=" expr
ve_clause: "ve" "=" expr "from" IDENT
vl_clause: "vl" "=" expr ("to" IDENT)?
vg_clause: "vg" "to" IDENT

policy: "at" NUMBER (jolt | set_param)
jolt: "jolt" IDENT jolt_flow NUMBER "from" IDENT
!jolt_flow: "va" | "ve" | "vl"
set_param: "set" ref "=" NUMBER

detector: "detect" IDENT ("(" IDENT ("," IDENT)* ")")?

?expr: const
     | prop
     | ramp
const: NUMBER
prop: "prop" "(" ref "," NUMBER ")"
ramp: "ramp" "(" NUMBER "," NUMBER ")"
ref: IDENT ("." IDENT)?

SETTING: "dt" | "horizon" | "seed"
ABUNDANT: "abundant"
IDENT: /[A-Za-z_][A-Za-z0-9_]*/
NUMBER: /[+-]?[0-9]+(\.[0-9]+)?/
STRING: /"(\\.|[^"\\\n])*"/
COMMENT: /--[^\n]*/

%import common.WS
%ignore WS
%ignore COMMENT
"""

_PARSER = Lark(GRAMMAR, parser="lalr", lexer="contextual", propagate_positions=True)

ROLES = ("producer", "consumer", "bank", "central_bank", "government", "citizens", "other")
TAGS = ("n", "g", "c")
FLOWS = ("va", "ve", "vl")
MAX_FRACTION_DIGITS = 6

# name -> (min args, max args or None, tags used when no args are given)
DETECTORS: Dict[str, Tuple[int, Optional[int], Tuple[str, ...]]] = {
    "max_vg": (0, None, ()),
    "peak_marginal_vg": (0, None, ()),
    "stable_market": (0, None, ()),
    "motion": (0, None, ()),
    "subsidy_cross": (2, 2, ("g", "n")),
    "org_optimum": (2, 2, ("n", "g")),
    "gov_optimum": (2, 2, ("g", "c")),
}


@dataclass(frozen=True)
class Diagnostic:
    """A positioned message about a scenario"""
    severity: str  # error | warning | info
    line: int
    column: int
    message: str

    def render(self, source: str = "<scenario>") -> str:
        return f"{source}:{self.line}:{self.column}: {self.severity}: {self.message}"


class ScenarioError(ValueError):
    """Scenario text failed to parse or resolve"""

    def __init__(self, diagnostics: List[Diagnostic]):
        self.diagnostics = diagnostics
        first = diagnostics[0] if diagnostics else None
        super().__init__(first.render() if first else "invalid scenario")


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ref:
    name: str
    attr: Optional[str] = None
    line: int = field(default=1, compare=False)
    column: int = field(default=1, compare=False)

    def __str__(self) -> str:
        return f"{self.name}.{self.attr}" if self.attr else self.name


@dataclass(frozen=True)
class Const:
    """Constant rate per unit time"""
    rate: ValueAmount


@dataclass(frozen=True)
class Prop:
    """k times the referenced stock or pool level at tick start"""
    ref: Ref
    k: Fraction


@dataclass(frozen=True)
class Ramp:
    """a + b*t, t the tick's start time"""
    a: Fraction
    b: Fraction


RateExpr = Union[Const, Prop, Ramp]


@dataclass(frozen=True)
class PoolDecl:
    """A source of value; initial None means abundant"""
    id: str
    initial: Optional[ValueAmount]
    line: int = field(default=1, compare=False)
    column: int = field(default=1, compare=False)

    @property
    def abundant(self) -> bool:
        return self.initial is None


@dataclass(frozen=True)
class AgentDecl:
    id: str
    initial: ValueAmount
    role: str = "other"
    line: int = field(default=1, compare=False)
    column: int = field(default=1, compare=False)


@dataclass(frozen=True)
class CycleDecl:
    id: str
    actor: str
    va: RateExpr
    ve: RateExpr
    ve_source: str
    vl: RateExpr
    vl_target: Optional[str] = None
    vg_target: Optional[str] = None
    tag: Optional[str] = None
    line: int = field(default=1, compare=False)
    column: int = field(default=1, compare=False)

    def expr(self, flow: str) -> RateExpr:
        return {"va": self.va, "ve": self.ve, "vl": self.vl}[flow]


@dataclass(frozen=True)
class SetParam:
    cycle: str
    flow: str
    value: Fraction


@dataclass(frozen=True)
class Jolt:
    cycle: str
    flow: str
    amount: ValueAmount
    source: str


@dataclass(frozen=True)
class PolicyDecl:
    """Action fired at the start of a tick; time is kept when written as a time"""
    tick: int
    action: Union[SetParam, Jolt]
    time: Optional[Fraction] = None
    line: int = field(default=1, compare=False)
    column: int = field(default=1, compare=False)


@dataclass(frozen=True)
class DetectorDecl:
    name: str
    args: Tuple[str, ...] = ()
    line: int = field(default=1, compare=False)
    column: int = field(default=1, compare=False)


@dataclass(frozen=True)
class ScenarioAst:
    name: str
    dt: Fraction = Fraction(1)
    horizon: int = 1
    seed: int = 0
    pools: Tuple[PoolDecl, ...] = ()
    agents: Tuple[AgentDecl, ...] = ()
    cycles: Tuple[CycleDecl, ...] = ()
    policies: Tuple[PolicyDecl, ...] = ()
    detectors: Tuple[DetectorDecl, ...] = ()

    def pool(self, pool_id: str) -> Optional[PoolDecl]:
        return next((p for p in self.pools if p.id == pool_id), None)

    def agent(self, agent_id: str) -> Optional[AgentDecl]:
        return next((a for a in self.agents if a.id == agent_id), None)

    def cycle(self, cycle_id: str) -> Optional[CycleDecl]:
        return next((c for c in self.cycles if c.id == cycle_id), None)

    def cycles_tagged(self, tag: str) -> List[CycleDecl]:
        return [c for c in self.cycles if c.tag == tag]


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _line_count(text: str) -> int:
    return text.count("\n") + 1


def _syntax_diagnostic(err: UnexpectedInput, text: str) -> Diagnostic:
    line = getattr(err, "line", None)
    column = getattr(err, "column", None)
    if not isinstance(line, int) or line < 1:
        # end of input: point at the last line of the text
        line = _line_count(text)
        column = len(text.rsplit("\n", 1)[-1]) + 1
    if not isinstance(column, int) or column < 1:
        column = 1

    if isinstance(err, UnexpectedCharacters):
        char = text[err.pos_in_stream] if 0 <= err.pos_in_stream < len(text) else "?"
        return Diagnostic("error", line, column, f"lexical error: unexpected character {char!r}")
    if isinstance(err, UnexpectedEOF) or (
        isinstance(err, UnexpectedToken) and err.token.type == "$END"
    ):
        return Diagnostic("error", line, column, "syntax error: unexpected end of input")
    if isinstance(err, UnexpectedToken):
        expected = sorted(str(e).strip('"').lower() for e in (err.expected or ()))
        hint = f" (expected one of: {', '.join(expected)})" if expected else ""
        return Diagnostic("error", line, column, f"syntax error: unexpected {err.token!s}{hint}")
    return Diagnostic("error", line, column, f"syntax error: {err}")


class _ScenarioBuilder:
    """Turns a parse tree into a ScenarioAst, collecting positioned errors"""

    def __init__(self, text: str):
        self.text = text
        self.errors: List[Diagnostic] = []

    def error(self, tok: Union[Token, Tree, None], message: str):
        line, column = self._position(tok)
        self.errors.append(Diagnostic("error", line, column, message))

    @staticmethod
    def _position(tok) -> Tuple[int, int]:
        if isinstance(tok, Token) and tok.line is not None:
            return tok.line, tok.column
        if isinstance(tok, Tree) and not tok.meta.empty:
            return tok.meta.line, tok.meta.column
        return 1, 1

    # numbers ---------------------------------------------------------------

    def number(self, tok: Token) -> Fraction:
        text = str(tok)
        if "." in text and len(text.split(".", 1)[1]) > MAX_FRACTION_DIGITS:
            self.error(tok, f"number {text} has more than {MAX_FRACTION_DIGITS} fractional digits")
        try:
            return Fraction(Decimal(text))
        except InvalidOperation:
            self.error(tok, f"invalid number {text}")
            return Fraction(0)

    def integer(self, tok: Token, what: str) -> int:
        value = self.number(tok)
        if "." in str(tok) or value.denominator != 1:
            self.error(tok, f"{what} must be an integer, got {tok}")
            return int(value)
        return int(value)

    def amount(self, tok: Token) -> ValueAmount:
        return ValueAmount.from_fraction(self.number(tok))

    # items -----------------------------------------------------------------

    def build(self, tree: Tree) -> ScenarioAst:
        name_tok = tree.children[0]
        try:
            name = json.loads(str(name_tok))
        except ValueError:
            self.error(name_tok, f"invalid scenario name {name_tok}")
            name = str(name_tok)[1:-1]

        settings: Dict[str, Tuple[Fraction, Token]] = {}
        pools: List[PoolDecl] = []
        agents: List[AgentDecl] = []
        cycles: List[CycleDecl] = []
        raw_policies: List[Tuple[Token, Tree]] = []
        detectors: List[DetectorDecl] = []

        for item in tree.children[1:]:
            kind = item.data
            if kind == "setting":
                key_tok, value_tok = item.children
                if str(key_tok) in settings:
                    self.error(key_tok, f"duplicate setting '{key_tok}'")
                settings[str(key_tok)] = (self.number(value_tok), value_tok)
            elif kind == "pool":
                pools.append(self.pool(item))
            elif kind == "agent":
                agents.append(self.agent(item))
            elif kind == "cycle":
                decl = self.cycle(item)
                if decl is not None:
                    cycles.append(decl)
            elif kind == "policy":
                raw_policies.append((item.children[0], item.children[1]))
            elif kind == "detector":
                detectors.append(self.detector(item))

        dt = Fraction(1)
        if "dt" in settings:
            dt, tok = settings["dt"]
            if dt <= 0:
                self.error(tok, "dt must be positive")
                dt = Fraction(1)
        horizon = 1
        if "horizon" in settings:
            _, tok = settings["horizon"]
            horizon = self.integer(tok, "horizon")
            if horizon < 1:
                self.error(tok, "horizon must be at least 1")
        else:
            self.error(name_tok, "scenario must declare a horizon")
        seed = 0
        if "seed" in settings:
            seed = self.integer(settings["seed"][1], "seed")

        policies = [self.policy(at_tok, action, dt, horizon) for at_tok, action in raw_policies]
        return ScenarioAst(
            name=name,
            dt=dt,
            horizon=horizon,
            seed=seed,
            pools=tuple(pools),
            agents=tuple(agents),
            cycles=tuple(cycles),
            policies=tuple(p for p in policies if p is not None),
            detectors=tuple(detectors),
        )

    def pool(self, item: Tree) -> PoolDecl:
        id_tok, init_tok = item.children
        if init_tok.type == "ABUNDANT":
            return PoolDecl(str(id_tok), None, id_tok.line, id_tok.column)
        initial = self.amount(init_tok)
        if initial.is_negative():
            self.error(init_tok, f"pool '{id_tok}' must start with a non-negative level")
        return PoolDecl(str(id_tok), initial, id_tok.line, id_tok.column)

    def agent(self, item: Tree) -> AgentDecl:
        id_tok, init_tok = item.children[:2]
        role = "other"
        if len(item.children) > 2:
            role_tok = item.children[2]
            role = str(role_tok)
            if role not in ROLES:
                self.error(role_tok, f"unknown role '{role}' (expected one of: {', '.join(ROLES)})")
        return AgentDecl(str(id_tok), self.amount(init_tok), role, id_tok.line, id_tok.column)

    def expr(self, node: Tree) -> RateExpr:
        if node.data == "const":
            return Const(self.amount(node.children[0]))
        if node.data == "prop":
            return Prop(self.ref(node.children[0]), self.number(node.children[1]))
        return Ramp(self.number(node.children[0]), self.number(node.children[1]))

    @staticmethod
    def ref(node: Tree) -> Ref:
        name_tok = node.children[0]
        attr = str(node.children[1]) if len(node.children) > 1 else None
        return Ref(str(name_tok), attr, name_tok.line, name_tok.column)

    def cycle(self, item: Tree) -> Optional[CycleDecl]:
        id_tok = item.children[0]
        rest = item.children[1:]
        tag = None
        if rest and isinstance(rest[0], Token):
            tag_tok, rest = rest[0], rest[1:]
            tag = str(tag_tok)
            if tag not in TAGS:
                self.error(tag_tok, f"unknown cycle tag '{tag}' (expected n, g or c)")

        clauses: Dict[str, Tree] = {}
        for clause in rest:
            if clause.data in clauses:
                self.error(clause, f"duplicate '{clause.data.split('_')[0]}' clause in cycle '{id_tok}'")
            clauses[clause.data] = clause

        missing = [c.split("_")[0] for c in ("actor_clause", "va_clause", "ve_clause", "vl_clause")
                   if c not in clauses]
        if missing:
            self.error(id_tok, f"cycle '{id_tok}' is missing clause(s): {', '.join(missing)}")
            return None

        ve_clause = clauses["ve_clause"]
        vl_clause = clauses["vl_clause"]
        vg_clause = clauses.get("vg_clause")
        return CycleDecl(
            id=str(id_tok),
            actor=str(clauses["actor_clause"].children[0]),
            va=self.expr(clauses["va_clause"].children[0]),
            ve=self.expr(ve_clause.children[0]),
            ve_source=str(ve_clause.children[1]),
            vl=self.expr(vl_clause.children[0]),
            vl_target=str(vl_clause.children[1]) if len(vl_clause.children) > 1 else None,
            vg_target=str(vg_clause.children[0]) if vg_clause is not None else None,
            tag=tag,
            line=id_tok.line,
            column=id_tok.column,
        )

    def policy(self, at_tok: Token, action: Tree, dt: Fraction, horizon: int) -> Optional[PolicyDecl]:
        at = self.number(at_tok)
        time = None
        if "." in str(at_tok):
            time = at
            ticks = at / dt
            if ticks.denominator != 1:
                self.error(at_tok, f"time {at_tok} is not a multiple of dt")
                return None
            tick = int(ticks)
        else:
            tick = int(at)
        if tick < 0 or tick >= horizon:
            self.error(at_tok, f"policy trigger {at_tok} lies outside the horizon")

        if action.data == "jolt":
            cycle_tok, flow_tree, amount_tok, source_tok = action.children
            act = Jolt(str(cycle_tok), str(flow_tree.children[0]), self.amount(amount_tok), str(source_tok))
        else:
            ref_tree, value_tok = action.children
            target = self.ref(ref_tree)
            if target.attr not in FLOWS:
                self.error(ref_tree.children[0], f"set target '{target}' must be <cycle>.va, .ve or .vl")
            act = SetParam(target.name, target.attr or "", self.number(value_tok))
        return PolicyDecl(tick, act, time, at_tok.line, at_tok.column)

    def detector(self, item: Tree) -> DetectorDecl:
        name_tok = item.children[0]
        args = tuple(str(a) for a in item.children[1:])
        return DetectorDecl(str(name_tok), args, name_tok.line, name_tok.column)


def _resolve(ast: ScenarioAst, tree: Tree) -> List[Diagnostic]:
    """Duplicate identifiers and unresolved references"""
    diags: List[Diagnostic] = []

    def err(line: int, column: int, message: str):
        diags.append(Diagnostic("error", line, column, message))

    holders: Dict[str, Union[PoolDecl, AgentDecl]] = {}
    for decl in list(ast.pools) + list(ast.agents):
        if decl.id in holders:
            err(decl.line, decl.column, f"duplicate identifier '{decl.id}'")
        holders[decl.id] = decl
    cycle_ids = set()
    for cycle in ast.cycles:
        if cycle.id in cycle_ids:
            err(cycle.line, cycle.column, f"duplicate identifier '{cycle.id}'")
        cycle_ids.add(cycle.id)

    def ref_error(name: str, near: Tuple[int, int]):
        # point at the first use of the name after the declaration line when possible
        tok = None
        for candidate in tree.scan_values(
            lambda t: isinstance(t, Token) and t.type == "IDENT" and str(t) == name
        ):
            if candidate.line >= near[0]:
                tok = candidate
                break
        line, column = (tok.line, tok.column) if tok is not None else near
        err(line, column, f"unresolved reference '{name}'")

    for cycle in ast.cycles:
        where = (cycle.line, cycle.column)
        if ast.agent(cycle.actor) is None:
            ref_error(cycle.actor, where)
        if cycle.ve_source not in holders:
            ref_error(cycle.ve_source, where)
        for target in (cycle.vl_target, cycle.vg_target):
            if target is not None and target not in holders:
                ref_error(target, where)
        for flow in FLOWS:
            expr = cycle.expr(flow)
            if isinstance(expr, Prop):
                if expr.ref.name not in holders:
                    err(expr.ref.line, expr.ref.column, f"unresolved reference '{expr.ref.name}'")
                elif isinstance(holders[expr.ref.name], PoolDecl) and holders[expr.ref.name].abundant:
                    err(expr.ref.line, expr.ref.column,
                        f"prop() cannot read abundant pool '{expr.ref.name}' (it has no level)")
                elif expr.ref.attr not in (None, "stock", "level"):
                    err(expr.ref.line, expr.ref.column,
                        f"unknown attribute '{expr.ref.attr}' (expected stock or level)")

    for policy in ast.policies:
        where = (policy.line, policy.column)
        action = policy.action
        if action.cycle not in cycle_ids:
            ref_error(action.cycle, where)
        if isinstance(action, Jolt) and ast.pool(action.source) is None:
            ref_error(action.source, where)

    for det in ast.detectors:
        if det.name not in DETECTORS:
            err(det.line, det.column,
                f"unknown detector '{det.name}' (expected one of: {', '.join(sorted(DETECTORS))})")
            continue
        low, high, tags = DETECTORS[det.name]
        if det.args and (len(det.args) < low or (high is not None and len(det.args) > high)):
            err(det.line, det.column, f"detector '{det.name}' takes {low} cycle arguments")
        if not det.args and tags:
            for tag in tags:
                if not ast.cycles_tagged(tag):
                    err(det.line, det.column, f"detector '{det.name}' needs a cycle tagged '{tag}'")
        for arg in det.args:
            if arg not in cycle_ids:
                ref_error(arg, (det.line, det.column))
    return diags


def parse_scenario(text: str) -> ScenarioAst:
    """Parse scenario text; raises ScenarioError with positioned diagnostics"""
    try:
        tree = _PARSER.parse(text)
    except UnexpectedInput as e:
        raise ScenarioError([_syntax_diagnostic(e, text)])

    builder = _ScenarioBuilder(text)
    ast = builder.build(tree)
    diags = builder.errors + _resolve(ast, tree)
    if diags:
        diags.sort(key=lambda d: (d.line, d.column))
        raise ScenarioError(diags)
    return ast


# ---------------------------------------------------------------------------
# Static checks
# ---------------------------------------------------------------------------

def _static_rate(expr: RateExpr, ast: ScenarioAst, tick: int) -> Fraction:
    """Rate at a tick, reading Prop references from the initial declarations"""
    if isinstance(expr, Const):
        return expr.rate.to_fraction()
    if isinstance(expr, Ramp):
        return expr.a + expr.b * tick * ast.dt
    pool = ast.pool(expr.ref.name)
    agent = ast.agent(expr.ref.name)
    if agent is not None:
        level = agent.initial.to_fraction()
    elif pool is not None and not pool.abundant:
        level = pool.initial.to_fraction()
    else:
        level = Fraction(0)
    return expr.k * level


def check_scenario(ast: ScenarioAst) -> List[Diagnostic]:
    """Closure and solvency analysis; pure, never raises"""
    diags: List[Diagnostic] = []

    for pool in ast.pools:
        if pool.abundant:
            diags.append(Diagnostic("info", pool.line, pool.column, f"system open via pool '{pool.id}'"))

    for pool in ast.pools:
        if pool.abundant:
            continue
        drawers = [c for c in ast.cycles if c.ve_source == pool.id]
        if len(drawers) > 1:
            names = ", ".join(f"'{c.id}'" for c in drawers)
            diags.append(Diagnostic(
                "info", pool.line, pool.column,
                f"cycles {names} contend for pool '{pool.id}'; resolved by declaration order",
            ))
        jolts = {p.tick: p.action.amount.to_fraction() for p in ast.policies
                 if isinstance(p.action, Jolt) and p.action.source == pool.id and p.action.flow != "vl"}
        level = pool.initial.to_fraction()
        drawn = Fraction(0)
        for tick in range(ast.horizon):
            drawn += sum(max(_static_rate(c.ve, ast, tick), 0) * ast.dt for c in drawers)
            drawn += max(jolts.get(tick, 0), 0)
            if drawn > level:
                diags.append(Diagnostic(
                    "warning", pool.line, pool.column,
                    f"pool '{pool.id}' may be depleted at tick {tick} (worst-case projection)",
                ))
                break

    for cycle in ast.cycles:
        if cycle.vl_target is None and cycle.vl != Const(ZERO):
            diags.append(Diagnostic(
                "warning", cycle.line, cycle.column,
                f"cycle '{cycle.id}' routes VL to the environment sink (value leaves circulation)",
            ))

    for agent in ast.agents:
        level = agent.initial.to_fraction()
        for tick in range(ast.horizon):
            net = Fraction(0)
            for c in ast.cycles:
                va, ve, vl = (_static_rate(c.expr(f), ast, tick) for f in FLOWS)
                if c.actor == agent.id:
                    net -= va
                if c.ve_source == agent.id:
                    net -= ve
                if c.vl_target == agent.id:
                    net += vl
                if (c.vg_target or c.actor) == agent.id:
                    net += va + ve - vl
            level += net * ast.dt
            if level < 0:
                diags.append(Diagnostic(
                    "warning", agent.line, agent.column,
                    f"agent '{agent.id}' stock may go negative at tick {tick}",
                ))
                break
    return diags


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------

def _fmt_number(value: Fraction, force_point: bool = False) -> str:
    value = Fraction(value)
    sign = "-" if value < 0 else ""
    value = abs(value)
    whole = value.numerator // value.denominator
    rest = value - whole
    digits = ""
    while rest and len(digits) < MAX_FRACTION_DIGITS:
        rest *= 10
        digit = rest.numerator // rest.denominator
        digits += str(digit)
        rest -= digit
    if not digits and force_point:
        digits = "0"
    return f"{sign}{whole}.{digits}" if digits else f"{sign}{whole}"


def _fmt_expr(expr: RateExpr) -> str:
    if isinstance(expr, Const):
        return expr.rate.display()
    if isinstance(expr, Prop):
        return f"prop({expr.ref}, {_fmt_number(expr.k)})"
    return f"ramp({_fmt_number(expr.a)}, {_fmt_number(expr.b)})"


def format_scenario(ast: ScenarioAst) -> str:
    """Canonical text; comments are not preserved"""
    lines = [f"scenario {json.dumps(ast.name, ensure_ascii=False)} {{"]
    lines.append(f"  dt = {_fmt_number(ast.dt)}")
    lines.append(f"  horizon = {ast.horizon}")
    lines.append(f"  seed = {ast.seed}")

    for pool in ast.pools:
        initial = "abundant" if pool.abundant else pool.initial.display()
        lines.append(f"  pool {pool.id} {{ initial = {initial} }}")
    for agent in ast.agents:
        lines.append(f"  agent {agent.id} {{ initial = {agent.initial.display()} role = {agent.role} }}")

    for cycle in ast.cycles:
        tag = f" tag = {cycle.tag}" if cycle.tag else ""
        lines.append(f"  cycle {cycle.id}{tag} {{")
        lines.append(f"    actor = {cycle.actor}")
        lines.append(f"    va = {_fmt_expr(cycle.va)}")
        lines.append(f"    ve = {_fmt_expr(cycle.ve)} from {cycle.ve_source}")
        to = f" to {cycle.vl_target}" if cycle.vl_target else ""
        lines.append(f"    vl = {_fmt_expr(cycle.vl)}{to}")
        if cycle.vg_target:
            lines.append(f"    vg to {cycle.vg_target}")
        lines.append("  }")

    for policy in ast.policies:
        at = _fmt_number(policy.time, force_point=True) if policy.time is not None else str(policy.tick)
        action = policy.action
        if isinstance(action, Jolt):
            lines.append(f"  at {at} jolt {action.cycle} {action.flow} {action.amount.display()} from {action.source}")
        else:
            lines.append(f"  at {at} set {action.cycle}.{action.flow} = {_fmt_number(action.value)}")

    for det in ast.detectors:
        args = f"({', '.join(det.args)})" if det.args else ""
        lines.append(f"  detect {det.name}{args}")
    lines.append("}")
    return "\n".join(lines) + "\n"

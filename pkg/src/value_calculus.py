"""
Value Calculus - finite-difference derivatives and event detectors over value series

Interior points use central stencils; the first and last points (two for the
third derivative) fall back to one-sided stencils and are marked non-central.
Detectors only look at central points.
"""

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

ZERO_RTOL = 1e-9


class SeriesTooShortError(ValueError):
    """Not enough samples for the requested stencil"""


class GridMismatchError(ValueError):
    """Series do not share t0, dt and length"""


@dataclass(frozen=True, eq=False)
class Series:
    """Uniformly sampled real series; central marks points computed with a central stencil"""
    t0: float
    dt: float
    values: np.ndarray
    central: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.values.ndim != 1 or len(self.values) == 0:
            raise ValueError("series needs at least one sample")

    @classmethod
    def from_values(cls, values: Sequence[float], dt: float = 1.0, t0: float = 0.0) -> "Series":
        return cls(t0=t0, dt=dt, values=np.asarray(values, dtype=float))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.values))


@dataclass(frozen=True)
class DerivativeSet:
    v1: Series
    v2: Series
    v3: Series


def derivative(s: Series, order: int) -> Series:
    """First, second or third derivative on the same grid as s"""
    if order not in (1, 2, 3):
        raise ValueError(f"derivative order must be 1, 2 or 3, got {order}")
    v, h, n = s.values, s.dt, len(s.values)
    needed = 5 if order == 3 else 3
    if n < needed:
        raise SeriesTooShortError(f"order-{order} derivative needs at least {needed} samples, got {n}")

    out = np.empty(n)
    central = np.zeros(n, dtype=bool)
    if order == 1:
        out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
        out[0] = (v[1] - v[0]) / h
        out[-1] = (v[-1] - v[-2]) / h
        central[1:-1] = True
    elif order == 2:
        out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
        out[0] = (v[2] - 2 * v[1] + v[0]) / h**2
        out[-1] = (v[-1] - 2 * v[-2] + v[-3]) / h**2
        central[1:-1] = True
    else:
        out[2:-2] = (v[4:] - 2 * v[3:-1] + 2 * v[1:-3] - v[:-4]) / (2 * h**3)
        for k in (0, 1):
            out[k] = (v[k + 3] - 3 * v[k + 2] + 3 * v[k + 1] - v[k]) / h**3
        for k in (n - 2, n - 1):
            out[k] = (v[k] - 3 * v[k - 1] + 3 * v[k - 2] - v[k - 3]) / h**3
        central[2:-2] = True
    return Series(t0=s.t0, dt=s.dt, values=out, central=central)


def derivatives(s: Series) -> DerivativeSet:
    return DerivativeSet(derivative(s, 1), derivative(s, 2), derivative(s, 3))


def cumulative(s: Series) -> Series:
    """Trapezoid running integral, starting at 0"""
    steps = (s.values[1:] + s.values[:-1]) / 2 * s.dt
    return Series(t0=s.t0, dt=s.dt, values=np.concatenate([[0.0], np.cumsum(steps)]))


def default_tolerance(d1: Series) -> float:
    """10 dt^2 max(1, max|V'|): the central-stencil truncation scale"""
    return 10 * d1.dt**2 * max(1.0, float(np.max(np.abs(d1.values))))


# ---------------------------------------------------------------------------
# Motion classes
# ---------------------------------------------------------------------------

_SPEED = {1: "positive", -1: "negative"}
_ACCEL = {1: "increasing", -1: "decreasing"}
_JERK = {1: "fast", -1: "slowly"}
_SIGN_TEXT = {1: "+", 0: "0", -1: "-"}


@dataclass(frozen=True)
class MotionClass:
    """Sign triple of (V', V'', V''') with its label; column 1-8, 0 when steady"""
    signs: Tuple[str, str, str]
    label: str
    column: int


def _sign(x: float, deadband: float) -> int:
    if abs(x) <= deadband:
        return 0
    return 1 if x > 0 else -1


def _motion_from_signs(s1: int, s2: int, s3: int) -> MotionClass:
    signs = (_SIGN_TEXT[s1], _SIGN_TEXT[s2], _SIGN_TEXT[s3])
    if 0 in (s1, s2, s3):
        return MotionClass(signs, "steady", 0)
    column = 1 + 4 * (s1 < 0) + 2 * (s2 < 0) + (s3 < 0)
    return MotionClass(signs, f"{_SPEED[s1]} and {_ACCEL[s2]} / {_JERK[s3]}", column)


def classify_motion(v1: float, v2: float, v3: float, deadband: float = 0.0) -> MotionClass:
    return _motion_from_signs(_sign(v1, deadband), _sign(v2, deadband), _sign(v3, deadband))


def motion_profile(s: Series, deadband: Optional[float] = None) -> List[Tuple[int, MotionClass]]:
    """Motion class at every tick where all three derivatives are central"""
    d = derivatives(s)
    bands = []
    for dk in (d.v1, d.v2, d.v3):
        bands.append(deadband if deadband is not None else ZERO_RTOL * float(np.max(np.abs(dk.values))))
    out = []
    for k in np.flatnonzero(d.v3.central):
        k = int(k)
        signs = [_sign(dk.values[k], band) for dk, band in zip((d.v1, d.v2, d.v3), bands)]
        out.append((k, _motion_from_signs(*signs)))
    return out


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Event:
    kind: str
    tick: int
    time: float
    witness: Dict[str, float] = field(default_factory=dict)
    flags: Tuple[str, ...] = ()
    subject: str = ""

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "tick": self.tick,
            "time": self.time,
            "witness": {k: float(v) for k, v in self.witness.items()},
            "flags": list(self.flags),
            "subject": self.subject,
        }


def events_to_json(events: List[Event]) -> str:
    return json.dumps([e.to_dict() for e in events], indent=2, sort_keys=True) + "\n"


def _check_grid(*series: Series):
    first = series[0]
    for s in series[1:]:
        if len(s) != len(first):
            raise GridMismatchError(f"series lengths differ: {len(first)} vs {len(s)}")
        if not np.isclose(s.dt, first.dt, rtol=1e-12, atol=0) or not np.isclose(s.t0, first.t0, rtol=1e-12, atol=1e-12):
            raise GridMismatchError(f"series grids differ: (t0={first.t0}, dt={first.dt}) vs (t0={s.t0}, dt={s.dt})")


@dataclass(frozen=True)
class _Crossing:
    lo: int
    hi: int
    frac: float
    before: int
    after: int

    @property
    def position(self) -> float:
        return self.lo + self.frac * (self.hi - self.lo)

    def at(self, values: np.ndarray) -> float:
        """Linear interpolation of values at the crossing"""
        return float(values[self.lo] + self.frac * (values[self.hi] - values[self.lo]))


def _crossings(x: np.ndarray, mask: np.ndarray, eps: float) -> List[_Crossing]:
    """Sign changes of x over the masked ticks; a zero run between the two signs is the crossing"""
    out = []
    last_sign, last_idx, zero_start, zero_end = 0, None, None, None
    for k in np.flatnonzero(mask):
        k = int(k)
        s = _sign(x[k], eps)
        if s == 0:
            if zero_start is None:
                zero_start = k
            zero_end = k
            continue
        if last_sign != 0 and s != last_sign:
            if zero_start is not None:
                out.append(_Crossing(zero_start, zero_end, 0.5, last_sign, s))
            else:
                frac = float(x[last_idx] / (x[last_idx] - x[k]))
                out.append(_Crossing(last_idx, k, frac, last_sign, s))
        last_sign, last_idx, zero_start, zero_end = s, k, None, None
    return out


def _event(kind: str, grid: Series, c: _Crossing, witness: Dict[str, float], flags=()) -> Event:
    witness = dict(witness, tick_lo=float(c.lo), tick_hi=float(c.hi))
    pos = c.position
    return Event(kind, int(round(pos)), float(grid.t0 + grid.dt * pos), witness, tuple(flags))


def _scale(*arrays: np.ndarray) -> float:
    return max(float(np.max(np.abs(a))) for a in arrays)


def detect_max_vg(vg: Series, va: Series, vl: Series, tol: Optional[float] = None) -> List[Event]:
    """Maxima of VG (VG' from + to -); consistent when |VA' - VL'| <= tol there"""
    _check_grid(vg, va, vl)
    d_vg, d_va, d_vl = derivative(vg, 1), derivative(va, 1), derivative(vl, 1)
    if tol is None:
        tol = default_tolerance(d_vg)
    events = []
    for c in _crossings(d_vg.values, d_vg.central, ZERO_RTOL * _scale(d_vg.values)):
        if (c.before, c.after) != (1, -1):
            continue
        va1, vl1 = c.at(d_va.values), c.at(d_vl.values)
        gap = abs(va1 - vl1)
        flags = ("consistent",) if gap <= tol else ()
        events.append(_event("MaxVG", vg, c, {"va_prime": va1, "vl_prime": vl1, "gap": gap,
                                               "vg_prime": c.at(d_vg.values)}, flags))
    return events


def detect_peak_marginal_vg(vg: Series, va: Series, vl: Series, tol: Optional[float] = None) -> List[Event]:
    """Extrema of VG' (VG'' changes sign); consistent when |VA'' - VL''| <= tol there"""
    _check_grid(vg, va, vl)
    d_vg, d_va, d_vl = derivative(vg, 2), derivative(va, 2), derivative(vl, 2)
    if tol is None:
        tol = default_tolerance(d_vg)
    events = []
    for c in _crossings(d_vg.values, d_vg.central, ZERO_RTOL * _scale(d_vg.values)):
        va2, vl2 = c.at(d_va.values), c.at(d_vl.values)
        gap = abs(va2 - vl2)
        flags = ["maximum" if c.before > 0 else "minimum"]
        if gap <= tol:
            flags.append("consistent")
        events.append(_event("PeakMarginalVG", vg, c, {"va_second": va2, "vl_second": vl2, "gap": gap}, flags))
    return events


def detect_stable_market(va_m: Series, vl_m: Series, tol: float) -> List[Event]:
    """Every central tick where |VA_M' - VL_M'| <= tol"""
    _check_grid(va_m, vl_m)
    d_va, d_vl = derivative(va_m, 1), derivative(vl_m, 1)
    events = []
    for k in np.flatnonzero(d_va.central):
        k = int(k)
        gap = abs(float(d_va.values[k] - d_vl.values[k]))
        if gap <= tol:
            witness = {"va_prime": float(d_va.values[k]), "vl_prime": float(d_vl.values[k]), "gap": gap}
            events.append(Event("StableMarket", k, float(va_m.t0 + va_m.dt * k), witness))
    return events


def detect_subsidy_cross(ve_g: Series, vg_n: Series) -> Optional[Event]:
    """First tick where the subsidy rate VEg' and the natural gain rate VGn' cross"""
    _check_grid(ve_g, vg_n)
    d_ve, d_vg = derivative(ve_g, 1), derivative(vg_n, 1)
    diff = d_ve.values - d_vg.values
    eps = ZERO_RTOL * _scale(d_ve.values, d_vg.values)
    interior = np.flatnonzero(d_ve.central)
    if all(abs(diff[k]) <= eps for k in interior):
        k = int(interior[0])
        witness = {"veg_prime": float(d_ve.values[k]), "vgn_prime": float(d_vg.values[k]), "difference": 0.0}
        return Event("SubsidyCross", k, float(ve_g.t0 + ve_g.dt * k), witness, ("degenerate",))
    found = _crossings(diff, d_ve.central, eps)
    if not found:
        return None
    c = found[0]
    return _event("SubsidyCross", ve_g, c, {
        "veg_prime": c.at(d_ve.values), "vgn_prime": c.at(d_vg.values), "difference": c.at(diff),
    })


def _sum_zero(kind: str, a: Series, b: Series, names: Tuple[str, str], negate_b: bool = False) -> List[Event]:
    _check_grid(a, b)
    d_a, d_b = derivative(a, 1), derivative(b, 1)
    total = d_a.values + d_b.values
    eps = ZERO_RTOL * _scale(d_a.values, d_b.values)
    interior = np.flatnonzero(d_a.central)

    def witness(value_a: float, value_b: float) -> Dict[str, float]:
        return {names[0]: value_a, names[1]: -value_b if negate_b else value_b, "sum": value_a + value_b}

    if all(abs(total[k]) <= eps for k in interior):
        return [
            Event(kind, int(k), float(a.t0 + a.dt * k),
                  witness(float(d_a.values[k]), float(d_b.values[k])), ("degenerate plateau",))
            for k in interior
        ]
    return [
        _event(kind, a, c, witness(c.at(d_a.values), c.at(d_b.values)))
        for c in _crossings(total, d_a.central, eps)
    ]


def detect_gov_optimum(vg_g: Series, vg_c: Series) -> List[Event]:
    """Zero crossings of (VGg + VGc)', where VGg' equals -VGc'; the witness holds both sides"""
    return _sum_zero("GovOptimum", vg_g, vg_c, ("vgg_prime", "neg_vgc_prime"), negate_b=True)


def detect_org_optimum(vg_n: Series, vg_g: Series) -> List[Event]:
    """Zero crossings of (VGn + VGg)', the organisation's combined optimum"""
    return _sum_zero("OrgOptimum", vg_n, vg_g, ("vgn_prime", "vgg_prime"))


def detect_motion_changes(s: Series) -> List[Event]:
    """One event per tick where the motion class differs from the previous tick"""
    d = derivatives(s)
    events, previous = [], None
    for k, motion in motion_profile(s):
        if motion.label != previous:
            witness = {"v1": float(d.v1.values[k]), "v2": float(d.v2.values[k]), "v3": float(d.v3.values[k]),
                       "column": float(motion.column)}
            events.append(Event("MotionChange", k, float(s.t0 + s.dt * k), witness, (motion.label,)))
            previous = motion.label
    return events

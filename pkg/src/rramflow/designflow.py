"""Design verification for an RRAM-tuned NAND gate.

The gate has two pMOS 1T1R pull-ups (VDD - pMOS - R_A/R_B - OUT) and a
pull-down of two series nMOS followed by R_C to ground; an optional load
resistor ties OUT to ``v_load``. Verification runs the nominal point, every
extreme-state corner, the per-device demanded-range union and the
uncertainty containment check, shrinking the proposed ranges between
iterations when a stage fails.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .model import ModelParams
from .nodal import Circuit
from .primitives import MosfetParams, SolverError

DEVICES = ("R_A", "R_B", "R_C")
MAX_CORNER_DEVICES = 20


@dataclass(frozen=True)
class GateConfig:
    states: Mapping[str, float]
    pmos: MosfetParams
    nmos: MosfetParams
    vdd: float = 5.0
    device: ModelParams | None = None
    r_load: float | None = 100e3
    v_load: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "states", dict(self.states))
        missing = set(DEVICES) - set(self.states)
        if missing:
            raise ValueError(f"gate is missing states for {sorted(missing)}")
        if any(not self.states[k] > 0 for k in DEVICES):
            raise ValueError("device states must be > 0")
        if not self.vdd > 0:
            raise ValueError("vdd must be > 0")

    def with_states(self, **states: float) -> "GateConfig":
        return replace(self, states={**self.states, **states})


def _gate_circuit(g: GateConfig) -> Circuit:
    c = Circuit()
    for t in ("VDD", "GND", "VA", "VB"):
        c.terminal(t)
    c.fet("PA", "ua", "VA", "VDD", "VDD", g.pmos)
    c.fet("PB", "ub", "VB", "VDD", "VDD", g.pmos)
    c.memristor("R_A", "ua", "OUT", g.device)
    c.memristor("R_B", "ub", "OUT", g.device)
    c.fet("NA", "OUT", "VA", "n1", "GND", g.nmos)
    c.fet("NB", "n1", "VB", "n2", "GND", g.nmos)
    c.memristor("R_C", "n2", "GND", g.device)
    if g.r_load is not None:
        c.terminal("VLOAD")
        c.resistor("OUT", "VLOAD", g.r_load)
    return c


def nand_output(g: GateConfig, va: float, vb: float) -> float:
    c = _gate_circuit(g)
    biases = {"VDD": g.vdd, "GND": 0.0, "VA": va, "VB": vb}
    if g.r_load is not None:
        biases["VLOAD"] = g.v_load
    system = c.compile(biases)
    system.set_R([g.states[m.name] for m in c.memristors])
    return system.solve()["OUT"]


def nand_surface(g: GateConfig, va_grid: Sequence[float], vb_grid: Sequence[float]) -> np.ndarray:
    """Output voltage for every input pair; rows follow ``va_grid``.

    Points where the solver fails are NaN.
    """
    for v in itertools.chain(va_grid, vb_grid):
        if not 0.0 <= v <= g.vdd:
            raise ValueError(f"input {v} V outside [0, VDD]")
    out = np.empty((len(va_grid), len(vb_grid)))
    for i, va in enumerate(va_grid):
        for j, vb in enumerate(vb_grid):
            try:
                out[i, j] = nand_output(g, float(va), float(vb))
            except SolverError:
                out[i, j] = np.nan
    return out


def corner_enumerate(devices: Sequence[str], ranges: Mapping[str, tuple[float, float]]) -> list[dict[str, float]]:
    """All 2^n min/max assignments, first device varying slowest (min before max)."""
    if len(devices) > MAX_CORNER_DEVICES:
        raise ValueError(f"corner enumeration limited to {MAX_CORNER_DEVICES} devices")
    choices = []
    for d in devices:
        lo, hi = ranges[d]
        if lo > hi:
            raise ValueError(f"range of {d} has min > max")
        choices.append((lo, hi))
    return [dict(zip(devices, combo)) for combo in itertools.product(*choices)]


Interval = tuple[float, float]


def required_range_union(demands: Sequence[Mapping[str, Interval | None]]) -> dict[str, Interval | None]:
    """Per device, the hull of every corner's demanded interval; ``None`` marks infeasible."""
    out: dict[str, Interval | None] = {}
    names: list[str] = []
    for d in demands:
        for k in d:
            if k not in names:
                names.append(k)
    for k in sorted(names):
        ivs = [d.get(k) for d in demands]
        if any(iv is None for iv in ivs):
            out[k] = None
            continue
        out[k] = (min(iv[0] for iv in ivs), max(iv[1] for iv in ivs))
    return out


@dataclass(frozen=True)
class RangeSpec:
    desired: Interval
    nominal: Interval
    q: float
    alpha: float = 0.9
    q_high: float | None = None

    def __post_init__(self):
        if self.desired[0] > self.desired[1] or self.nominal[0] > self.nominal[1]:
            raise ValueError("intervals need min <= max")
        if self.q < 0 or (self.q_high is not None and self.q_high < 0):
            raise ValueError("q must be >= 0")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")


@dataclass(frozen=True)
class UncertaintyResult:
    passed: bool
    margin_low: float
    margin_high: float
    yield_bound: float
    reason: str = ""


def uncertainty_check(r: RangeSpec) -> UncertaintyResult:
    """Pass when the desired interval sits inside the nominal one shrunk by ``q``."""
    a, b = r.desired
    x, y = r.nominal
    q_hi = r.q if r.q_high is None else r.q_high
    lo, hi = x + r.q, y - q_hi
    m_low, m_high = a - lo, hi - b
    y_bound = r.alpha * r.alpha
    if lo > hi:
        return UncertaintyResult(False, m_low, m_high, y_bound, "degenerate window: X+q > Y-q")
    ok = m_low >= 0 and m_high >= 0
    return UncertaintyResult(ok, m_low, m_high, y_bound, "" if ok else "desired range exceeds X+q..Y-q")


@dataclass(frozen=True)
class CheckPoint:
    """Output band ``[v_min, v_max]`` required at inputs ``(va, vb)``."""

    va: float
    vb: float
    v_min: float
    v_max: float


def logic_checks(vdd: float, high_min: float = 0.8, low_max: float = 0.2) -> list[CheckPoint]:
    hi, lo = high_min * vdd, low_max * vdd
    return [
        CheckPoint(0.0, 0.0, hi, vdd),
        CheckPoint(0.0, vdd, hi, vdd),
        CheckPoint(vdd, 0.0, hi, vdd),
        CheckPoint(vdd, vdd, 0.0, lo),
    ]


def checks_pass(g: GateConfig, checks: Sequence[CheckPoint]) -> bool:
    for ck in checks:
        try:
            v = nand_output(g, ck.va, ck.vb)
        except SolverError:
            return False
        if not ck.v_min <= v <= ck.v_max:
            return False
    return True


@dataclass(frozen=True)
class DesignConfig:
    gate: GateConfig
    proposed: Mapping[str, Interval]
    nominal: Mapping[str, Interval]
    q: float
    alpha: float = 0.9
    checks: tuple[CheckPoint, ...] = ()
    sweep_points: int = 21
    max_iters: int = 5

    def __post_init__(self):
        object.__setattr__(self, "proposed", {k: tuple(map(float, v)) for k, v in self.proposed.items()})
        object.__setattr__(self, "nominal", {k: tuple(map(float, v)) for k, v in self.nominal.items()})
        if not self.checks:
            object.__setattr__(self, "checks", tuple(logic_checks(self.gate.vdd)))
        for d in DEVICES:
            if d not in self.proposed or d not in self.nominal:
                raise ValueError(f"ranges for {d} missing")
        if self.sweep_points < 2:
            raise ValueError("sweep_points must be >= 2")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def demanded_intervals(cfg: DesignConfig, corner: Mapping[str, float],
                       ranges: Mapping[str, Interval]) -> dict[str, Interval | None]:
    """Per device, the hull of swept states that keep every check in band.

    Each device is swept over its proposed range while the others stay at
    their corner values.
    """
    out = {}
    for d in DEVICES:
        lo, hi = ranges[d]
        grid = np.linspace(lo, hi, cfg.sweep_points) if hi > lo else np.array([lo])
        ok = [float(R) for R in grid if checks_pass(cfg.gate.with_states(**{**corner, d: float(R)}), cfg.checks)]
        out[d] = (min(ok), max(ok)) if ok else None
    return out


@dataclass(frozen=True)
class CornerResult:
    corner: dict[str, float]
    passed: bool
    demand: dict[str, Interval | None]


def _eval_corner(args) -> CornerResult:
    cfg, corner, ranges = args
    passed = checks_pass(cfg.gate.with_states(**corner), cfg.checks)
    return CornerResult(dict(corner), passed, demanded_intervals(cfg, corner, ranges))


@dataclass(frozen=True)
class DeviceReport:
    name: str
    proposed: Interval
    demanded: Interval | None
    nominal: Interval
    q: float
    result: UncertaintyResult | None


@dataclass
class WorkflowReport:
    passed: bool
    stage: str
    iterations: int
    devices: list[DeviceReport] = field(default_factory=list)
    failing_corners: list[dict[str, float]] = field(default_factory=list)
    history: list[tuple[int, str]] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"status: {'PASS' if self.passed else 'FAIL'}",
                 f"stage: {self.stage}", f"iterations: {self.iterations}"]
        for it, stage in self.history:
            lines.append(f"  iteration {it}: {stage}")
        for d in self.devices:
            dem = "infeasible" if d.demanded is None else f"[{d.demanded[0]:.6g}, {d.demanded[1]:.6g}]"
            lines.append(f"{d.name}: proposed [{d.proposed[0]:.6g}, {d.proposed[1]:.6g}] demanded {dem}")
            if d.result is not None:
                lines.append(
                    f"  margins {d.result.margin_low:.6g} / {d.result.margin_high:.6g} ohm, "
                    f"yield >= {d.result.yield_bound:.6g} {'pass' if d.result.passed else 'fail'}"
                    + (f" ({d.result.reason})" if d.result.reason else "")
                )
        for c in self.failing_corners:
            lines.append("failing corner: " + ", ".join(f"{k}={v:.6g}" for k, v in c.items()))
        return "\n".join(lines) + "\n"

    def margins_csv(self) -> str:
        lines = ["device,A_ohm,B_ohm,X_ohm,Y_ohm,q_ohm,margin_low_ohm,margin_high_ohm,yield_bound,pass"]
        for d in self.devices:
            if d.demanded is None or d.result is None:
                lines.append(f"{d.name},,,{d.nominal[0]!r},{d.nominal[1]!r},{d.q!r},,,,0")
                continue
            r = d.result
            lines.append(
                f"{d.name},{d.demanded[0]!r},{d.demanded[1]!r},{d.nominal[0]!r},{d.nominal[1]!r},"
                f"{d.q!r},{r.margin_low!r},{r.margin_high!r},{r.yield_bound!r},{int(r.passed)}"
            )
        return "\n".join(lines) + "\n"


def _shrink(ranges: Mapping[str, Interval], nominal: Mapping[str, Interval], q: float) -> dict[str, Interval]:
    """Halve each proposed range about its midpoint, after clipping it to [X+q, Y-q]."""
    out = {}
    for d, (lo, hi) in ranges.items():
        x, y = nominal[d]
        clo, chi = max(lo, x + q), min(hi, y - q)
        if clo > chi:
            clo, chi = lo, hi
        mid, half = 0.5 * (clo + chi), 0.25 * (chi - clo)
        out[d] = (mid - half, mid + half)
    return out


def run_workflow(cfg: DesignConfig, jobs: int = 1) -> WorkflowReport:
    ranges = dict(cfg.proposed)
    history: list[tuple[int, str]] = []
    report = None
    for it in range(1, cfg.max_iters + 1):
        report = _iterate(cfg, ranges, it, jobs)
        history.append((it, "pass" if report.passed else report.stage))
        if report.passed:
            break
        ranges = _shrink(ranges, cfg.nominal, cfg.q)
    report.history = history
    return report


def _iterate(cfg: DesignConfig, ranges: dict[str, Interval], it: int, jobs: int) -> WorkflowReport:
    mid = {d: 0.5 * (lo + hi) for d, (lo, hi) in ranges.items()}
    if not checks_pass(cfg.gate.with_states(**mid), cfg.checks):
        return WorkflowReport(False, "nominal", it, _device_rows(cfg, ranges, None, {}), [mid])

    corners = corner_enumerate(DEVICES, ranges)
    tasks = [(cfg, c, ranges) for c in corners]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_eval_corner, tasks))
    else:
        results = [_eval_corner(t) for t in tasks]
    failing = [r.corner for r in results if not r.passed or any(v is None for v in r.demand.values())]
    union = required_range_union([r.demand for r in results])
    if failing:
        return WorkflowReport(False, "corners", it, _device_rows(cfg, ranges, union, {}), failing)

    checks = {}
    for d in DEVICES:
        checks[d] = uncertainty_check(RangeSpec(union[d], cfg.nominal[d], cfg.q, cfg.alpha))
    ok = all(r.passed for r in checks.values())
    return WorkflowReport(ok, "done" if ok else "uncertainty", it, _device_rows(cfg, ranges, union, checks))


def _device_rows(cfg, ranges, union, checks) -> list[DeviceReport]:
    rows = []
    for d in DEVICES:
        dem = None if union is None else union.get(d)
        rows.append(DeviceReport(d, ranges[d], dem, cfg.nominal[d], cfg.q, checks.get(d)))
    return rows


def yield_bound(alpha: float, n_devices: int = 1) -> float:
    """Lower yield bound alpha^2 per device, compounded over ``n_devices``."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")
    return math.prod([alpha * alpha] * n_devices)

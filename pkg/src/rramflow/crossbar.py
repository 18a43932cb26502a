"""Crossbar arrays of 1T1R or passive cells with distributed line resistance.

Geometry: BIT lines run along rows and are driven from the column-0 side;
WORD and SEL lines run along columns and are driven from the row-0 side.
Each line is one lumped segment per cell pitch, with the first segment
between the driver and the first cell. In a 1T1R cell the RRAM's positive
terminal faces the BIT line and the selector sits between the RRAM and the
WORD line, gated by the column's SEL line.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

from .model import ModelParams, analytical_step, read_resistance
from .nodal import Circuit, NodalSolution, NodalSystem
from .primitives import MosfetParams, Orientation, Polarity, Violation, soac_check
from .stimulus import Waveform, discretize


class BulkMode(str, Enum):
    COLUMN = "column"
    ROW = "row"
    COMMON = "common"


class ArrayCell(str, Enum):
    ONE_T1R = "one_t1r"
    PASSIVE = "passive"


class SoacError(RuntimeError):
    def __init__(self, violations: list[Violation], step: int):
        self.violations = violations
        self.step = step
        worst = ", ".join(f"{v.device} {v.pair}={v.value:.3g}V>{v.rating:g}V" for v in violations[:5])
        super().__init__(f"voltage rating violated at step {step}: {worst}")


def line_resistance(width_um: float, length_um: float, rho_sq: float) -> float:
    """Resistance of a wire from its number of squares."""
    if not width_um > 0:
        raise ValueError("line width must be > 0")
    return length_um / width_um * rho_sq


def rc_time_constant(width_um: float, length_um: float, rho_sq: float, c_line: float) -> float:
    """First-order delay estimate R_line * C_line of a digital line."""
    if c_line < 0:
        raise ValueError("capacitance must be >= 0")
    return line_resistance(width_um, length_um, rho_sq) * c_line


@dataclass(frozen=True)
class LineGeometry:
    width_um: float
    pitch_um: float = 10.0

    def __post_init__(self):
        if not self.width_um > 0 or not self.pitch_um > 0:
            raise ValueError("line width and pitch must be > 0")

    def segment(self, rho_sq: float) -> float:
        return line_resistance(self.width_um, self.pitch_um, rho_sq)


@dataclass(frozen=True)
class CrossbarSpec:
    rows: int
    cols: int
    cell: ArrayCell = ArrayCell.ONE_T1R
    device: ModelParams | None = None
    fet: MosfetParams | None = None
    rho_sq: float = 0.0
    bit: LineGeometry = field(default_factory=lambda: LineGeometry(1.0))
    word: LineGeometry = field(default_factory=lambda: LineGeometry(1.0))
    sel: LineGeometry = field(default_factory=lambda: LineGeometry(1.0))
    bulk_mode: BulkMode = BulkMode.COLUMN
    orientation: Orientation = Orientation.DRAIN_TO_RRAM
    v_sel_on: float | None = None
    v_sel_off: float | None = None
    r_switch_on: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "cell", ArrayCell(self.cell))
        object.__setattr__(self, "bulk_mode", BulkMode(self.bulk_mode))
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be >= 1")
        if self.rho_sq < 0:
            raise ValueError("rho_sq must be >= 0")
        if self.r_switch_on < 0:
            raise ValueError("r_switch_on must be >= 0")
        pmos = self.fet is not None and self.fet.polarity is Polarity.PMOS
        if self.v_sel_on is None:
            object.__setattr__(self, "v_sel_on", 0.0 if pmos else 5.0)
        if self.v_sel_off is None:
            object.__setattr__(self, "v_sel_off", 5.0 if pmos else 0.0)

    @property
    def r_bit(self) -> float:
        return self.bit.segment(self.rho_sq)

    @property
    def r_word(self) -> float:
        return self.word.segment(self.rho_sq)

    @property
    def r_sel(self) -> float:
        return self.sel.segment(self.rho_sq)

    def line_totals(self) -> dict[str, float]:
        """Full-length resistance of each line type."""
        return {
            "bit": line_resistance(self.bit.width_um, self.bit.pitch_um * self.cols, self.rho_sq),
            "word": line_resistance(self.word.width_um, self.word.pitch_um * self.rows, self.rho_sq),
            "sel": line_resistance(self.sel.width_um, self.sel.pitch_um * self.rows, self.rho_sq),
        }

    @property
    def bulk_low(self) -> float:
        pmos = self.fet is not None and self.fet.polarity is Polarity.PMOS
        return max(self.v_sel_on, self.v_sel_off) if pmos else min(self.v_sel_on, self.v_sel_off)


@dataclass
class ArrayState:
    R: np.ndarray
    r_floor: float
    r_ceil: float

    def __post_init__(self):
        self.R = np.array(self.R, dtype=float)
        if self.R.ndim != 2:
            raise ValueError("state matrix must be 2-D")
        if not self.r_floor > 0:
            raise ValueError("r_floor must be > 0")
        if np.any(self.R < self.r_floor) or np.any(self.R > self.r_ceil):
            raise ValueError("array state outside its admissible bounds")

    @classmethod
    def uniform(cls, rows: int, cols: int, R: float, r_floor: float, r_ceil: float) -> "ArrayState":
        return cls(np.full((rows, cols), float(R)), r_floor, r_ceil)

    def copy(self) -> "ArrayState":
        return ArrayState(self.R.copy(), self.r_floor, self.r_ceil)

    def to_csv(self) -> str:
        rows, cols = self.R.shape
        lines = ["rows,cols", f"{rows},{cols}"]
        lines += [",".join(repr(float(x)) for x in row) for row in self.R]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, r_floor: float, r_ceil: float) -> "ArrayState":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if len(lines) < 2 or lines[0].strip() != "rows,cols":
            raise ValueError("array CSV must start with a 'rows,cols' header")
        rows, cols = (int(x) for x in lines[1].split(","))
        body = [[float(x) for x in ln.split(",")] for ln in lines[2:]]
        R = np.array(body, dtype=float)
        if R.shape != (rows, cols):
            raise ValueError(f"array CSV declares {rows}x{cols} but holds {R.shape}")
        return cls(R, r_floor, r_ceil)


def _bit(r):
    return f"BIT{r}"


def _word(c):
    return f"WORD{c}"


def _sel(c):
    return f"SEL{c}"


@dataclass
class Netlist:
    spec: CrossbarSpec
    circuit: Circuit
    terminals: list[str]
    cells: list[tuple[int, int]]
    bulk_terminals: list[str]

    @property
    def n_terminals(self) -> int:
        return len(self.terminals)

    def line_nodes(self) -> list[str]:
        return [n for n in self.circuit.nodes if n[0] in "bw" and "_" in n]

    def bulk_of(self, r: int, c: int) -> str:
        mode = self.spec.bulk_mode
        if mode is BulkMode.COLUMN:
            return f"BULK{c}"
        if mode is BulkMode.ROW:
            return f"BULK{r}"
        return "BULK"


def build(spec: CrossbarSpec, only: Iterable[tuple[int, int]] | None = None) -> Netlist:
    """Node graph of the array. ``only`` restricts which cells get a device."""
    c_ = Circuit()
    rows, cols = spec.rows, spec.cols
    terminals = [c_.terminal(_bit(r)) for r in range(rows)]
    terminals += [c_.terminal(_word(c)) for c in range(cols)]
    bulks: list[str] = []
    if spec.cell is ArrayCell.ONE_T1R:
        terminals += [c_.terminal(_sel(c)) for c in range(cols)]
        n_bulk = {BulkMode.COLUMN: cols, BulkMode.ROW: rows, BulkMode.COMMON: 1}[spec.bulk_mode]
        names = ["BULK"] if spec.bulk_mode is BulkMode.COMMON else [f"BULK{k}" for k in range(n_bulk)]
        bulks = [c_.terminal(n) for n in names]
        terminals += bulks

    rb, rw = spec.r_bit, spec.r_word
    for r in range(rows):
        prev = _bit(r)
        for c in range(cols):
            node = f"b{r}_{c}"
            c_.resistor(prev, node, rb)
            prev = node
    for c in range(cols):
        prev = _word(c)
        for r in range(rows):
            node = f"w{r}_{c}"
            c_.resistor(prev, node, rw)
            prev = node

    keep = None if only is None else set(only)
    cells = []
    net = Netlist(spec, c_, terminals, cells, bulks)
    for r in range(rows):
        for c in range(cols):
            if keep is not None and (r, c) not in keep:
                continue
            cells.append((r, c))
            b, w = f"b{r}_{c}", f"w{r}_{c}"
            if spec.cell is ArrayCell.PASSIVE:
                c_.memristor(f"m{r}_{c}", b, w, spec.device)
                continue
            x = f"x{r}_{c}"
            c_.memristor(f"m{r}_{c}", b, x, spec.device)
            if spec.fet is None:
                pmos_like = spec.v_sel_on < spec.v_sel_off
                threshold = 0.5 * (spec.v_sel_on + spec.v_sel_off)
                c_.switch(x, w, _sel(c), threshold, spec.r_switch_on, active_low=pmos_like)
            elif spec.orientation is Orientation.DRAIN_TO_RRAM:
                c_.fet(f"q{r}_{c}", x, _sel(c), w, net.bulk_of(r, c), spec.fet)
            else:
                c_.fet(f"q{r}_{c}", w, _sel(c), x, net.bulk_of(r, c), spec.fet)
    return net


class Scheme(str, Enum):
    SELECT = "select"  # selector isolation, unselected lines grounded
    FLOAT = "float"    # passive: unselected lines left floating
    HALF = "half"      # passive: unselected lines at V/2


def select_biases(net: Netlist, r: int, c: int, v: float, scheme: Scheme | str | None = None) -> dict[str, float | None]:
    """Terminal voltages that select cell (r, c) with ``v`` on its BIT line."""
    spec = net.spec
    if not (0 <= r < spec.rows and 0 <= c < spec.cols):
        raise IndexError(f"cell ({r}, {c}) outside a {spec.rows}x{spec.cols} array")
    if scheme is None:
        scheme = Scheme.SELECT if spec.cell is ArrayCell.ONE_T1R else Scheme.FLOAT
    scheme = Scheme(scheme)
    if spec.cell is ArrayCell.ONE_T1R and scheme is not Scheme.SELECT:
        raise ValueError("1T1R arrays use the select scheme")
    if spec.cell is ArrayCell.PASSIVE and scheme is Scheme.SELECT:
        raise ValueError("passive arrays have no selectors; use float or half")
    other = {Scheme.SELECT: 0.0, Scheme.FLOAT: None, Scheme.HALF: 0.5 * v}[scheme]
    b: dict[str, float | None] = {}
    for rr in range(spec.rows):
        b[_bit(rr)] = v if rr == r else other
    for cc in range(spec.cols):
        b[_word(cc)] = 0.0 if cc == c else other
    if spec.cell is ArrayCell.ONE_T1R:
        for cc in range(spec.cols):
            b[_sel(cc)] = spec.v_sel_on if cc == c else spec.v_sel_off
        for name in net.bulk_terminals:
            b[name] = spec.bulk_low
    return b


def _states_for(net: Netlist, state: ArrayState) -> np.ndarray:
    if state.R.shape != (net.spec.rows, net.spec.cols):
        raise ValueError(f"state shape {state.R.shape} does not match the array")
    return np.array([state.R[r, c] for r, c in net.cells])


def solve_dc(net: Netlist, biases: dict[str, float | None], state: ArrayState | np.ndarray) -> NodalSolution:
    system = net.circuit.compile(biases)
    R = _states_for(net, state) if isinstance(state, ArrayState) else state
    system.set_R(R)
    return system.solve()


@dataclass(frozen=True)
class ReadResult:
    RS_estimate: float
    R_true: float
    error_pct: float
    i_sense: float


def read_cell(net: Netlist, state: ArrayState, r: int, c: int, v_read: float = 0.5,
              scheme: Scheme | str | None = None) -> ReadResult:
    """Read cell (r, c) by sensing the current sunk by its WORD driver."""
    spec = net.spec
    guard = spec.device.v_guard if spec.device is not None else None
    if guard is not None and abs(v_read) > guard:
        raise ValueError(f"|v_read| = {abs(v_read)} exceeds the read guard {guard}")
    sol = solve_dc(net, select_biases(net, r, c, v_read, scheme), state)
    i_sense = -sol.terminal_currents[_word(c)]
    if i_sense == 0:
        raise ValueError("read draws no current")
    rs = read_resistance(spec.device, v_read, i_sense)
    R = float(state.R[r, c])
    return ReadResult(rs, R, 100.0 * (rs - R) / R, i_sense)


@dataclass
class ProgramResult:
    state: ArrayState
    disturb: float
    delta: np.ndarray
    v_delivered: float
    steps: int


def program_cell(net: Netlist, state: ArrayState, r: int, c: int, pulse: Waveform, t_s: float = 1e-6,
                 scheme: Scheme | str | None = None) -> ProgramResult:
    """Apply ``pulse`` to cell (r, c); every device evolves with its own solved voltage.

    Rating violations at any solved step abort with :class:`SoacError`.
    """
    spec = net.spec
    if spec.device is None:
        raise ValueError("programming needs a switching device model")
    d, _ = discretize(pulse, t_s)
    R = _states_for(net, state)
    systems: dict[float, NodalSystem] = {}
    warm: dict[float, np.ndarray] = {}
    guard = spec.device.v_guard
    delivered = 0.0
    target = net.cells.index((r, c)) if (r, c) in net.cells else None
    for k, (v, dt) in enumerate(zip(d.voltages.tolist(), d.durations.tolist())):
        quiet = abs(v) <= guard
        if quiet and v in warm:
            # node voltages stay within the driven range, so no device can move
            continue
        if v not in systems:
            systems[v] = net.circuit.compile(select_biases(net, r, c, v, scheme))
        system = systems[v]
        system.set_R(R)
        sol = system.solve(warm.get(v))
        warm[v] = np.array([sol.voltages[n] for n in _group_order(system)])
        bad = soac_check(sol) if sol.fets else []
        if bad:
            raise SoacError(bad, k)
        if quiet:
            continue
        vm = sol.mem_voltages
        if target is not None:
            delivered = float(vm[target])
        R = np.array([
            min(max(analytical_step(spec.device, Rk, float(vk), dt), state.r_floor), state.r_ceil)
            for Rk, vk in zip(R.tolist(), vm.tolist())
        ])
    new = state.copy()
    for (rr, cc), Rk in zip(net.cells, R.tolist()):
        new.R[rr, cc] = Rk
    delta = new.R - state.R
    mask = np.ones_like(delta, dtype=bool)
    mask[r, c] = False
    disturb = float(np.max(np.abs(delta[mask]))) if np.any(mask) else 0.0
    return ProgramResult(new, disturb, delta, delivered, len(d))


def _group_order(system: NodalSystem) -> list[str]:
    """One representative node name per group, in group-index order."""
    rep: dict[int, str] = {}
    for name, g in system.node_group.items():
        rep.setdefault(g, name)
    return [rep[g] for g in range(system.n_groups)]


@dataclass(frozen=True)
class IrDropReport:
    v_drive: float
    min_delivered: float
    worst_cell: tuple[int, int]
    delivered: dict[tuple[int, int], float]

    def to_csv(self) -> str:
        lines = ["row,col,v_delivered_V"]
        for (r, c), v in sorted(self.delivered.items()):
            lines.append(f"{r},{c},{v!r}")
        return "\n".join(lines) + "\n"


def ir_drop_report(spec: CrossbarSpec, worst_case_R: float, v_drive: float, cells: str = "corner") -> IrDropReport:
    """Voltage delivered to a cell conducting alone as a linear ``worst_case_R``.

    ``cells="corner"`` evaluates the far corner only (farthest from both
    drivers); ``cells="all"`` evaluates every cell.
    """
    if not worst_case_R > 0:
        raise ValueError("worst-case resistance must be > 0")
    lin = replace(spec, device=None)
    if cells == "corner":
        targets = [(spec.rows - 1, spec.cols - 1)]
    elif cells == "all":
        targets = [(r, c) for r in range(spec.rows) for c in range(spec.cols)]
    else:
        raise ValueError("cells must be 'corner' or 'all'")
    delivered = {}
    for r, c in targets:
        net = build(lin, only=[(r, c)])
        biases = select_biases(net, r, c, v_drive, Scheme.SELECT if lin.cell is ArrayCell.ONE_T1R else Scheme.FLOAT)
        sol = solve_dc(net, biases, np.array([worst_case_R]))
        delivered[(r, c)] = float(sol.mem_voltages[0])
    worst = min(delivered, key=lambda k: (abs(delivered[k]), k))
    return IrDropReport(v_drive, delivered[worst], worst, delivered)


def write_state(state: ArrayState, path: str | Path) -> None:
    Path(path).write_text(state.to_csv(), encoding="utf-8")


def read_state(path: str | Path, r_floor: float, r_ceil: float) -> ArrayState:
    return ArrayState.from_csv(Path(path).read_text(encoding="utf-8"), r_floor, r_ceil)

"""CMOS-RRAM primitive cells.

A square-law MOSFET with an optional reverse-mode threshold, bisection DC
solvers for 1T1R and 2T1R cells, orientation comparison, voltage-rating
checks, worst-case IV linearization and load-line surfaces.

Sign conventions: MOSFET current is positive from drain to source. In a
1T1R cell the chain is ``WORD - FET - X - RRAM - BIT``; the memristor's
positive terminal is ``X`` so ``v_mem = V(X) - V(BIT)`` and positive cell
current flows from WORD to BIT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .model import ModelParams, device_current


class Polarity(str, Enum):
    NMOS = "nmos"
    PMOS = "pmos"


class CellKind(str, Enum):
    ONE_T1R = "one_t1r"
    TWO_T1R = "two_t1r"
    TG_CELL = "tg_cell"


class Orientation(str, Enum):
    SOURCE_TO_RRAM = "source_to_rram"
    DRAIN_TO_RRAM = "drain_to_rram"


class SolverError(RuntimeError):
    """A DC solve failed to bracket or converge."""


@dataclass(frozen=True)
class Ratings:
    v_gs_max: float = 3.3
    v_ds_max: float = 3.3
    v_gd_max: float = 3.3
    v_db_max: float = 3.3

    def __post_init__(self):
        for name in ("v_gs_max", "v_ds_max", "v_gd_max", "v_db_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"rating {name} must be > 0")


@dataclass(frozen=True)
class MosfetParams:
    """Square-law MOSFET. Thresholds are magnitudes for both polarities.

    ``v_th_rev`` applies when source and drain swap roles; ``symmetric=True``
    ignores it and uses ``v_th`` both ways.
    """

    polarity: Polarity
    v_th: float
    k_gain: float
    v_th_rev: float | None = None
    lambda_: float = 0.0
    ratings: Ratings = field(default_factory=Ratings)
    symmetric: bool = False

    def __post_init__(self):
        object.__setattr__(self, "polarity", Polarity(self.polarity))
        if self.v_th_rev is None:
            object.__setattr__(self, "v_th_rev", self.v_th)
        if not self.k_gain > 0:
            raise ValueError("k_gain must be > 0")
        if self.v_th_rev < self.v_th:
            raise ValueError("v_th_rev must be >= v_th")
        if self.lambda_ < 0:
            raise ValueError("lambda_ must be >= 0")

    @property
    def reverse_threshold(self) -> float:
        return self.v_th if self.symmetric else self.v_th_rev

    def with_(self, **changes) -> "MosfetParams":
        return replace(self, **changes)


def _square_law(k: float, vth: float, lam: float, vgs: float, vds: float) -> tuple[float, float, float]:
    """Forward-mode current (vds >= 0) and its partials wrt vgs and vds."""
    vov = vgs - vth
    if vov <= 0:
        return 0.0, 0.0, 0.0
    clm = 1.0 + lam * vds
    if vds < vov:
        core = vds * (2.0 * vov - vds)
        return k * core * clm, k * 2.0 * vds * clm, k * (2.0 * (vov - vds) * clm + core * lam)
    return k * vov * vov * clm, k * 2.0 * vov * clm, k * vov * vov * lam


def _nmos(m: MosfetParams, vg: float, vs: float, vd: float) -> tuple[float, float, float, float]:
    if vd >= vs:
        i, gg, gd = _square_law(m.k_gain, m.v_th, m.lambda_, vg - vs, vd - vs)
        return i, gg, -gg - gd, gd
    # roles swap: the nominal drain acts as source
    i, gg, gd = _square_law(m.k_gain, m.reverse_threshold, m.lambda_, vg - vd, vs - vd)
    return -i, -gg, -gd, gg + gd


def mosfet_eval(m: MosfetParams, v_g: float, v_s: float, v_d: float) -> tuple[float, float, float, float]:
    """Drain-to-source current and its partials ``(i, di/dvg, di/dvs, di/dvd)``."""
    if m.polarity is Polarity.NMOS:
        return _nmos(m, v_g, v_s, v_d)
    i, gg, gs, gd = _nmos(m, -v_g, -v_s, -v_d)
    return -i, gg, gs, gd


def mosfet_current(m: MosfetParams, v_g: float, v_s: float, v_d: float, v_b: float | None = None) -> float:
    """Drain-to-source current. The bulk only enters rating checks."""
    return mosfet_eval(m, v_g, v_s, v_d)[0]


@dataclass(frozen=True)
class FetBias:
    g: float
    s: float
    d: float
    b: float

    @property
    def pairs(self) -> dict[str, float]:
        return {
            "GS": abs(self.g - self.s),
            "GD": abs(self.g - self.d),
            "DS": abs(self.d - self.s),
            "DB": abs(self.d - self.b),
        }


@dataclass(frozen=True)
class Violation:
    device: str
    pair: str
    value: float
    rating: float


_RATING_FOR = {"GS": "v_gs_max", "GD": "v_gd_max", "DS": "v_ds_max", "DB": "v_db_max"}


def soac_check(biases: Mapping[str, FetBias] | object, fets: Mapping[str, MosfetParams] | None = None) -> list[Violation]:
    """Compare every terminal-pair magnitude with the device ratings.

    Accepts a mapping of device name to :class:`FetBias` plus the matching
    parameter mapping, or any solution object with ``fet_biases`` and ``fets``.
    """
    if fets is None:
        fets = biases.fets
        biases = biases.fet_biases
    elif hasattr(biases, "fet_biases"):
        biases = biases.fet_biases
    out = []
    for name in sorted(biases):
        m = fets[name]
        for pair, value in biases[name].pairs.items():
            rating = getattr(m.ratings, _RATING_FOR[pair])
            if value > rating:
                out.append(Violation(name, pair, value, rating))
    return out


@dataclass(frozen=True)
class CellConfig:
    """One primitive cell.

    ``device=None`` makes the RRAM an ohmic resistor of value ``R``. Bias keys:
    1T1R uses ``WORD``, ``BIT``, ``G`` and optionally ``B``; 2T1R uses
    ``WORD``, ``BIT1``, ``BIT2``, ``G4``, ``G5``; the TG cell uses ``P``, ``N``.
    """

    kind: CellKind
    fets: tuple[MosfetParams, ...]
    R: float
    device: ModelParams | None = None
    orientation: Orientation = Orientation.SOURCE_TO_RRAM
    biases: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", CellKind(self.kind))
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        object.__setattr__(self, "fets", tuple(self.fets))
        object.__setattr__(self, "biases", dict(self.biases))
        if not self.R > 0:
            raise ValueError("R must be > 0")
        need = {CellKind.ONE_T1R: 1, CellKind.TWO_T1R: 2, CellKind.TG_CELL: 0}[self.kind]
        if len(self.fets) != need:
            raise ValueError(f"{self.kind.value} needs {need} FET(s), got {len(self.fets)}")
        if self.kind is CellKind.TWO_T1R:
            q4, q5 = self.fets
            if q4.polarity is not Polarity.PMOS or q5.polarity is not Polarity.NMOS:
                raise ValueError("2T1R expects (pMOS Q4, nMOS Q5)")

    def with_(self, **changes) -> "CellConfig":
        return replace(self, **changes)

    def with_biases(self, **biases: float) -> "CellConfig":
        return replace(self, biases={**self.biases, **biases})


@dataclass(frozen=True)
class SeriesSolution:
    i: float
    v_mem: float
    v_fet: float
    node: float
    residual: float
    resolution: float
    fet_biases: dict[str, FetBias]
    fets: dict[str, MosfetParams]


def _bisect(g, lo: float, hi: float) -> float:
    """Root of a non-increasing function ``g`` on ``[lo, hi]``.

    Stops when the residual is within tolerance or the bracket can no longer
    shrink in floating point.
    """
    glo, ghi = g(lo), g(hi)
    if glo == 0:
        return lo
    if ghi == 0:
        return hi
    if glo < 0 or ghi > 0:
        raise SolverError(f"root not bracketed on [{lo}, {hi}] (g = {glo}, {ghi})")
    best, best_r = lo, abs(glo)
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        gm = g(mid)
        if abs(gm) < best_r:
            best, best_r = mid, abs(gm)
        if gm == 0:
            return mid
        if gm > 0:
            lo = mid
        else:
            hi = mid
    for x in (lo, hi):
        r = abs(g(x))
        if r < best_r:
            best, best_r = x, r
    return best


def _resolution(g, x: float) -> float:
    """Residual change across one ulp of the node voltage: the best a float root can do."""
    return abs(g(math.nextafter(x, math.inf)) - g(math.nextafter(x, -math.inf)))


def _within_tolerance(residual: float, i: float, resolution: float) -> bool:
    return residual <= 1e-12 or residual <= 1e-9 * abs(i) or residual <= resolution


def _fet_terminals(orientation: Orientation, v_word: float, v_x: float) -> tuple[float, float, float]:
    """(v_s, v_d, sign) where ``sign * i_ds`` is the WORD-to-X current."""
    if orientation is Orientation.SOURCE_TO_RRAM:
        return v_x, v_word, 1.0
    return v_word, v_x, -1.0


def _default_bulk(m: MosfetParams, rails: Sequence[float]) -> float:
    return min(rails) if m.polarity is Polarity.NMOS else max(rails)


def dc_solve_series(cell: CellConfig) -> SeriesSolution:
    """DC operating point of a 1T1R cell by bisection on the internal node."""
    if cell.kind is not CellKind.ONE_T1R:
        raise ValueError("dc_solve_series handles one_t1r cells; use dc_solve_2t1r for 2T1R")
    try:
        v_word, v_bit, v_g = (float(cell.biases[k]) for k in ("WORD", "BIT", "G"))
    except KeyError as exc:
        raise ValueError(f"1T1R cell needs bias {exc}") from None
    (m,) = cell.fets
    v_b = float(cell.biases.get("B", _default_bulk(m, (v_word, v_bit, v_g))))

    def fet_i(x: float) -> float:
        vs, vd, sign = _fet_terminals(cell.orientation, v_word, x)
        return sign * mosfet_eval(m, v_g, vs, vd)[0]

    def g(x: float) -> float:
        return fet_i(x) - device_current(cell.device, cell.R, x - v_bit)

    lo, hi = min(v_word, v_bit), max(v_word, v_bit)
    x = _bisect(g, lo, hi)
    i_mem = device_current(cell.device, cell.R, x - v_bit)
    residual = abs(g(x))
    resolution = _resolution(g, x)
    if not _within_tolerance(residual, i_mem, resolution):
        raise SolverError(f"1T1R residual {residual:.3g} A exceeds tolerance")
    span = v_word - v_bit
    v_mem = x - v_bit
    vs, vd, _ = _fet_terminals(cell.orientation, v_word, x)
    return SeriesSolution(
        i=i_mem,
        v_mem=v_mem,
        v_fet=span - v_mem,
        node=x,
        residual=residual,
        resolution=resolution,
        fet_biases={"M1": FetBias(v_g, vs, vd, v_b)},
        fets={"M1": m},
    )


NMOS_GATE_WINDOW = (0.0, 3.0)
PMOS_GATE_WINDOW = (7.0, 10.0)


@dataclass(frozen=True)
class TwoT1RSolution(SeriesSolution):
    gate_window_ok: bool = True
    active: str = ""


def two_t1r_cell(q4: MosfetParams, q5: MosfetParams, R: float, device: ModelParams | None = None,
                 v_bit2: float = 10.0, g4_on: float = 7.0, g5_on: float = 3.0) -> tuple[CellConfig, dict]:
    """Build a 2T1R cell and the gate settings used for each active device."""
    cell = CellConfig(CellKind.TWO_T1R, (q4, q5), R, device, biases={"BIT1": 0.0, "BIT2": v_bit2})
    gates = {
        "q5_nmos": {"G4": v_bit2, "G5": g5_on},
        "q4_pmos": {"G4": g4_on, "G5": 0.0},
    }
    return cell, gates


def dc_solve_2t1r(cell: CellConfig, v_word: float, active: str | None = None) -> TwoT1RSolution:
    """Operating point of the 2T1R cell: WORD - RRAM - X, X - Q5 - BIT1, X - Q4 - BIT2.

    Gate voltages come from the cell biases ``G4``/``G5``. If ``active`` is
    given and the gates are not set, the standard on/off levels are used.
    Both devices conducting at once is rejected.
    """
    if cell.kind is not CellKind.TWO_T1R:
        raise ValueError("dc_solve_2t1r needs a two_t1r cell")
    q4, q5 = cell.fets
    b = dict(cell.biases)
    v1 = float(b.get("BIT1", 0.0))
    v2 = float(b.get("BIT2", 10.0))
    if active is not None:
        if active not in ("q4_pmos", "q5_nmos"):
            raise ValueError(f"unknown active device {active!r}")
        on = active == "q5_nmos"
        b.setdefault("G5", NMOS_GATE_WINDOW[1] if on else v1)
        b.setdefault("G4", v2 if on else PMOS_GATE_WINDOW[0])
    g4, g5 = float(b["G4"]), float(b["G5"])
    q5_on = g5 - v1 > q5.v_th
    q4_on = v2 - g4 > q4.v_th
    if q5_on and q4_on:
        raise ValueError("Q4 and Q5 must never conduct at the same time")
    if active == "q5_nmos" and not q5_on or active == "q4_pmos" and not q4_on:
        raise ValueError(f"{active} requested but its gate does not turn it on")
    bulk5 = float(b.get("B5", min(v1, v2, g4, g5, v_word)))
    bulk4 = float(b.get("B4", max(v1, v2, g4, g5, v_word)))

    def g(x: float) -> float:
        i_mem = device_current(cell.device, cell.R, v_word - x)
        return i_mem - mosfet_eval(q5, g5, v1, x)[0] - mosfet_eval(q4, g4, v2, x)[0]

    terminals = (v_word, v1, v2)
    x = _bisect(g, min(terminals), max(terminals))
    i_mem = device_current(cell.device, cell.R, v_word - x)
    residual = abs(g(x))
    resolution = _resolution(g, x)
    if not _within_tolerance(residual, i_mem, resolution):
        raise SolverError(f"2T1R residual {residual:.3g} A exceeds tolerance")
    window_ok = (
        NMOS_GATE_WINDOW[0] <= g5 <= NMOS_GATE_WINDOW[1]
        and PMOS_GATE_WINDOW[0] <= g4 <= PMOS_GATE_WINDOW[1]
    )
    label = "q5_nmos" if q5_on else "q4_pmos" if q4_on else "none"
    return TwoT1RSolution(
        i=i_mem,
        v_mem=v_word - x,
        v_fet=x,
        node=x,
        residual=residual,
        resolution=resolution,
        fet_biases={"Q4": FetBias(g4, v2, x, bulk4), "Q5": FetBias(g5, v1, x, bulk5)},
        fets={"Q4": q4, "Q5": q5},
        gate_window_ok=window_ok,
        active=label,
    )


@dataclass(frozen=True)
class OrientationRow:
    orientation: Orientation
    polarity: str
    i: float
    v_mem: float
    v_fet: float


@dataclass(frozen=True)
class OrientationReport:
    rows: tuple[OrientationRow, ...]

    def currents(self, orientation: Orientation) -> tuple[float, float]:
        """(|forward|, |reverse|) current magnitudes for one orientation."""
        by = {r.polarity: abs(r.i) for r in self.rows if r.orientation is Orientation(orientation)}
        return by["forward"], by["reverse"]

    def _best(self, key) -> Orientation:
        s = key(self.currents(Orientation.SOURCE_TO_RRAM))
        d = key(self.currents(Orientation.DRAIN_TO_RRAM))
        return Orientation.DRAIN_TO_RRAM if d > s else Orientation.SOURCE_TO_RRAM

    @property
    def recommended(self) -> Orientation:
        """Orientation with the larger worst-case current (ties: source_to_rram)."""
        return self._best(min)

    @property
    def max_current_winner(self) -> Orientation:
        return self._best(max)

    def to_csv(self) -> str:
        lines = ["orientation,polarity,i_A,v_mem_V,v_fet_V"]
        for r in self.rows:
            lines.append(f"{r.orientation.value},{r.polarity},{r.i!r},{r.v_mem!r},{r.v_fet!r}")
        return "\n".join(lines) + "\n"


def gate_on_voltage(m: MosfetParams, vdd: float) -> float:
    return vdd if m.polarity is Polarity.NMOS else 0.0


def compare_orientations(fet: MosfetParams, load: float, vdd: float, device: ModelParams | None = None,
                         orientations: Sequence[Orientation] = tuple(Orientation)) -> OrientationReport:
    """Solve both bias polarities for each orientation with the gate fully on."""
    rows = []
    vg = gate_on_voltage(fet, vdd)
    bulk = 0.0 if fet.polarity is Polarity.NMOS else vdd
    for orient in orientations:
        for polarity, (w, b) in (("forward", (vdd, 0.0)), ("reverse", (0.0, vdd))):
            cell = CellConfig(CellKind.ONE_T1R, (fet,), load, device, orient,
                              {"WORD": w, "BIT": b, "G": vg, "B": bulk})
            sol = dc_solve_series(cell)
            rows.append(OrientationRow(Orientation(orient), polarity, sol.i, sol.v_mem, sol.v_fet))
    return OrientationReport(tuple(rows))


def worst_case_linearize(v: Sequence[float], i: Sequence[float], v_range: tuple[float, float] | None = None) -> float:
    """Smallest |v/i| over the samples: a line that never under-estimates |i|."""
    v = np.asarray(v, dtype=float)
    i = np.asarray(i, dtype=float)
    if v.shape != i.shape or v.ndim != 1:
        raise ValueError("v and i must be equal-length 1-D samples")
    if v_range is not None:
        lo, hi = v_range
        if v.size == 0 or v.min() > lo or v.max() < hi:
            raise ValueError(f"samples do not cover {v_range}")
        keep = (v >= lo) & (v <= hi)
        v, i = v[keep], i[keep]
    if np.any(v * i < 0):
        raise ValueError("IV samples must satisfy i(v) * v >= 0")
    use = (v != 0) & (i != 0)
    if not np.any(use):
        raise ValueError("no conducting samples: all currents are zero")
    return float(np.min(np.abs(v[use] / i[use])))


def loadline_surface(cell: CellConfig, v_gate: Sequence[float], v_out: Sequence[float],
                     out_terminal: str = "WORD") -> np.ndarray:
    """1T1R current for every (gate voltage, output-node voltage) pair.

    The output node is the cell terminal ``out_terminal``; the other terminal
    keeps its configured bias. Rows follow ``v_gate``, columns ``v_out``.
    """
    if len(v_gate) == 0 or len(v_out) == 0:
        raise ValueError("grids must be non-empty")
    if out_terminal not in ("WORD", "BIT"):
        raise ValueError("out_terminal must be WORD or BIT")
    out = np.empty((len(v_gate), len(v_out)))
    for a, vg in enumerate(v_gate):
        for b, vo in enumerate(v_out):
            out[a, b] = dc_solve_series(cell.with_biases(G=float(vg), **{out_terminal: float(vo)})).i
    return out


class TgRoute(str, Enum):
    S14 = "s14"
    S23 = "s23"


@dataclass(frozen=True)
class TgSolution:
    route: TgRoute
    i: float
    v_mem: float
    closed: tuple[str, ...]


def tg_cell(R: float, v_p: float, v_n: float, route: TgRoute | str, r_on: float = 0.0,
            device: ModelParams | None = None) -> TgSolution:
    """Transmission-gate cell with ideal switches of on-resistance ``r_on``.

    Route ``s14`` connects P to the device's positive terminal and its
    negative terminal to N; ``s23`` reverses the device. ``v_mem`` is the
    device's own terminal voltage and ``i`` flows P to N.
    """
    route = TgRoute(route)
    if r_on < 0:
        raise ValueError("r_on must be >= 0")
    sign = 1.0 if route is TgRoute.S14 else -1.0
    span = v_p - v_n
    closed = ("S1", "S4") if route is TgRoute.S14 else ("S2", "S3")
    if r_on == 0:
        vm = sign * span
        return TgSolution(route, sign * device_current(device, R, vm), vm, closed)

    def g(vm: float) -> float:
        # device current along its own orientation minus the switch current
        return (sign * span - vm) / (2.0 * r_on) - device_current(device, R, vm)

    lo, hi = sorted((0.0, sign * span))
    vm = _bisect(g, lo, hi)
    return TgSolution(route, sign * device_current(device, R, vm), vm, closed)

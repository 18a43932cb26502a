"""Fixed-timestep transient engine for a single device.

Every discretized step records the current at the step start and then
advances the state with the closed-form update, so results on flat segments
do not depend on the timestep.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import DeviceState, ModelParams, analytical_step, current, current_array, read_resistance
from .stimulus import Waveform, discretize

TRACE_HEADER = "t_s,v_V,i_A,R_ohm"
READS_HEADER = "pulse_index,RS_ohm"


@dataclass(frozen=True)
class ReadSample:
    pulse: int
    step: int
    t: float
    v: float
    i: float
    R: float
    RS: float


@dataclass
class Trace:
    t: np.ndarray
    v: np.ndarray
    i: np.ndarray
    R: np.ndarray
    reads: list[ReadSample] = field(default_factory=list)
    final_R: float = float("nan")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def rows(self) -> np.ndarray:
        return np.column_stack([self.t, self.v, self.i, self.R])


def run_device(
    p: ModelParams,
    s0: DeviceState,
    w: Waveform,
    t_s: float = 1e-6,
    decimate: int = 1,
    rs_policy: str = "inverse",
) -> Trace:
    """Apply waveform ``w`` to one device starting from ``s0``.

    ``rs_policy`` picks the read-out estimate: ``"inverse"`` inverts the IV law
    at the sampled bias, ``"ratio"`` is the raw ``v / i``. ``decimate`` keeps
    every n-th trace row; reads and the final state are always exact.
    """
    if decimate < 1:
        raise ValueError("decimate must be >= 1")
    if rs_policy not in ("inverse", "ratio"):
        raise ValueError(f"unknown rs_policy {rs_policy!r}")
    d, _ = discretize(w, t_s)
    volts = d.voltages
    durs = d.durations
    n = len(d)
    t = np.concatenate([[0.0], np.cumsum(durs)[:-1]]) if n else np.zeros(0)
    R = np.empty(n)
    i = np.empty(n)

    # steps at or below the guard cannot move the state: handle them in bulk
    quiet = np.abs(volts) <= p.v_guard
    edges = np.flatnonzero(np.diff(quiet.astype(np.int8))) + 1
    bounds = np.concatenate([[0], edges, [n]]).astype(np.int64)
    Rc = float(s0.R)
    lo, hi = s0.r_floor, s0.r_ceil
    for a, b in zip(bounds[:-1].tolist(), bounds[1:].tolist()):
        if a == b:
            continue
        if quiet[a]:
            R[a:b] = Rc
            i[a:b] = current_array(p, Rc, volts[a:b])
            continue
        for k in range(a, b):
            vk = float(volts[k])
            R[k] = Rc
            i[k] = current(p, Rc, vk)
            Rc = min(max(analytical_step(p, Rc, vk, float(durs[k])), lo), hi)

    reads = []
    for m in d.read_marks:
        k = m.segment
        vk, Rk = float(volts[k]), float(R[k])
        ik = current(p, Rk, vk)
        if ik == 0:
            raise ValueError(f"read at step {k} draws no current (v = {vk})")
        RS = read_resistance(p, vk, ik) if rs_policy == "inverse" else vk / ik
        reads.append(ReadSample(m.pulse, k, float(t[k]), vk, ik, Rk, RS))

    sl = slice(None, None, decimate)
    return Trace(t[sl].copy(), np.array(volts[sl]), i[sl].copy(), R[sl].copy(), reads, Rc)


def extract_rs_series(tr: Trace) -> list[tuple[int, float]]:
    return [(r.pulse, r.RS) for r in tr.reads]


def _fmt(x: float) -> str:
    return repr(float(x))


def format_trace_csv(tr: Trace) -> str:
    buf = io.StringIO()
    buf.write(TRACE_HEADER + "\n")
    for row in zip(tr.t.tolist(), tr.v.tolist(), tr.i.tolist(), tr.R.tolist()):
        buf.write(",".join(map(repr, row)) + "\n")
    return buf.getvalue()


def format_reads_csv(series: list[tuple[int, float]]) -> str:
    lines = [READS_HEADER] + [f"{int(k)},{_fmt(rs)}" for k, rs in series]
    return "\n".join(lines) + "\n"


def parse_trace_csv(text: str) -> np.ndarray:
    lines = text.strip().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError(f"trace CSV must start with {TRACE_HEADER!r}")
    rows = [tuple(float(x) for x in ln.split(",")) for ln in lines[1:]]
    return np.array(rows, dtype=float).reshape(-1, 4)


def parse_reads_csv(text: str) -> list[tuple[int, float]]:
    lines = text.strip().splitlines()
    if not lines or lines[0] != READS_HEADER:
        raise ValueError(f"reads CSV must start with {READS_HEADER!r}")
    out = []
    for ln in lines[1:]:
        k, rs = ln.split(",")
        out.append((int(k), float(rs)))
    return out


def write_trace(tr: Trace, trace_path: str | Path | None, reads_path: str | Path | None) -> None:
    if trace_path is not None:
        Path(trace_path).write_text(format_trace_csv(tr), encoding="utf-8")
    if reads_path is not None:
        Path(reads_path).write_text(format_reads_csv(extract_rs_series(tr)), encoding="utf-8")

"""Programming and read-out waveforms.

A :class:`Waveform` is a piecewise-constant voltage schedule. Programming pulses
are flat segments; read-outs are triangular ramps rendered at the engine
timestep with a mark on the peak segment where the current is sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

AT_PEAK = "at_peak"


@dataclass(frozen=True)
class Segment:
    voltage: float
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"segment duration must be > 0, got {self.duration}")


@dataclass(frozen=True)
class ReadMark:
    """Marks segment ``segment`` as a read-out sample taken after ``pulse`` programming pulses."""

    segment: int
    pulse: int = 0
    policy: str = AT_PEAK


@dataclass(frozen=True, eq=False)
class Waveform:
    voltages: np.ndarray
    durations: np.ndarray
    read_marks: tuple[ReadMark, ...] = ()
    n_pulses: int = 0

    def __post_init__(self):
        v = np.array(self.voltages, dtype=float).reshape(-1)
        d = np.array(self.durations, dtype=float).reshape(-1)
        if v.shape != d.shape:
            raise ValueError("voltages and durations differ in length")
        if np.any(~(d > 0)):
            raise ValueError("segment durations must be > 0")
        for m in self.read_marks:
            if not 0 <= m.segment < len(v):
                raise ValueError(f"read mark {m.segment} out of range")
            if m.policy != AT_PEAK:
                raise ValueError(f"unknown sample policy {m.policy!r}")
        v.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "voltages", v)
        object.__setattr__(self, "durations", d)
        object.__setattr__(self, "read_marks", tuple(self.read_marks))

    @classmethod
    def from_segments(cls, segments: Iterable[Segment], read_marks=(), n_pulses: int = 0):
        segs = list(segments)
        return cls(
            np.array([s.voltage for s in segs], dtype=float),
            np.array([s.duration for s in segs], dtype=float),
            tuple(read_marks),
            n_pulses,
        )

    @classmethod
    def empty(cls) -> "Waveform":
        return cls(np.zeros(0), np.zeros(0))

    def __len__(self) -> int:
        return len(self.voltages)

    @property
    def segments(self) -> list[Segment]:
        return [Segment(float(v), float(d)) for v, d in zip(self.voltages, self.durations)]

    @property
    def total_duration(self) -> float:
        return math.fsum(self.durations)

    def __eq__(self, other):
        if not isinstance(other, Waveform):
            return NotImplemented
        return (
            np.array_equal(self.voltages, other.voltages)
            and np.array_equal(self.durations, other.durations)
            and self.read_marks == other.read_marks
            and self.n_pulses == other.n_pulses
        )

    def __add__(self, other: "Waveform") -> "Waveform":
        offset = len(self)
        marks = self.read_marks + tuple(
            ReadMark(m.segment + offset, m.pulse + self.n_pulses, m.policy) for m in other.read_marks
        )
        return Waveform(
            np.concatenate([self.voltages, other.voltages]),
            np.concatenate([self.durations, other.durations]),
            marks,
            self.n_pulses + other.n_pulses,
        )


def concat(parts: Sequence[Waveform]) -> Waveform:
    """Concatenate many waveforms in one pass."""
    if not parts:
        return Waveform.empty()
    volts, durs, marks = [], [], []
    offset = pulses = 0
    for w in parts:
        volts.append(w.voltages)
        durs.append(w.durations)
        marks.extend(ReadMark(m.segment + offset, m.pulse + pulses, m.policy) for m in w.read_marks)
        offset += len(w)
        pulses += w.n_pulses
    return Waveform(np.concatenate(volts), np.concatenate(durs), tuple(marks), pulses)


def pulse_train(n: int, amp: float, width: float, gap: float = 0.0) -> Waveform:
    """``n`` pulses of ``amp`` volts separated by 0 V gaps (no trailing gap)."""
    if n < 1:
        raise ValueError("need at least one pulse")
    if not width > 0 or gap < 0:
        raise ValueError("pulse width must be > 0 and gap >= 0")
    if gap > 0:
        volts = np.zeros(2 * n - 1)
        volts[::2] = amp
        durs = np.full(2 * n - 1, gap)
        durs[::2] = width
    else:
        volts = np.full(n, float(amp))
        durs = np.full(n, float(width))
    return Waveform(volts, durs, (), n)


def read_event(v_read: float = 0.5, t_read: float = 1e-3, t_s: float = 1e-6) -> Waveform:
    """Triangular 0 -> v_read -> 0 ramp rendered as flat steps of width ``t_s``.

    Each step carries the ramp value at its midpoint, so no step exceeds
    ``v_read``. The first step of maximum voltage is marked for sampling.
    """
    if not v_read > 0:
        raise ValueError("read voltage must be > 0 to draw a measurable current")
    if not t_s > 0 or t_s > t_read:
        raise ValueError(f"timestep {t_s} must be in (0, t_read={t_read}]")
    n = max(1, int(round(t_read / t_s)))
    dt = t_read / n
    mid = (np.arange(n) + 0.5) * dt
    half = t_read / 2.0
    volts = v_read * np.where(mid <= half, mid / half, (t_read - mid) / half)
    volts = np.minimum(volts, v_read)
    peak = int(np.argmax(volts))
    return Waveform(volts, np.full(n, dt), (ReadMark(peak, 0),), 0)


def discretize(w: Waveform, t_s: float) -> tuple[Waveform, np.ndarray]:
    """Split every segment into whole ``t_s`` steps plus one trailing remainder step.

    The remainder ``fmod(d, t_s)`` is exact, so each segment's pieces sum to
    its duration exactly. Returns the discretized waveform and, for each new
    step, the index of the segment it came from. Read marks move to the first
    step of their segment.
    """
    if not t_s > 0:
        raise ValueError("timestep must be > 0")
    d = w.durations
    rem = np.fmod(d, t_s)
    whole = np.rint((d - rem) / t_s).astype(np.int64)
    # fold representation-level remainders into the last whole step when exact
    merged = t_s + rem
    back = merged - t_s
    exact = ((t_s - (merged - back)) + (rem - back)) == 0
    fold = (whole > 0) & (rem > 0) & (rem <= 1e-6 * t_s) & exact
    has_rem = (rem > 0) & ~fold
    counts = whole + has_rem
    src = np.repeat(np.arange(len(w)), counts)
    durs = np.full(len(src), float(t_s))
    ends = np.cumsum(counts) - 1
    durs[ends[has_rem]] = rem[has_rem]
    durs[ends[fold]] = merged[fold]
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
    marks = tuple(ReadMark(int(starts[m.segment]), m.pulse, m.policy) for m in w.read_marks)
    return Waveform(w.voltages[src], durs, marks, w.n_pulses), src


class Mode(str, Enum):
    PULSE_COUNT = "pulse_count"
    PULSE_WIDTH = "pulse_width"
    AMPLITUDE = "amplitude"


@dataclass(frozen=True)
class CharacterizationPlan:
    """Write/read routine: every programming pulse is followed by read-outs.

    ``period`` is the pulse-to-pulse period; ``None`` means back-to-back
    (``t_read + width``), which reproduces periods such as 1.001/1.01/1.1 ms
    for 1/10/100 us pulses and 1 ms reads.
    """

    mode: Mode
    v_bias: tuple[float, ...]
    widths: tuple[float, ...]
    n_pulses: int = 100
    v_read: float = 0.5
    t_read: float = 1e-3
    period: float | None = None
    reads_per_pulse: int = 1
    initial_read: bool = False
    v_guard: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "v_bias", tuple(float(v) for v in self.v_bias))
        object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))
        if self.n_pulses < 0 or (self.n_pulses == 0 and not self.initial_read):
            raise ValueError("n_pulses must be >= 1, or 0 with initial_read for a reads-only plan")
        if self.v_read > self.v_guard:
            raise ValueError(f"v_read {self.v_read} exceeds the read guard {self.v_guard}")
        if self.reads_per_pulse < 1:
            raise ValueError("reads_per_pulse must be >= 1")
        if not self.v_bias or not self.widths:
            raise ValueError("plan needs at least one bias and one width")
        if self.mode is Mode.PULSE_WIDTH and len(self.v_bias) != 1:
            raise ValueError("pulse_width mode sweeps widths at a single bias")
        if self.mode in (Mode.PULSE_COUNT, Mode.AMPLITUDE) and len(self.widths) != 1:
            raise ValueError(f"{self.mode.value} mode uses a single pulse width")

    def period_for(self, width: float) -> float:
        busy = self.reads_per_pulse * self.t_read + width
        if self.period is None:
            return busy
        if self.period < busy * (1 - 1e-12):
            raise ValueError(f"period {self.period} shorter than pulse + reads ({busy})")
        return self.period


@dataclass(frozen=True)
class Series:
    label: str
    v_bias: float
    width: float
    period: float
    waveform: Waveform = field(repr=False)


def build_characterization(plan: CharacterizationPlan, t_s: float = 1e-6) -> list[Series]:
    """One programming/read series per swept value, each meant to start from the same state."""
    read = read_event(plan.v_read, plan.t_read, t_s)
    reads = concat([read] * plan.reads_per_pulse)
    out = []
    for v in plan.v_bias:
        for width in plan.widths:
            period = plan.period_for(width)
            idle = period - plan.reads_per_pulse * plan.t_read - width
            one = pulse_train(1, v, width)
            if idle > width * 1e-9:
                one = one + Waveform(np.zeros(1), np.array([idle]))
            block = one + reads
            parts = [reads] if plan.initial_read else []
            parts += [block] * plan.n_pulses
            if plan.mode is Mode.PULSE_WIDTH:
                label = f"width={width:g}s"
            else:
                label = f"v={v:g}V"
            out.append(Series(label, v, width, period, concat(parts)))
    return out


WAVEFORM_HEADER = "voltage_V,duration_s"


def format_waveform(w: Waveform) -> str:
    """Two-column text form.

    A ``#read <pulse>`` line marks the segment that follows it, and an
    optional ``#pulses <n>`` line records the programming-pulse count.
    Floats use the shortest round-trip representation.
    """
    marks = {m.segment: m for m in w.read_marks}
    lines = [WAVEFORM_HEADER]
    if w.n_pulses:
        lines.append(f"#pulses {w.n_pulses}")
    for k, (v, d) in enumerate(zip(w.voltages.tolist(), w.durations.tolist())):
        if k in marks:
            lines.append(f"#read {marks[k].pulse}")
        lines.append(f"{v!r},{d!r}")
    return "\n".join(lines) + "\n"


def parse_waveform(text: str) -> Waveform:
    volts, durs, marks = [], [], []
    n_pulses = 0
    pending = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line == WAVEFORM_HEADER:
            continue
        if line.startswith("#"):
            word, _, arg = line[1:].partition(" ")
            if word == "read":
                pending = int(arg) if arg.strip() else 0
            elif word == "pulses":
                n_pulses = int(arg)
            continue
        try:
            v, d = (float(x) for x in line.split(","))
        except ValueError:
            raise ValueError(f"line {lineno}: expected 'voltage,duration', got {raw!r}") from None
        if pending is not None:
            marks.append(ReadMark(len(volts), pending))
            pending = None
        volts.append(v)
        durs.append(d)
    if pending is not None:
        raise ValueError("#read marker at end of waveform with no segment after it")
    return Waveform(np.array(volts, dtype=float), np.array(durs, dtype=float), tuple(marks), n_pulses)

"""INI-style configuration files.

Physical quantities carry their unit in the key name (``_v``, ``_s``,
``_ohm``, ...). Keys are case-sensitive so that ``A_p`` and ``a_p`` stay distinct.
See ``docs/config.md`` for the full schema.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .crossbar import ArrayCell, ArrayState, BulkMode, CrossbarSpec, LineGeometry
from .designflow import DEVICES, CheckPoint, DesignConfig, GateConfig, logic_checks
from .model import BUILTIN_BOUNDS, DeviceState, ModelParams, builtin
from .primitives import MosfetParams, Orientation, Ratings
from .stimulus import CharacterizationPlan, Mode, parse_waveform


class ConfigError(ValueError):
    """Malformed, incomplete or inconsistent configuration."""


# config key -> ModelParams field
MODEL_KEYS = {
    "window_kind": "window_kind",
    "a_p": "a_p",
    "a_n": "a_n",
    "b_p_per_v": "b_p",
    "b_n_per_v": "b_n",
    "A_p": "A_p",
    "A_n": "A_n",
    "t_p_per_v": "t_p",
    "t_n_per_v": "t_n",
    "r_p0_ohm": "r_p0",
    "r_p1_ohm_per_v": "r_p1",
    "r_p2_ohm_per_v2": "r_p2",
    "r_n0_ohm": "r_n0",
    "r_n1_ohm_per_v": "r_n1",
    "r_n2_ohm_per_v2": "r_n2",
    "k_p_per_ohm": "k_p",
    "k_n_per_ohm": "k_n",
    "eta": "eta",
    "v_guard_v": "v_guard",
}


def example_path(name: str) -> Path:
    """Path of a data file shipped with the package."""
    return Path(str(resources.files("rramflow") / "data" / name))


def new_parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    return cp


def read_config(path: str | Path) -> configparser.ConfigParser:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = new_parser()
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cp


def get_float(section, key: str, default=None) -> float:
    if key not in section:
        if default is None:
            raise ConfigError(f"[{section.name}] missing key {key!r}")
        return default
    try:
        return float(section[key])
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {section[key]!r} is not a number") from None


def get_int(section, key: str, default=None) -> int:
    value = get_float(section, key, default)
    if value != int(value):
        raise ConfigError(f"[{section.name}] {key} must be an integer")
    return int(value)


def get_floats(section, key: str, default=None) -> tuple[float, ...]:
    if key not in section:
        if default is None:
            raise ConfigError(f"[{section.name}] missing key {key!r}")
        return tuple(default)
    try:
        return tuple(float(x) for x in section[key].replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} must be a list of numbers") from None


def params_from_section(section) -> ModelParams:
    unknown = set(section) - set(MODEL_KEYS) - {"builtin", "file"}
    if unknown:
        raise ConfigError(f"[{section.name}] unknown keys: {sorted(unknown)}")
    kwargs = {}
    for key, field_name in MODEL_KEYS.items():
        if key not in section:
            continue
        if key == "window_kind":
            kwargs[field_name] = section[key].strip()
        elif key == "eta":
            kwargs[field_name] = get_int(section, key)
        else:
            kwargs[field_name] = get_float(section, key)
    try:
        return ModelParams(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section.name}] invalid model parameters: {exc}") from exc


def load_params_file(path: str | Path) -> ModelParams:
    cp = read_config(path)
    if "model" not in cp:
        raise ConfigError(f"{path}: missing [model] section")
    return params_from_section(cp["model"])


def resolve_model(section, base_dir: Path | None = None) -> ModelParams:
    """``builtin = name``, ``file = path`` (relative to the config) or inline keys.

    Inline keys override the selected built-in or file values.
    """
    overrides = {k: v for k, v in section.items() if k not in ("builtin", "file")}
    if "builtin" in section:
        try:
            base = builtin(section["builtin"].strip())
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    elif "file" in section:
        path = Path(section["file"].strip())
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        base = load_params_file(path)
    else:
        return params_from_section(section)
    if not overrides:
        return base
    merged = new_parser()
    merged.read_dict({"model": _params_to_dict(base)})
    for k, v in overrides.items():
        merged["model"][k] = v
    return params_from_section(merged["model"])


def _params_to_dict(p: ModelParams) -> dict[str, str]:
    out = {}
    for key, field_name in MODEL_KEYS.items():
        value = getattr(p, field_name)
        out[key] = value.value if key == "window_kind" else repr(value)
    return out


def state_from_section(section, params_name: str | None = None) -> DeviceState:
    floor, ceil = BUILTIN_BOUNDS.get(params_name or "", (None, None))
    r_floor = get_float(section, "r_floor_ohm", floor)
    r_ceil = get_float(section, "r_ceil_ohm", ceil)
    R = get_float(section, "r_init_ohm")
    try:
        return DeviceState(R, r_floor, r_ceil)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {exc}") from exc


def get_bool(section, key: str, default: bool | None = None) -> bool:
    if key not in section:
        if default is None:
            raise ConfigError(f"[{section.name}] missing key {key!r}")
        return default
    try:
        return section.getboolean(key)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} must be true or false") from None


def get_str(section, key: str, default: str | None = None) -> str:
    if key not in section:
        if default is None:
            raise ConfigError(f"[{section.name}] missing key {key!r}")
        return default
    return section[key].strip()


def require(cp: configparser.ConfigParser, name: str):
    if name not in cp:
        raise ConfigError(f"missing [{name}] section")
    return cp[name]


def check_keys(section, allowed: set[str]) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"[{section.name}] unknown keys: {sorted(unknown)}")


def _build(section, factory, *args, **kwargs):
    """Call ``factory`` and report its validation errors as config errors."""
    try:
        return factory(*args, **kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[{section.name}] {exc}") from exc


# -- run --------------------------------------------------------------------------

RUN_KEYS = {"timestep_s", "seed", "decimate", "trace_csv", "reads_csv", "out_csv"}


@dataclass(frozen=True)
class RunSettings:
    timestep: float = 1e-6
    seed: int = 0
    decimate: int = 1
    trace_csv: Path | None = None
    reads_csv: Path | None = None
    out_csv: Path | None = None


def run_settings(cp: configparser.ConfigParser, base_dir: Path) -> RunSettings:
    if "run" not in cp:
        return RunSettings()
    s = cp["run"]
    check_keys(s, RUN_KEYS)
    t_s = get_float(s, "timestep_s", 1e-6)
    if not t_s > 0:
        raise ConfigError("[run] timestep_s must be > 0")
    decimate = get_int(s, "decimate", 1)
    if decimate < 1:
        raise ConfigError("[run] decimate must be >= 1")

    def path(key):
        return base_dir / s[key].strip() if key in s else None

    return RunSettings(t_s, get_int(s, "seed", 0), decimate, path("trace_csv"), path("reads_csv"), path("out_csv"))


def load_model(cp: configparser.ConfigParser, base_dir: Path, required: bool = True) -> tuple[ModelParams | None, str | None]:
    """Model parameters and the built-in name, if one was selected."""
    if "model" not in cp:
        if required:
            raise ConfigError("missing [model] section")
        return None, None
    section = cp["model"]
    name = section["builtin"].strip() if "builtin" in section else None
    return resolve_model(section, base_dir), name


def load_state(cp: configparser.ConfigParser, params_name: str | None) -> DeviceState:
    return state_from_section(require(cp, "state"), params_name)


# -- waveform ---------------------------------------------------------------------

WAVEFORM_KEYS = {"file", "mode", "v_bias_v", "width_s", "n_pulses", "v_read_v", "t_read_s", "period_s",
                 "reads_per_pulse", "initial_read"}


def load_waveform_section(cp: configparser.ConfigParser, base_dir: Path, v_guard: float = 0.5):
    """Either a :class:`Waveform` read from ``file`` or a :class:`CharacterizationPlan`."""
    s = require(cp, "waveform")
    check_keys(s, WAVEFORM_KEYS)
    if "file" in s:
        path = base_dir / s["file"].strip()
        if not path.is_file():
            raise ConfigError(f"waveform file not found: {path}")
        try:
            return parse_waveform(path.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    period = get_float(s, "period_s") if "period_s" in s else None
    return _build(
        s, CharacterizationPlan,
        mode=get_str(s, "mode", Mode.PULSE_COUNT.value),
        v_bias=get_floats(s, "v_bias_v"),
        widths=get_floats(s, "width_s"),
        n_pulses=get_int(s, "n_pulses", 100),
        v_read=get_float(s, "v_read_v", 0.5),
        t_read=get_float(s, "t_read_s", 1e-3),
        period=period,
        reads_per_pulse=get_int(s, "reads_per_pulse", 1),
        initial_read=get_bool(s, "initial_read", False),
        v_guard=v_guard,
    )


# -- cell -------------------------------------------------------------------------

FET_KEYS = {"polarity", "v_th_v", "v_th_rev_v", "k_gain_a_per_v2", "lambda_per_v", "symmetric",
            "v_gs_max_v", "v_ds_max_v", "v_gd_max_v", "v_db_max_v"}
CELL_KEYS = {"load_ohm", "vdd_v"}


def fet_from_section(section, prefix: str = "", polarity: str | None = None) -> MosfetParams:
    def key(k):
        return prefix + k

    default = Ratings()
    ratings = _build(
        section, Ratings,
        v_gs_max=get_float(section, key("v_gs_max_v"), default.v_gs_max),
        v_ds_max=get_float(section, key("v_ds_max_v"), default.v_ds_max),
        v_gd_max=get_float(section, key("v_gd_max_v"), default.v_gd_max),
        v_db_max=get_float(section, key("v_db_max_v"), default.v_db_max),
    )
    v_th = get_float(section, key("v_th_v"))
    return _build(
        section, MosfetParams,
        polarity=polarity or get_str(section, key("polarity")),
        v_th=v_th,
        k_gain=get_float(section, key("k_gain_a_per_v2")),
        v_th_rev=get_float(section, key("v_th_rev_v"), v_th),
        lambda_=get_float(section, key("lambda_per_v"), 0.0),
        ratings=ratings,
        symmetric=get_bool(section, key("symmetric"), False),
    )


@dataclass(frozen=True)
class CellSettings:
    fet: MosfetParams
    load: float
    vdd: float


def load_cell(cp: configparser.ConfigParser) -> CellSettings:
    s = require(cp, "cell")
    check_keys(s, FET_KEYS | CELL_KEYS)
    load = get_float(s, "load_ohm", 1000.0)
    vdd = get_float(s, "vdd_v", 5.0)
    if not load > 0 or not vdd > 0:
        raise ConfigError("[cell] load_ohm and vdd_v must be > 0")
    return CellSettings(fet_from_section(s), load, vdd)


# -- array ------------------------------------------------------------------------

ARRAY_KEYS = {"rows", "cols", "cell", "selector", "rho_sq_ohm", "pitch_um", "bit_width_um", "word_width_um",
              "sel_width_um", "bulk", "orientation", "v_sel_on_v", "v_sel_off_v", "r_switch_on_ohm",
              "r_init_ohm", "r_floor_ohm", "r_ceil_ohm", "state_csv", "worst_case_r_ohm", "v_drive_v",
              "v_read_v", "scheme"}


@dataclass(frozen=True)
class ArraySettings:
    spec: CrossbarSpec
    state: ArrayState
    worst_case_R: float | None
    v_drive: float | None
    v_read: float
    scheme: str | None


def load_array(cp: configparser.ConfigParser, base_dir: Path, rows: int | None = None, cols: int | None = None,
               device: ModelParams | None = None, bounds: tuple[float, float] | None = None) -> ArraySettings:
    """Array geometry and initial state; ``selector = fet`` takes the FET from ``[cell]``."""
    s = require(cp, "array")
    check_keys(s, ARRAY_KEYS)
    rows = rows if rows is not None else get_int(s, "rows")
    cols = cols if cols is not None else get_int(s, "cols")
    selector = get_str(s, "selector", "ideal")
    if selector not in ("ideal", "fet"):
        raise ConfigError("[array] selector must be 'ideal' or 'fet'")
    fet = load_cell(cp).fet if selector == "fet" else None
    pitch = get_float(s, "pitch_um", 10.0)

    def line(key):
        return _build(s, LineGeometry, get_float(s, key, 1.0), pitch)

    kwargs = dict(
        rows=rows, cols=cols, cell=get_str(s, "cell", ArrayCell.ONE_T1R.value), device=device, fet=fet,
        rho_sq=get_float(s, "rho_sq_ohm", 0.0), bit=line("bit_width_um"), word=line("word_width_um"),
        sel=line("sel_width_um"), bulk_mode=get_str(s, "bulk", BulkMode.COLUMN.value),
        orientation=get_str(s, "orientation", Orientation.DRAIN_TO_RRAM.value),
        r_switch_on=get_float(s, "r_switch_on_ohm", 0.0),
    )
    if "v_sel_on_v" in s:
        kwargs["v_sel_on"] = get_float(s, "v_sel_on_v")
    if "v_sel_off_v" in s:
        kwargs["v_sel_off"] = get_float(s, "v_sel_off_v")
    spec = _build(s, CrossbarSpec, **kwargs)

    lo, hi = bounds if bounds is not None else (None, None)
    r_floor = get_float(s, "r_floor_ohm", lo)
    r_ceil = get_float(s, "r_ceil_ohm", hi)
    if "state_csv" in s:
        path = base_dir / s["state_csv"].strip()
        if not path.is_file():
            raise ConfigError(f"array state file not found: {path}")
        state = _build(s, ArrayState.from_csv, path.read_text(encoding="utf-8"), r_floor, r_ceil)
        if state.R.shape != (rows, cols):
            raise ConfigError(f"array state is {state.R.shape[0]}x{state.R.shape[1]}, array is {rows}x{cols}")
    else:
        state = _build(s, ArrayState.uniform, rows, cols, get_float(s, "r_init_ohm"), r_floor, r_ceil)
    wc = get_float(s, "worst_case_r_ohm") if "worst_case_r_ohm" in s else None
    vd = get_float(s, "v_drive_v") if "v_drive_v" in s else None
    scheme = get_str(s, "scheme") if "scheme" in s else None
    return ArraySettings(spec, state, wc, vd, get_float(s, "v_read_v", 0.5), scheme)


# -- ranges -----------------------------------------------------------------------

RANGE_KEYS = {"q_ohm", "alpha", "sweep_points", "max_iters", "high_min_frac", "low_max_frac",
              "r_load_ohm", "v_load_v", "vdd_v"}
GATE_FET_KEYS = {p + k for p in ("pmos_", "nmos_") for k in FET_KEYS - {"polarity"}}


def load_design(cp: configparser.ConfigParser, base_dir: Path) -> DesignConfig:
    """NAND verification setup: ``[ranges]`` plus ``pmos_``/``nmos_`` keys in ``[cell]``."""
    s = require(cp, "ranges")
    cell = require(cp, "cell")
    check_keys(cell, GATE_FET_KEYS)
    pmos = fet_from_section(cell, "pmos_", "pmos")
    nmos = fet_from_section(cell, "nmos_", "nmos")
    device, _ = load_model(cp, base_dir, required=False)

    proposed, nominal, checks = {}, {}, []
    allowed = set(RANGE_KEYS)
    for d in DEVICES:
        allowed |= {f"proposed_{d}_ohm", f"nominal_{d}_ohm"}
        for kind, out in (("proposed", proposed), ("nominal", nominal)):
            vals = get_floats(s, f"{kind}_{d}_ohm")
            if len(vals) != 2:
                raise ConfigError(f"[ranges] {kind}_{d}_ohm needs two values: min, max")
            out[d] = vals
    for key in sorted(k for k in s if k.startswith("check_")):
        allowed.add(key)
        vals = get_floats(s, key)
        if len(vals) != 4:
            raise ConfigError(f"[ranges] {key} needs four values: va_v, vb_v, v_min_v, v_max_v")
        checks.append(CheckPoint(*vals))
    check_keys(s, allowed)

    vdd = get_float(s, "vdd_v", 5.0)
    r_load = get_float(s, "r_load_ohm", 100e3)
    mid = {d: 0.5 * (lo + hi) for d, (lo, hi) in proposed.items()}
    gate = _build(s, GateConfig, mid, pmos, nmos, vdd, device, r_load if r_load > 0 else None,
                  get_float(s, "v_load_v", 0.0))
    base = logic_checks(vdd, get_float(s, "high_min_frac", 0.8), get_float(s, "low_max_frac", 0.2))
    return _build(
        s, DesignConfig, gate, proposed, nominal, get_float(s, "q_ohm"),
        alpha=get_float(s, "alpha", 0.9), checks=tuple(base + checks),
        sweep_points=get_int(s, "sweep_points", 11), max_iters=get_int(s, "max_iters", 5),
    )

"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import (
    ConfigError,
    example_path,
    load_array,
    load_cell,
    load_design,
    load_model,
    load_state,
    load_waveform_section,
    read_config,
    run_settings,
)
from .crossbar import SoacError, build, ir_drop_report, program_cell, read_cell
from .designflow import run_workflow
from .model import BUILTIN_BOUNDS
from .primitives import Orientation, SolverError, compare_orientations
from .stimulus import CharacterizationPlan, Mode, Waveform, build_characterization
from .transient import format_reads_csv, extract_rs_series, run_device, write_trace

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

WAVEFORM_HELP = """\
waveform text format:
  voltage_V,duration_s        header line (optional)
  0.8,1e-4                    one segment per line
  #read 3                     marks the next segment as the read taken after pulse 3
  #pulses 1500                optional programming-pulse count
"""


def _write(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load(path: str):
    cp = read_config(path)
    return cp, Path(path).resolve().parent


def _single_waveform(source, t_s: float) -> Waveform:
    if isinstance(source, Waveform):
        return source
    series = build_characterization(source, t_s)
    if len(series) != 1:
        raise ConfigError(f"[waveform] describes {len(series)} series; use 'characterize' or one bias/width")
    return series[0].waveform


# -- simulate ---------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cp, base = _load(args.config)
    run = run_settings(cp, base)
    p, name = load_model(cp, base)
    s0 = load_state(cp, name)
    t_s = args.timestep or run.timestep
    w = _single_waveform(load_waveform_section(cp, base, p.v_guard), t_s)
    trace_path = Path(args.trace) if args.trace else run.trace_csv
    reads_path = Path(args.reads) if args.reads else run.reads_csv
    tr = run_device(p, s0, w, t_s, decimate=args.decimate or run.decimate)
    if trace_path is not None:
        write_trace(tr, trace_path, None)
    _write(format_reads_csv(extract_rs_series(tr)), reads_path)
    _info(f"final_R_ohm={tr.final_R!r} reads={len(tr.reads)}")
    return EXIT_OK


# -- characterize -----------------------------------------------------------------

CHAR_HEADER = "series,v_bias_V,width_s,pulse_index,RS_ohm"


def _run_series(task):
    p, s0, series, t_s = task
    return extract_rs_series(run_device(p, s0, series.waveform, t_s))


def cmd_characterize(args) -> int:
    cp, base = _load(args.config)
    run = run_settings(cp, base)
    p, name = load_model(cp, base)
    s0 = load_state(cp, name)
    plan = load_waveform_section(cp, base, p.v_guard)
    if not isinstance(plan, CharacterizationPlan):
        raise ConfigError("characterize needs a generated plan in [waveform], not a waveform file")
    if args.mode:
        try:
            plan = replace(plan, mode=Mode(args.mode))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    t_s = args.timestep or run.timestep
    series = build_characterization(plan, t_s)
    tasks = [(p, s0, s, t_s) for s in series]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_series, tasks))
    else:
        results = [_run_series(t) for t in tasks]
    lines = [CHAR_HEADER]
    for s, reads in zip(series, results):
        for k, rs in reads:
            lines.append(f"{s.label},{s.v_bias!r},{s.width!r},{k},{rs!r}")
    _write("\n".join(lines) + "\n", Path(args.out) if args.out else run.out_csv)
    return EXIT_OK


# -- dcop -------------------------------------------------------------------------

def cmd_dcop(args) -> int:
    cp, base = _load(args.config)
    cell = load_cell(cp)
    orients = tuple(Orientation) if args.orientation == "both" else (Orientation(args.orientation),)
    rep = compare_orientations(cell.fet, cell.load, cell.vdd, None, orients)
    _write(rep.to_csv(), Path(args.out) if args.out else None)
    if len(orients) == 2:
        _info(f"recommended={rep.recommended.value} max_current={rep.max_current_winner.value}")
    return EXIT_OK


# -- crossbar ---------------------------------------------------------------------

READ_HEADER = "row,col,RS_estimate_ohm,R_true_ohm,error_pct,i_sense_A"


def cmd_crossbar(args) -> int:
    cp, base = _load(args.config)
    run = run_settings(cp, base)
    device, name = load_model(cp, base, required=False)
    arr = load_array(cp, base, args.rows, args.cols, device, BUILTIN_BOUNDS.get(name or ""))
    out = Path(args.out) if args.out else run.out_csv
    if args.ir_drop:
        if arr.worst_case_R is None or arr.v_drive is None:
            raise ConfigError("[array] needs worst_case_r_ohm and v_drive_v for --ir-drop")
        rep = ir_drop_report(arr.spec, arr.worst_case_R, arr.v_drive, args.ir_drop)
        _write(rep.to_csv(), out)
        _info(f"min_delivered_V={rep.min_delivered!r} worst_cell={rep.worst_cell[0]},{rep.worst_cell[1]}")
        return EXIT_OK
    net = build(arr.spec)
    r, c = args.read if args.read else args.program
    if not (0 <= r < arr.spec.rows and 0 <= c < arr.spec.cols):
        raise ConfigError(f"cell ({r}, {c}) outside a {arr.spec.rows}x{arr.spec.cols} array")
    if args.read:
        v_read = args.v_read if args.v_read is not None else arr.v_read
        res = read_cell(net, arr.state, r, c, v_read, arr.scheme)
        row = f"{r},{c},{res.RS_estimate!r},{res.R_true!r},{res.error_pct!r},{res.i_sense!r}"
        _write(f"{READ_HEADER}\n{row}\n", out)
        return EXIT_OK
    if device is None:
        raise ConfigError("programming needs a [model] section")
    t_s = args.timestep or run.timestep
    pulse = _single_waveform(load_waveform_section(cp, base, device.v_guard), t_s)
    try:
        res = program_cell(net, arr.state, r, c, pulse, t_s, arr.scheme)
    except SoacError as exc:
        _info(f"SOAC: {exc}")
        return EXIT_VERIFY
    _write(res.state.to_csv(), Path(args.state_out) if args.state_out else out)
    _info(f"R_ohm={float(res.state.R[r, c])!r} disturb_ohm={res.disturb!r} v_delivered_V={res.v_delivered!r}")
    return EXIT_OK


# -- verify -----------------------------------------------------------------------

def cmd_verify(args) -> int:
    cp, base = _load(args.config)
    run = run_settings(cp, base)
    cfg = load_design(cp, base)
    rep = run_workflow(cfg, jobs=args.jobs)
    sys.stdout.write(rep.to_text())
    out = Path(args.out) if args.out else run.out_csv
    if out is not None:
        _write(rep.margins_csv(), out)
    return EXIT_OK if rep.passed else EXIT_VERIFY


# -- entry point ------------------------------------------------------------------

def _cell(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("cell index must be >= 0")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rramflow",
        description="RRAM device, cell and array simulation with design verification.",
        epilog="exit codes: 0 ok, 1 verification failed, 2 configuration error, 3 numerical failure",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--examples", action="store_true", help="list the shipped example configs and exit")
    sub = ap.add_subparsers(dest="command")

    def add(name, help_, func, epilog=None):
        p = sub.add_parser(name, help=help_, description=help_, epilog=epilog,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("config", help="INI configuration file")
        p.set_defaults(func=func)
        return p

    p = add("simulate", "transient run of one device; writes the read-out series", cmd_simulate, WAVEFORM_HELP)
    p.add_argument("--trace", help="write the t_s,v_V,i_A,R_ohm trace here")
    p.add_argument("--reads", help="write pulse_index,RS_ohm here (default stdout)")
    p.add_argument("--decimate", type=_positive_int, help="keep every n-th trace row")
    p.add_argument("--timestep", type=_positive_float, help="override [run] timestep_s")

    p = add("characterize", "pulse-count, pulse-width or amplitude characterization", cmd_characterize)
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--out", help="output CSV (default stdout)")
    p.add_argument("--jobs", type=_positive_int, default=1, help="run series in parallel")
    p.add_argument("--timestep", type=_positive_float)

    p = add("dcop", "1T1R operating points for both bias polarities", cmd_dcop)
    p.add_argument("--orientation", default="both", choices=["both"] + [o.value for o in Orientation])
    p.add_argument("--out", help="output CSV (default stdout)")

    p = add("crossbar", "read, program or IR-drop analysis of an array", cmd_crossbar, WAVEFORM_HELP)
    p.add_argument("--rows", type=_positive_int, help="override [array] rows")
    p.add_argument("--cols", type=_positive_int, help="override [array] cols")
    action = p.add_mutually_exclusive_group(required=True)
    action.add_argument("--read", nargs=2, type=_cell, metavar=("ROW", "COL"))
    action.add_argument("--program", nargs=2, type=_cell, metavar=("ROW", "COL"),
                        help="apply the [waveform] pulse to one cell")
    action.add_argument("--ir-drop", choices=["corner", "all"])
    p.add_argument("--v-read", type=float)
    p.add_argument("--state-out", help="array state CSV after programming")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.add_argument("--timestep", type=_positive_float)

    p = add("verify", "NAND design verification: nominal, corners, uncertainty", cmd_verify)
    p.add_argument("--jobs", type=_positive_int, default=1, help="evaluate corners in parallel")
    p.add_argument("--out", help="margins CSV")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.examples:
        folder = example_path("")
        for f in sorted(folder.glob("*.ini")):
            print(f)
        return EXIT_OK
    if args.command is None:
        ap.print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        _info(f"config error: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        _info(f"I/O error: {exc}")
        return EXIT_CONFIG
    except (SolverError, ArithmeticError, ValueError) as exc:
        _info(f"numerical failure: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

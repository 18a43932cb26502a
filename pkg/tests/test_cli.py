import csv
import io

import pytest

from rramflow.cli import build_parser, main
from rramflow.config import example_path
from rramflow.stimulus import Segment, Waveform, format_waveform, ReadMark
from rramflow.transient import parse_reads_csv, parse_trace_csv


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_simulate_saturation(tmp_path, capsys):
    reads = tmp_path / "reads.csv"
    trace = tmp_path / "trace.csv"
    code, _, err = run(["simulate", example_path("saturation.ini"), "--reads", reads, "--trace", trace], capsys)
    assert code == 0
    series = parse_reads_csv(reads.read_text())
    assert len(series) == 1500
    assert series[-1][1] == pytest.approx(16710.0, rel=0.01)
    assert all(b[1] >= a[1] for a, b in zip(series, series[1:]))
    table = parse_trace_csv(trace.read_text())
    assert table.shape[1] == 4 and table.shape[0] > 1000
    assert "final_R_ohm" in err


def test_reads_only_plan_is_constant(capsys):
    code, out, _ = run(["simulate", example_path("reads_only.ini")], capsys)
    assert code == 0
    assert parse_reads_csv(out) == [(0, 12000.0)]


def test_simulate_from_waveform_file(tmp_path, capsys):
    w = Waveform.from_segments([Segment(0.8, 1e-4), Segment(0.5, 1e-5), Segment(0.8, 1e-4), Segment(0.5, 1e-5)],
                               (ReadMark(1, 1), ReadMark(3, 2)), 2)
    (tmp_path / "w.csv").write_text(format_waveform(w))
    (tmp_path / "run.ini").write_text(
        "[model]\nbuiltin = exp-10k17k\n[state]\nr_init_ohm = 12000\n[waveform]\nfile = w.csv\n")
    code, out, _ = run(["simulate", tmp_path / "run.ini"], capsys)
    assert code == 0
    series = parse_reads_csv(out)
    assert [k for k, _ in series] == [1, 2]
    assert 12000 < series[0][1] < series[1][1]


def test_missing_files_are_config_errors(tmp_path, capsys):
    assert run(["simulate", tmp_path / "nope.ini"], capsys)[0] == 2
    (tmp_path / "a.ini").write_text("[model]\nfile = missing.ini\n[state]\nr_init_ohm = 1\n[waveform]\nv_bias_v = 1\nwidth_s = 1e-4\n")
    code, _, err = run(["simulate", tmp_path / "a.ini"], capsys)
    assert code == 2 and "missing.ini" in err
    (tmp_path / "b.ini").write_text("[model]\nbuiltin = exp-10k17k\n[state]\nr_init_ohm = 12000\n"
                                    "[waveform]\nfile = gone.csv\n")
    assert run(["simulate", tmp_path / "b.ini"], capsys)[0] == 2


@pytest.mark.parametrize("body", [
    "[model]\nbuiltin = nope\n[state]\nr_init_ohm = 12000\n[waveform]\nv_bias_v = 1\nwidth_s = 1e-4\n",
    "[model]\nbuiltin = exp-10k17k\nbogus_key = 1\n[state]\nr_init_ohm = 12000\n[waveform]\nv_bias_v = 1\nwidth_s = 1e-4\n",
    "[model]\nbuiltin = exp-10k17k\n[state]\nr_init_ohm = 99999\n[waveform]\nv_bias_v = 1\nwidth_s = 1e-4\n",
    "[run]\ntimestep_s = 0\n[model]\nbuiltin = exp-10k17k\n[state]\nr_init_ohm = 12000\n[waveform]\nv_bias_v = 1\nwidth_s = 1e-4\n",
    "[model]\nbuiltin = exp-10k17k\n[state]\nr_init_ohm = 12000\n[waveform]\nv_bias_v = 1\nwidth_s = 1e-4\nv_read_v = 0.7\n",
    "[model]\nbuiltin = exp-10k17k\n[state]\nr_init_ohm = 12000\n[waveform]\nv_bias_v = 1, 2\nwidth_s = 1e-4\nmode = amplitude\n",
])
def test_invalid_configs_exit_2(tmp_path, capsys, body):
    (tmp_path / "c.ini").write_text(body)
    assert run(["simulate", tmp_path / "c.ini"], capsys)[0] == 2


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["crossbar", str(example_path("array_passive.ini"))])
    assert exc.value.code == 2
    assert main([]) == 2
    capsys.readouterr()


def test_characterize_widths(capsys):
    code, out, _ = run(["characterize", example_path("width_sweep.ini")], capsys)
    assert code == 0
    table = rows(out)
    assert table[0] == ["series", "v_bias_V", "width_s", "pulse_index", "RS_ohm"]
    labels = list(dict.fromkeys(r[0] for r in table[1:]))
    assert labels == ["width=1e-06s", "width=1e-05s", "width=0.0001s"]
    finals = [float([r for r in table[1:] if r[0] == lab][-1][4]) for lab in labels]
    assert finals[0] < finals[1] < finals[2]


def test_characterize_parallel_is_identical(capsys):
    serial = run(["characterize", example_path("width_sweep.ini")], capsys)[1]
    parallel = run(["characterize", example_path("width_sweep.ini"), "--jobs", "3"], capsys)[1]
    assert serial == parallel


def test_characterize_amplitude_polarity(capsys):
    code, out, _ = run(["characterize", example_path("amplitude_sweep.ini")], capsys)
    assert code == 0
    first = {}
    for label, _, _, k, rs in rows(out)[1:]:
        first.setdefault(label, {})[int(k)] = float(rs)
    step = {lab: s[1] - s[0] for lab, s in first.items()}
    assert abs(step["v=-0.8V"]) > abs(step["v=0.8V"]) > 0
    assert step["v=0.6V"] < step["v=0.7V"] < step["v=0.8V"]


def test_characterize_mode_conflict_is_config_error(capsys):
    assert run(["characterize", example_path("width_sweep.ini"), "--mode", "pulse_count"], capsys)[0] == 2


def test_dcop_both_orientations(capsys):
    code, out, err = run(["dcop", example_path("cell_1t1r.ini")], capsys)
    assert code == 0
    table = rows(out)
    assert table[0] == ["orientation", "polarity", "i_A", "v_mem_V", "v_fet_V"]
    assert len(table) == 5
    assert "recommended=source_to_rram" in err
    code, out, _ = run(["dcop", example_path("cell_1t1r.ini"), "--orientation", "drain_to_rram"], capsys)
    assert code == 0 and len(rows(out)) == 3


def test_crossbar_read_small_array(capsys):
    code, out, _ = run(["crossbar", example_path("array_16x16.ini"), "--rows", 2, "--cols", 2, "--read", 0, 0], capsys)
    assert code == 0
    header, row = rows(out)
    assert header[:5] == ["row", "col", "RS_estimate_ohm", "R_true_ohm", "error_pct"]
    assert float(row[3]) == 12000.0 and float(row[4]) > 0


def test_crossbar_passive_sneak(capsys):
    code, out, _ = run(["crossbar", example_path("array_passive.ini"), "--read", 0, 0], capsys)
    assert code == 0
    assert float(rows(out)[1][4]) == pytest.approx(-25.0, rel=1e-9)


def test_crossbar_zero_read_is_numeric_failure(capsys):
    code, _, err = run(["crossbar", example_path("array_passive.ini"), "--read", 0, 0, "--v-read", 0], capsys)
    assert code == 3 and "numerical" in err


def test_crossbar_cell_out_of_range(capsys):
    assert run(["crossbar", example_path("array_passive.ini"), "--read", 5, 0], capsys)[0] == 2


def test_crossbar_ir_drop(capsys):
    code, out, _ = run(["crossbar", example_path("array_16x16.ini"), "--ir-drop", "corner"], capsys)
    assert code == 0
    (_, row) = rows(out)
    assert row[:2] == ["15", "15"] and 0 < float(row[2]) < 1.5


def test_crossbar_program_and_soac(tmp_path, capsys):
    state = tmp_path / "state.csv"
    code, _, err = run(["crossbar", example_path("array_16x16.ini"), "--rows", 2, "--cols", 2,
                        "--program", 1, 1, "--state-out", state], capsys)
    assert code == 0 and "disturb_ohm=0.0" in err
    text = state.read_text().splitlines()
    assert text[:2] == ["rows,cols", "2,2"]
    assert float(text[3].split(",")[1]) > 12000.0
    cfg = example_path("array_16x16.ini").read_text().replace("v_ds_max_v = 5.5", "v_ds_max_v = 0.5")
    (tmp_path / "weak.ini").write_text(cfg)
    code, _, err = run(["crossbar", tmp_path / "weak.ini", "--rows", 2, "--cols", 2, "--program", 0, 0], capsys)
    assert code == 1 and "SOAC" in err


def test_verify_pass_and_fail(tmp_path, capsys):
    margins = tmp_path / "m.csv"
    code, out, _ = run(["verify", example_path("nand_pass.ini"), "--out", margins], capsys)
    assert code == 0 and out.startswith("status: PASS")
    assert margins.read_text().count(",1\n") == 3
    code, out, _ = run(["verify", example_path("nand_fail.ini")], capsys)
    assert code == 1 and "stage: uncertainty" in out


def test_outputs_are_byte_identical(tmp_path, capsys):
    for k in (1, 2):
        main(["simulate", str(example_path("saturation.ini")), "--reads", str(tmp_path / f"r{k}.csv"),
              "--trace", str(tmp_path / f"t{k}.csv")])
        main(["crossbar", str(example_path("array_16x16.ini")), "--rows", "3", "--cols", "3",
              "--program", "2", "2", "--state-out", str(tmp_path / f"s{k}.csv")])
    capsys.readouterr()
    for stem in "rts":
        assert (tmp_path / f"{stem}1.csv").read_bytes() == (tmp_path / f"{stem}2.csv").read_bytes()


def test_help_documents_waveform_format():
    text = build_parser()._subparsers._group_actions[0].choices["simulate"].format_help()
    assert "#read" in text and "voltage_V,duration_s" in text

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from rramflow.crossbar import (
    ArrayCell,
    ArrayState,
    BulkMode,
    CrossbarSpec,
    LineGeometry,
    Scheme,
    SoacError,
    build,
    ir_drop_report,
    line_resistance,
    program_cell,
    rc_time_constant,
    read_cell,
    read_state,
    select_biases,
    solve_dc,
    write_state,
)
from rramflow.model import DeviceState, builtin
from rramflow.primitives import CellConfig, CellKind, MosfetParams, Orientation, Ratings, dc_solve_series
from rramflow.stimulus import Segment, Waveform, pulse_train
from rramflow.transient import run_device

from oracles import dense_oracle, sneak_2x2

EXP = builtin("exp-10k17k")
NFET = MosfetParams("nmos", 0.7, 1e-3)


# -- line resistance -------------------------------------------------------------

def test_line_resistance_examples():
    assert line_resistance(0.5, 50, 0.1) == pytest.approx(10.0)
    assert line_resistance(1, 1, 0.07) == 0.07
    with pytest.raises(ValueError):
        line_resistance(0, 1, 0.1)


def test_rc_estimate():
    assert rc_time_constant(1, 100, 0.1, 1e-12) == pytest.approx(1e-11)


def wide_16x16():
    return CrossbarSpec(16, 16, fet=NFET, rho_sq=0.08, bit=LineGeometry(60), word=LineGeometry(60),
                        sel=LineGeometry(13))


def test_wide_lines_keep_analog_resistance_low():
    totals = wide_16x16().line_totals()
    assert totals["bit"] < 0.25 and totals["word"] < 0.25
    assert totals["sel"] == pytest.approx(1.0, abs=0.05)


# -- topology --------------------------------------------------------------------

def test_terminal_counts():
    one = build(CrossbarSpec(1, 1, fet=NFET))
    assert one.n_terminals == 4 and len(one.cells) == 1
    passive = build(CrossbarSpec(2, 2, cell=ArrayCell.PASSIVE, rho_sq=0.1))
    assert passive.n_terminals == 4 and len(passive.cells) == 4
    assert len(passive.line_nodes()) == 8
    for mode, count in ((BulkMode.COLUMN, 64), (BulkMode.ROW, 64), (BulkMode.COMMON, 49)):
        assert build(CrossbarSpec(16, 16, fet=NFET, bulk_mode=mode)).n_terminals == count


def test_bad_dimensions_and_cells():
    with pytest.raises(ValueError):
        CrossbarSpec(0, 4)
    net = build(CrossbarSpec(2, 2, fet=NFET))
    with pytest.raises(IndexError):
        select_biases(net, 2, 0, 1.0)
    with pytest.raises(ValueError):
        select_biases(net, 0, 0, 1.0, Scheme.HALF)


# -- linear oracle ---------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(
    rows=st.integers(1, 6),
    cols=st.integers(1, 6),
    rho=st.floats(1e-3, 1.0),
    seed=st.integers(0, 2**32 - 1),
    scheme=st.sampled_from([Scheme.FLOAT, Scheme.HALF]),
    v=st.floats(0.1, 3.0),
)
@example(rows=1, cols=2, rho=1e-3, seed=4, scheme=Scheme.FLOAT, v=1.0)
def test_passive_linear_array_matches_dense_oracle(rows, cols, rho, seed, scheme, v):
    R = np.random.default_rng(seed).uniform(1e3, 1e5, (rows, cols))
    spec = CrossbarSpec(rows, cols, cell=ArrayCell.PASSIVE, rho_sq=rho)
    net = build(spec)
    r, c = rows // 2, cols - 1
    biases = select_biases(net, r, c, v, scheme)
    sol = solve_dc(net, biases, R)
    Vb, Vw = dense_oracle(R, spec.r_bit, spec.r_word,
                          [biases[f"BIT{k}"] for k in range(rows)],
                          [biases[f"WORD{k}"] for k in range(cols)])
    for rr in range(rows):
        for cc in range(cols):
            assert sol[f"b{rr}_{cc}"] == pytest.approx(Vb[rr, cc], rel=1e-9, abs=1e-12 * v)
            assert sol[f"w{rr}_{cc}"] == pytest.approx(Vw[rr, cc], rel=1e-9, abs=1e-12 * v)
    assert sol.residual <= 1e-9 * sol.scale


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 5), rho=st.floats(1e-3, 1.0), seed=st.integers(0, 2**32 - 1), v=st.floats(0.1, 3.0))
def test_transposed_array_mirrors_node_voltages(n, rho, seed, v):
    # swapping bit and word lines and reflecting every voltage about v is a symmetry
    A = np.random.default_rng(seed).uniform(1e3, 1e5, (n, n))
    R = np.sqrt(A * A.T)
    net = build(CrossbarSpec(n, n, cell=ArrayCell.PASSIVE, rho_sq=rho))
    k = n // 2
    sol = solve_dc(net, select_biases(net, k, k, v, Scheme.HALF), R.reshape(-1))
    for r in range(n):
        for c in range(n):
            assert sol[f"b{r}_{c}"] + sol[f"w{c}_{r}"] == pytest.approx(v, rel=1e-9)


# -- reads -----------------------------------------------------------------------

@pytest.mark.parametrize("R", [(1e4, 1e4, 1e4, 1e4), (1e4, 2e4, 5e4, 3e4)])
def test_passive_2x2_sneak_path(R):
    R00, R01, R10, R11 = R
    net = build(CrossbarSpec(2, 2, cell=ArrayCell.PASSIVE))
    state = ArrayState(np.array([[R00, R01], [R10, R11]]), 1e3, 1e6)
    res = read_cell(net, state, 0, 0, 0.5)
    expected = sneak_2x2(R00, R01, R10, R11)
    assert res.RS_estimate == pytest.approx(expected, rel=1e-9)
    assert res.error_pct == pytest.approx(100 * (expected - R00) / R00, rel=1e-9)


def test_ideal_array_reads_exactly():
    spec = CrossbarSpec(3, 3, device=EXP)
    state = ArrayState(np.linspace(10e3, 17e3, 9).reshape(3, 3), 10e3, 17e3)
    net = build(spec)
    for r in range(3):
        for c in range(3):
            res = read_cell(net, state, r, c, 0.5)
            assert res.error_pct == pytest.approx(0.0, abs=1e-9)


def test_read_guard_enforced():
    net = build(CrossbarSpec(1, 1, device=EXP))
    with pytest.raises(ValueError):
        read_cell(net, ArrayState.uniform(1, 1, 12e3, 10e3, 17e3), 0, 0, 0.8)


@pytest.mark.parametrize("orientation", list(Orientation))
def test_selector_read_agrees_with_series_solver(orientation):
    spec = CrossbarSpec(2, 2, fet=NFET, orientation=orientation)
    state = ArrayState.uniform(2, 2, 12e3, 10e3, 17e3)
    res = read_cell(build(spec), state, 0, 0, 0.5)
    ref = dc_solve_series(CellConfig(CellKind.ONE_T1R, (NFET,), 12e3, None, orientation,
                                     {"WORD": 0.0, "BIT": 0.5, "G": 5.0, "B": 0.0}))
    assert res.i_sense == pytest.approx(abs(ref.i), rel=1e-6)
    assert res.error_pct > 0


def test_line_resistance_inflates_reads():
    state = ArrayState.uniform(4, 4, 12e3, 10e3, 17e3)
    errs = []
    for rho in (0.0, 10.0, 40.0):
        net = build(CrossbarSpec(4, 4, device=EXP, rho_sq=rho))
        errs.append(read_cell(net, state, 3, 3).error_pct)
    assert errs[0] == pytest.approx(0.0, abs=1e-9)
    assert errs[0] < errs[1] < errs[2]


# -- programming -----------------------------------------------------------------

def test_program_matches_single_device_without_parasitics():
    spec = CrossbarSpec(2, 2, device=EXP)
    state = ArrayState.uniform(2, 2, 16e3, 10e3, 17e3)
    w = pulse_train(3, 1.2, 1e-4, 1e-4)
    res = program_cell(build(spec), state, 1, 1, w, t_s=1e-5)
    alone = run_device(EXP, DeviceState(16e3, 10e3, 17e3), w, t_s=1e-5)
    assert res.state.R[1, 1] == alone.final_R
    assert res.state.R[1, 1] != 16e3
    assert res.disturb == 0.0
    assert res.v_delivered == 1.2


def test_passive_half_select_disturb():
    spec = CrossbarSpec(2, 2, cell=ArrayCell.PASSIVE, device=EXP)
    state = ArrayState.uniform(2, 2, 16e3, 10e3, 17e3)
    w = Waveform.from_segments([Segment(1.4, 1e-4)])
    quiet = program_cell(build(spec), state, 0, 0, w, 1e-5, Scheme.HALF)
    # half-selected cells see 0.7 V, above the read guard
    assert quiet.disturb > 0
    assert quiet.delta[1, 1] == 0.0


def test_soac_violation_aborts():
    weak = NFET.with_(ratings=Ratings(v_gs_max=3.3, v_ds_max=1.0, v_gd_max=3.3, v_db_max=3.3))
    spec = CrossbarSpec(2, 2, device=EXP, fet=weak)
    state = ArrayState.uniform(2, 2, 16e3, 10e3, 17e3)
    with pytest.raises(SoacError) as err:
        program_cell(build(spec), state, 0, 0, Waveform.from_segments([Segment(3.0, 1e-5)]), 1e-6)
    assert err.value.step == 0
    assert err.value.violations


# -- IR drop ---------------------------------------------------------------------

def row_1x16():
    # bit and word segments of 10 ohm each
    return CrossbarSpec(1, 16, rho_sq=1.0, bit=LineGeometry(1.0, 10.0), word=LineGeometry(1.0, 10.0))


def test_ir_drop_along_a_row():
    rep = ir_drop_report(row_1x16(), 1000.0, 1.0, cells="all")
    v = [rep.delivered[(0, c)] for c in range(16)]
    assert all(a > b for a, b in zip(v, v[1:]))
    for c, vc in enumerate(v):
        assert vc == pytest.approx(1000.0 / (1000.0 + 10.0 * (c + 1) + 10.0), rel=1e-12)
    assert rep.worst_cell == (0, 15)
    assert rep.min_delivered == pytest.approx(1000 / 1170, rel=1e-12)


def test_ir_drop_without_line_resistance():
    spec = CrossbarSpec(4, 4, fet=NFET.with_(k_gain=1e3))
    spec0 = CrossbarSpec(4, 4)
    assert ir_drop_report(spec0, 1000.0, 1.0).min_delivered == 1.0
    assert ir_drop_report(spec, 1000.0, 1.0).min_delivered < 1.0


def test_ir_drop_monotonicity():
    base = dict(rho_sq=0.5)

    def corner(**kw):
        return ir_drop_report(CrossbarSpec(**{"rows": 4, "cols": 4, **base, **kw}), 500.0, 1.0).min_delivered

    assert corner(rows=2) > corner(rows=4) > corner(rows=8)
    assert corner(cols=2) > corner(cols=4) > corner(cols=8)
    assert corner(rho_sq=0.1) > corner(rho_sq=0.5) > corner(rho_sq=1.0)
    assert corner(bit=LineGeometry(2.0), word=LineGeometry(2.0)) > corner()


def test_ir_drop_csv():
    text = ir_drop_report(row_1x16(), 1000.0, 1.0, cells="all").to_csv()
    lines = text.splitlines()
    assert lines[0] == "row,col,v_delivered_V" and len(lines) == 17


# -- state IO --------------------------------------------------------------------

def test_state_csv_round_trip(tmp_path):
    s = ArrayState(np.array([[10e3, 1.1e4 + 1 / 3], [16999.999, 17e3]]), 10e3, 17e3)
    path = tmp_path / "s.csv"
    write_state(s, path)
    back = read_state(path, 10e3, 17e3)
    assert np.array_equal(back.R, s.R)


def test_state_csv_rejects_bad_shapes():
    with pytest.raises(ValueError):
        ArrayState.from_csv("rows,cols\n2,2\n1,2\n", 0.5, 10)
    with pytest.raises(ValueError):
        ArrayState.uniform(2, 2, 20e3, 10e3, 17e3)

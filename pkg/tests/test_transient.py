import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rramflow.model import DeviceState, analytical_step, builtin, current
from rramflow.stimulus import (
    CharacterizationPlan,
    Mode,
    Waveform,
    build_characterization,
    concat,
    pulse_train,
    read_event,
)
from rramflow.transient import (
    extract_rs_series,
    format_reads_csv,
    format_trace_csv,
    parse_reads_csv,
    parse_trace_csv,
    run_device,
)

EXP = builtin("exp-10k17k")


def state(R=16250.0):
    return DeviceState(R, 10e3, 17e3)


def first_delta(v, width):
    tr = run_device(EXP, state(), pulse_train(1, v, width), t_s=1e-6)
    return tr.final_R - 16250.0


def test_zero_waveform_keeps_state():
    w = Waveform(np.zeros(3), np.array([1e-5, 2e-5, 3e-6]))
    tr = run_device(EXP, state(), w)
    assert np.all(tr.R == 16250.0)
    assert np.all(tr.i == 0.0)
    assert tr.final_R == 16250.0


def test_time_axis_strictly_increasing_and_exact_length():
    tr = run_device(EXP, state(), pulse_train(3, 0.8, 10e-6, 5e-6))
    assert len(tr) == 40
    assert np.all(np.diff(tr.t) > 0)
    assert tr.t[0] == 0.0


def test_current_sampled_before_update():
    tr = run_device(EXP, state(), pulse_train(1, 0.8, 2e-6))
    assert tr.i[0] == current(EXP, 16250.0, 0.8)
    assert tr.R[1] == analytical_step(EXP, 16250.0, 0.8, 1e-6)
    assert tr.i[1] == current(EXP, tr.R[1], 0.8)


def test_flat_pulse_is_timestep_independent():
    w = pulse_train(1, 0.8, 100e-6)
    single = analytical_step(EXP, 16250.0, 0.8, 100e-6)
    for t_s in (1e-6, 0.5e-6, 33e-6, 1e-3):
        assert run_device(EXP, state(), w, t_s=t_s).final_R == pytest.approx(single, rel=1e-9)


def test_reads_count_and_constant_state():
    w = concat([read_event(0.5, 1e-4, 1e-6)] * 3)
    tr = run_device(EXP, state(), w)
    series = extract_rs_series(tr)
    assert len(series) == 3
    for _, rs in series:
        assert rs == pytest.approx(16250.0, rel=1e-12)


def test_no_reads_gives_empty_series():
    assert extract_rs_series(run_device(EXP, state(), pulse_train(2, 0.8, 1e-6))) == []


def test_ratio_policy_is_raw_division():
    tr = run_device(EXP, state(), read_event(0.5, 1e-4, 1e-6), rs_policy="ratio")
    (r,) = tr.reads
    assert r.RS == r.v / r.i
    assert r.RS > r.R


def test_saturating_series_is_monotone():
    plan = CharacterizationPlan(Mode.PULSE_COUNT, (0.8,), (100e-6,), n_pulses=60, t_read=1e-4)
    (s,) = build_characterization(plan)
    series = [rs for _, rs in extract_rs_series(run_device(EXP, state(), s.waveform))]
    assert all(b >= a for a, b in zip(series, series[1:]))
    assert series[-1] <= 16710.0


def test_read_transparency():
    prog = pulse_train(1, 0.8, 100e-6)
    read = read_event(0.5, 1e-4, 1e-6)
    plain = run_device(EXP, state(), prog + prog)
    with_reads = run_device(EXP, state(), concat([prog] + [read] * 10 + [prog]))
    assert with_reads.final_R == plain.final_R
    assert with_reads.R[100 + 10 * 100] == plain.R[100]


def test_width_and_amplitude_orderings():
    widths = [first_delta(0.8, w) for w in (1e-6, 10e-6, 100e-6)]
    assert 0 < widths[0] < widths[1] < widths[2]
    amps = [first_delta(v, 100e-6) for v in (0.6, 0.7, 0.8)]
    assert 0 < amps[0] < amps[1] < amps[2]
    assert abs(first_delta(-0.8, 100e-6)) > abs(first_delta(0.8, 100e-6))


def test_final_state_respects_absolute_bounds():
    tight = DeviceState(16250.0, 16000.0, 16300.0)
    tr = run_device(EXP, tight, pulse_train(50, 0.8, 100e-6))
    assert tr.final_R == 16300.0


def test_decimation_keeps_every_nth_row():
    w = pulse_train(1, 0.8, 10e-6)
    full = run_device(EXP, state(), w)
    dec = run_device(EXP, state(), w, decimate=3)
    assert np.array_equal(dec.R, full.R[::3])
    assert dec.final_R == full.final_R


def test_csv_roundtrip():
    w = concat([read_event(0.5, 5e-6, 1e-6), pulse_train(2, 0.8, 3e-6), read_event(0.5, 5e-6, 1e-6)])
    tr = run_device(EXP, state(), w)
    rows = parse_trace_csv(format_trace_csv(tr))
    assert np.array_equal(rows, tr.rows)
    series = extract_rs_series(tr)
    assert parse_reads_csv(format_reads_csv(series)) == series
    assert format_trace_csv(tr).splitlines()[0] == "t_s,v_V,i_A,R_ohm"


def test_bad_arguments():
    with pytest.raises(ValueError):
        run_device(EXP, state(), pulse_train(1, 0.8, 1e-6), decimate=0)
    with pytest.raises(ValueError):
        run_device(EXP, state(), pulse_train(1, 0.8, 1e-6), rs_policy="magic")


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(1, 5),
    width=st.sampled_from([1e-6, 2e-6, 5e-6, 10e-6]),
    v=st.floats(0.55, 1.0),
    sign=st.sampled_from([1.0, -1.0]),
)
def test_halving_timestep_is_stable(n, width, v, sign):
    w = pulse_train(n, sign * v, width, 1e-6)
    a = run_device(EXP, state(), w, t_s=1e-6).final_R
    b = run_device(EXP, state(), w, t_s=0.5e-6).final_R
    assert b == pytest.approx(a, rel=1e-9)

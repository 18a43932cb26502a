import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rramflow.designflow import (
    DEVICES,
    CheckPoint,
    DesignConfig,
    GateConfig,
    RangeSpec,
    corner_enumerate,
    logic_checks,
    nand_output,
    nand_surface,
    required_range_union,
    run_workflow,
    uncertainty_check,
    yield_bound,
)
from rramflow.primitives import MosfetParams, mosfet_current

PMOS = MosfetParams("pmos", 0.7, 1e-3)
NMOS = MosfetParams("nmos", 0.7, 1e-3)
MID = {"R_A": 5250.0, "R_B": 5250.0, "R_C": 5250.0}
GATE = GateConfig(MID, PMOS, NMOS)
# mid-transfer band so that the device ranges matter
CHECKS = tuple(logic_checks(5.0)) + (CheckPoint(3.5, 3.5, 3.5, 4.1),)
NOMINAL = {d: (4500.0, 6000.0) for d in DEVICES}


def bisect(f, lo, hi, n=200):
    """Root of an increasing function on [lo, hi]."""
    for _ in range(n):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def pullup_oracle(R, vdd=5.0, r_load=100e3):
    """Output with both inputs low: two pMOS + resistor branches against the load."""

    def branch(v_out):
        # internal node u where the pMOS current equals the resistor current
        u = bisect(lambda u: (u - v_out) / R - abs(mosfet_current(PMOS, 0.0, vdd, u)), v_out, vdd)
        return (u - v_out) / R

    return bisect(lambda v: v / r_load - 2 * branch(v), 0.0, vdd)


# -- surface ---------------------------------------------------------------------

def test_pullup_matches_scalar_oracle():
    expected = pullup_oracle(5250.0)
    assert nand_output(GATE, 0.0, 0.0) == pytest.approx(expected, rel=1e-6)


def test_truth_table_separation():
    out = nand_surface(GATE, [0.0, 5.0], [0.0, 5.0])
    assert min(out[0, 0], out[0, 1], out[1, 0]) >= 0.8 * 5.0
    assert out[1, 1] <= 0.2 * 5.0
    assert out[0, 1] == pytest.approx(out[1, 0], rel=1e-9)


def test_surface_monotone_in_each_input():
    grid = np.linspace(0.0, 5.0, 11)
    out = nand_surface(GATE, grid, grid)
    assert not np.any(np.isnan(out))
    assert np.all(np.diff(out, axis=0) <= 1e-9)
    assert np.all(np.diff(out, axis=1) <= 1e-9)


def test_surface_rejects_inputs_outside_supply():
    with pytest.raises(ValueError):
        nand_surface(GATE, [6.0], [0.0])


def test_pulldown_resistor_raises_output():
    lo = nand_output(GATE.with_states(R_C=4500.0), 4.0, 4.0)
    hi = nand_output(GATE.with_states(R_C=6000.0), 4.0, 4.0)
    assert lo < hi


# -- corners and unions ----------------------------------------------------------

def test_corner_counts_and_order():
    assert corner_enumerate(["a"], {"a": (1, 2)}) == [{"a": 1}, {"a": 2}]
    corners = corner_enumerate(["a", "b", "c"], {"a": (1, 2), "b": (3, 4), "c": (5, 6)})
    assert len(corners) == 8
    assert corners[0] == {"a": 1, "b": 3, "c": 5} and corners[-1] == {"a": 2, "b": 4, "c": 6}
    assert corners == corner_enumerate(["a", "b", "c"], {"a": (1, 2), "b": (3, 4), "c": (5, 6)})
    assert len({tuple(c.values()) for c in corners}) == 8


def test_corner_limits():
    names = [f"d{k}" for k in range(21)]
    with pytest.raises(ValueError):
        corner_enumerate(names, {n: (0, 1) for n in names})
    with pytest.raises(ValueError):
        corner_enumerate(["a"], {"a": (2, 1)})


intervals = st.tuples(st.floats(0, 1e5), st.floats(0, 1e5)).map(lambda t: (min(t), max(t)))


@settings(max_examples=50)
@given(st.lists(intervals, min_size=1, max_size=8), st.randoms())
def test_union_is_hull_and_order_independent(ivs, rnd):
    demands = [{"R": iv} for iv in ivs]
    hull = required_range_union(demands)["R"]
    assert hull == (min(a for a, _ in ivs), max(b for _, b in ivs))
    shuffled = demands[:]
    rnd.shuffle(shuffled)
    assert required_range_union(shuffled)["R"] == hull
    assert required_range_union([{"R": hull}, {"R": hull}])["R"] == hull


def test_union_propagates_infeasible():
    out = required_range_union([{"R": (1, 2), "S": (1, 2)}, {"R": None, "S": (0, 3)}])
    assert out == {"R": None, "S": (0, 3)}


# -- uncertainty -----------------------------------------------------------------

def test_uncertainty_examples():
    ok = uncertainty_check(RangeSpec((2e3, 8e3), (1e3, 10e3), 0.5e3))
    assert ok.passed
    assert (ok.margin_low, ok.margin_high) == (500.0, 1500.0)
    assert ok.yield_bound == pytest.approx(0.81)
    bad = uncertainty_check(RangeSpec((2e3, 8e3), (1e3, 10e3), 1.5e3))
    assert not bad.passed and bad.margin_low == -500.0


def test_degenerate_window_fails():
    r = uncertainty_check(RangeSpec((5e3, 5e3), (4e3, 6e3), 1.5e3))
    assert not r.passed and "degenerate" in r.reason


def test_asymmetric_uncertainty():
    r = uncertainty_check(RangeSpec((2e3, 8e3), (1e3, 10e3), 0.5e3, q_high=2.5e3))
    assert not r.passed and r.margin_high == -500.0


def test_yield_bound():
    assert yield_bound(0.9) == pytest.approx(0.81)
    assert yield_bound(0.9, 3) == pytest.approx(0.81 ** 3)
    with pytest.raises(ValueError):
        yield_bound(0.0)


@settings(max_examples=100)
@given(a=st.floats(0, 1e4), w=st.floats(0, 1e4), x=st.floats(0, 1e4), y=st.floats(1e4, 3e4),
       q1=st.floats(0, 5e3), q2=st.floats(0, 5e3), widen=st.floats(0, 5e3))
def test_uncertainty_monotonicity(a, w, x, y, q1, q2, widen):
    desired = (a, a + w)
    small, large = sorted((q1, q2))
    if uncertainty_check(RangeSpec(desired, (x, y), large)).passed:
        assert uncertainty_check(RangeSpec(desired, (x, y), small)).passed
    if uncertainty_check(RangeSpec(desired, (x, y), small)).passed:
        assert uncertainty_check(RangeSpec(desired, (x - widen, y + widen), small)).passed


# -- workflow --------------------------------------------------------------------

def design(q, proposed, max_iters=3, checks=CHECKS):
    return DesignConfig(GATE, {d: proposed for d in DEVICES}, NOMINAL, q,
                        checks=checks, sweep_points=5, max_iters=max_iters)


@pytest.fixture(scope="module")
def passing():
    return run_workflow(design(100.0, (4800.0, 5700.0)))


def test_workflow_passes_first_iteration(passing):
    assert passing.passed and passing.stage == "done" and passing.iterations == 1
    for d in passing.devices:
        assert d.demanded == (4800.0, 5700.0)
        assert (d.result.margin_low, d.result.margin_high) == (200.0, 200.0)
    csv = passing.margins_csv().splitlines()
    assert csv[0].startswith("device,A_ohm,B_ohm,X_ohm,Y_ohm,q_ohm")
    assert len(csv) == 4 and all(line.endswith(",1") for line in csv[1:])


def test_workflow_parallel_matches_serial(passing):
    assert run_workflow(design(100.0, (4800.0, 5700.0)), jobs=2).margins_csv() == passing.margins_csv()


def test_workflow_shrinks_failing_corners():
    rep = run_workflow(design(100.0, (4500.0, 6000.0)))
    assert rep.passed and rep.iterations == 2
    assert rep.history[0] == (1, "corners")
    assert rep.devices[0].proposed == (4925.0, 5575.0)


def test_workflow_reports_uncertainty_failure():
    rep = run_workflow(design(1000.0, (4800.0, 5700.0), max_iters=2))
    assert not rep.passed and rep.stage == "uncertainty" and rep.iterations == 2
    assert all("degenerate" in d.result.reason for d in rep.devices)
    assert "FAIL" in rep.to_text()


def test_workflow_stops_when_infeasible():
    impossible = tuple(logic_checks(5.0)) + (CheckPoint(3.5, 3.5, 4.9, 5.0),)
    rep = run_workflow(design(100.0, (4800.0, 5700.0), max_iters=2, checks=impossible))
    assert not rep.passed and rep.stage == "nominal" and rep.iterations == 2
    assert rep.failing_corners


def test_design_config_validation():
    with pytest.raises(ValueError):
        DesignConfig(GATE, {"R_A": (1, 2)}, NOMINAL, 10.0)
    with pytest.raises(ValueError):
        RangeSpec((2, 1), (0, 3), 0.1)
    with pytest.raises(ValueError):
        GateConfig({"R_A": 1.0, "R_B": 1.0}, PMOS, NMOS)

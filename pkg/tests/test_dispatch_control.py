import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tclflex.battery_model import sufficient_params
from tclflex.dispatch_control import (
    _greedy_count,
    dispatch_step,
    feasibility_screen,
    priority_sort,
    ramp_bounds,
    ramp_violations,
    run_dispatch,
    predicted_available_powers,
    availability_series,
    tracking_residual,
)
from tclflex.fleet_sim import AvailabilityLedger, Fleet, HeterogeneitySpec, Uniform, build_fleet
from tclflex.signals import RegulationTrace, sinusoid_signal
from tclflex.tcl_model import OFF, ON, REFERENCE_AC


def _fleet(theta, q, lockout=None, tau=10):
    n = len(theta)
    return Fleet((REFERENCE_AC,) * n, theta, q, lockout if lockout is not None else [0] * n, tau=tau)


def test_priority_hotter_first():
    p = REFERENCE_AC
    fl = _fleet([p.theta_low, p.theta_high - 1e-6], [OFF, OFF])
    on_stack, off_stack = priority_sort(fl)
    assert off_stack.tolist() == [1, 0] and on_stack.size == 0


def test_priority_on_coolest_first_and_ties():
    p = REFERENCE_AC
    fl = _fleet([22.6, 22.4, 22.4, 22.5], [ON, ON, ON, OFF])
    on_stack, off_stack = priority_sort(fl)
    assert on_stack.tolist() == [1, 2, 0] and off_stack.tolist() == [3]


def test_priority_locked_excluded():
    fl = _fleet([22.5, 22.5], [ON, OFF], lockout=[3, 1])
    on_stack, off_stack = priority_sort(fl)
    assert on_stack.size == 0 and off_stack.size == 0


def test_greedy_rule():
    # residual +3 with one ON unit of 5.6: switching leaves |3 - 5.6| = 2.6 < 3
    assert _greedy_count(3.0, np.array([-5.6])) == 1
    assert _greedy_count(2.0, np.array([-5.6])) == 0
    assert _greedy_count(-12.0, np.array([5.6, 5.6, 5.6])) == 2


def test_dispatch_step_examples():
    p = REFERENCE_AC
    fl = _fleet([22.5, 22.6], [ON, OFF])
    on, off = dispatch_step(fl, r_t=0.0, delta=0.0)
    assert on.size == off.size == 0
    on, off = dispatch_step(fl, r_t=p.P_m, delta=0.0)
    assert on.tolist() == [1] and off.size == 0
    on, off = dispatch_step(fl, r_t=-3.0, delta=0.0)
    assert off.tolist() == [0] and on.size == 0  # residual becomes -2.6 relative to r


def test_availability_trivial():
    s = availability_series(np.zeros(5), np.zeros(5), np.full(5, 2.0), tau=2, p_tot=100.0, p_ave=40.0)
    # r(0) = 2 counts as a step of +2 at t=0, inside the window for t <= tau
    assert np.allclose(s.pred_on_avail[3:], 42.0)
    assert np.allclose(s.pred_off_avail, 58.0)
    assert np.isnan(s.mu_plus[0]) and np.isnan(s.mu_minus[0])


def test_availability_single_step():
    lim_up = np.array([0.0, 5.6, 0.0])
    lim_down = np.zeros(3)
    s = availability_series(lim_down, lim_up, np.zeros(3), tau=5, p_tot=100.0, p_ave=40.0)
    assert s.D[1] == pytest.approx(-5.6)
    assert s.pred_off_avail[1] == pytest.approx(60.0 - 5.6)
    assert s.pred_on_avail[1] == pytest.approx(40.0 - 5.6)


def test_availability_window_length():
    lim_down = np.zeros(10)
    lim_down[2] = 3.0
    s = availability_series(lim_down, np.zeros(10), np.zeros(10), tau=3, p_tot=50.0, p_ave=20.0)
    # the flip at 2 is counted through 2 + tau = 5 and gone at 6
    counted = s.pred_off_avail < 30.0
    assert counted.tolist() == [False, False, True, True, True, True, False, False, False, False]


def test_availability_saturation_flag():
    s = availability_series(np.zeros(3), np.zeros(3), np.array([0.0, -50.0, -50.0]), tau=1, p_tot=100.0, p_ave=40.0)
    assert s.saturated[1] and s.pred_on_avail[1] == 0.0


def test_ramp_bounds_example():
    cols = {name: np.zeros(2) for name in ("P_lim_on_to_off", "P_lim_off_to_on", "pred_off_avail", "pred_on_avail")}
    cols["pred_off_avail"][0] = 11.2
    cols["pred_on_avail"][0] = 7.0
    cols["P_lim_off_to_on"][1] = 5.6
    mu_p, mu_m = ramp_bounds(AvailabilityLedger(cols), 1)
    assert mu_p == pytest.approx(5.6) and mu_m == pytest.approx(1.4)
    with pytest.raises(ValueError):
        ramp_bounds(AvailabilityLedger(cols), 0)


@pytest.fixture(scope="module")
def tracked():
    spec = HeterogeneitySpec(C=Uniform(1.5, 2.5))
    fleet = build_fleet(300, spec, tau=30, seed=4)
    phi, _ = sufficient_params(fleet, 0.25)
    signal = sinusoid_signal(900, 0.05 * phi.n_plus, 300.0, seed=1)
    return fleet, signal, run_dispatch(fleet, signal)


def test_tracking_soundness(tracked):
    fleet, signal, trace = tracked
    res = tracking_residual(trace)
    assert np.max(np.abs(res[fleet.tau + 1 :])) < fleet.arrays.P_m.min()


def test_no_short_cycling(tracked):
    fleet, _, trace = tracked
    assert trace.incidents == 0
    assert trace.short_cycles(fleet.tau) == 0
    assert trace.min_switch_gap() > fleet.tau


def test_ledger_invariants(tracked):
    fleet, _, trace = tracked
    L = trace.ledger
    assert np.allclose(L.P_on + L.P_off, fleet.arrays.P_m.sum())
    assert np.allclose(L.P_on_avail + L.P_on_unavail, L.P_on)
    for name in ("P_on_avail", "P_on_unavail", "P_off_avail", "P_off_unavail", "P_lim_on_to_off", "P_lim_off_to_on"):
        assert np.all(L.columns[name] >= 0)
    assert np.all(L.mu_plus[1:] >= 0) and np.all(L.mu_minus[1:] >= 0)


def test_available_powers_single_sample(tracked):
    fleet, signal, trace = tracked
    p_tot, p_ave = fleet.arrays.P_m.sum(), fleet.arrays.P_o.sum()
    off, on = predicted_available_powers(trace.ledger, signal.values, 500, fleet.tau, p_tot, p_ave)
    assert off == trace.ledger.pred_off_avail[500] and on == trace.ledger.pred_on_avail[500]


def test_sample_period_mismatch(tracked):
    fleet, _, _ = tracked
    with pytest.raises(ValueError):
        run_dispatch(fleet, RegulationTrace(np.zeros(10), 2.0))


def test_feasibility_pass_and_fail(tracked):
    fleet, signal, trace = tracked
    phi, _ = sufficient_params(fleet, 0.25)
    ok = feasibility_screen(fleet, phi, signal, trace)
    assert ok.passed and ok.to_dict() == {"battery": "pass", "ramp": "pass"}
    # units just switched ON are locked, so an immediate reversal exceeds mu_minus
    r = np.zeros(200)
    r[100:110] = 0.5 * phi.n_plus
    r[110:] = -0.3 * phi.n_plus
    bad = feasibility_screen(fleet, phi, RegulationTrace(r, 1.0))
    assert bad.battery.ok and not bad.passed
    info = bad.to_dict()["ramp"]
    assert info["t"] == 110.0 and info["direction"] == "down" and info["mu"] < -info["dr"]


def test_ramp_violation_indices(tracked):
    fleet, signal, trace = tracked
    assert ramp_violations(trace).size == 0


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), tau=st.integers(0, 40))
def test_property_never_short_cycles(seed, tau):
    fleet = build_fleet(60, HeterogeneitySpec(C=Uniform(1.5, 2.5)), tau=tau, seed=seed)
    rng = np.random.default_rng(seed)
    signal = RegulationTrace(np.repeat(rng.uniform(-30, 30, 10), 40), 1.0)
    trace = run_dispatch(fleet, signal)
    commanded = ~trace.switch_forced
    # commanded switches of one unit are always more than tau samples apart from its previous switch
    order = np.lexsort((trace.switch_t, trace.switch_unit))
    u, t, c = trace.switch_unit[order], trace.switch_t[order], commanded[order]
    same = u[1:] == u[:-1]
    assert np.all(np.diff(t)[same & c[1:]] > tau)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tclflex.errors import InfeasibleCycle, ModelDivergence, PowerBoundViolation, SetpointUnreachable
from tclflex.tcl_model import (
    OFF,
    ON,
    REFERENCE_AC,
    TclParameters,
    TclState,
    average_power,
    cycle_times,
    nominal_power,
    step_continuous,
    step_deadband,
)

DT = 0.01


def test_derived_coefficients(reference_ac):
    assert reference_ac.a == 1 / (reference_ac.R * reference_ac.C) == 0.25
    assert reference_ac.b == reference_ac.eta / reference_ac.C == 1.25


@pytest.mark.parametrize("field", ["C", "R", "P_m", "eta", "delta"])
def test_rejects_non_positive(field):
    with pytest.raises(ValueError):
        REFERENCE_AC.with_(**{field: 0.0})


def test_off_drift_heats(reference_ac):
    s = step_deadband(reference_ac, TclState(reference_ac.theta_r, OFF), DT)
    assert s.theta > reference_ac.theta_r
    assert s.q == OFF


def test_flip_at_upper_edge(reference_ac):
    s = step_deadband(reference_ac, TclState(reference_ac.theta_high, OFF, 0), DT, tau=60)
    assert s.q == ON
    assert s.lockout == 60
    assert s.theta == reference_ac.theta_high


def test_flip_at_lower_edge_clamps(reference_ac):
    s = step_deadband(reference_ac, TclState(reference_ac.theta_low + 1e-6, ON, 0), DT, tau=7)
    assert (s.q, s.lockout, s.theta) == (OFF, 7, reference_ac.theta_low)


def test_on_time_from_simulation(reference_ac):
    # hold ON from the top edge until the bottom edge, fine steps
    dt = 1e-5
    state = TclState(reference_ac.theta_high, ON)
    steps = 0
    while state.q == ON:
        state = step_deadband(reference_ac, state, dt)
        steps += 1
    assert steps * dt == pytest.approx(0.13516, abs=2e-5)


def test_step_deadband_matches_closed_form_any_subdivision(reference_ac):
    # exact integrator: one step of 0.05 h equals 50 steps of 0.001 h
    one = step_deadband(reference_ac, TclState(reference_ac.theta_r, OFF), 0.05).theta
    many = TclState(reference_ac.theta_r, OFF)
    for _ in range(50):
        many = step_deadband(reference_ac, many, 0.001)
    exact = reference_ac.theta_a + (reference_ac.theta_r - reference_ac.theta_a) * math.exp(-reference_ac.a * 0.05)
    assert one == pytest.approx(exact, rel=1e-12)
    assert many.theta == pytest.approx(exact, rel=1e-12)


def test_noise_shifts_drift(reference_ac):
    hot = step_deadband(reference_ac, TclState(reference_ac.theta_r, OFF), DT, noise=5.0).theta
    calm = step_deadband(reference_ac, TclState(reference_ac.theta_r, OFF), DT).theta
    assert hot > calm


def test_divergence_raises(reference_ac):
    with pytest.raises(ModelDivergence):
        step_deadband(reference_ac, TclState(math.inf, OFF), DT)


def test_step_continuous_nominal_is_equilibrium(reference_ac):
    p_o = nominal_power(reference_ac)
    assert step_continuous(reference_ac, reference_ac.theta_r, p_o, 0.7) == pytest.approx(reference_ac.theta_r, abs=1e-12)


def test_step_continuous_ambient_limit(reference_ac):
    assert step_continuous(reference_ac, reference_ac.theta_r, 0.0, 1e4) == pytest.approx(reference_ac.theta_a)


def test_step_continuous_full_power(reference_ac):
    rpe = reference_ac.R * reference_ac.P_m * reference_ac.eta
    expected = reference_ac.theta_a - rpe + (reference_ac.theta_r - reference_ac.theta_a + rpe) * math.exp(-reference_ac.a * 0.1)
    assert step_continuous(reference_ac, reference_ac.theta_r, reference_ac.P_m, 0.1) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("p", [-0.1, 5.7])
def test_step_continuous_power_bounds(reference_ac, p):
    with pytest.raises(PowerBoundViolation):
        step_continuous(reference_ac, reference_ac.theta_r, p, 0.1)


def test_cycle_times_reference_unit(reference_ac):
    t_on, t_off = cycle_times(reference_ac)
    # log formulas by hand: RC ln(18.8125/18.1875), RC ln(9.8125/9.1875)
    assert t_on == pytest.approx(4 * math.log(18.8125 / 18.1875), rel=1e-14)
    assert t_off == pytest.approx(4 * math.log(9.8125 / 9.1875), rel=1e-14)
    assert t_on == pytest.approx(0.13516, rel=1e-4)
    assert t_off == pytest.approx(0.26325, rel=1e-4)


def test_cycle_times_collapse_with_band(reference_ac):
    t_on, t_off = cycle_times(reference_ac.with_(delta=1e-9))
    assert t_on < 1e-8 and t_off < 1e-8


def test_cycle_times_linear_in_rc(reference_ac):
    # doubling C doubles RC and leaves the log arguments unchanged
    base = cycle_times(reference_ac)
    scaled = cycle_times(reference_ac.with_(C=2 * reference_ac.C))
    assert scaled[0] == pytest.approx(2 * base[0]) and scaled[1] == pytest.approx(2 * base[1])


def test_cycle_times_ill_posed(reference_ac):
    with pytest.raises(InfeasibleCycle):
        cycle_times(reference_ac.with_(theta_a=22.6))
    with pytest.raises(InfeasibleCycle):
        cycle_times(reference_ac.with_(P_m=1.0))


def test_average_power(reference_ac):
    p_a = average_power(reference_ac)
    assert p_a == pytest.approx(1.8998, rel=1e-4)
    assert 0 < p_a < reference_ac.P_m
    assert p_a == pytest.approx(nominal_power(reference_ac), rel=0.02)


def test_nominal_power(reference_ac):
    assert nominal_power(reference_ac) == pytest.approx((32 - 22.5) / (2.5 * 2)) == pytest.approx(1.9)
    assert nominal_power(reference_ac.with_(theta_a=reference_ac.theta_r), strict=False) == 0.0
    with pytest.raises(SetpointUnreachable):
        nominal_power(reference_ac.with_(theta_a=reference_ac.theta_r))
    edge = reference_ac.with_(theta_a=reference_ac.theta_r + reference_ac.eta * reference_ac.R * reference_ac.P_m)
    assert nominal_power(edge, strict=False) == pytest.approx(reference_ac.P_m)
    with pytest.raises(SetpointUnreachable):
        nominal_power(edge)


def _simulate_cycle(p, dt):
    """Start ON at the top edge; return (time ON, time OFF, ON-fraction) of one cycle."""
    state = TclState(p.theta_high, ON)
    t = 0.0
    switches = []
    steps_on = steps = 0
    while len(switches) < 2:
        q = state.q
        state = step_deadband(p, state, dt)
        t += dt
        steps += 1
        steps_on += q
        if state.q != q:
            switches.append(t)
    return switches[0], switches[1] - switches[0], steps_on / steps


def test_cycle_consistency(reference_ac):
    dt = 1.0 / 3600
    t_on, t_off = cycle_times(reference_ac)
    sim_on, sim_off, duty = _simulate_cycle(reference_ac, dt)
    assert abs(sim_on - t_on) <= dt and abs(sim_off - t_off) <= dt
    assert duty * reference_ac.P_m == pytest.approx(average_power(reference_ac), rel=2 * dt / (t_on + t_off))


@settings(max_examples=40, deadline=None)
@given(
    C=st.floats(1.0, 3.0),
    R=st.floats(1.5, 2.5),
    delta=st.floats(0.1, 1.0),
    theta_a=st.floats(26.0, 38.0),
)
def test_nominal_is_fixed_point_of_continuous_model(C, R, delta, theta_a):
    p = REFERENCE_AC.with_(C=C, R=R, delta=delta, theta_a=theta_a)
    p_o = nominal_power(p, strict=False)
    if not 0 <= p_o <= p.P_m:
        return
    assert step_continuous(p, p.theta_r, p_o, 0.3) == pytest.approx(p.theta_r, abs=1e-10)
    # any other power moves the temperature
    other = min(p.P_m, p_o + 0.5)
    assert step_continuous(p, p.theta_r, other, 0.3) < p.theta_r

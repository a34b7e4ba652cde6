import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tclflex.errors import ContractViolation, SpecInfeasible
from tclflex.fleet_sim import (
    TRACE_CSV_COLUMNS,
    Fixed,
    Fleet,
    Grid,
    HeterogeneitySpec,
    Uniform,
    aggregate_power,
    baseline_power,
    build_fleet,
    parse_distribution,
    read_trace_csv,
    simulate,
    write_trace_csv,
)
from tclflex.tcl_model import OFF, ON, REFERENCE_AC, average_power


@pytest.mark.parametrize(
    "text, expected",
    [
        ("uniform(1.5, 2.5)", Uniform(1.5, 2.5)),
        ("Grid(1,3)", Grid(1.0, 3.0)),
        ("fixed(2)", Fixed(2.0)),
        ("0.3125", Fixed(0.3125)),
        (4, Fixed(4.0)),
    ],
)
def test_parse_distribution(text, expected):
    assert parse_distribution(text) == expected


@pytest.mark.parametrize("text", ["normal(0, 1)", "uniform(1)", "fixed(1, 2)", "uniform(3, 1)", "abc"])
def test_parse_distribution_rejects(text):
    with pytest.raises(ValueError):
        parse_distribution(text)


def test_grid_is_affine():
    g = Grid(1.0, 3.0).sample(5, None)
    assert g.tolist() == [1.0, 1.5, 2.0, 2.5, 3.0]


def test_build_fleet_is_seeded(hetero_spec):
    a = build_fleet(50, hetero_spec, seed=3)
    b = build_fleet(50, hetero_spec, seed=3)
    c = build_fleet(50, hetero_spec, seed=4)
    assert a.params == b.params and np.array_equal(a.theta, b.theta) and np.array_equal(a.q, b.q)
    assert a.params != c.params


def test_build_fleet_states_inside_band(hetero_fleet):
    ar = hetero_fleet.arrays
    assert np.all(hetero_fleet.theta >= ar.theta_low - 1e-12)
    assert np.all(hetero_fleet.theta <= ar.theta_high + 1e-12)
    assert np.all(hetero_fleet.lockout == 0)
    assert set(np.unique(hetero_fleet.q)) <= {ON, OFF}


def test_build_fleet_infeasible_unit_named():
    spec = HeterogeneitySpec(theta_r=Uniform(22.0, 40.0))
    with pytest.raises(SpecInfeasible, match="unit"):
        build_fleet(100, spec, seed=0)


def test_fleet_requires_common_ambient():
    p = [REFERENCE_AC, REFERENCE_AC.with_(theta_a=30.0)]
    with pytest.raises(ValueError):
        Fleet.from_params(p)


def test_baseline_is_sum_of_averages(hetero_fleet):
    assert baseline_power(hetero_fleet) == pytest.approx(sum(average_power(p) for p in hetero_fleet.params), rel=1e-12)


def test_uncontrolled_run_has_no_incidents_with_tau_zero():
    fleet = build_fleet(30, seed=2, tau=0)
    trace = simulate(fleet, 2000)
    assert trace.incidents == 0
    assert trace.switch_forced.all()


def test_simulate_does_not_mutate_input(hetero_fleet):
    theta0 = hetero_fleet.theta.copy()
    simulate(hetero_fleet, 50)
    assert np.array_equal(theta0, hetero_fleet.theta)


def test_ledger_conservation(hetero_fleet):
    trace = simulate(hetero_fleet, 600)
    L = trace.ledger
    p_tot = hetero_fleet.arrays.P_m.sum()
    assert np.allclose(L.P_on + L.P_off, p_tot)
    assert np.allclose(L.P_on_avail + L.P_on_unavail, L.P_on)
    assert np.allclose(L.P_off_avail + L.P_off_unavail, L.P_off)
    assert np.allclose(L.delta, L.P_agg - L.n)
    assert np.allclose(L.P_agg, L.P_agg_pre)  # no controller


def test_ledger_matches_recorded_states(hetero_fleet):
    trace = simulate(hetero_fleet, 200, record_states=True)
    pm = hetero_fleet.arrays.P_m
    assert np.allclose(trace.q @ pm, trace.ledger.P_agg)
    ar = hetero_fleet.arrays
    assert np.all(trace.theta >= ar.theta_low - 1e-9) and np.all(trace.theta <= ar.theta_high + 1e-9)


def test_thermostat_flip_lockout_accounting():
    # one unit just below the top edge: it flips at t=1 and stays unavailable through t=1+tau
    p = REFERENCE_AC
    fleet = Fleet((p,), [p.theta_high - 1e-7], [OFF], [0], tau=5)
    L = simulate(fleet, 10).ledger
    assert L.P_lim_off_to_on[1] == p.P_m and L.P_lim_off_to_on.sum() == p.P_m
    unavail = L.P_on_unavail > 0
    assert unavail.tolist() == [False, True, True, True, True, True, True, False, False, False]


class _Bad:
    def __init__(self, on=(), off=()):
        self.on, self.off = on, off

    def __call__(self, t, fleet, delta):
        return np.array(self.on, dtype=int), np.array(self.off, dtype=int)


@pytest.mark.parametrize(
    "controller",
    [_Bad(on=[999]), _Bad(on=[0, 0]), _Bad(off=[0])],
)
def test_contract_violations(controller):
    p = REFERENCE_AC
    fleet = Fleet((p, p), [p.theta_r, p.theta_r], [OFF, OFF], [0, 0])
    with pytest.raises(ContractViolation):
        simulate(fleet, 3, controller)


def test_contract_violation_on_locked_unit():
    p = REFERENCE_AC
    fleet = Fleet((p,), [p.theta_r], [OFF], [3])
    with pytest.raises(ContractViolation, match="locked"):
        simulate(fleet, 1, _Bad(on=[0]))


def test_contract_violation_band():
    p = REFERENCE_AC
    # turning OFF near the bottom edge is fine, turning ON at it is not
    simulate(Fleet((p,), [p.theta_low + 1e-3], [ON], [0]), 1, _Bad(off=[0]))
    with pytest.raises(ContractViolation):
        simulate(Fleet((p,), [p.theta_low], [OFF], [0], tau=0), 1, _Bad(on=[0]))


def test_trace_csv_roundtrip(tmp_path, hetero_fleet):
    from tclflex.dispatch_control import run_dispatch
    from tclflex.signals import sinusoid_signal

    trace = run_dispatch(hetero_fleet, sinusoid_signal(120, 20.0, 60.0))
    path = tmp_path / "trace.csv"
    write_trace_csv(trace.ledger, path)
    back = read_trace_csv(path)
    for name, key in TRACE_CSV_COLUMNS:
        np.testing.assert_array_equal(back[name], trace.ledger.columns[key])


def test_aggregate_power():
    p = REFERENCE_AC
    fleet = Fleet((p, p, p), [p.theta_r] * 3, [ON, OFF, ON], [0, 0, 0])
    assert aggregate_power(fleet) == 2 * p.P_m


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 40), tau=st.integers(0, 90))
def test_property_power_partition(seed, n, tau):
    fleet = build_fleet(n, HeterogeneitySpec(C=Uniform(1.5, 2.5)), tau=tau, seed=seed)
    trace = simulate(fleet, 120, noise_std=0.5)
    L = trace.ledger
    tot = fleet.arrays.P_m.sum()
    assert np.allclose(L.P_on + L.P_off, tot)
    assert np.all(L.P_agg >= 0) and np.all(L.P_agg <= tot + 1e-9)

"""Priority-stack dispatch with a no-short-cycling lockout.

At each sample the controller compares the requested deviation r(t) with
the fleet's deviation from baseline (after local thermostat flips) and
switches available units in priority order: hottest OFF units turn ON
first, coolest ON units turn OFF first.  Units switched within the last
tau samples are unavailable.

The availability bookkeeping predicts, from the regulation signal and
the thermostat-driven switching alone, how much power is switchable and
hence how fast r(t) may change.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .battery_model import BatteryParams, MembershipReport, is_member
from .fleet_sim import AvailabilityLedger, Fleet, SimulationTrace, baseline_power, simulate
from .signals import RegulationTrace
from .tcl_model import OFF, ON

SLACK = 1e-9


def normalized_distance(fleet: Fleet) -> np.ndarray:
    """(theta - theta_low) / (theta_high - theta_low): 0 at the bottom edge, 1 at the top."""
    ar = fleet.arrays
    return (fleet.theta - ar.theta_low) / (ar.theta_high - ar.theta_low)


def priority_sort(fleet: Fleet) -> tuple[np.ndarray, np.ndarray]:
    """(on_stack, off_stack) of available units, highest priority first.

    on_stack holds ON units coolest first (next to turn OFF); off_stack
    holds OFF units hottest first (next to turn ON).  Ties go to the lower
    unit index.
    """
    z = normalized_distance(fleet)
    idx = np.arange(len(fleet))
    free = fleet.lockout == 0
    on = idx[free & (fleet.q == ON)]
    off = idx[free & (fleet.q == OFF)]
    on_stack = on[np.lexsort((on, z[on]))]
    off_stack = off[np.lexsort((off, -z[off]))]
    return on_stack, off_stack


def _greedy_count(residual: float, powers: np.ndarray) -> int:
    """How many leading units to switch so each switch strictly shrinks |residual|.

    ``powers`` are signed contributions to the residual.
    """
    if powers.size == 0:
        return 0
    path = residual + np.concatenate(([0.0], np.cumsum(powers)))
    improving = np.abs(path[1:]) < np.abs(path[:-1])
    if improving.all():
        return int(powers.size)
    return int(np.argmin(improving))


def dispatch_step(fleet: Fleet, r_t: float, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Switch commands (turn_on, turn_off) bringing ``delta`` as close to ``r_t`` as greedy allows."""
    residual = delta - r_t
    empty = np.empty(0, dtype=np.int64)
    if residual == 0:
        return empty, empty
    on_stack, off_stack = priority_sort(fleet)
    pm = fleet.arrays.P_m
    if residual < 0:
        k = _greedy_count(residual, pm[off_stack])
        return off_stack[:k], empty
    k = _greedy_count(residual, -pm[on_stack])
    return empty, on_stack[:k]


class PriorityStackController:
    """Simulation hook tracking a regulation trace sample by sample."""

    def __init__(self, regulation: RegulationTrace | np.ndarray):
        values = regulation.values if isinstance(regulation, RegulationTrace) else np.asarray(regulation, float)
        self.r = values

    def __call__(self, t: int, fleet: Fleet, delta: float) -> tuple[np.ndarray, np.ndarray]:
        return dispatch_step(fleet, float(self.r[t]), delta)


# ---------------------------------------------------------------------------
# availability predictions


@dataclass(frozen=True)
class AvailabilitySeries:
    pred_on_avail: np.ndarray
    pred_off_avail: np.ndarray
    D: np.ndarray
    mu_plus: np.ndarray  # nan at t = 0
    mu_minus: np.ndarray
    saturated: np.ndarray  # prediction was negative and floored


def _window_sum(x: np.ndarray, tau: int) -> np.ndarray:
    """sum_{k = t - tau}^{t} x[k], truncated at 0."""
    c = np.concatenate(([0.0], np.cumsum(x)))
    t = np.arange(len(x))
    return c[t + 1] - c[np.maximum(t - tau, 0)]


def availability_series(
    lim_on_to_off: np.ndarray,
    lim_off_to_on: np.ndarray,
    r: np.ndarray,
    tau: int,
    p_tot: float,
    p_ave: float,
) -> AvailabilitySeries:
    """Predicted available powers and ramp limits for every sample.

    Assumes r has been met through each sample.  The lockout window spans
    tau + 1 samples, k = t - tau .. t.  Negative predictions are floored
    at zero and flagged.
    """
    r = np.asarray(r, dtype=float)
    lim_on_to_off = np.asarray(lim_on_to_off, dtype=float)
    lim_off_to_on = np.asarray(lim_off_to_on, dtype=float)
    dr = np.diff(r, prepend=0.0)
    D = dr - (lim_off_to_on - lim_on_to_off)
    off_side = _window_sum(lim_on_to_off + np.maximum(-D, 0.0), tau)
    on_side = _window_sum(lim_off_to_on + np.maximum(D, 0.0), tau)
    raw_off = p_tot - p_ave - r - off_side
    raw_on = p_ave + r - on_side
    saturated = (raw_off < 0) | (raw_on < 0)
    pred_off = np.maximum(raw_off, 0.0)
    pred_on = np.maximum(raw_on, 0.0)
    worst = np.maximum(lim_on_to_off, lim_off_to_on)
    mu_plus = np.full(len(r), np.nan)
    mu_minus = np.full(len(r), np.nan)
    mu_plus[1:] = np.maximum(pred_off[:-1] - worst[1:], 0.0)
    mu_minus[1:] = np.maximum(pred_on[:-1] - worst[1:], 0.0)
    return AvailabilitySeries(pred_on, pred_off, D, mu_plus, mu_minus, saturated)


def fleet_totals(fleet: Fleet) -> tuple[float, float]:
    """(P_tot, P_ave): summed rated power and summed nominal power."""
    ar = fleet.arrays
    return float(ar.P_m.sum()), float(ar.P_o.sum())


def annotate_ledger(ledger: AvailabilityLedger, r: np.ndarray, tau: int, p_tot: float, p_ave: float) -> AvailabilitySeries:
    cols = ledger.columns
    series = availability_series(cols["P_lim_on_to_off"], cols["P_lim_off_to_on"], r, tau, p_tot, p_ave)
    cols["r"] = np.asarray(r, dtype=float).copy()
    cols["pred_on_avail"] = series.pred_on_avail
    cols["pred_off_avail"] = series.pred_off_avail
    cols["D"] = series.D
    cols["mu_plus"] = series.mu_plus
    cols["mu_minus"] = series.mu_minus
    cols["saturated"] = series.saturated.astype(float)
    return series


def predicted_available_powers(ledger: AvailabilityLedger, r: np.ndarray, t: int, tau: int, p_tot: float, p_ave: float) -> tuple[float, float]:
    """(P_off_avail, P_on_avail) predicted at sample ``t``."""
    cols = ledger.columns
    series = availability_series(cols["P_lim_on_to_off"][: t + 1], cols["P_lim_off_to_on"][: t + 1], np.asarray(r)[: t + 1], tau, p_tot, p_ave)
    return float(series.pred_off_avail[t]), float(series.pred_on_avail[t])


def ramp_bounds(ledger: AvailabilityLedger, t: int) -> tuple[float, float]:
    """(mu_plus, mu_minus) at sample ``t`` from an annotated ledger."""
    if t < 1:
        raise ValueError("ramp bounds need t >= 1")
    cols = ledger.columns
    worst = max(cols["P_lim_on_to_off"][t], cols["P_lim_off_to_on"][t])
    mu_plus = max(cols["pred_off_avail"][t - 1] - worst, 0.0)
    mu_minus = max(cols["pred_on_avail"][t - 1] - worst, 0.0)
    return float(mu_plus), float(mu_minus)


# ---------------------------------------------------------------------------
# runs and screening


def run_dispatch(
    fleet: Fleet,
    regulation: RegulationTrace,
    noise_std: float = 0.0,
    record_states: bool = False,
) -> SimulationTrace:
    """Track ``regulation`` with the priority-stack controller; ledger comes back annotated."""
    if not math.isclose(regulation.sample_period, fleet.sample_period, rel_tol=1e-12):
        raise ValueError(
            f"signal sample period {regulation.sample_period} s != fleet sample period {fleet.sample_period} s"
        )
    trace = simulate(
        fleet,
        len(regulation),
        PriorityStackController(regulation),
        noise_std=noise_std,
        record_states=record_states,
        regulation=regulation.values,
    )
    p_tot, p_ave = fleet_totals(fleet)
    annotate_ledger(trace.ledger, regulation.values, fleet.tau, p_tot, p_ave)
    return trace


def tracking_residual(trace: SimulationTrace) -> np.ndarray:
    """delta(t) - r(t) after the controller acted; positive means the fleet draws too much."""
    return trace.ledger.delta - trace.ledger.r


@dataclass(frozen=True)
class FeasibilityReport:
    battery: MembershipReport
    ramp_ok: bool
    ramp_sample: Optional[int] = None
    ramp_t_s: Optional[float] = None
    ramp_mu: Optional[float] = None
    ramp_dr: Optional[float] = None
    ramp_direction: Optional[str] = None
    battery_t_s: Optional[float] = None

    @property
    def passed(self) -> bool:
        return bool(self.battery.ok and self.ramp_ok)

    def to_dict(self) -> dict:
        battery = "pass" if self.battery.ok else {"t": self.battery_t_s, "bound": self.battery.bound}
        ramp = (
            "pass"
            if self.ramp_ok
            else {"t": self.ramp_t_s, "mu": self.ramp_mu, "dr": self.ramp_dr, "direction": self.ramp_direction}
        )
        return {"battery": battery, "ramp": ramp}


def ramp_violations(trace: SimulationTrace, slack: float = SLACK) -> np.ndarray:
    """Samples t >= 1 where dr(t) leaves [-mu_minus(t), mu_plus(t)]."""
    cols = trace.ledger.columns
    dr = np.diff(cols["r"], prepend=0.0)
    bad = np.zeros(len(dr), bool)
    bad[1:] = (dr[1:] > cols["mu_plus"][1:] + slack) | (dr[1:] < -cols["mu_minus"][1:] - slack)
    return np.flatnonzero(bad)


def feasibility_screen(
    fleet: Fleet,
    phi_s: BatteryParams,
    regulation: RegulationTrace,
    trace: Optional[SimulationTrace] = None,
) -> FeasibilityReport:
    """Battery membership plus the per-sample ramp constraint.

    The ramp limits need the thermostat flip powers, which come from a
    dispatch run of the fleet (reused when ``trace`` is given).
    """
    member = is_member(phi_s, regulation)
    battery_t = None if member.ok else member.sample * regulation.sample_period
    if trace is None:
        trace = run_dispatch(fleet, regulation)
    bad = ramp_violations(trace)
    if bad.size == 0:
        return FeasibilityReport(member, True, battery_t_s=battery_t)
    t = int(bad[0])
    cols = trace.ledger.columns
    dr = float(regulation.delta[t])
    if dr > 0:
        mu, direction = float(cols["mu_plus"][t]), "up"
    else:
        mu, direction = float(cols["mu_minus"][t]), "down"
    return FeasibilityReport(member, False, t, t * regulation.sample_period, mu, dr, direction, battery_t)

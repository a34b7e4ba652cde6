"""Generalized battery abstraction of a TCL collection.

A battery with parameters (C, n_-, n_+, alpha) accepts a power signal u
when -n_- <= u <= n_+ and the leaky state of charge
dx/dt = -alpha x - u, x(0) = 0, stays within |x| <= C.  The collection's
flexibility is sandwiched between a sufficient (inner) and a necessary
(outer) battery.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .errors import SetpointUnreachable, ZeroFlexibility
from .fleet_sim import ParamArrays, as_param_arrays
from .signals import RegulationTrace, seconds_to_hours

SLACK = 1e-9

Kind = Literal["necessary", "sufficient"]


@dataclass(frozen=True)
class BatteryParams:
    capacity_C: float  # kWh
    n_minus: float  # kW
    n_plus: float  # kW
    alpha: float  # 1/h
    kind: Kind = "sufficient"

    def __post_init__(self) -> None:
        for name in ("capacity_C", "n_minus", "n_plus"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.kind not in ("necessary", "sufficient"):
            raise ValueError(f"unknown battery kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {
            "capacity_kwh": self.capacity_C,
            "n_minus_kw": self.n_minus,
            "n_plus_kw": self.n_plus,
            "alpha_per_h": self.alpha,
            "kind": self.kind,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "BatteryParams":
        return cls(
            capacity_C=float(data["capacity_kwh"]),
            n_minus=float(data["n_minus_kw"]),
            n_plus=float(data["n_plus_kw"]),
            alpha=float(data["alpha_per_h"]),
            kind=data["kind"],
        )


@dataclass(frozen=True)
class SocTrajectory:
    """State of charge at the sample instants 0, h, 2h, ... (one more than the input)."""

    x: np.ndarray  # kWh
    sample_period: float  # s


@dataclass(frozen=True)
class MembershipReport:
    ok: bool
    sample: Optional[int] = None
    bound: Optional[str] = None  # "n_plus" | "n_minus" | "capacity"
    value: Optional[float] = None

    def __bool__(self) -> bool:
        return self.ok


def _as_trace(u) -> RegulationTrace:
    return u if isinstance(u, RegulationTrace) else RegulationTrace(np.asarray(u, dtype=float))


def soc_evolve(phi: BatteryParams, u: RegulationTrace) -> SocTrajectory:
    """Zero-order-hold exact discretisation of dx/dt = -alpha x - u."""
    u = _as_trace(u)
    h = seconds_to_hours(u.sample_period)
    decay = math.exp(-phi.alpha * h)
    gain = -math.expm1(-phi.alpha * h) / phi.alpha
    x = np.empty(len(u) + 1)
    x[0] = 0.0
    xk = 0.0
    for k, uk in enumerate(u.values):
        xk = decay * xk - gain * uk
        x[k + 1] = xk
    return SocTrajectory(x, u.sample_period)


def is_member(phi: BatteryParams, u: RegulationTrace, slack: float = SLACK) -> MembershipReport:
    """Check power bounds at every sample and |x| <= C at every sample instant.

    Between samples x relaxes monotonically under constant u, so the
    sample instants bound the capacity excursion.  The earliest violation
    is reported; at equal times a power violation wins.
    """
    u = _as_trace(u)
    vals = u.values
    over = np.flatnonzero(vals > phi.n_plus + slack)
    under = np.flatnonzero(vals < -phi.n_minus - slack)
    x = soc_evolve(phi, u).x
    cap = np.flatnonzero(np.abs(x) > phi.capacity_C + slack)
    candidates = []
    if over.size:
        candidates.append((int(over[0]), 0, "n_plus", float(vals[over[0]])))
    if under.size:
        candidates.append((int(under[0]), 0, "n_minus", float(vals[under[0]])))
    if cap.size:
        candidates.append((int(cap[0]), 1, "capacity", float(x[cap[0]])))
    if not candidates:
        return MembershipReport(True)
    sample, _, bound, value = min(candidates)
    return MembershipReport(False, sample, bound, value)


def _checked_flex(ar: ParamArrays) -> tuple[np.ndarray, np.ndarray]:
    p_o = ar.P_o
    bad = np.flatnonzero(~((p_o > 0) & (p_o < ar.P_m)))
    if bad.size:
        k = int(bad[0])
        if np.isclose(p_o[k], ar.P_m[k], rtol=0, atol=0):
            raise ZeroFlexibility(f"unit {k}: P_o equals P_m")
        raise SetpointUnreachable(f"unit {k}: P_o={p_o[k]:.6g} kW not in (0, {ar.P_m[k]})")
    return p_o, ar.P_m - p_o


def necessary_params(fleet, alpha: float) -> BatteryParams:
    """Outer battery: every feasible aggregate signal belongs to it."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    ar = as_param_arrays(fleet)
    p_o, up = _checked_flex(ar)
    capacity = float(np.sum((1.0 + np.abs(1.0 - ar.a / alpha)) * ar.delta / ar.b))
    return BatteryParams(capacity, float(p_o.sum()), float(up.sum()), alpha, "necessary")


def unit_energy_terms(ar: ParamArrays, alpha: float) -> np.ndarray:
    """Per-unit energy limits f^k = Delta / (b (1 + |1 - alpha/a|))."""
    return ar.delta / (ar.b * (1.0 + np.abs(1.0 - alpha / ar.a)))


def default_allocation(fleet) -> np.ndarray:
    """Share of the signal each unit takes, proportional to its upward headroom."""
    _, up = _checked_flex(as_param_arrays(fleet))
    return up / up.sum()


def sufficient_params(fleet, alpha: float, beta: Optional[np.ndarray] = None) -> tuple[BatteryParams, np.ndarray]:
    """Inner battery and the allocation weights that realise it.

    With the default headroom-proportional weights this is the closed form
    for (C, n_-, n_+).  For custom weights the largest triple satisfying
    the per-unit conditions is returned.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    ar = as_param_arrays(fleet)
    p_o, up = _checked_flex(ar)
    f = unit_energy_terms(ar, alpha)
    if beta is None:
        total_up = float(up.sum())
        beta = up / total_up
        n_plus = total_up
        n_minus = total_up * float(np.min(p_o / up))
        capacity = total_up * float(np.min(f / up))
    else:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != p_o.shape or np.any(beta < 0) or not math.isclose(beta.sum(), 1.0, rel_tol=1e-9):
            raise ValueError("beta must be non-negative, one weight per unit, summing to 1")
        used = beta > 0
        n_minus = float(np.min(p_o[used] / beta[used]))
        n_plus = float(np.min(up[used] / beta[used]))
        capacity = float(np.min(f[used] / beta[used]))
    return BatteryParams(capacity, n_minus, n_plus, alpha, "sufficient"), beta


def allocate(u_t: float, beta: np.ndarray) -> np.ndarray:
    """Per-unit power deviations for aggregate deviation ``u_t``."""
    return np.asarray(beta, dtype=float) * u_t


@dataclass(frozen=True)
class AllocationRun:
    theta: np.ndarray  # (samples + 1, N)
    power: np.ndarray  # (samples, N)
    temperature_violations: int
    power_violations: int


def simulate_allocation(fleet, beta: np.ndarray, u: RegulationTrace, slack: float = SLACK) -> AllocationRun:
    """Drive the continuous-power model with P_o + beta u from theta(0) = theta_r.

    Temperatures are exact at sample instants (zero-order hold on u).
    """
    u = _as_trace(u)
    ar = as_param_arrays(fleet)
    p_o, _ = _checked_flex(ar)
    h = seconds_to_hours(u.sample_period)
    decay = np.exp(-ar.a * h)
    power = p_o[None, :] + np.outer(u.values, beta)
    theta = np.empty((len(u) + 1, len(ar)))
    theta[0] = ar.theta_r
    gain = ar.R * ar.eta
    for k in range(len(u)):
        target = ar.theta_a - gain * power[k]
        theta[k + 1] = target + (theta[k] - target) * decay
    temp_bad = np.abs(theta - ar.theta_r) > ar.delta + slack
    pow_bad = (power < -slack) | (power > ar.P_m + slack)
    return AllocationRun(theta, power, int(temp_bad.sum()), int(pow_bad.sum()))

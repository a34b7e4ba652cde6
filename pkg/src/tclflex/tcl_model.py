"""Single-unit thermal model for cooling TCLs.

Both the hybrid dead-band model and its continuous-power relaxation are
affine in temperature within a mode, so every update here uses the exact
exponential solution rather than a forward-Euler step.  Time is in hours,
power in kW, temperature in degrees C.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InfeasibleCycle, ModelDivergence, PowerBoundViolation, SetpointUnreachable

ON = 1
OFF = 0


@dataclass(frozen=True)
class TclParameters:
    """Physical constants of one air conditioner.

    ``a`` and ``b`` are derived on access so they can never drift from
    ``C``, ``R`` and ``eta``.
    """

    C: float  # kWh/degC
    R: float  # degC/kW
    P_m: float  # kW
    eta: float
    theta_r: float  # degC
    delta: float  # degC, half dead-band
    theta_a: float  # degC

    def __post_init__(self) -> None:
        for name in ("C", "R", "P_m", "eta", "delta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        for name in ("theta_r", "theta_a"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def a(self) -> float:
        return 1.0 / (self.R * self.C)

    @property
    def b(self) -> float:
        return self.eta / self.C

    @property
    def theta_low(self) -> float:
        return self.theta_r - self.delta

    @property
    def theta_high(self) -> float:
        return self.theta_r + self.delta

    @property
    def theta_on_eq(self) -> float:
        """Temperature the unit relaxes to while held ON."""
        return self.theta_a - self.R * self.P_m * self.eta

    def is_well_posed(self) -> bool:
        return self.theta_a > self.theta_high and self.theta_on_eq < self.theta_low

    def with_(self, **changes) -> "TclParameters":
        return replace(self, **changes)


#: Typical residential air conditioner.
REFERENCE_AC = TclParameters(C=2.0, R=2.0, P_m=5.6, eta=2.5, theta_r=22.5, delta=0.3125, theta_a=32.0)


@dataclass
class TclState:
    theta: float
    q: int = OFF
    lockout: int = 0


def relax(theta, target, a, dt):
    """Exact solution of d(theta)/dt = -a (theta - target) after ``dt``.

    Works elementwise on numpy arrays.
    """
    return target + (theta - target) * np.exp(-a * dt)


def step_deadband(
    params: TclParameters,
    state: TclState,
    dt: float,
    noise: float = 0.0,
    tau: int = 0,
) -> TclState:
    """Advance one unit under the hybrid model, then apply the thermostat.

    ``noise`` is a temperature rate (degC/h) held constant over the step.
    A local flip clamps the temperature to the edge it crossed and resets
    the lockout counter to ``tau``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    target = params.theta_a - state.q * params.R * params.P_m * params.eta + noise / params.a
    theta = float(relax(state.theta, target, params.a, dt))
    if not math.isfinite(theta):
        raise ModelDivergence(f"temperature diverged (theta={theta!r})")
    q, lockout = state.q, state.lockout
    if q == OFF and theta >= params.theta_high:
        q, theta, lockout = ON, params.theta_high, tau
    elif q == ON and theta <= params.theta_low:
        q, theta, lockout = OFF, params.theta_low, tau
    return TclState(theta=theta, q=q, lockout=lockout)


def step_continuous(params: TclParameters, theta: float, p: float, dt: float, slack: float = 1e-9) -> float:
    """Exact update of the continuous-power model under constant ``p`` (kW)."""
    if not (-slack <= p <= params.P_m + slack):
        raise PowerBoundViolation(f"p={p!r} outside [0, {params.P_m}]")
    target = params.theta_a - params.R * params.eta * p
    return float(relax(theta, target, params.a, dt))


def cycle_times(params: TclParameters) -> tuple[float, float]:
    """ON and OFF durations (h) of one free-running hysteresis cycle."""
    rc = params.R * params.C
    rpe = params.R * params.P_m * params.eta
    on_hi = params.theta_high - params.theta_a + rpe
    on_lo = params.theta_low - params.theta_a + rpe
    off_lo = params.theta_low - params.theta_a
    off_hi = params.theta_high - params.theta_a
    with np.errstate(divide="ignore", invalid="ignore"):
        r_on = on_hi / on_lo if on_lo != 0 else math.inf
        r_off = off_lo / off_hi if off_hi != 0 else math.inf
    if not (on_lo > 0 and r_on > 0 and off_hi < 0 and r_off > 0):
        raise InfeasibleCycle(f"no finite hysteresis cycle for {params}")
    t_on = rc * math.log(r_on)
    t_off = rc * math.log(r_off)
    if not (t_on > 0 and t_off > 0 and math.isfinite(t_on) and math.isfinite(t_off)):
        raise InfeasibleCycle(f"degenerate cycle durations ({t_on}, {t_off})")
    return t_on, t_off


def average_power(params: TclParameters) -> float:
    t_on, t_off = cycle_times(params)
    return params.P_m * t_on / (t_on + t_off)


def nominal_power(params: TclParameters, strict: bool = True) -> float:
    """Constant power that holds the unit exactly at its set-point.

    With ``strict`` the result must lie strictly inside (0, P_m).
    """
    p_o = (params.theta_a - params.theta_r) / (params.eta * params.R)
    if strict and not (0.0 < p_o < params.P_m):
        raise SetpointUnreachable(f"P_o={p_o:.6g} kW not in (0, {params.P_m})")
    return p_o

"""Fleet construction and the time-stepped dead-band simulation.

The simulation is vectorised over units.  Within one sample the order of
events is fixed: temperature update, local thermostat flips, controller
switches, lockout countdown.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field, fields
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Optional, Protocol, Sequence

import numpy as np

from .errors import ContractViolation, ModelDivergence, SpecInfeasible
from .signals import seconds_to_hours
from .tcl_model import OFF, ON, REFERENCE_AC, TclParameters, TclState, average_power, cycle_times, nominal_power, relax

PARAM_NAMES = ("C", "R", "P_m", "eta", "theta_r", "delta")


# ---------------------------------------------------------------------------
# heterogeneity descriptors


@dataclass(frozen=True)
class Fixed:
    value: float

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.full(n, float(self.value))

    def __str__(self) -> str:
        return f"fixed({self.value!r})"


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError(f"uniform bounds reversed: {self.lo} > {self.hi}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=n)

    def __str__(self) -> str:
        return f"uniform({self.lo!r}, {self.hi!r})"


@dataclass(frozen=True)
class Grid:
    """Deterministic affine spread: unit k sits at lo + (hi - lo) k / (n - 1)."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError(f"grid bounds reversed: {self.lo} > {self.hi}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n == 1:
            return np.array([float(self.lo)])
        k = np.arange(n)
        return self.lo + (self.hi - self.lo) * k / (n - 1)

    def __str__(self) -> str:
        return f"grid({self.lo!r}, {self.hi!r})"


Distribution = Fixed | Uniform | Grid

_DIST_RE = re.compile(r"^\s*(fixed|uniform|grid)\s*\(([^)]*)\)\s*$", re.IGNORECASE)


def parse_distribution(text: str | float) -> Distribution:
    """Parse ``fixed(v)``, ``uniform(lo, hi)``, ``grid(lo, hi)`` or a bare number."""
    if isinstance(text, (int, float)):
        return Fixed(float(text))
    m = _DIST_RE.match(text)
    if m is None:
        try:
            return Fixed(float(text))
        except ValueError:
            raise ValueError(f"cannot parse distribution {text!r}") from None
    kind = m.group(1).lower()
    args = [float(x) for x in m.group(2).split(",") if x.strip()]
    if kind == "fixed":
        if len(args) != 1:
            raise ValueError(f"fixed() takes one value: {text!r}")
        return Fixed(args[0])
    if len(args) != 2:
        raise ValueError(f"{kind}() takes two values: {text!r}")
    return Uniform(*args) if kind == "uniform" else Grid(*args)


@dataclass(frozen=True)
class HeterogeneitySpec:
    """Per-parameter distributions; anything unspecified is fixed at the reference unit."""

    C: Distribution = Fixed(REFERENCE_AC.C)
    R: Distribution = Fixed(REFERENCE_AC.R)
    P_m: Distribution = Fixed(REFERENCE_AC.P_m)
    eta: Distribution = Fixed(REFERENCE_AC.eta)
    theta_r: Distribution = Fixed(REFERENCE_AC.theta_r)
    delta: Distribution = Fixed(REFERENCE_AC.delta)
    theta_a: float = REFERENCE_AC.theta_a

    @classmethod
    def from_strings(cls, **kwargs: str | float) -> "HeterogeneitySpec":
        parsed = {}
        for key, value in kwargs.items():
            if key == "theta_a":
                parsed[key] = float(value)
            elif key in PARAM_NAMES:
                parsed[key] = parse_distribution(value)
            else:
                raise ValueError(f"unknown heterogeneity parameter {key!r}")
        return cls(**parsed)

    def describe(self) -> dict[str, str]:
        return {f.name: str(getattr(self, f.name)) for f in fields(self)}


# ---------------------------------------------------------------------------
# fleet


@dataclass(frozen=True)
class ParamArrays:
    """Column view of a parameter list, for vectorised evaluation."""

    C: np.ndarray
    R: np.ndarray
    P_m: np.ndarray
    eta: np.ndarray
    theta_r: np.ndarray
    delta: np.ndarray
    theta_a: np.ndarray

    @classmethod
    def from_params(cls, params: Sequence[TclParameters]) -> "ParamArrays":
        cols = {name: np.array([getattr(p, name) for p in params], dtype=float) for name in PARAM_NAMES + ("theta_a",)}
        return cls(**cols)

    def __len__(self) -> int:
        return len(self.C)

    @property
    def a(self) -> np.ndarray:
        return 1.0 / (self.R * self.C)

    @property
    def b(self) -> np.ndarray:
        return self.eta / self.C

    @property
    def P_o(self) -> np.ndarray:
        return (self.theta_a - self.theta_r) / (self.eta * self.R)

    @property
    def theta_low(self) -> np.ndarray:
        return self.theta_r - self.delta

    @property
    def theta_high(self) -> np.ndarray:
        return self.theta_r + self.delta

    @property
    def on_drop(self) -> np.ndarray:
        """Equilibrium difference between OFF and ON: R P_m eta."""
        return self.R * self.P_m * self.eta


def as_param_arrays(units) -> ParamArrays:
    """Accept a Fleet, ParamArrays or a sequence of TclParameters."""
    if isinstance(units, ParamArrays):
        return units
    if isinstance(units, Fleet):
        return units.arrays
    params = list(units)
    if not params:
        raise ValueError("empty fleet")
    return ParamArrays.from_params(params)


@dataclass
class Fleet:
    params: tuple[TclParameters, ...]
    theta: np.ndarray
    q: np.ndarray
    lockout: np.ndarray
    sample_period: float = 1.0  # s
    tau: int = 60  # samples
    rng_seed: int = 0

    def __post_init__(self) -> None:
        self.params = tuple(self.params)
        n = len(self.params)
        if n == 0:
            raise ValueError("a fleet needs at least one unit")
        self.theta = np.asarray(self.theta, dtype=float).copy()
        self.q = np.asarray(self.q, dtype=np.int8).copy()
        self.lockout = np.asarray(self.lockout, dtype=np.int64).copy()
        if not (self.theta.shape == self.q.shape == self.lockout.shape == (n,)):
            raise ValueError("state arrays must match the number of units")
        if len({p.theta_a for p in self.params}) != 1:
            raise ValueError("all units in a fleet share one ambient temperature")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")

    def __len__(self) -> int:
        return len(self.params)

    @cached_property
    def arrays(self) -> ParamArrays:
        return ParamArrays.from_params(self.params)

    @property
    def dt_hours(self) -> float:
        return seconds_to_hours(self.sample_period)

    @property
    def units(self) -> list[tuple[TclParameters, TclState]]:
        return [
            (p, TclState(float(th), int(q), int(lk)))
            for p, th, q, lk in zip(self.params, self.theta, self.q, self.lockout)
        ]

    def copy(self) -> "Fleet":
        return Fleet(self.params, self.theta, self.q, self.lockout, self.sample_period, self.tau, self.rng_seed)

    def subset(self, indices: Iterable[int]) -> "Fleet":
        idx = np.asarray(list(indices), dtype=int)
        return Fleet(
            tuple(self.params[i] for i in idx),
            self.theta[idx],
            self.q[idx],
            self.lockout[idx],
            self.sample_period,
            self.tau,
            self.rng_seed,
        )

    @classmethod
    def from_params(cls, params: Sequence[TclParameters], **kwargs) -> "Fleet":
        """Fleet with every unit OFF at its set-point (for capacity analysis)."""
        n = len(params)
        theta = [p.theta_r for p in params]
        return cls(tuple(params), theta, np.zeros(n), np.zeros(n), **kwargs)


def _steady_state(p: TclParameters, phase: float) -> tuple[float, int]:
    """Temperature and mode ``phase`` hours into a cycle that starts ON at the top edge."""
    t_on, _ = cycle_times(p)
    if phase < t_on:
        return float(relax(p.theta_high, p.theta_on_eq, p.a, phase)), ON
    return float(relax(p.theta_low, p.theta_a, p.a, phase - t_on)), OFF


def build_fleet(
    n: int,
    spec: HeterogeneitySpec | None = None,
    tau: int = 60,
    seed: int = 0,
    sample_period: float = 1.0,
) -> Fleet:
    """Sample ``n`` units and place each at a uniformly random cycle phase."""
    if n < 1:
        raise ValueError("n must be at least 1")
    spec = spec or HeterogeneitySpec()
    rng = np.random.default_rng(seed)
    columns = {name: getattr(spec, name).sample(n, rng) for name in PARAM_NAMES}
    params = []
    for k in range(n):
        try:
            p = TclParameters(theta_a=spec.theta_a, **{name: float(columns[name][k]) for name in PARAM_NAMES})
            if not p.is_well_posed():
                raise ValueError("dead-band cycle is not well posed")
            nominal_power(p)
        except ValueError as exc:
            raise SpecInfeasible(f"unit {k}: {exc}") from exc
        params.append(p)
    u = rng.uniform(size=n)
    theta = np.empty(n)
    q = np.empty(n, dtype=np.int8)
    for k, p in enumerate(params):
        t_on, t_off = cycle_times(p)
        theta[k], q[k] = _steady_state(p, u[k] * (t_on + t_off))
    return Fleet(tuple(params), theta, q, np.zeros(n, dtype=np.int64), sample_period, tau, seed)


def baseline_power(fleet) -> float:
    """Sum of per-unit cycle-average powers n(t)."""
    params = fleet.params if isinstance(fleet, Fleet) else list(fleet)
    return float(math.fsum(average_power(p) for p in params))


def aggregate_power(fleet: Fleet) -> float:
    return float(np.dot(fleet.q, fleet.arrays.P_m))


# ---------------------------------------------------------------------------
# simulation


class Controller(Protocol):
    def __call__(self, t: int, fleet: Fleet, delta: float) -> tuple[np.ndarray, np.ndarray]:
        """Return (indices to switch ON, indices to switch OFF)."""


LEDGER_COLUMNS = (
    "t_s",
    "r",
    "P_agg_pre",
    "delta_pre",
    "P_agg",
    "n",
    "delta",
    "P_on",
    "P_off",
    "P_on_avail",
    "P_on_unavail",
    "P_off_avail",
    "P_off_unavail",
    "P_lim_on_to_off",
    "P_lim_off_to_on",
    "P_ctrl_off_to_on",
    "P_ctrl_on_to_off",
    "pred_on_avail",
    "pred_off_avail",
    "D",
    "mu_plus",
    "mu_minus",
    "saturated",
)


@dataclass
class AvailabilityLedger:
    """Per-step power accounting, one array per column (kW unless noted).

    ``delta`` and the availability columns are measured after the
    controller acts; ``*_pre`` columns after local flips only.  The
    ``pred_*``, ``D`` and ``mu_*`` columns are filled in by
    :func:`tclflex.dispatch_control.annotate_ledger`.
    """

    columns: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def empty(cls, horizon: int) -> "AvailabilityLedger":
        return cls({name: np.full(horizon, np.nan) for name in LEDGER_COLUMNS})

    def __getattr__(self, name: str) -> np.ndarray:
        cols = self.__dict__.get("columns")
        if cols is not None and name in cols:
            return cols[name]
        raise AttributeError(name)

    def __len__(self) -> int:
        return len(self.columns["t_s"])


@dataclass
class SimulationTrace:
    ledger: AvailabilityLedger
    fleet: Fleet  # final state
    switch_t: np.ndarray
    switch_unit: np.ndarray
    switch_to: np.ndarray  # new mode
    switch_forced: np.ndarray  # True for thermostat flips
    incidents: int  # thermostat flips that happened while locked
    theta: Optional[np.ndarray] = None  # (horizon, N) if recorded
    q: Optional[np.ndarray] = None

    @property
    def P_agg(self) -> np.ndarray:
        return self.ledger.P_agg

    def __len__(self) -> int:
        return len(self.ledger)

    def min_switch_gap(self) -> float:
        """Smallest number of samples between two switches of the same unit."""
        if len(self.switch_t) < 2:
            return math.inf
        order = np.lexsort((self.switch_t, self.switch_unit))
        units = self.switch_unit[order]
        times = self.switch_t[order]
        same = units[1:] == units[:-1]
        if not np.any(same):
            return math.inf
        return float(np.min(np.diff(times)[same]))

    def short_cycles(self, tau: int) -> int:
        """Count consecutive switches of one unit separated by ``tau`` samples or fewer."""
        order = np.lexsort((self.switch_t, self.switch_unit))
        units = self.switch_unit[order]
        times = self.switch_t[order]
        same = units[1:] == units[:-1]
        return int(np.sum(same & (np.diff(times) <= tau)))


def _validate_commands(fleet: Fleet, on_idx: np.ndarray, off_idx: np.ndarray) -> None:
    n = len(fleet)
    both = np.concatenate([on_idx, off_idx])
    if both.size == 0:
        return
    if np.any(both < 0) or np.any(both >= n):
        raise ContractViolation("controller addressed a unit outside the fleet")
    if len(np.unique(both)) != both.size:
        raise ContractViolation("controller commanded the same unit more than once")
    locked = both[fleet.lockout[both] > 0]
    if locked.size:
        raise ContractViolation(f"controller switched locked unit(s) {locked[:5].tolist()}")
    ar = fleet.arrays
    if np.any(fleet.q[on_idx] != OFF) or np.any(fleet.q[off_idx] != ON):
        raise ContractViolation("controller commanded a unit into the mode it is already in")
    if np.any(fleet.theta[on_idx] <= ar.theta_low[on_idx]) or np.any(fleet.theta[off_idx] >= ar.theta_high[off_idx]):
        raise ContractViolation("controller switch would drive a unit out of its dead-band")


def simulate(
    fleet: Fleet,
    horizon: int,
    controller: Optional[Controller] = None,
    noise_std: float = 0.0,
    record_states: bool = False,
    regulation: Optional[np.ndarray] = None,
) -> SimulationTrace:
    """Run the fleet for ``horizon`` samples; the input fleet is not modified.

    Sample 0 is the initial state (no temperature update before it).  A
    switch at sample k blocks further switches of that unit through
    sample k + tau.  Thermostat flips are never blocked; a flip of a locked
    unit is counted in ``incidents``.
    """
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    fl = fleet.copy()
    n_units = len(fl)
    ar = fl.arrays
    ledger = AvailabilityLedger.empty(horizon)
    cols = ledger.columns
    if regulation is not None:
        regulation = np.asarray(regulation, dtype=float)
        cols["r"][: min(horizon, len(regulation))] = regulation[:horizon]
    rng = np.random.default_rng([fl.rng_seed, 1])
    dt = fl.dt_hours
    decay = np.exp(-ar.a * dt)
    on_drop = ar.on_drop
    lo, hi, pm = ar.theta_low, ar.theta_high, ar.P_m
    p_tot = float(pm.sum())
    n_base = baseline_power(fl)
    hold = fl.tau + 1
    theta_rec = np.empty((horizon, n_units)) if record_states else None
    q_rec = np.empty((horizon, n_units), dtype=np.int8) if record_states else None
    sw_t: list[np.ndarray] = []
    sw_u: list[np.ndarray] = []
    sw_to: list[np.ndarray] = []
    sw_forced: list[np.ndarray] = []
    incidents = 0
    empty = np.empty(0, dtype=np.int64)

    for t in range(horizon):
        if t > 0:
            target = ar.theta_a - fl.q * on_drop
            if noise_std > 0:
                target = target + rng.normal(0.0, noise_std, n_units) / ar.a
            fl.theta = target + (fl.theta - target) * decay
            if not np.all(np.isfinite(fl.theta)):
                raise ModelDivergence(f"non-finite temperature at sample {t}")

        up = np.flatnonzero((fl.q == OFF) & (fl.theta >= hi))
        down = np.flatnonzero((fl.q == ON) & (fl.theta <= lo))
        flipped = np.concatenate([up, down])
        if flipped.size:
            incidents += int(np.count_nonzero(fl.lockout[flipped] > 0))
            fl.q[up] = ON
            fl.theta[up] = hi[up]
            fl.q[down] = OFF
            fl.theta[down] = lo[down]
            fl.lockout[flipped] = hold
            sw_t.append(np.full(flipped.size, t))
            sw_u.append(flipped)
            sw_to.append(np.concatenate([np.ones(up.size, np.int8), np.zeros(down.size, np.int8)]))
            sw_forced.append(np.ones(flipped.size, bool))
        lim_up = float(pm[up].sum())
        lim_down = float(pm[down].sum())

        p_pre = float(np.dot(fl.q, pm))
        on_idx = off_idx = empty
        if controller is not None:
            on_idx, off_idx = controller(t, fl, p_pre - n_base)
            on_idx = np.asarray(on_idx, dtype=np.int64)
            off_idx = np.asarray(off_idx, dtype=np.int64)
            _validate_commands(fl, on_idx, off_idx)
            fl.q[on_idx] = ON
            fl.q[off_idx] = OFF
            commanded = np.concatenate([on_idx, off_idx])
            if commanded.size:
                fl.lockout[commanded] = hold
                sw_t.append(np.full(commanded.size, t))
                sw_u.append(commanded)
                sw_to.append(np.concatenate([np.ones(on_idx.size, np.int8), np.zeros(off_idx.size, np.int8)]))
                sw_forced.append(np.zeros(commanded.size, bool))

        is_on = fl.q == ON
        locked = fl.lockout > 0
        p_on = float(pm[is_on].sum())
        cols["t_s"][t] = t * fl.sample_period
        cols["P_agg_pre"][t] = p_pre
        cols["delta_pre"][t] = p_pre - n_base
        cols["P_agg"][t] = p_on
        cols["n"][t] = n_base
        cols["delta"][t] = p_on - n_base
        cols["P_on"][t] = p_on
        cols["P_off"][t] = p_tot - p_on
        cols["P_on_unavail"][t] = float(pm[is_on & locked].sum())
        cols["P_on_avail"][t] = float(pm[is_on & ~locked].sum())
        cols["P_off_unavail"][t] = float(pm[~is_on & locked].sum())
        cols["P_off_avail"][t] = float(pm[~is_on & ~locked].sum())
        cols["P_lim_off_to_on"][t] = lim_up
        cols["P_lim_on_to_off"][t] = lim_down
        cols["P_ctrl_off_to_on"][t] = float(pm[on_idx].sum())
        cols["P_ctrl_on_to_off"][t] = float(pm[off_idx].sum())
        if record_states:
            theta_rec[t] = fl.theta
            q_rec[t] = fl.q

        np.subtract(fl.lockout, 1, out=fl.lockout, where=fl.lockout > 0)

    cat = lambda xs, dtype: np.concatenate(xs).astype(dtype) if xs else np.empty(0, dtype)  # noqa: E731
    return SimulationTrace(
        ledger=ledger,
        fleet=fl,
        switch_t=cat(sw_t, np.int64),
        switch_unit=cat(sw_u, np.int64),
        switch_to=cat(sw_to, np.int8),
        switch_forced=cat(sw_forced, bool),
        incidents=incidents,
        theta=theta_rec,
        q=q_rec,
    )


TRACE_CSV_COLUMNS = (
    ("t_s", "t_s"),
    ("P_agg_kW", "P_agg"),
    ("n_kW", "n"),
    ("delta_kW", "delta"),
    ("P_on_avail_kW", "P_on_avail"),
    ("P_off_avail_kW", "P_off_avail"),
    ("P_lim_on_off_kW", "P_lim_on_to_off"),
    ("P_lim_off_on_kW", "P_lim_off_to_on"),
    ("mu_plus_kW", "mu_plus"),
    ("mu_minus_kW", "mu_minus"),
)


def write_trace_csv(ledger: AvailabilityLedger, path: str | Path) -> None:
    """Export a ledger; floats use repr so the file round-trips exactly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([name for name, _ in TRACE_CSV_COLUMNS])
        data = [ledger.columns[key] for _, key in TRACE_CSV_COLUMNS]
        for row in zip(*data):
            writer.writerow([repr(float(v)) for v in row])


def read_trace_csv(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    return {name: np.array([float(r[name]) for r in rows]) for name, _ in TRACE_CSV_COLUMNS}

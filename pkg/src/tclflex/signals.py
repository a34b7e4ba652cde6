"""Sampled regulation signals and their CSV form."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SECONDS_PER_HOUR = 3600.0


def seconds_to_hours(seconds: float) -> float:
    return seconds / SECONDS_PER_HOUR


@dataclass(frozen=True)
class RegulationTrace:
    """Requested deviation r(t) from baseline power, one value per sample."""

    values: np.ndarray  # kW
    sample_period: float = 1.0  # s

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("regulation values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValueError("regulation values must be finite")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.sample_period

    @property
    def delta(self) -> np.ndarray:
        """First difference, with the first entry taken as r(0) itself."""
        return np.diff(self.values, prepend=0.0)

    def scaled(self, factor: float) -> "RegulationTrace":
        return RegulationTrace(self.values * factor, self.sample_period)

    @classmethod
    def zeros(cls, horizon: int, sample_period: float = 1.0) -> "RegulationTrace":
        return cls(np.zeros(horizon), sample_period)


def write_signal_csv(trace: RegulationTrace, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "r_kw"])
        for t, r in zip(trace.times, trace.values):
            writer.writerow([repr(float(t)), repr(float(r))])


def read_signal_csv(path: str | Path) -> RegulationTrace:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"t_s", "r_kw"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns t_s, r_kw")
        rows = [(float(row["t_s"]), float(row["r_kw"])) for row in reader]
    if not rows:
        raise ValueError(f"{path}: empty signal")
    t = np.array([r[0] for r in rows])
    r = np.array([r[1] for r in rows])
    if len(t) > 1:
        steps = np.diff(t)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError(f"{path}: t_s must be uniformly increasing")
        period = float(steps[0])
    else:
        period = 1.0
    return RegulationTrace(r, period)


# ---------------------------------------------------------------------------
# synthetic generators; ``amplitude`` is in kW


def _normalise(x: np.ndarray, amplitude: float) -> np.ndarray:
    peak = np.max(np.abs(x)) if x.size else 0.0
    return x * (amplitude / peak) if peak > 0 else x


def sinusoid_signal(
    horizon: int,
    amplitude: float,
    period_s: float,
    components: int = 3,
    seed: int = 0,
    sample_period: float = 1.0,
) -> RegulationTrace:
    """Sum of harmonics of ``period_s`` with random phases, scaled to peak ``amplitude``."""
    rng = np.random.default_rng(seed)
    t = np.arange(horizon) * sample_period
    x = np.zeros(horizon)
    for k in range(1, components + 1):
        x += np.sin(2 * np.pi * k * t / period_s + rng.uniform(0, 2 * np.pi)) / k
    return RegulationTrace(_normalise(x, amplitude), sample_period)


def filtered_noise_signal(
    horizon: int,
    amplitude: float,
    period_s: float,
    seed: int = 0,
    sample_period: float = 1.0,
) -> RegulationTrace:
    """First-order low-pass filtered white noise with time constant ``period_s``."""
    rng = np.random.default_rng(seed)
    rho = np.exp(-sample_period / period_s)
    w = rng.normal(size=horizon)
    x = np.empty(horizon)
    acc = 0.0
    for k in range(horizon):
        acc = rho * acc + np.sqrt(1 - rho * rho) * w[k]
        x[k] = acc
    return RegulationTrace(_normalise(x, amplitude), sample_period)


def ramp_signal(
    horizon: int,
    amplitude: float,
    period_s: float,
    lead_s: float = 30.0,
    sample_period: float = 1.0,
) -> RegulationTrace:
    """Hold at zero for ``lead_s``, ramp down to -``amplitude`` over ``period_s``, then hold."""
    t = np.arange(horizon) * sample_period
    rate = amplitude / period_s
    x = -np.clip((t - lead_s) * rate, 0.0, amplitude)
    return RegulationTrace(x, sample_period)

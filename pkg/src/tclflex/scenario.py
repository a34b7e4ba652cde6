"""Scenario files: INI sections of flat ``key = value`` pairs.

Grammar (every key optional unless noted)::

    [fleet]
    n = 1000
    tau = 60                      # lockout, samples
    seed = 0
    theta_a = 32
    C = uniform(1.5, 2.5)         # fixed(v) | uniform(lo, hi) | grid(lo, hi) | bare number
    R = 2                         # likewise for P_m, eta, theta_r, delta

    [simulation]
    sample_period_s = 1
    horizon = 3600                # samples
    noise_std = 0                 # degC/h, per-sample Gaussian temperature rate

    [regulation]
    source = synthetic            # synthetic | file
    path = signal.csv             # file source: columns t_s, r_kw (relative to this file)
    kind = sinusoid               # sinusoid | noise | ramp | zero
    amplitude = 0.1               # fraction of the sufficient battery's n_plus
    period_s = 600
    components = 3                # sinusoid only
    lead_s = 30                   # ramp only
    seed = 0

    [battery]
    alpha = optimal               # nominal | optimal | <1/h>
    m = 1                         # clusters

    [metrics]
    mu_threshold_kw = 5.6         # default: largest unit rating

    [sweep]
    levels = 0, 0.1, 0.2          # C half-width as a fraction of nominal
    m = 3
    n = 1000
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError
from .fleet_sim import PARAM_NAMES, HeterogeneitySpec, parse_distribution
from .tcl_model import REFERENCE_AC


@dataclass(frozen=True)
class RegulationConfig:
    source: str = "synthetic"
    path: Optional[Path] = None
    kind: str = "sinusoid"
    amplitude: float = 0.1
    period_s: float = 600.0
    components: int = 3
    lead_s: float = 30.0
    seed: int = 0


@dataclass(frozen=True)
class Scenario:
    n: int = 1000
    tau: int = 60
    seed: int = 0
    heterogeneity: HeterogeneitySpec = field(default_factory=HeterogeneitySpec)
    sample_period_s: float = 1.0
    horizon: int = 3600
    noise_std: float = 0.0
    regulation: RegulationConfig = field(default_factory=RegulationConfig)
    alpha: str | float = "optimal"
    m: int = 1
    mu_threshold_kw: Optional[float] = None
    sweep_levels: tuple[float, ...] = tuple(np.linspace(0.0, 0.5, 10).tolist())
    sweep_m: int = 3
    sweep_n: int = 1000

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)

    def validate(self) -> None:
        if self.n < 1:
            raise ConfigError("fleet.n must be at least 1")
        if self.tau < 0:
            raise ConfigError("fleet.tau must be non-negative")
        if self.horizon < 1:
            raise ConfigError("simulation.horizon must be at least 1")
        if self.sample_period_s <= 0:
            raise ConfigError("simulation.sample_period_s must be positive")
        if self.m < 1 or self.m > self.n:
            raise ConfigError("battery.m must lie in [1, n]")
        reg = self.regulation
        if reg.source not in ("synthetic", "file"):
            raise ConfigError(f"regulation.source must be synthetic or file, got {reg.source!r}")
        if reg.source == "file" and (reg.path is None or not reg.path.is_file()):
            raise ConfigError(f"regulation file not found: {reg.path}")
        if reg.source == "synthetic" and reg.kind not in ("sinusoid", "noise", "ramp", "zero"):
            raise ConfigError(f"unknown regulation.kind {reg.kind!r}")
        if reg.period_s <= 0:
            raise ConfigError("regulation.period_s must be positive")
        if isinstance(self.alpha, str) and self.alpha not in ("nominal", "optimal"):
            raise ConfigError(f"battery.alpha must be nominal, optimal or a number, got {self.alpha!r}")
        if not isinstance(self.alpha, str) and not self.alpha > 0:
            raise ConfigError("battery.alpha must be positive")


def _get(cp: configparser.ConfigParser, section: str, key: str, cast, default):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key)
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def _alpha(raw: str) -> str | float:
    raw = raw.strip().lower()
    if raw in ("nominal", "optimal"):
        return raw
    if raw.startswith("fixed(") and raw.endswith(")"):
        raw = raw[6:-1]
    return float(raw)


def parse_scenario(text: str, base_dir: Path | None = None) -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # parameter names are case sensitive (C vs c)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed scenario: {exc}") from None
    known = {"fleet", "simulation", "regulation", "battery", "metrics", "sweep"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    base_dir = base_dir or Path.cwd()

    dists = {}
    if cp.has_section("fleet"):
        for key in cp.options("fleet"):
            if key in PARAM_NAMES:
                try:
                    dists[key] = parse_distribution(cp.get("fleet", key))
                except ValueError as exc:
                    raise ConfigError(f"[fleet] {key}: {exc}") from None
            elif key not in ("n", "tau", "seed", "theta_a"):
                raise ConfigError(f"[fleet] unknown key {key!r}")
    theta_a = _get(cp, "fleet", "theta_a", float, REFERENCE_AC.theta_a)
    hetero = HeterogeneitySpec(theta_a=theta_a, **dists)

    path = _get(cp, "regulation", "path", str, None)
    reg = RegulationConfig(
        source=_get(cp, "regulation", "source", str, "synthetic").strip().lower(),
        path=(base_dir / path) if path else None,
        kind=_get(cp, "regulation", "kind", str, "sinusoid").strip().lower(),
        amplitude=_get(cp, "regulation", "amplitude", float, 0.1),
        period_s=_get(cp, "regulation", "period_s", float, 600.0),
        components=_get(cp, "regulation", "components", int, 3),
        lead_s=_get(cp, "regulation", "lead_s", float, 30.0),
        seed=_get(cp, "regulation", "seed", int, 0),
    )
    levels = _get(
        cp, "sweep", "levels", lambda s: tuple(float(x) for x in s.split(",") if x.strip()), Scenario.sweep_levels
    )
    sc = Scenario(
        n=_get(cp, "fleet", "n", int, 1000),
        tau=_get(cp, "fleet", "tau", int, 60),
        seed=_get(cp, "fleet", "seed", int, 0),
        heterogeneity=hetero,
        sample_period_s=_get(cp, "simulation", "sample_period_s", float, 1.0),
        horizon=_get(cp, "simulation", "horizon", int, 3600),
        noise_std=_get(cp, "simulation", "noise_std", float, 0.0),
        regulation=reg,
        alpha=_get(cp, "battery", "alpha", _alpha, "optimal"),
        m=_get(cp, "battery", "m", int, 1),
        mu_threshold_kw=_get(cp, "metrics", "mu_threshold_kw", float, None),
        sweep_levels=levels,
        sweep_m=_get(cp, "sweep", "m", int, 3),
        sweep_n=_get(cp, "sweep", "n", int, 1000),
    )
    sc.validate()
    return sc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"scenario file not found: {path}")
    return parse_scenario(path.read_text(), path.parent)

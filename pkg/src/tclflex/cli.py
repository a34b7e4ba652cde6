"""Command-line entry points.

Exit status: 0 when a command completes (and a screen passes), 2 when a
feasibility violation is found, 1 on any error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .battery_model import BatteryParams, is_member, necessary_params, sufficient_params
from .clustering import capacity_gap_sweep, optimal_clusters, write_sweep_csv, write_sweep_rows
from .dispatch_control import feasibility_screen, run_dispatch, tracking_residual
from .dissipation_opt import optimal_alpha
from .errors import ConfigError, TclError
from .fleet_sim import PARAM_NAMES, Fixed, Fleet, SimulationTrace, build_fleet, write_trace_csv
from .tcl_model import TclParameters
from .scenario import Scenario, load_scenario
from .signals import (
    RegulationTrace,
    filtered_noise_signal,
    ramp_signal,
    read_signal_csv,
    sinusoid_signal,
    write_signal_csv,
)


def make_fleet(sc: Scenario) -> Fleet:
    try:
        return build_fleet(sc.n, sc.heterogeneity, tau=sc.tau, seed=sc.seed, sample_period=sc.sample_period_s)
    except ValueError as exc:
        raise ConfigError(f"infeasible fleet: {exc}") from exc


def resolve_alpha(sc: Scenario, fleet: Fleet) -> float:
    if sc.alpha == "nominal":
        return float(np.mean(fleet.arrays.a))
    if sc.alpha == "optimal":
        return optimal_alpha(fleet).alpha_star
    return float(sc.alpha)


def make_signal(sc: Scenario, n_plus: float) -> RegulationTrace:
    reg = sc.regulation
    if reg.source == "file":
        trace = read_signal_csv(reg.path)
        if not np.isclose(trace.sample_period, sc.sample_period_s) and len(trace) > 1:
            raise ConfigError(f"{reg.path}: sample period {trace.sample_period} s != {sc.sample_period_s} s")
        if len(trace) < sc.horizon:
            raise ConfigError(f"{reg.path}: {len(trace)} samples, horizon needs {sc.horizon}")
        return RegulationTrace(trace.values[: sc.horizon], sc.sample_period_s)
    amp = reg.amplitude * n_plus
    h, ts = sc.horizon, sc.sample_period_s
    if reg.kind == "zero":
        return RegulationTrace.zeros(h, ts)
    if reg.kind == "sinusoid":
        return sinusoid_signal(h, amp, reg.period_s, reg.components, reg.seed, ts)
    if reg.kind == "noise":
        return filtered_noise_signal(h, amp, reg.period_s, reg.seed, ts)
    return ramp_signal(h, amp, reg.period_s, reg.lead_s, ts)


@dataclass
class SimulationResult:
    fleet: Fleet
    phi_s: BatteryParams
    signal: RegulationTrace
    trace: SimulationTrace
    metrics: dict


def tracking_metrics(trace: SimulationTrace, fleet: Fleet, phi_s: BatteryParams, mu_threshold: Optional[float]) -> dict:
    res = tracking_residual(trace)
    threshold = float(fleet.arrays.P_m.max()) if mu_threshold is None else mu_threshold
    mu_minus = trace.ledger.mu_minus[1:]
    rms = float(np.sqrt(np.mean(res**2)))
    member = is_member(phi_s, RegulationTrace(trace.ledger.r, fleet.sample_period))
    return {
        "rms_error_kw": rms,
        "rms_error_pct_n_plus": 100.0 * rms / phi_s.n_plus if phi_s.n_plus > 0 else float("nan"),
        "max_abs_error_kw": float(np.max(np.abs(res))),
        "short_cycle_incidents": int(trace.incidents),
        "short_cycles": trace.short_cycles(fleet.tau),
        "mu_threshold_kw": threshold,
        "frac_mu_minus_below_threshold": float(np.mean(mu_minus < threshold)) if mu_minus.size else 0.0,
        "baseline_kw": float(trace.ledger.n[0]),
        "n_plus_kw": phi_s.n_plus,
        "battery_member": bool(member.ok),
        "samples": len(trace),
    }


def cmd_simulate(sc: Scenario) -> SimulationResult:
    fleet = make_fleet(sc)
    phi_s, _ = sufficient_params(fleet, resolve_alpha(sc, fleet))
    signal = make_signal(sc, phi_s.n_plus)
    trace = run_dispatch(fleet, signal, noise_std=sc.noise_std)
    return SimulationResult(fleet, phi_s, signal, trace, tracking_metrics(trace, fleet, phi_s, sc.mu_threshold_kw))


def cmd_battery(sc: Scenario) -> dict:
    fleet = make_fleet(sc)
    alpha = resolve_alpha(sc, fleet)
    out = {
        "alpha_per_h": alpha,
        "necessary": necessary_params(fleet, alpha).to_dict(),
        "sufficient": sufficient_params(fleet, alpha)[0].to_dict(),
    }
    if sc.m > 1:
        out["clusters"] = optimal_clusters(fleet, sc.m).to_dict()
    return out


def cmd_dissipation(sc: Scenario, method: str = "auto") -> dict:
    return optimal_alpha(make_fleet(sc), method).to_dict()


def cmd_cluster(sc: Scenario, m: Optional[int] = None, method: str = "auto") -> dict:
    return optimal_clusters(make_fleet(sc), m or sc.m, method).to_dict()


def nominal_template(sc: Scenario) -> TclParameters:
    """Unit at the centre of every heterogeneity range."""
    values = {}
    for name in PARAM_NAMES:
        dist = getattr(sc.heterogeneity, name)
        values[name] = dist.value if isinstance(dist, Fixed) else 0.5 * (dist.lo + dist.hi)
    return TclParameters(theta_a=sc.heterogeneity.theta_a, **values)


def cmd_sweep(sc: Scenario):
    template = nominal_template(sc)
    return capacity_gap_sweep(sc.sweep_levels, m=sc.sweep_m, n=sc.sweep_n, seed=sc.seed, template=template)


def cmd_feasibility(sc: Scenario) -> dict:
    fleet = make_fleet(sc)
    phi_s, _ = sufficient_params(fleet, resolve_alpha(sc, fleet))
    signal = make_signal(sc, phi_s.n_plus)
    report = feasibility_screen(fleet, phi_s, signal)
    return {"passed": report.passed, **report.to_dict()}


# ---------------------------------------------------------------------------


def _emit_json(data, out: Optional[Path], name: str) -> None:
    text = json.dumps(data, indent=2, sort_keys=True)
    if out is None:
        print(text)
    else:
        (out / name).write_text(text + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tclflex", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scenario", "--fleet", dest="scenario", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None, help="output directory (stdout if omitted)")
        p.add_argument("--seed", type=int, default=None, help="override the fleet seed")
        p.add_argument("--format", choices=("csv", "json"), default=None, help="sweep defaults to csv, others to json")

    common(sub.add_parser("simulate", help="dispatch the fleet against a regulation signal"))
    common(sub.add_parser("battery", help="necessary and sufficient battery parameters"))
    p = sub.add_parser("dissipation", help="optimal dissipation rate")
    common(p)
    p.add_argument("--method", choices=("auto", "numeric", "closed"), default="auto")
    p = sub.add_parser("cluster", help="optimal clustering")
    common(p)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--method", choices=("auto", "dp", "closed"), default="auto")
    common(sub.add_parser("sweep", help="capacity versus heterogeneity table"))
    common(sub.add_parser("feasibility", help="screen a signal against battery and ramp limits"))
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.scenario)
        if args.seed is not None:
            sc = sc.with_seed(args.seed)
        out = args.out
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)

        if args.command == "simulate":
            result = cmd_simulate(sc)
            if out is not None:
                write_trace_csv(result.trace.ledger, out / "trace.csv")
                write_signal_csv(result.signal, out / "signal.csv")
            _emit_json(result.metrics, out, "metrics.json")
        elif args.command == "battery":
            _emit_json(cmd_battery(sc), out, "battery.json")
        elif args.command == "dissipation":
            _emit_json(cmd_dissipation(sc, args.method), out, "dissipation.json")
        elif args.command == "cluster":
            _emit_json(cmd_cluster(sc, args.m, args.method), out, "cluster.json")
        elif args.command == "sweep":
            rows = cmd_sweep(sc)
            if args.format == "json":
                _emit_json([row.__dict__ for row in rows], out, "sweep.json")
            elif out is not None:
                write_sweep_csv(rows, out / "sweep.csv")
            else:
                write_sweep_rows(rows, sys.stdout)
        elif args.command == "feasibility":
            report = cmd_feasibility(sc)
            _emit_json(report, out, "feasibility.json")
            return 0 if report["passed"] else 2
    except (TclError, ValueError, OSError) as exc:
        print(f"tclflex: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Track a steep downward ramp and report where the ON pool runs dry.

Runs scenarios/ramp_saturation.ini and prints the first sample at which
mu_minus reaches zero next to the first sample at which the fleet can no
longer follow r(t) downward.
"""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from tclflex.cli import cmd_simulate
from tclflex.dispatch_control import feasibility_screen, tracking_residual
from tclflex.fleet_sim import write_trace_csv
from tclflex.scenario import load_scenario

ROOT = Path(__file__).resolve().parents[1]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", type=Path, default=ROOT / "scenarios" / "ramp_saturation.ini")
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    result = cmd_simulate(load_scenario(args.scenario))
    L = result.trace.ledger
    p_min = result.fleet.arrays.P_m.min()
    res = tracking_residual(result.trace)
    mu_zero = np.flatnonzero(L.mu_minus[1:] == 0.0) + 1
    lost = np.flatnonzero(res > p_min)
    report = feasibility_screen(result.fleet, result.phi_s, result.signal, result.trace)

    args.out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(L, args.out / "ramp_trace.csv")
    print(f"sufficient battery: {result.phi_s.to_dict()}")
    print(f"mu_minus first zero at t = {mu_zero[0] if mu_zero.size else None} s")
    print(f"downward residual first above {p_min:.2f} kW at t = {lost[0] if lost.size else None} s")
    print(f"feasibility screen: {report.to_dict()}")

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        t = L.t_s
        fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
        top.plot(t, L.r, label="r(t)")
        top.plot(t, L.delta, label="delta(t)")
        top.set_ylabel("kW")
        top.legend()
        dr = np.diff(L.r, prepend=0.0)
        bottom.plot(t, L.mu_plus, label="mu_plus")
        bottom.plot(t, -L.mu_minus, label="-mu_minus")
        bottom.plot(t, dr, label="dr")
        bottom.set_xlabel("t (s)")
        bottom.set_ylabel("kW per sample")
        bottom.legend()
        fig.tight_layout()
        fig.savefig(args.out / "ramp_saturation.png", dpi=150)


if __name__ == "__main__":
    main()

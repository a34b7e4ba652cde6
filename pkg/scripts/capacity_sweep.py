"""Battery capacity versus heterogeneity in C.

Writes the sweep table as CSV and, with --plot, a PNG of the capacity
curves (needs matplotlib, which is not a package dependency).

    python scripts/capacity_sweep.py --n 1000 --levels 10 --out results/
"""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from tclflex.clustering import capacity_gap_sweep, sweep_gaps, write_sweep_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--levels", type=int, default=10)
    ap.add_argument("--max-level", type=float, default=0.5)
    ap.add_argument("--m", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    levels = np.linspace(0.0, args.max_level, args.levels)
    rows = capacity_gap_sweep(levels, m=args.m, n=args.n, seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, args.out / "capacity_sweep.csv")

    print(f"{'level':>6} {'gap nominal':>12} {'gap optimal':>12} {'gap m=' + str(args.m):>12}  (kWh)")
    for level, gap in sweep_gaps(rows).items():
        vals = list(gap.values())
        print(f"{level:6.3f} " + " ".join(f"{v:12.3f}" for v in vals))

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        for config in dict.fromkeys(r.config for r in rows):
            pts = [(r.heterogeneity_level, r.capacity_kwh) for r in rows if r.config == config]
            ax.plot(*zip(*pts), marker="o", label=config)
        ax.set_xlabel("C half-width / nominal C")
        ax.set_ylabel("capacity (kWh)")
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.out / "capacity_sweep.png", dpi=150)


if __name__ == "__main__":
    main()

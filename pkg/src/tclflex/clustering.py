"""Splitting a fleet into a few batteries to raise total sufficient capacity.

Clusters are contiguous runs of the fleet sorted by a heterogeneity key.
Each cluster gets its own optimal dissipation rate.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .battery_model import necessary_params, sufficient_params
from .dissipation_opt import DissipationResult, optimal_alpha, varying_parameters
from .errors import WrongHeterogeneity
from .fleet_sim import ParamArrays, as_param_arrays
from .tcl_model import REFERENCE_AC, TclParameters


@dataclass(frozen=True)
class ClusterAssignment:
    order: np.ndarray  # unit indices, sorted by the clustering key
    boundaries: tuple[int, ...]  # m - 1 split positions into ``order``
    sizes: tuple[int, ...]
    clusters: tuple[DissipationResult, ...]
    total_capacity: float  # kWh

    @property
    def m(self) -> int:
        return len(self.sizes)

    def members(self, i: int) -> np.ndarray:
        edges = (0,) + self.boundaries + (len(self.order),)
        return self.order[edges[i] : edges[i + 1]]

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "boundaries": list(self.boundaries),
            "sizes": list(self.sizes),
            "total_capacity_kwh": self.total_capacity,
            "clusters": [
                dict(c.to_dict(), members=self.members(i).tolist()) for i, c in enumerate(self.clusters)
            ],
        }


def cluster_capacity_closed_form(n: int, m: int, c_min: float, c_max: float, delta: float, eta: float) -> float:
    """Total sufficient capacity of m equal clusters of an affine-grid C fleet."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    if n == 1:
        return delta * c_min / eta
    spread = (c_max - c_min) / 2.0 * n / (n - 1) * (m - 1) / m
    return (c_min + spread) * n * delta / eta


def _is_affine_grid(values: np.ndarray, rtol: float = 1e-9) -> bool:
    if len(values) <= 2:
        return True
    steps = np.diff(np.sort(values))
    return bool(np.allclose(steps, steps.mean(), rtol=rtol, atol=rtol * abs(values).max()))


def _sort_order(ar: ParamArrays, sort_key: str | Sequence[int]) -> np.ndarray:
    if isinstance(sort_key, str):
        return np.argsort(getattr(ar, sort_key), kind="stable")
    order = np.asarray(sort_key, dtype=int)
    if sorted(order.tolist()) != list(range(len(ar))):
        raise ValueError("sort_key order must be a permutation of the units")
    return order


def _subset(ar: ParamArrays, idx: np.ndarray) -> ParamArrays:
    return ParamArrays(**{name: getattr(ar, name)[idx] for name in ParamArrays.__dataclass_fields__})


def _assignment(ar: ParamArrays, order: np.ndarray, boundaries: Sequence[int], method: str) -> ClusterAssignment:
    edges = [0, *boundaries, len(order)]
    results = tuple(optimal_alpha(_subset(ar, order[s:e]), method) for s, e in zip(edges[:-1], edges[1:]))
    sizes = tuple(e - s for s, e in zip(edges[:-1], edges[1:]))
    return ClusterAssignment(order, tuple(boundaries), sizes, results, float(sum(r.capacity_star for r in results)))


def optimal_clusters_uniform(fleet, m: int) -> ClusterAssignment:
    """Equal-size clusters over the C-sorted order (affine-grid C fleets).

    Falls back to the dynamic program when m does not divide N.
    """
    ar = as_param_arrays(fleet)
    n = len(ar)
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= N, got m={m}, N={n}")
    if not varying_parameters(ar) <= {"C"} or not _is_affine_grid(ar.C):
        raise WrongHeterogeneity("equal-size clustering needs an affine grid in C only; use optimal_clusters_dp")
    if n % m:
        return optimal_clusters_dp(ar, m)
    order = np.argsort(ar.C, kind="stable")
    size = n // m
    return _assignment(ar, order, [size * i for i in range(1, m)], "auto")


def interval_capacities(ar: ParamArrays, order: np.ndarray, method: str = "auto") -> np.ndarray:
    """cap[s, j]: capacity of the cluster order[s:j] at its own optimal alpha.

    Entries with j <= s are -inf.  C-only fleets sorted by C use the
    single-cluster closed form vectorised over all intervals.
    """
    n = len(order)
    cap = np.full((n + 1, n + 1), -np.inf)
    s_idx, j_idx = np.triu_indices(n + 1, k=1)
    c_sorted = ar.C[order]
    if method == "auto" and varying_parameters(ar) <= {"C"} and np.all(np.diff(c_sorted) >= 0):
        delta, eta = float(ar.delta[0]), float(ar.eta[0])
        cap[s_idx, j_idx] = (j_idx - s_idx) * delta * c_sorted[s_idx] / eta
        return cap
    for s, j in zip(s_idx, j_idx):
        cap[s, j] = optimal_alpha(_subset(ar, order[s:j]), method).capacity_star
    return cap


def optimal_clusters_dp(
    fleet,
    m: int,
    sort_key: str | Sequence[int] = "C",
    method: str = "auto",
) -> ClusterAssignment:
    """Best partition into m contiguous runs of the sorted fleet.

    best(j, i) = max_s best(s, i - 1) + cap(s, j); ties keep the earliest
    split.  ``method`` selects how each cluster's alpha is found
    (``auto`` uses closed forms where their hypothesis holds).
    """
    ar = as_param_arrays(fleet)
    n = len(ar)
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= N, got m={m}, N={n}")
    order = _sort_order(ar, sort_key)
    cap = interval_capacities(ar, order, method)
    best = cap[0].copy()
    choices = []
    for _ in range(1, m):
        total = best[:, None] + cap
        choice = np.argmax(total, axis=0)
        best = total[choice, np.arange(n + 1)]
        choices.append(choice)
    boundaries = []
    j = n
    for choice in reversed(choices):
        j = int(choice[j])
        boundaries.append(j)
    boundaries.reverse()
    return _assignment(ar, order, boundaries, method)


def optimal_clusters(fleet, m: int, method: str = "auto") -> ClusterAssignment:
    if method == "closed":
        return optimal_clusters_uniform(fleet, m)
    if method == "dp":
        return optimal_clusters_dp(fleet, m)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    try:
        return optimal_clusters_uniform(fleet, m)
    except WrongHeterogeneity:
        return optimal_clusters_dp(fleet, m)


# ---------------------------------------------------------------------------
# heterogeneity sweep


@dataclass(frozen=True)
class SweepRow:
    heterogeneity_level: float
    config: str
    capacity_kwh: float


def sweep_fleet(level: float, n: int, seed: int, template: TclParameters = REFERENCE_AC) -> list[TclParameters]:
    """Units with C uniform on C0 (1 +/- level); the same draws are reused at every level."""
    u = np.random.default_rng(seed).uniform(size=n)
    c = template.C * (1.0 + level * (2.0 * u - 1.0))
    return [template.with_(C=float(ck)) for ck in c]


def capacity_gap_sweep(
    levels: Iterable[float],
    m: int = 3,
    n: int = 1000,
    seed: int = 0,
    template: TclParameters = REFERENCE_AC,
) -> list[SweepRow]:
    """Necessary and sufficient capacities as C heterogeneity grows.

    ``necessary`` is the outer bound of the whole collection at the nominal
    rate (mean of 1/(R C^k)); it does not depend on how the sufficient
    model is built, so it is the common reference for every gap.
    """
    rows = []
    for level in levels:
        ar = as_param_arrays(sweep_fleet(level, n, seed, template))
        nominal = float(np.mean(ar.a))
        rows.append(SweepRow(level, "necessary", necessary_params(ar, nominal).capacity_C))
        rows.append(SweepRow(level, "sufficient_nominal_alpha", sufficient_params(ar, nominal)[0].capacity_C))
        rows.append(SweepRow(level, "sufficient_optimal_alpha", optimal_alpha(ar).capacity_star))
        rows.append(SweepRow(level, f"sufficient_optimal_alpha_m{m}", optimal_clusters_dp(ar, m).total_capacity))
    return rows


def sweep_gaps(rows: Sequence[SweepRow]) -> dict[float, dict[str, float]]:
    """Necessary minus sufficient capacity, per level and configuration."""
    out: dict[float, dict[str, float]] = {}
    by_level: dict[float, dict[str, float]] = {}
    for row in rows:
        by_level.setdefault(row.heterogeneity_level, {})[row.config] = row.capacity_kwh
    for level, configs in by_level.items():
        ref = configs["necessary"]
        out[level] = {k: ref - v for k, v in configs.items() if k != "necessary"}
    return out


def write_sweep_rows(rows: Sequence[SweepRow], fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(["heterogeneity_level", "config", "capacity_kwh"])
    for row in rows:
        writer.writerow([repr(float(row.heterogeneity_level)), row.config, repr(float(row.capacity_kwh))])


def write_sweep_csv(rows: Sequence[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        write_sweep_rows(rows, fh)

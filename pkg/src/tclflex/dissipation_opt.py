"""Choice of the battery dissipation rate that maximises sufficient capacity.

Each unit contributes a term c_k / (1 + |1 - alpha/a_k|) that rises for
alpha < a_k and falls for alpha > a_k.  Their minimum is therefore
quasiconcave, and its maximiser lies in [min a_k, max a_k].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np

from .battery_model import _checked_flex, sufficient_params, unit_energy_terms
from .errors import WrongHeterogeneity
from .fleet_sim import PARAM_NAMES, ParamArrays, as_param_arrays

Method = Literal["closed_form_C", "closed_form_delta", "numeric"]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class DissipationResult:
    alpha_star: float  # 1/h
    capacity_star: float  # kWh
    method: Method
    binding_unit: int = 0
    curve: Optional[tuple[np.ndarray, np.ndarray]] = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        out = {
            "alpha_star_per_h": self.alpha_star,
            "capacity_star_kwh": self.capacity_star,
            "method": self.method,
            "binding_unit": self.binding_unit,
        }
        if self.curve is not None:
            out["curve"] = {"alpha_per_h": self.curve[0].tolist(), "objective": self.curve[1].tolist()}
        return out


def _ratios(ar: ParamArrays, alpha: float) -> np.ndarray:
    _, up = _checked_flex(ar)
    return unit_energy_terms(ar, alpha) / up


def objective(fleet, alpha: float) -> float:
    """min_k f^k / (P_m^k - P_o^k): sufficient capacity per kW of upward headroom."""
    return float(np.min(_ratios(as_param_arrays(fleet), alpha)))


def binding_unit(fleet, alpha: float) -> int:
    """Lowest-index unit attaining the minimum."""
    return int(np.argmin(_ratios(as_param_arrays(fleet), alpha)))


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10, max_iter: int = 500) -> float:
    """Maximiser of a unimodal ``f`` on [lo, hi], to bracket width ``tol``."""
    if hi < lo:
        raise ValueError("empty bracket")
    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo < tol:
            break
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INV_PHI * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INV_PHI * (hi - lo)
            f1 = f(x1)
    return 0.5 * (lo + hi)


def _crossings(c: np.ndarray, a: np.ndarray, i: int, j: int) -> list[float]:
    """alpha values where a rising branch of term i meets a branch of term j."""
    ci, cj, ai, aj = c[i], c[j], a[i], a[j]
    out = []
    # rising i against falling j: ci / (2 - x/ai) = cj aj / x
    den = ci + cj * aj / ai
    if den > 0:
        out.append(2.0 * cj * aj / den)
    # both rising: ci (2 - x/aj) = cj (2 - x/ai)
    den = cj / ai - ci / aj
    if den != 0:
        out.append(2.0 * (cj - ci) / den)
    return out


def optimal_alpha_numeric(
    fleet,
    bracket: Optional[tuple[float, float]] = None,
    tol: float = 1e-10,
    curve_points: int = 0,
) -> DissipationResult:
    """Golden-section search on [min a, max a], followed by an exact polish.

    The polish compares the search result with the bracket ends, the
    nearest peaks a_k and the closed-form crossing of the two terms that
    bind on either side of it, so the returned alpha sits exactly on the
    kink where the maximum of a min of branches is attained.
    """
    ar = as_param_arrays(fleet)
    a = ar.a
    lo, hi = bracket if bracket is not None else (float(a.min()), float(a.max()))
    if not (0 < lo <= hi):
        raise ValueError(f"invalid bracket ({lo}, {hi})")
    _, up = _checked_flex(ar)
    c = ar.delta / (ar.b * up)

    def obj(x: float) -> float:
        return float(np.min(c / (1.0 + np.abs(1.0 - x / a))))

    if hi == lo:
        best = float(lo)
    else:
        guess = golden_section_max(obj, lo, hi, tol)
        candidates = [guess, lo, hi]
        nearest = np.argsort(np.abs(a - guess), kind="stable")[:8]
        candidates.extend(float(a[k]) for k in nearest)
        eps = max(tol, 1e-9 * guess)
        terms_left = c / (1.0 + np.abs(1.0 - max(lo, guess - eps) / a))
        terms_right = c / (1.0 + np.abs(1.0 - min(hi, guess + eps) / a))
        i, j = int(np.argmin(terms_left)), int(np.argmin(terms_right))
        if i != j:
            candidates.extend(_crossings(c, a, i, j))
            candidates.extend(_crossings(c, a, j, i))
        candidates = [x for x in candidates if lo <= x <= hi and math.isfinite(x)]
        values = [obj(x) for x in candidates]
        best = float(candidates[int(np.argmax(values))])
    phi, _ = sufficient_params(ar, best)
    curve = None
    if curve_points:
        grid = np.linspace(lo, hi, curve_points)
        curve = (grid, np.array([obj(x) for x in grid]))
    return DissipationResult(best, phi.capacity_C, "numeric", binding_unit(ar, best), curve)


def varying_parameters(fleet) -> set[str]:
    ar = as_param_arrays(fleet)
    return {name for name in PARAM_NAMES if not np.all(getattr(ar, name) == getattr(ar, name)[0])}


def optimal_alpha_C_hetero(fleet) -> DissipationResult:
    """Closed form when only the thermal capacitance differs between units."""
    ar = as_param_arrays(fleet)
    extra = varying_parameters(ar) - {"C"}
    if extra:
        raise WrongHeterogeneity(f"parameters {sorted(extra)} also vary; use optimal_alpha_numeric")
    _checked_flex(ar)
    k = int(np.argmin(ar.C))
    c_min, r, delta, eta = (float(x) for x in (ar.C[k], ar.R[0], ar.delta[0], ar.eta[0]))
    return DissipationResult(1.0 / (r * c_min), len(ar) * delta * c_min / eta, "closed_form_C", k)


def optimal_alpha_delta_hetero(fleet) -> DissipationResult:
    """Closed form when only the dead-band half-width differs between units."""
    ar = as_param_arrays(fleet)
    extra = varying_parameters(ar) - {"delta"}
    if extra:
        raise WrongHeterogeneity(f"parameters {sorted(extra)} also vary; use optimal_alpha_numeric")
    _checked_flex(ar)
    k = int(np.argmin(ar.delta))
    c, r, d_min, eta = (float(x) for x in (ar.C[0], ar.R[0], ar.delta[k], ar.eta[0]))
    return DissipationResult(1.0 / (r * c), len(ar) * c * d_min / eta, "closed_form_delta", k)


def optimal_alpha(fleet, method: str = "auto") -> DissipationResult:
    """Dispatch to a closed form when its hypothesis holds (``auto``/``closed``)."""
    if method == "numeric":
        return optimal_alpha_numeric(fleet)
    varying = varying_parameters(fleet)
    if varying <= {"C"}:
        return optimal_alpha_C_hetero(fleet)
    if varying <= {"delta"}:
        return optimal_alpha_delta_hetero(fleet)
    if method == "closed":
        raise WrongHeterogeneity(f"no closed form for heterogeneity in {sorted(varying)}")
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    return optimal_alpha_numeric(fleet)


def mixed_hetero_bounds(fleet) -> tuple[float, float]:
    """Approximate (capacity lower bound, alpha upper bound) when C and Delta both vary."""
    ar = as_param_arrays(fleet)
    extra = varying_parameters(ar) - {"C", "delta"}
    if extra:
        raise WrongHeterogeneity(f"parameters {sorted(extra)} also vary")
    c_min = float(ar.C.min())
    return len(ar) * c_min * float(ar.delta.min()) / float(ar.eta[0]), 1.0 / (float(ar.R[0]) * c_min)

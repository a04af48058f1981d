"""Analytic reorder points from lead-time demand and service-level/cost curves."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ._fmt import num
from .distfit import Distribution
from .simcore import (
    CostRates,
    DemandSource,
    InventoryPolicy,
    LeadTimeModel,
    SimConfig,
    replicate,
)

DEFAULT_ALPHAS = (0.50, 0.70, 0.80, 0.90, 0.95, 0.98, 0.99, 0.9999)
CAP_FACTOR = 10
CAP_REFERENCE_ALPHA = 0.99
MOMENT_TOL = 1e-9


@dataclass(frozen=True)
class LeadTimeDemand:
    mean: float
    variance: float
    matched: Distribution
    fallback_used: bool


@dataclass(frozen=True)
class ServiceCurvePoint:
    alpha: float
    rop: int
    capped: bool
    total_cost_mean: float
    total_cost_ci: float
    holding: float
    ordering: float
    shortage: float
    fill_rate: float
    cycle_service_level: float


def _moment_match(family: str, mean: float, var: float) -> Distribution | None:
    """Same-family member with the given mean and variance, if one exists."""
    if family == "normal":
        return Distribution("normal", (mean, math.sqrt(var)))
    if family == "lognormal" and mean > 0:
        s2 = math.log1p(var / mean ** 2)
        return Distribution("lognormal", (math.log(mean) - s2 / 2, math.sqrt(s2)))
    if family == "gamma" and mean > 0 and var > 0:
        return Distribution("gamma", (mean ** 2 / var, var / mean))
    if family == "uniform":
        half = math.sqrt(3 * var)
        return Distribution("uniform", (mean - half, mean + half))
    if family == "poisson" and math.isclose(var, mean, rel_tol=MOMENT_TOL, abs_tol=0):
        return Distribution("poisson", (mean,))
    if family == "exponential" and math.isclose(var, mean ** 2, rel_tol=MOMENT_TOL, abs_tol=0):
        return Distribution("exponential", (mean,))
    return None


def lead_time_demand(demand: Distribution, a: float) -> LeadTimeDemand:
    """Scale per-period demand to ``a`` periods: mean times a, variance times a squared.

    The result keeps the input family when that family can carry both
    target moments, otherwise a normal with those moments is used and
    ``fallback_used`` is set.
    """
    if not a > 0:
        raise ValueError(f"lead time must be positive, got {a}")
    m, v = demand.mean(), demand.var()
    if not (math.isfinite(m) and math.isfinite(v)):
        raise ValueError("demand distribution needs finite mean and variance")
    mean, var = a * m, a * a * v
    matched = _moment_match(demand.family, mean, var)
    if matched is None:
        return LeadTimeDemand(mean, var, Distribution("normal", (mean, math.sqrt(var))), True)
    return LeadTimeDemand(mean, var, matched, False)


def quantile(ltd: LeadTimeDemand, alpha: float) -> float:
    """Unrounded reorder point F^-1(alpha)."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return ltd.matched.ppf(alpha)


def rop_for_alpha(ltd: LeadTimeDemand, alpha: float) -> int:
    """Whole-unit reorder point, always rounded up, never below zero."""
    q = quantile(ltd, alpha)
    return max(0, math.ceil(q))


def service_curve(
    ltd: LeadTimeDemand,
    demand_source: DemandSource,
    lead_time_model: LeadTimeModel,
    costs: CostRates,
    roq: int,
    config: SimConfig,
    reps: int,
    alphas: Sequence[float] = DEFAULT_ALPHAS,
) -> list[ServiceCurvePoint]:
    """Simulated cost at the analytic reorder point of every service level.

    All points share ``config.seed`` so they see identical demand paths. A
    reorder point above ``CAP_FACTOR`` times the 0.99-level point is clipped
    there and flagged.
    """
    alphas = sorted(set(alphas))
    if not alphas:
        raise ValueError("need at least one service level")
    cap = CAP_FACTOR * max(1, rop_for_alpha(ltd, CAP_REFERENCE_ALPHA))
    points = []
    for alpha in alphas:
        rop = rop_for_alpha(ltd, alpha)
        capped = rop > cap
        if capped:
            rop = cap
        s = replicate(InventoryPolicy(rop, roq), demand_source, lead_time_model, costs, config, reps)
        points.append(ServiceCurvePoint(
            alpha, rop, capped, s.total_cost_mean, s.total_cost_ci,
            s.mean["holding_cost"], s.mean["ordering_cost"], s.mean["shortage_cost"],
            s.mean["fill_rate"], s.mean["cycle_service_level"],
        ))
    return points


def write_curve_csv(path: str | Path, rows: Sequence[tuple[str, ServiceCurvePoint]]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["item_id", "alpha", "rop", "capped", "total_cost_mean",
                      "holding", "ordering", "shortage", "ci_halfwidth"])
        for item_id, p in rows:
            out.writerow([item_id, num(p.alpha), p.rop, int(p.capped), num(p.total_cost_mean),
                          num(p.holding), num(p.ordering), num(p.shortage), num(p.total_cost_ci)])

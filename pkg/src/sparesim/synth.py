"""Deterministic synthetic spare-parts population with a planted Pareto shape.

A small "vital" minority gets high criterion scores and heavy consumption;
everything else scores low and moves slowly, and some items are stagnant.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

from . import rng as rngmod
from ._fmt import num
from .classify import CRITERIA, ItemRecord, write_items_csv
from .distfit import Distribution
from .simcore import ConstantLeadTime, CostRates, DistributionDemand, SimConfig
from .svclevel import DEFAULT_ALPHAS, LeadTimeDemand, ServiceCurvePoint, lead_time_demand, service_curve

VITAL_SHARE = 0.15
STAGNANT_SHARE = 0.10
YEARS = 9
LEAD_SAMPLES = 5


def synth_items(count: int, seed: int) -> tuple[list[ItemRecord], list[tuple[str, float]]]:
    """Items plus ``(id, lead_time_months)`` samples."""
    if count < 1:
        raise ValueError("count must be at least 1")
    g = rngmod.stream(seed, rngmod.SYNTH)
    n_vital = max(1, math.ceil(VITAL_SHARE * count))
    vital = set(g.permutation(count)[:n_vital].tolist())
    if count == 1:
        vital = {0}
    width = len(str(count))
    items, lead_rows = [], []
    for i in range(count):
        item_id = f"SP{i + 1:0{width}d}"
        is_vital = i in vital
        if is_vital:
            scores = g.uniform(6.0, 10.0, len(CRITERIA))
            rate = g.uniform(20.0, 200.0)
            price = round(float(g.lognormal(5.0, 0.6)), 2)
            lead = round(float(g.uniform(1.0, 4.0)), 1)
        else:
            scores = g.uniform(0.1, 0.8, len(CRITERIA))
            rate = 0.0 if g.random() < STAGNANT_SHARE else g.uniform(0.2, 8.0)
            price = round(float(g.lognormal(3.0, 0.8)), 2)
            lead = round(float(g.uniform(0.5, 6.0)), 1)
        history = tuple(float(v) for v in g.poisson(rate, YEARS))
        items.append(ItemRecord(
            id=item_id,
            criterion_values=tuple(round(float(s), 2) for s in scores),
            annual_consumption=history,
            unit_price=price,
            lead_time_months=lead,
            holding=round(0.2 * price, 4),
            ordering=50.0,
            shortage=round(4.0 * price, 4),
        ))
        shape = 8.0
        for s in g.gamma(shape, lead / shape, LEAD_SAMPLES):
            lead_rows.append((item_id, max(0.1, round(float(s), 2))))
    return items, lead_rows


DEFAULT_PIPELINE = {
    "items": "items.csv",
    "lead_times": "lead_times.csv",
    "cuts": [0.8, 0.95],
    "optimizer": {"screen_reps": 10, "refine_reps": 40},
    "simulation": {"horizon_years": 10},
    "curve": {"reps": 50},
    "out": "out",
}


def write_dataset(out_dir: str | Path, count: int, seed: int) -> dict[str, Path]:
    """Write ``items.csv``, ``lead_times.csv`` and a runnable ``config.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    items, lead_rows = synth_items(count, seed)
    paths = {"items": out / "items.csv", "lead_times": out / "lead_times.csv", "config": out / "config.json"}
    write_items_csv(paths["items"], items)
    with open(paths["lead_times"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "lead_time_months"])
        for item_id, lt in lead_rows:
            w.writerow([item_id, num(lt)])
    paths["config"].write_text(json.dumps({**DEFAULT_PIPELINE, "seed": seed}, indent=2) + "\n")
    return paths


@dataclass(frozen=True)
class CurveDemo:
    """A single item for showing cost against service level.

    Monthly demand is normal(20, 5^2), lead time is a constant 2 months and a
    lost unit costs 20 times a unit-year of holding. The order quantity is
    one year of demand.
    """

    demand: Distribution = Distribution("normal", (20.0, 5.0))
    lead_time_months: float = 2.0
    costs: CostRates = CostRates(holding=1.0, ordering=50.0, shortage=20.0)
    roq: int = 240
    horizon_years: int = 10

    def ltd(self) -> LeadTimeDemand:
        return lead_time_demand(self.demand, self.lead_time_months)

    def curve(self, reps: int, seed: int = 0, alphas=DEFAULT_ALPHAS) -> list[ServiceCurvePoint]:
        return service_curve(self.ltd(), DistributionDemand(self.demand, period_months=1),
                             ConstantLeadTime(self.lead_time_months), self.costs, self.roq,
                             SimConfig(self.horizon_years, None, seed), reps, alphas)

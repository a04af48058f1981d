"""Roulette-wheel demand synthesis from annual consumption history."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MONTHS = 12


class DemandGenError(ValueError):
    pass


@dataclass(frozen=True)
class ConsumptionHistogram:
    edges: tuple[float, ...]
    counts: tuple[int, ...]

    @property
    def probabilities(self) -> np.ndarray:
        c = np.asarray(self.counts, dtype=float)
        return c / c.sum()

    @property
    def num_bins(self) -> int:
        return len(self.counts)

    def bounds(self, b: int) -> tuple[int, int]:
        """Integer lattice bounds of bin ``b``, edges rounded outward."""
        return math.floor(self.edges[b]), math.ceil(self.edges[b + 1])


@dataclass(frozen=True)
class MonthlyDemandSchedule:
    quantities: tuple[int, ...]

    @property
    def annual_total(self) -> int:
        return sum(self.quantities)


def from_counts(edges: Sequence[float], counts: Sequence[int]) -> ConsumptionHistogram:
    if len(edges) != len(counts) + 1:
        raise DemandGenError("need exactly one more edge than counts")
    if any(c < 0 for c in counts) or sum(counts) <= 0:
        raise DemandGenError("counts must be nonnegative with a positive total")
    if any(b < a for a, b in zip(edges, edges[1:])):
        raise DemandGenError("edges must be ascending")
    return ConsumptionHistogram(tuple(float(e) for e in edges), tuple(int(c) for c in counts))


def sturges_bins(values: Sequence[float]) -> int:
    n = len(values)
    return max(1, min(math.ceil(1 + math.log2(n)), len(set(values))))


def build_histogram(annual_series: Sequence[float], num_bins: int | None = None) -> ConsumptionHistogram:
    """Equal-width histogram over [min, max]; ``None`` picks Sturges' count.

    Values are rounded half-to-even to whole units first.
    """
    x = np.round(np.asarray(annual_series, dtype=float))
    if x.size == 0:
        raise DemandGenError("empty consumption series")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise DemandGenError("consumption must be finite and nonnegative")
    if num_bins is None:
        num_bins = sturges_bins(x.tolist())
    if num_bins <= 0:
        raise DemandGenError("num_bins must be positive")
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return ConsumptionHistogram((lo, hi), (int(x.size),))
    counts, edges = np.histogram(x, bins=num_bins, range=(lo, hi))
    return ConsumptionHistogram(tuple(float(e) for e in edges), tuple(int(c) for c in counts))


def spin(h: ConsumptionHistogram, rng: np.random.Generator) -> tuple[int, int]:
    """One turn of the wheel: pick a bin by its probability, then a quantity in it."""
    cum = np.cumsum(h.counts)
    u = rng.random() * cum[-1]
    b = int(np.searchsorted(cum, u, side="right"))
    lo, hi = h.bounds(b)
    return b, int(rng.integers(lo, hi + 1))


def monthly_spread(annual_qty: int, rng: np.random.Generator) -> MonthlyDemandSchedule:
    """Scatter ``annual_qty`` units over the months, each unit to a uniform month."""
    if annual_qty < 0:
        raise DemandGenError("annual quantity must be nonnegative")
    q = rng.multinomial(int(annual_qty), [1.0 / MONTHS] * MONTHS)
    return MonthlyDemandSchedule(tuple(int(v) for v in q))


def write_schedule_csv(path: str | Path, rows: Iterable[tuple[str, int, MonthlyDemandSchedule]]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["item_id", "year", "month", "qty"])
        for item_id, year, sched in rows:
            for month, q in enumerate(sched.quantities, start=1):
                out.writerow([item_id, year, month, q])

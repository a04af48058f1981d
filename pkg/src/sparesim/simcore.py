"""Monthly discrete-event simulation of a continuous-review (ROP, ROQ) policy.

Each month runs, in order: due deliveries arrive, demand draws down stock
(anything unmet is a lost sale), then orders of ``roq`` units are placed while
the inventory position (on hand plus on order) is at or below ``rop``.
Holding is charged on the stock left at each year end, or on the monthly
average when ``holding_mode="average"``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
from scipy import stats

from . import rng as rngmod
from ._fmt import num
from .demandgen import MONTHS, ConsumptionHistogram, monthly_spread, spin
from .distfit import Distribution

HOLDING_MODES = ("year_end", "average")


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class InventoryPolicy:
    rop: int
    roq: int

    def __post_init__(self):
        if self.rop < 0:
            raise ValueError(f"rop must be nonnegative, got {self.rop}")
        if self.roq < 1:
            raise ValueError(f"roq must be at least 1, got {self.roq}")


@dataclass(frozen=True)
class CostRates:
    holding: float  # per unit per year
    ordering: float  # per order
    shortage: float  # per unit short

    def __post_init__(self):
        if min(self.holding, self.ordering, self.shortage) < 0:
            raise ValueError("cost rates must be nonnegative")


@dataclass(frozen=True)
class SimConfig:
    horizon_years: int = 10
    initial_on_hand: int | None = None  # None -> rop + roq
    seed: int = 0
    warmup_years: int = 0
    holding_mode: str = "year_end"

    def __post_init__(self):
        if self.horizon_years < 1:
            raise ValueError("horizon_years must be at least 1")
        if not 0 <= self.warmup_years < self.horizon_years:
            raise ValueError("warmup_years must be in [0, horizon_years)")
        if self.initial_on_hand is not None and self.initial_on_hand < 0:
            raise ValueError("initial_on_hand must be nonnegative")
        if self.holding_mode not in HOLDING_MODES:
            raise ValueError(f"holding_mode must be one of {HOLDING_MODES}")


@dataclass(frozen=True)
class SimOutcome:
    total_cost: float
    holding_cost: float
    ordering_cost: float
    shortage_cost: float
    units_demanded: int
    units_met: int
    units_short: int
    orders_placed: int
    cycles: int
    stockout_cycles: int
    fill_rate: float
    cycle_service_level: float
    avg_on_hand: float
    initial_on_hand: int = 0
    units_delivered: int = 0
    final_on_hand: int = 0
    orders_delivered: int = 0
    final_on_order: int = 0


OUTCOME_FIELDS = tuple(f.name for f in fields(SimOutcome))


@dataclass(frozen=True)
class TraceEvent:
    t_month: int
    event: str  # arrival | demand | order | year_end
    qty: int
    on_hand: int
    on_order: int
    cost_delta: float


# --- demand sources --------------------------------------------------------


class DemandSource(Protocol):
    def monthly(self, years: int, rng: np.random.Generator) -> np.ndarray:
        """Integer demand for ``years * 12`` consecutive months."""


@dataclass(frozen=True)
class ScheduleDemand:
    """Fixed month-by-month demand, e.g. a replayed history."""

    quantities: tuple[int, ...]

    def monthly(self, years, rng):
        need = years * MONTHS
        if len(self.quantities) < need:
            raise SimulationError(
                f"demand schedule exhausted: {len(self.quantities)} months for a {need}-month horizon"
            )
        return np.asarray(self.quantities[:need], dtype=np.int64)


@dataclass(frozen=True)
class RouletteDemand:
    """Annual draws by roulette wheel over a history, spread uniformly over months."""

    histogram: ConsumptionHistogram

    def monthly(self, years, rng):
        out = []
        for _ in range(years):
            _, qty = spin(self.histogram, rng)
            out.extend(monthly_spread(qty, rng).quantities)
        return np.asarray(out, dtype=np.int64)


@dataclass(frozen=True)
class DistributionDemand:
    """Demand sampled from a fitted distribution.

    ``period_months=12`` treats draws as annual totals spread over months;
    ``period_months=1`` samples each month directly. Draws are rounded to the
    nearest unit and floored at zero.
    """

    dist: Distribution
    period_months: int = 12

    def monthly(self, years, rng):
        if self.period_months == 1:
            draws = self.dist.sample(rng, years * MONTHS)
            return np.maximum(np.rint(draws), 0).astype(np.int64)
        if self.period_months != MONTHS:
            raise SimulationError("period_months must be 1 or 12")
        out = []
        for _ in range(years):
            qty = max(0, int(np.rint(self.dist.sample(rng))))
            out.extend(monthly_spread(qty, rng).quantities)
        return np.asarray(out, dtype=np.int64)


# --- lead-time models ------------------------------------------------------


class LeadTimeModel(Protocol):
    def sample(self, rng: np.random.Generator) -> float:
        """Lead time in months (fractional values allowed)."""

    def mean(self) -> float: ...


@dataclass(frozen=True)
class ConstantLeadTime:
    months: float

    def sample(self, rng):
        return self.months

    def mean(self):
        return self.months


@dataclass(frozen=True)
class DistributionLeadTime:
    dist: Distribution

    def sample(self, rng):
        return float(self.dist.sample(rng))

    def mean(self):
        return self.dist.mean()


@dataclass(frozen=True)
class EmpiricalLeadTime:
    samples: tuple[float, ...]

    def sample(self, rng):
        return float(self.samples[int(rng.integers(len(self.samples)))])

    def mean(self):
        return float(np.mean(self.samples))


def lead_months(value: float) -> int:
    """Round a sampled lead time to whole months, halves up."""
    if not value >= 0:
        raise SimulationError(f"lead-time model produced {value}; negative lead times are a model error")
    return math.floor(value + 0.5)


# --- engine ----------------------------------------------------------------


def simulate(
    policy: InventoryPolicy,
    demand_source: DemandSource,
    lead_time_model: LeadTimeModel,
    costs: CostRates,
    config: SimConfig,
    trace: list | None = None,
) -> SimOutcome:
    """Run one replication; append :class:`TraceEvent` rows to ``trace`` if given."""
    horizon = config.horizon_years * MONTHS
    warmup = config.warmup_years * MONTHS
    demand_rng = rngmod.stream(config.seed, rngmod.DEMAND)
    lead_rng = rngmod.stream(config.seed, rngmod.LEAD_TIME)
    demand = demand_source.monthly(config.horizon_years, demand_rng)
    if np.any(demand < 0):
        raise SimulationError("demand source produced negative demand")
    demand = demand.tolist()

    rop, roq = policy.rop, policy.roq
    initial = rop + roq if config.initial_on_hand is None else config.initial_on_hand
    on_hand = initial
    on_order = 0
    # outstanding orders: [due_month, stockout_seen]
    pipeline: list[list] = []
    holding = ordering = shortage = 0.0
    demanded = met = short = 0
    placed = delivered_orders = delivered_units = 0
    cycles = stockout_cycles = 0
    on_hand_sum = 0
    average_mode = config.holding_mode == "average"
    record = trace is not None

    def close_cycle(seen: bool, t: int) -> None:
        nonlocal cycles, stockout_cycles
        if t >= warmup:
            cycles += 1
            stockout_cycles += seen

    for t in range(horizon):
        counted = t >= warmup
        # 1. deliveries due this month
        if pipeline and pipeline[0][0] <= t:
            still = []
            for order in pipeline:
                if order[0] <= t:
                    on_hand += roq
                    on_order -= roq
                    delivered_orders += 1
                    delivered_units += roq
                    close_cycle(order[1], t)
                    if record:
                        trace.append(TraceEvent(t, "arrival", roq, on_hand, on_order, 0.0))
                else:
                    still.append(order)
            pipeline = still

        # 2. demand, lost sales
        d = demand[t]
        if d > 0:
            served = min(d, on_hand)
            lost = d - served
            on_hand -= served
            delta = 0.0
            if lost:
                for order in pipeline:
                    order[1] = True
            if counted:
                demanded += d
                met += served
                short += lost
                delta = lost * costs.shortage
                shortage += delta
            if record:
                trace.append(TraceEvent(t, "demand", d, on_hand, on_order, delta))

        # 3. reorder while position <= rop
        while on_hand + on_order <= rop:
            lt = lead_months(lead_time_model.sample(lead_rng))
            placed += counted
            delta = costs.ordering if counted else 0.0
            ordering += delta
            on_order += roq
            if record:
                trace.append(TraceEvent(t, "order", roq, on_hand, on_order, delta))
            if lt == 0:
                on_hand += roq
                on_order -= roq
                delivered_orders += 1
                delivered_units += roq
                close_cycle(False, t)
                if record:
                    trace.append(TraceEvent(t, "arrival", roq, on_hand, on_order, 0.0))
            else:
                pipeline.append([t + lt, False])
                pipeline.sort(key=lambda o: o[0])

        # 4. holding
        if counted:
            on_hand_sum += on_hand
            if average_mode:
                holding += on_hand * costs.holding / MONTHS
        if t % MONTHS == MONTHS - 1:
            delta = 0.0
            if counted and not average_mode:
                delta = on_hand * costs.holding
                holding += delta
            if record:
                trace.append(TraceEvent(t, "year_end", on_hand, on_hand, on_order,
                                        delta if not average_mode else 0.0))

    fill = met / demanded if demanded else 1.0
    csl = 1.0 - stockout_cycles / cycles if cycles else 1.0
    return SimOutcome(
        total_cost=holding + ordering + shortage,
        holding_cost=holding,
        ordering_cost=ordering,
        shortage_cost=shortage,
        units_demanded=demanded,
        units_met=met,
        units_short=short,
        orders_placed=placed,
        cycles=cycles,
        stockout_cycles=stockout_cycles,
        fill_rate=fill,
        cycle_service_level=csl,
        avg_on_hand=on_hand_sum / (horizon - warmup),
        initial_on_hand=initial,
        units_delivered=delivered_units,
        final_on_hand=on_hand,
        orders_delivered=delivered_orders,
        final_on_order=on_order,
    )


def measured_service_levels(outcome: SimOutcome) -> tuple[float, float]:
    """(fill rate, cycle service level) from the raw counters."""
    fill = outcome.units_met / outcome.units_demanded if outcome.units_demanded else 1.0
    csl = 1.0 - outcome.stockout_cycles / outcome.cycles if outcome.cycles else 1.0
    return fill, csl


# --- replication -----------------------------------------------------------


@dataclass(frozen=True)
class ReplicationSummary:
    outcomes: tuple[SimOutcome, ...]
    mean: dict
    std: dict
    ci_halfwidth: dict
    ci_defined: bool

    @property
    def r(self) -> int:
        return len(self.outcomes)

    @property
    def total_cost_mean(self) -> float:
        return self.mean["total_cost"]

    @property
    def total_cost_ci(self) -> float:
        return self.ci_halfwidth["total_cost"]


def replication_seed(seed: int, i: int) -> int:
    return rngmod.derive_seed(seed, "replication", i)


def summarize(outcomes: Sequence[SimOutcome]) -> ReplicationSummary:
    r = len(outcomes)
    table = np.array([[getattr(o, f) for f in OUTCOME_FIELDS] for o in outcomes], dtype=float)
    mean = table.mean(axis=0)
    if r > 1:
        std = table.std(axis=0, ddof=1)
        half = stats.t.ppf(0.975, r - 1) * std / math.sqrt(r)
    else:
        std = np.zeros(len(OUTCOME_FIELDS))
        half = np.zeros(len(OUTCOME_FIELDS))
    return ReplicationSummary(
        tuple(outcomes),
        dict(zip(OUTCOME_FIELDS, mean.tolist())),
        dict(zip(OUTCOME_FIELDS, std.tolist())),
        dict(zip(OUTCOME_FIELDS, half.tolist())),
        r > 1,
    )


def replicate(
    policy: InventoryPolicy,
    demand_source: DemandSource,
    lead_time_model: LeadTimeModel,
    costs: CostRates,
    config: SimConfig,
    r: int,
) -> ReplicationSummary:
    """``r`` independent runs; run ``i`` is seeded from ``(config.seed, i)``.

    With ``r == 1`` the spread statistics are reported as zero and
    ``ci_defined`` is False.
    """
    if r < 1:
        raise ValueError("replication count must be at least 1")
    outcomes = []
    for i in range(r):
        cfg = SimConfig(config.horizon_years, config.initial_on_hand,
                        replication_seed(config.seed, i), config.warmup_years, config.holding_mode)
        outcomes.append(simulate(policy, demand_source, lead_time_model, costs, cfg))
    return summarize(outcomes)


# --- export ----------------------------------------------------------------


def write_trace_csv(path: str | Path, trace: Sequence[TraceEvent]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(trace_csv(trace))


def trace_csv(trace: Sequence[TraceEvent]) -> str:
    lines = ["t_month,event,qty,on_hand,on_order,cost_delta"]
    for e in trace:
        lines.append(f"{e.t_month},{e.event},{e.qty},{e.on_hand},{e.on_order},{num(e.cost_delta)}")
    return "\n".join(lines) + "\n"


OUTCOME_CSV_FIELDS = ("total_cost", "holding_cost", "ordering_cost", "shortage_cost",
                      "fill_rate", "cycle_service_level", "avg_on_hand", "orders_placed",
                      "units_demanded", "units_short")


def write_outcome_csv(path: str | Path, rows: Sequence[tuple[str, InventoryPolicy, ReplicationSummary]]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["item_id", "rop", "roq", "replications",
                      *(f"{f}_mean" for f in OUTCOME_CSV_FIELDS), "total_cost_ci_halfwidth"])
        for item_id, policy, summary in rows:
            out.writerow([item_id, policy.rop, policy.roq, summary.r,
                          *(num(summary.mean[f]) for f in OUTCOME_CSV_FIELDS),
                          num(summary.total_cost_ci)])

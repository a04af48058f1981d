"""Simulation-optimization over the (ROP, ROQ) lattice.

Phase 1 screens a coarse grid; phase 2 runs neighbourhood descent from the
best grid point. Every evaluation in a run gets the same seed, so each
candidate sees the same replication streams (common random numbers) and a
larger refine budget only extends those streams.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

from . import rng as rngmod
from ._fmt import num
from .simcore import InventoryPolicy

EXHAUSTIVE_CAP = 10_000


class OptimizationError(RuntimeError):
    pass


class EvaluationError(OptimizationError):
    def __init__(self, policy: InventoryPolicy, cause: BaseException):
        super().__init__(f"evaluation failed at rop={policy.rop}, roq={policy.roq}: {cause}")
        self.policy = policy


@dataclass(frozen=True)
class Estimate:
    mean: float
    ci_halfwidth: float = 0.0


Evaluator = Callable[[InventoryPolicy, int, int], Union[float, Estimate]]


@dataclass(frozen=True)
class SearchSpace:
    rop_range: tuple[int, int]
    roq_range: tuple[int, int]

    def __post_init__(self):
        (r0, r1), (q0, q1) = self.rop_range, self.roq_range
        if r0 < 0 or q0 < 1:
            raise OptimizationError("rop must start at >= 0 and roq at >= 1")
        if r1 < r0 or q1 < q0:
            raise OptimizationError(f"empty search space {self.rop_range} x {self.roq_range}")

    @property
    def size(self) -> int:
        return (self.rop_range[1] - self.rop_range[0] + 1) * (self.roq_range[1] - self.roq_range[0] + 1)

    def __contains__(self, p: InventoryPolicy) -> bool:
        return (self.rop_range[0] <= p.rop <= self.rop_range[1]
                and self.roq_range[0] <= p.roq <= self.roq_range[1])

    def default_steps(self) -> tuple[int, int]:
        return (max(1, (self.rop_range[1] - self.rop_range[0]) // 10),
                max(1, (self.roq_range[1] - self.roq_range[0]) // 10))


@dataclass(frozen=True)
class EvaluationRecord:
    policy: InventoryPolicy
    phase: str
    reps: int
    seed: int
    mean_cost: float
    ci_halfwidth: float


@dataclass(frozen=True)
class OptimizationResult:
    best: InventoryPolicy
    best_cost_mean: float
    best_cost_ci: float
    evaluations: tuple[EvaluationRecord, ...] = field(repr=False)

    @property
    def evaluation_count(self) -> int:
        return len(self.evaluations)


@dataclass(frozen=True)
class OptimizerConfig:
    screen_reps: int = 20
    refine_reps: int = 100
    grid_step: int | tuple[int, int] | None = None  # None -> range // 10 per axis
    seed: int = 0


class _Session:
    """Caches evaluations by (policy, reps) and keeps the audit log."""

    def __init__(self, space: SearchSpace, evaluator: Evaluator, seed: int):
        self.space = space
        self.evaluator = evaluator
        self.seed = seed
        self.cache: dict[tuple[InventoryPolicy, int], Estimate] = {}
        self.log: list[EvaluationRecord] = []

    def __call__(self, policy: InventoryPolicy, reps: int, phase: str) -> Estimate:
        if policy not in self.space:
            raise OptimizationError(f"{policy} lies outside the search space")
        key = (policy, reps)
        if key not in self.cache:
            try:
                value = self.evaluator(policy, reps, self.seed)
            except Exception as exc:
                raise EvaluationError(policy, exc) from exc
            est = value if isinstance(value, Estimate) else Estimate(float(value))
            self.cache[key] = est
            self.log.append(EvaluationRecord(policy, phase, reps, self.seed, est.mean, est.ci_halfwidth))
        return self.cache[key]


def _better(a: tuple[Estimate, InventoryPolicy], b: tuple[Estimate, InventoryPolicy]) -> bool:
    """Strictly lower mean, ties to lower rop then lower roq."""
    return (a[0].mean, a[1].rop, a[1].roq) < (b[0].mean, b[1].rop, b[1].roq)


def _axis(lo: int, hi: int, step: int) -> list[int]:
    pts = list(range(lo, hi + 1, step))
    if pts[-1] != hi:
        pts.append(hi)
    return pts


def optimize(space: SearchSpace, evaluator: Evaluator, config: OptimizerConfig = OptimizerConfig()) -> OptimizationResult:
    if config.screen_reps < 1 or config.refine_reps < 1:
        raise OptimizationError("replication budgets must be positive")
    if config.grid_step is None:
        steps = space.default_steps()
    elif isinstance(config.grid_step, int):
        steps = (config.grid_step, config.grid_step)
    else:
        steps = tuple(config.grid_step)
    if min(steps) < 1:
        raise OptimizationError("grid_step must be positive")
    session = _Session(space, evaluator, rngmod.derive_seed(config.seed, rngmod.OPTIMIZE))

    best = None
    for rop in _axis(*space.rop_range, steps[0]):
        for roq in _axis(*space.roq_range, steps[1]):
            p = InventoryPolicy(rop, roq)
            cand = (session(p, config.screen_reps, "screen"), p)
            if best is None or _better(cand, best):
                best = cand

    current = (session(best[1], config.refine_reps, "refine"), best[1])
    moves = sorted({(d, 0) for d in (1, -1, steps[0], -steps[0])}
                   | {(0, d) for d in (1, -1, steps[1], -steps[1])})
    while True:
        nxt = None
        for dr, dq in moves:
            p = current[1]
            cand_policy = (p.rop + dr, p.roq + dq)
            if cand_policy[0] < 0 or cand_policy[1] < 1:
                continue
            q = InventoryPolicy(*cand_policy)
            if q not in space:
                continue
            cand = (session(q, config.refine_reps, "refine"), q)
            if nxt is None or _better(cand, nxt):
                nxt = cand
        if nxt is None or not nxt[0].mean < current[0].mean:
            break
        current = nxt
    return OptimizationResult(current[1], current[0].mean, current[0].ci_halfwidth, tuple(session.log))


def exhaustive(space: SearchSpace, evaluator: Evaluator, reps: int, seed: int,
               cap: int = EXHAUSTIVE_CAP) -> OptimizationResult:
    """Evaluate every lattice point with the same seed; ties to lower (rop, roq)."""
    if space.size > cap:
        raise OptimizationError(f"space has {space.size} points, above the cap of {cap}")
    session = _Session(space, evaluator, rngmod.derive_seed(seed, rngmod.OPTIMIZE))
    best = None
    for rop in range(space.rop_range[0], space.rop_range[1] + 1):
        for roq in range(space.roq_range[0], space.roq_range[1] + 1):
            p = InventoryPolicy(rop, roq)
            cand = (session(p, reps, "exhaustive"), p)
            if best is None or _better(cand, best):
                best = cand
    return OptimizationResult(best[1], best[0].mean, best[0].ci_halfwidth, tuple(session.log))


def write_evaluations_csv(path: str | Path, result: OptimizationResult) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["rop", "roq", "phase", "reps", "mean_cost", "ci_halfwidth"])
        for e in result.evaluations:
            out.writerow([e.policy.rop, e.policy.roq, e.phase, e.reps,
                          num(e.mean_cost), num(e.ci_halfwidth)])


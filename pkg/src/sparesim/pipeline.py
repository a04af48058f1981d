"""Three-stage run over an item population.

Stage 1 classifies every item. Stage 2 fits demand and lead-time models for
class A only. Stage 3 optimizes (ROP, ROQ) and builds the service curve for
each of those items. An item that fails a stage is recorded with the stage
and reason; the run carries on with the rest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import platform
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy

from . import __version__
from . import rng as rngmod
from ._fmt import num
from .ahp import AHPError, PairwiseMatrix, compute_weights, consistency, load_pairwise, write_weights_csv
from .classify import (
    AbcAssignment,
    ClassifyError,
    ItemRecord,
    abc_classify,
    read_items_csv,
    score_items,
    write_classification_csv,
)
from .demandgen import build_histogram
from .distfit import FAMILIES, MIN_OBS, FitError, FitReport, select_best, write_fit_report_csv
from .optimizer import Estimate, OptimizerConfig, SearchSpace, optimize, write_evaluations_csv
from .simcore import (
    ConstantLeadTime,
    CostRates,
    DistributionDemand,
    DistributionLeadTime,
    EmpiricalLeadTime,
    InventoryPolicy,
    ReplicationSummary,
    RouletteDemand,
    SimConfig,
    SimulationError,
    replicate,
    write_outcome_csv,
)
from .svclevel import DEFAULT_ALPHAS, LeadTimeDemand, ServiceCurvePoint, lead_time_demand, rop_for_alpha, service_curve, write_curve_csv

log = logging.getLogger(__name__)

LEAD_TIME_FAMILIES = ("poisson", "exponential", "lognormal", "gamma", "uniform")
DEMAND_MODES = ("roulette", "fitted")


class ConfigError(ValueError):
    """Bad or unreadable configuration; raised before any stage runs."""


class StageError(RuntimeError):
    def __init__(self, stage: str, reason: str):
        super().__init__(f"{stage}: {reason}")
        self.stage = stage
        self.reason = reason


@dataclass(frozen=True)
class PipelineConfig:
    items: Path
    lead_times: Path | None = None
    ahp: Path | None = None
    weight_method: str = "eigenvector"
    cuts: tuple[float, float] = (0.80, 0.95)
    consumption_aggregation: str = "mean"
    demand_families: tuple[str, ...] = FAMILIES
    lead_time_families: tuple[str, ...] = LEAD_TIME_FAMILIES
    demand_mode: str = "roulette"
    default_lead_time_months: float = 2.0
    holding_rate: float = 0.2  # fraction of unit price per unit-year
    ordering_cost: float = 50.0
    shortage_rate: float = 4.0  # multiple of unit price per unit short
    rop_alpha: float = 0.9999  # upper end of the rop search range
    roq_factor: float = 2.0  # roq searched up to this many years of mean demand
    screen_reps: int = 20
    refine_reps: int = 100
    grid_step: int | None = None
    horizon_years: int = 10
    warmup_years: int = 0
    holding_mode: str = "year_end"
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    curve_reps: int = 100
    seed: int = 0
    out: Path = Path("out")
    figures: bool = True
    workers: int = 1

    @property
    def sim_config(self) -> SimConfig:
        return SimConfig(self.horizon_years, None, 0, self.warmup_years, self.holding_mode)


_SECTIONS = {
    "optimizer": {"screen_reps": "screen_reps", "refine_reps": "refine_reps", "grid_step": "grid_step"},
    "simulation": {"horizon_years": "horizon_years", "warmup_years": "warmup_years",
                   "holding_mode": "holding_mode"},
    "curve": {"alphas": "alphas", "reps": "curve_reps"},
    "costs": {"holding_rate": "holding_rate", "ordering": "ordering_cost", "shortage_rate": "shortage_rate"},
    "search": {"rop_alpha": "rop_alpha", "roq_factor": "roq_factor"},
}


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Read a JSON config; relative paths resolve against the config's folder."""
    doc: dict[str, Any] = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
        base = path.parent
    flat: dict[str, Any] = {}
    for key, value in doc.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"section {key!r} must be an object")
            for sub, v in value.items():
                if sub not in _SECTIONS[key]:
                    raise ConfigError(f"unknown key {key}.{sub}")
                flat[_SECTIONS[key][sub]] = v
        else:
            flat[key] = value
    flat.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = set(PipelineConfig.__dataclass_fields__)
    unknown = sorted(set(flat) - known)
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    if "items" not in flat:
        raise ConfigError("config must name an 'items' file")
    for key in ("items", "lead_times", "ahp", "out"):
        if flat.get(key) is not None:
            p = Path(flat[key])
            flat[key] = p if p.is_absolute() else base / p
    for key in ("cuts", "demand_families", "lead_time_families", "alphas"):
        if key in flat:
            flat[key] = tuple(flat[key])
    try:
        cfg = PipelineConfig(**flat)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    _check(cfg)
    return cfg


def _check(cfg: PipelineConfig) -> None:
    a, b = cfg.cuts
    if not 0 < a < b < 1:
        raise ConfigError(f"cuts must satisfy 0 < a < b < 1, got {cfg.cuts}")
    for fam in (*cfg.demand_families, *cfg.lead_time_families):
        if fam not in FAMILIES:
            raise ConfigError(f"unknown distribution family {fam!r}")
    if cfg.demand_mode not in DEMAND_MODES:
        raise ConfigError(f"demand_mode must be one of {DEMAND_MODES}")
    if min(cfg.screen_reps, cfg.refine_reps, cfg.curve_reps, cfg.workers) < 1:
        raise ConfigError("replication budgets and workers must be positive")
    if not all(0 < x < 1 for x in cfg.alphas) or not cfg.alphas:
        raise ConfigError("service levels must lie in (0, 1)")
    if not 0 < cfg.rop_alpha < 1:
        raise ConfigError("rop_alpha must lie in (0, 1)")
    if cfg.grid_step is not None and cfg.grid_step < 1:
        raise ConfigError("grid_step must be positive")
    try:
        cfg.sim_config
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_hash(cfg: PipelineConfig) -> str:
    doc = {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.__dict__.items()
           if k not in ("out", "workers", "figures")}
    for key in ("items", "lead_times", "ahp"):
        if getattr(cfg, key) is not None:
            p = Path(getattr(cfg, key))
            doc[key] = {"name": p.name, "sha256": _sha256(p) if p.is_file() else None}
    return hashlib.sha256(json.dumps(doc, sort_keys=True, default=list).encode()).hexdigest()


# --- inputs ----------------------------------------------------------------


@dataclass
class Inputs:
    items: list[ItemRecord]
    matrix: PairwiseMatrix
    lead_samples: dict[str, list[float]] = field(default_factory=dict)


def bundled_ahp() -> PairwiseMatrix:
    with resources.as_file(resources.files("sparesim") / "data" / "ahp_case_study.json") as p:
        return load_pairwise(p)


def read_lead_times_csv(path: str | Path) -> dict[str, list[float]]:
    out: dict[str, list[float]] = defaultdict(list)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not {"id", "lead_time_months"} <= set(reader.fieldnames or ()):
            raise ConfigError(f"{path}: expected columns id,lead_time_months")
        for lineno, row in enumerate(reader, start=2):
            try:
                value = float(row["lead_time_months"])
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
            if not value >= 0:
                raise ConfigError(f"{path}:{lineno}: negative lead time")
            out[row["id"].strip()].append(value)
    return dict(out)


def load_inputs(cfg: PipelineConfig) -> Inputs:
    """Parse every referenced file up front; any problem is a ConfigError."""
    for key in ("items", "lead_times", "ahp"):
        p = getattr(cfg, key)
        if p is not None and not Path(p).is_file():
            raise ConfigError(f"{key} file not found: {p}")
    try:
        items = read_items_csv(cfg.items)
        matrix = load_pairwise(cfg.ahp) if cfg.ahp else bundled_ahp()
    except (ClassifyError, AHPError, OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"parse error: {exc}") from exc
    lead = read_lead_times_csv(cfg.lead_times) if cfg.lead_times else {}
    return Inputs(items, matrix, lead)


# --- stage 1 ---------------------------------------------------------------


@dataclass
class Classification:
    weights: Any
    report: Any
    assignments: list[AbcAssignment]

    def ids(self, cls: str) -> list[str]:
        return [a.id for a in self.assignments if a.cls == cls]


def classify_stage(inputs: Inputs, cfg: PipelineConfig) -> Classification:
    w = compute_weights(inputs.matrix, cfg.weight_method)
    report = consistency(inputs.matrix, w)
    if not report.acceptable:
        log.warning("AHP judgments exceed the 0.1 inconsistency ratio (IR=%.3f)", report.ir)
    scored = score_items(inputs.items, w, cfg.consumption_aggregation)
    return Classification(w, report, abc_classify(scored, cfg.cuts))


# --- stage 2 ---------------------------------------------------------------


@dataclass
class ItemModels:
    item: ItemRecord
    demand_fit: FitReport
    lead_fit: FitReport | None
    demand_source: Any
    lead_time_model: Any
    lead_time_source: str
    costs: CostRates
    ltd: LeadTimeDemand


def item_costs(item: ItemRecord, cfg: PipelineConfig) -> CostRates:
    return CostRates(
        holding=item.holding if item.holding is not None else cfg.holding_rate * item.unit_price,
        ordering=item.ordering if item.ordering is not None else cfg.ordering_cost,
        shortage=item.shortage if item.shortage is not None else cfg.shortage_rate * item.unit_price,
    )


def fit_stage(item: ItemRecord, lead_samples: Sequence[float], cfg: PipelineConfig) -> ItemModels:
    history = item.annual_consumption
    if len(history) < MIN_OBS:
        raise StageError("fit", f"insufficient data: {len(history)} annual observations, need {MIN_OBS}")
    try:
        demand_fit = select_best(history, cfg.demand_families)
    except FitError as exc:
        raise StageError("fit", f"demand: {exc}") from exc

    lead_fit = None
    if len(lead_samples) >= MIN_OBS:
        try:
            lead_fit = select_best(lead_samples, cfg.lead_time_families)
        except FitError as exc:
            raise StageError("fit", f"lead time: {exc}") from exc
        lead_model = DistributionLeadTime(lead_fit.best.dist)
        lead_source = "fitted"
    elif lead_samples:
        lead_model = EmpiricalLeadTime(tuple(lead_samples))
        lead_source = "empirical"
    elif item.lead_time_months is not None:
        lead_model = ConstantLeadTime(item.lead_time_months)
        lead_source = "item"
    else:
        lead_model = ConstantLeadTime(cfg.default_lead_time_months)
        lead_source = "default"

    if cfg.demand_mode == "roulette":
        source = RouletteDemand(build_histogram(history))
    else:
        source = DistributionDemand(demand_fit.best.dist, 12)
    try:
        ltd = lead_time_demand(demand_fit.best.dist, lead_model.mean() / 12.0)
    except ValueError as exc:
        raise StageError("fit", f"lead-time demand: {exc}") from exc
    return ItemModels(item, demand_fit, lead_fit, source, lead_model, lead_source,
                      item_costs(item, cfg), ltd)


# --- stage 3 ---------------------------------------------------------------


def search_space(models: ItemModels, cfg: PipelineConfig) -> SearchSpace:
    rop_hi = max(1, rop_for_alpha(models.ltd, cfg.rop_alpha))
    mean_annual = float(np.mean(models.item.annual_consumption))
    roq_hi = max(1, math.ceil(cfg.roq_factor * mean_annual))
    return SearchSpace((0, rop_hi), (1, roq_hi))


def make_evaluator(models: ItemModels, cfg: PipelineConfig):
    def evaluate(policy: InventoryPolicy, reps: int, seed: int) -> Estimate:
        sim = SimConfig(cfg.horizon_years, None, seed, cfg.warmup_years, cfg.holding_mode)
        s = replicate(policy, models.demand_source, models.lead_time_model, models.costs, sim, reps)
        return Estimate(s.total_cost_mean, s.total_cost_ci)
    return evaluate


def default_roq(item: ItemRecord) -> int:
    return max(1, round(float(np.mean(item.annual_consumption))))


@dataclass
class ItemResult:
    id: str
    cls: str
    status: str = "ok"
    stage: str = ""
    reason: str = ""
    models: ItemModels | None = None
    optimization: Any = None
    summary: ReplicationSummary | None = None
    curve: list[ServiceCurvePoint] = field(default_factory=list)


def item_seed(master: int, item_id: str) -> int:
    return rngmod.derive_seed(master, "item", item_id)


def run_item(item: ItemRecord, cls: str, lead_samples: Sequence[float], cfg: PipelineConfig,
             stages: str = "all", roq: int | None = None) -> ItemResult:
    """Stages 2-3 for one item.

    ``stages`` is ``fit``, ``optimize``, ``all``, or ``curve`` (service curve
    at ``roq``, default mean annual demand, without optimizing).
    """
    res = ItemResult(item.id, cls)
    seed = item_seed(cfg.seed, item.id)
    try:
        res.models = fit_stage(item, lead_samples, cfg)
        if stages == "fit":
            return res
        if stages == "curve":
            _curve(res, seed, roq or default_roq(item), cfg)
            return res
        space = search_space(res.models, cfg)
        opt_cfg = OptimizerConfig(cfg.screen_reps, cfg.refine_reps, cfg.grid_step, seed)
        try:
            res.optimization = optimize(space, make_evaluator(res.models, cfg), opt_cfg)
        except (SimulationError, RuntimeError) as exc:
            raise StageError("optimize", str(exc)) from exc
        best = res.optimization.best
        sim = SimConfig(cfg.horizon_years, None, rngmod.derive_seed(seed, rngmod.OPTIMIZE),
                        cfg.warmup_years, cfg.holding_mode)
        res.summary = replicate(best, res.models.demand_source, res.models.lead_time_model,
                                res.models.costs, sim, cfg.refine_reps)
        if stages == "optimize":
            return res
        _curve(res, seed, best.roq, cfg)
    except StageError as exc:
        res.status, res.stage, res.reason = "failed", exc.stage, exc.reason
        log.info("item %s failed at %s: %s", item.id, exc.stage, exc.reason)
    return res


def _curve(res: ItemResult, seed: int, roq: int, cfg: PipelineConfig) -> None:
    sim = SimConfig(cfg.horizon_years, None, rngmod.derive_seed(seed, rngmod.CURVE),
                    cfg.warmup_years, cfg.holding_mode)
    m = res.models
    try:
        res.curve = service_curve(m.ltd, m.demand_source, m.lead_time_model, m.costs, roq,
                                  sim, cfg.curve_reps, cfg.alphas)
    except (SimulationError, ValueError) as exc:
        raise StageError("service_curve", str(exc)) from exc


def _run_item_args(args):
    return run_item(*args)


def run_items(inputs: Inputs, classes: dict[str, str], ids: Sequence[str], cfg: PipelineConfig,
              stages: str = "all", roq: int | None = None) -> list[ItemResult]:
    by_id = {it.id: it for it in inputs.items}
    jobs = [(by_id[i], classes[i], inputs.lead_samples.get(i, []), cfg, stages, roq) for i in ids]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            return list(pool.map(_run_item_args, jobs))
    return [run_item(*job) for job in jobs]


# --- outputs ---------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_classification(out: Path, inputs: Inputs, c: Classification, cfg: PipelineConfig) -> list[Path]:
    files = [out / "classification.csv", out / "weights.csv", out / "consistency.json"]
    write_classification_csv(files[0], c.assignments)
    write_weights_csv(files[1], inputs.matrix.criteria, c.weights)
    r = c.report
    files[2].write_text(json.dumps({
        "method": c.weights.method, "lambda_max": r.lambda_max, "ii": r.ii,
        "rmii": r.rmii, "ir": r.ir, "acceptable": r.acceptable,
    }, indent=2) + "\n")
    if cfg.figures:
        from .plots import pareto_figure
        (out / "figures").mkdir(exist_ok=True)
        files.append(pareto_figure(c.assignments, out / "figures" / "pareto.png", cfg.cuts))
    return files


def write_fits(out: Path, results: Sequence[ItemResult]) -> list[Path]:
    ok = [r for r in results if r.models is not None]
    demand = out / "fits.csv"
    lead = out / "lead_time_fits.csv"
    write_fit_report_csv(demand, [(r.id, r.models.demand_fit) for r in ok])
    write_fit_report_csv(lead, [(r.id, r.models.lead_fit) for r in ok if r.models.lead_fit])
    return [demand, lead]


def write_policies(out: Path, results: Sequence[ItemResult]) -> list[Path]:
    ok = [r for r in results if r.optimization is not None]
    files = [out / "policies.csv"]
    write_outcome_csv(files[0], [(r.id, r.optimization.best, r.summary) for r in ok])
    (out / "evaluations").mkdir(exist_ok=True)
    for r in ok:
        p = out / "evaluations" / f"{r.id}.csv"
        write_evaluations_csv(p, r.optimization)
        files.append(p)
    return files


def write_curves(out: Path, results: Sequence[ItemResult], figures: bool, svg: bool = False) -> list[Path]:
    ok = [r for r in results if r.curve]
    files = [out / "service_curves.csv"]
    write_curve_csv(files[0], [(r.id, p) for r in ok for p in r.curve])
    formats = (["png"] if figures else []) + (["svg"] if svg else [])
    if formats and ok:
        from .plots import service_curve_figure
        (out / "figures").mkdir(exist_ok=True)
        for r in ok:
            for fmt in formats:
                files.append(service_curve_figure(
                    r.curve, out / "figures" / f"service_curve_{r.id}.{fmt}", title=f"item {r.id}"))
    return files


def write_reports(out: Path, results: Sequence[ItemResult]) -> Path:
    path = out / "item_reports.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "class", "status", "stage", "reason", "demand_family", "demand_params",
                    "lead_time_source", "lead_time_family", "lead_time_params", "rop", "roq",
                    "cost_mean", "cost_ci_halfwidth", "service_curve"])
        for r in results:
            m = r.models
            dfit = m.demand_fit.best if m else None
            lfit = m.lead_fit.best if m and m.lead_fit else None
            opt = r.optimization
            w.writerow([
                r.id, r.cls, r.status, r.stage, r.reason,
                dfit.family if dfit else "", json.dumps(dfit.dist.param_dict) if dfit else "",
                m.lead_time_source if m else "", lfit.family if lfit else "",
                json.dumps(lfit.dist.param_dict) if lfit else "",
                opt.best.rop if opt else "", opt.best.roq if opt else "",
                num(opt.best_cost_mean) if opt else "", num(opt.best_cost_ci) if opt else "",
                "service_curves.csv" if r.curve else "",
            ])
    return path


def write_manifest(out: Path, cfg: PipelineConfig, command: str, item_counts: dict,
                   failures: list[dict], files: Sequence[Path]) -> Path:
    manifest = {
        "command": command,
        "seed": cfg.seed,
        "config_hash": config_hash(cfg),
        "versions": {"sparesim": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "item_counts": item_counts,
        "failures": failures,
        "files": {str(Path(p).relative_to(out)): _sha256(Path(p)) for p in sorted(files)},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


@dataclass
class RunSummary:
    out: Path
    classification: Classification
    results: list[ItemResult]
    manifest: dict

    @property
    def failures(self) -> list[ItemResult]:
        return [r for r in self.results if r.status != "ok"]


def run_pipeline(cfg: PipelineConfig, stages: str = "all", only: Sequence[str] | None = None,
                 command: str = "pipeline", roq: int | None = None, svg: bool = False) -> RunSummary:
    """Classify everything, then run the later stages on class A (or ``only``)."""
    inputs = load_inputs(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    c = classify_stage(inputs, cfg)
    files = write_classification(out, inputs, c, cfg)
    classes = {a.id: a.cls for a in c.assignments}
    counts = {"items": len(inputs.items), **{k: len(c.ids(k)) for k in "ABC"}}

    results: list[ItemResult] = []
    if stages != "classify":
        if only:
            unknown = [i for i in only if i not in classes]
            if unknown:
                raise ConfigError(f"unknown item ids {unknown}")
            ids = list(only)
        else:
            ids = c.ids("A")
        results = run_items(inputs, classes, ids, cfg, stages, roq)
        files += write_fits(out, results)
        if stages in ("optimize", "all"):
            files += write_policies(out, results)
        if stages in ("all", "curve"):
            files += write_curves(out, results, cfg.figures, svg)
        files.append(write_reports(out, results))
        counts.update({
            "processed": len(results),
            "succeeded": sum(r.status == "ok" for r in results),
            "failed": sum(r.status != "ok" for r in results),
        })
    failures = [{"id": r.id, "stage": r.stage, "reason": r.reason} for r in results if r.status != "ok"]
    path = write_manifest(out, cfg, command, counts, failures, files)
    return RunSummary(out, c, results, json.loads(path.read_text()))

"""Command-line entry point: ``sparesim <command> --config cfg.json``.

Exit status is 0 on success, 1 on a configuration or input error and 2
when some items failed a stage.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .pipeline import (
    ConfigError,
    StageError,
    fit_stage,
    item_seed,
    load_config,
    load_inputs,
    run_pipeline,
)
from .simcore import InventoryPolicy, SimConfig, replicate, simulate, write_outcome_csv, write_trace_csv
from .synth import write_dataset

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2

STAGES = {
    "classify": "classify",
    "fit": "fit",
    "optimize": "optimize",
    "service-curve": "curve",
    "pipeline": "all",
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparesim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", type=Path, required=config_required, help="JSON run configuration")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--out", type=Path, help="output directory (overrides the config)")
        sp.add_argument("--workers", type=int, help="parallel worker processes")
        sp.add_argument("--no-figures", action="store_true", help="skip matplotlib figures")

    sp = sub.add_parser("classify", help="AHP-weighted ABC classification of all items")
    common(sp)
    for name, helptext in (("fit", "fit demand and lead-time models"),
                           ("optimize", "search (ROP, ROQ) by replicated simulation")):
        sp = sub.add_parser(name, help=f"{helptext} for class-A items")
        common(sp)
        sp.add_argument("--item", action="append", help="restrict to these item ids (repeatable)")

    sp = sub.add_parser("service-curve", help="cost against target service level")
    common(sp)
    sp.add_argument("--item", action="append", help="restrict to these item ids (repeatable)")
    sp.add_argument("--roq", type=int, help="order quantity (default: mean annual demand)")
    sp.add_argument("--svg", action="store_true", help="also write an SVG chart per item")

    sp = sub.add_parser("simulate", help="replicated simulation of one policy for one item")
    common(sp)
    sp.add_argument("--item", required=True)
    sp.add_argument("--rop", type=int, required=True)
    sp.add_argument("--roq", type=int, required=True)
    sp.add_argument("--reps", type=int, default=1)
    sp.add_argument("--trace", action="store_true", help="write the event trace of replication 0")

    sp = sub.add_parser("pipeline", help="all three stages end to end")
    common(sp)

    sp = sub.add_parser("synth", help="write a synthetic item population and a runnable config")
    common(sp, config_required=False)
    sp.add_argument("--count", type=int, default=200)
    return p


def _simulate(args, cfg) -> int:
    inputs = load_inputs(cfg)
    by_id = {it.id: it for it in inputs.items}
    if args.item not in by_id:
        raise ConfigError(f"unknown item id {args.item!r}")
    if args.reps < 1:
        raise ConfigError("--reps must be at least 1")
    item = by_id[args.item]
    try:
        models = fit_stage(item, inputs.lead_samples.get(item.id, []), cfg)
    except StageError as exc:
        print(f"item {item.id} failed at {exc.stage}: {exc.reason}", file=sys.stderr)
        return EXIT_PARTIAL
    policy = InventoryPolicy(args.rop, args.roq)
    sim = SimConfig(cfg.horizon_years, None, item_seed(cfg.seed, item.id), cfg.warmup_years, cfg.holding_mode)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = replicate(policy, models.demand_source, models.lead_time_model, models.costs, sim, args.reps)
    write_outcome_csv(out / "outcomes.csv", [(item.id, policy, summary)])
    if args.trace:
        from .simcore import replication_seed
        trace: list = []
        first = SimConfig(sim.horizon_years, None, replication_seed(sim.seed, 0), sim.warmup_years, sim.holding_mode)
        simulate(policy, models.demand_source, models.lead_time_model, models.costs, first, trace)
        write_trace_csv(out / "trace.csv", trace)
    print(f"{item.id} rop={policy.rop} roq={policy.roq}: mean total cost "
          f"{summary.total_cost_mean:.2f} over {summary.r} replications")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            seed = args.seed if args.seed is not None else 42
            out = args.out or Path("synthetic")
            if args.count < 1:
                raise ConfigError("--count must be at least 1")
            paths = write_dataset(out, args.count, seed)
            print(f"wrote {args.count} items to {paths['items']} (config: {paths['config']})")
            return EXIT_OK
        overrides = {"seed": args.seed, "out": args.out, "workers": args.workers}
        if args.no_figures:
            overrides["figures"] = False
        if args.out is not None:
            overrides["out"] = args.out.resolve()
        cfg = load_config(args.config, overrides)
        if args.command == "simulate":
            return _simulate(args, cfg)
        summary = run_pipeline(
            cfg,
            stages=STAGES[args.command],
            only=getattr(args, "item", None),
            command=args.command,
            roq=getattr(args, "roq", None),
            svg=getattr(args, "svg", False),
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    counts = summary.manifest["item_counts"]
    print(f"{args.command}: {counts['items']} items "
          f"(A={counts['A']}, B={counts['B']}, C={counts['C']}) -> {summary.out}")
    if summary.failures:
        for r in summary.failures:
            print(f"  {r.id} failed at {r.stage}: {r.reason}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Acceptance criteria 1-11, one test each.

Every test prints a single ``criterion N: PASS|FAIL`` line (shown with ``-s``)
and the results are repeated in the terminal summary.
"""

import functools
import json
import math
import shutil
import time
from importlib import resources

import numpy as np
import pytest
from scipy import stats

from _cases import GOLDEN, random_config
from sparesim import ahp, rng as rngmod
from sparesim.classify import combined_value
from sparesim.demandgen import build_histogram, monthly_spread, spin
from sparesim.distfit import FAMILIES, Distribution, select_best
from sparesim.optimizer import Estimate, OptimizerConfig, SearchSpace, exhaustive, optimize
from sparesim.pipeline import load_config, run_pipeline
from sparesim.simcore import (
    ConstantLeadTime,
    CostRates,
    DistributionDemand,
    InventoryPolicy,
    SimConfig,
    replicate,
    simulate,
    trace_csv,
)
from sparesim.svclevel import DEFAULT_ALPHAS, lead_time_demand, quantile, rop_for_alpha
from sparesim.synth import CurveDemo

RESULTS: dict[int, tuple[bool, str]] = {}


def criterion(number: int, limit_s: float | None = None):
    """Time the test, enforce the runtime limit and report one line."""
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            detail = ""
            try:
                detail = fn(*args, **kwargs) or ""
                elapsed = time.perf_counter() - t0
                if limit_s is not None:
                    assert elapsed < limit_s, f"took {elapsed:.1f} s, limit {limit_s} s"
                RESULTS[number] = (True, f"{detail} ({elapsed:.2f} s)".strip())
            except BaseException as exc:
                RESULTS[number] = (False, f"{type(exc).__name__}: {exc}".splitlines()[0])
                print(f"\ncriterion {number}: FAIL {RESULTS[number][1]}")
                raise
            print(f"\ncriterion {number}: PASS {RESULTS[number][1]}")
        return run
    return wrap


@criterion(1, limit_s=1.0)
def test_criterion_01_ahp_exactness():
    assert ahp.RMII_TABLE == (0, 0, 0.58, 0.9, 1.12, 1.24, 1.32, 1.41, 1.45)
    assert [ahp.rmii(n) for n in range(1, 10)] == [0, 0, 0.58, 0.9, 1.12, 1.24, 1.32, 1.41, 1.45]
    m = ahp.validate_pairwise([[1, 2, 4], [1 / 2, 1, 2], [1 / 4, 1 / 2, 1]])
    w = ahp.compute_weights(m)
    assert np.max(np.abs(w.weights - np.array([4, 2, 1]) / 7)) <= 1e-9
    assert abs(ahp.consistency(m, w).ir) <= 1e-9
    return "weights (4/7, 2/7, 1/7), IR 0"


@criterion(2, limit_s=10.0)
def test_criterion_02_random_consistent_matrices():
    g = np.random.default_rng(20240602)
    worst_ii = worst_gap = 0.0
    for _ in range(1000):
        n = int(g.integers(2, 10))
        w = g.uniform(0.01, 1.0, n)
        m = ahp.validate_pairwise(w[:, None] / w[None, :])
        ws = [ahp.compute_weights(m, method).weights for method in ahp.METHODS]
        ii = ahp.consistency(m, ahp.compute_weights(m)).ii
        gap = max(np.max(np.abs(a - b)) for a in ws for b in ws)
        worst_ii, worst_gap = max(worst_ii, ii), max(worst_gap, gap)
        assert ii <= 1e-6 and gap <= 1e-6
    return f"max II {worst_ii:.1e}, max method gap {worst_gap:.1e}"


@criterion(3)
def test_criterion_03_combined_value():
    assert combined_value(1, 0) == 6 / 7
    assert combined_value(0, 1) == 1 / 7
    xs = np.random.default_rng(3).random(1000)
    assert max(abs(combined_value(x, x) - x) for x in [0.0, 1.0, *xs]) <= 1e-15


@criterion(4, limit_s=30.0)
def test_criterion_04_roulette_wheel():
    h = build_histogram([0, 5, 8, 9, 12, 22, 25, 31, 35, 38, 50], 5)
    assert h.counts == (4, 1, 2, 3, 1)
    assert h.probabilities.tolist() == [4 / 11, 1 / 11, 2 / 11, 3 / 11, 1 / 11]
    g = rngmod.stream(4, "acceptance")
    counts = np.bincount([spin(h, g)[0] for _ in range(100_000)], minlength=5)
    p = stats.chisquare(counts, h.probabilities * 100_000).pvalue
    assert p > 0.01
    for _ in range(10_000):
        _, qty = spin(h, g)
        assert monthly_spread(qty, g).annual_total == qty
    return f"chi-square p = {p:.3f}"


@criterion(5, limit_s=120.0)
def test_criterion_05_bic_recovery():
    makers = {
        "poisson": lambda g: g.poisson(5, 500),
        "exponential": lambda g: g.exponential(2, 500),
        "normal": lambda g: g.normal(10, 2, 500),
    }
    hits = {}
    for family, draw in makers.items():
        hits[family] = sum(
            select_best(draw(rngmod.stream(5, family, t)), FAMILIES).best.family == family
            for t in range(100)
        )
    assert all(h >= 90 for h in hits.values()), hits
    return ", ".join(f"{f} {h}/100" for f, h in hits.items())


@criterion(6, limit_s=1.0)
def test_criterion_06_golden_traces(golden_dir):
    for name, (policy, demand, lead, costs, cfg) in GOLDEN.items():
        trace = []
        simulate(policy, demand, lead, costs, cfg, trace)
        assert trace_csv(trace).encode() == (golden_dir / f"{name}.csv").read_bytes(), name
    return f"{len(GOLDEN)} traces byte-identical"


@criterion(7, limit_s=60.0)
def test_criterion_07_simulator_properties():
    violations = 0
    for i in range(200):
        policy, demand, lead, costs, cfg = random_config(np.random.default_rng([7, i]))
        trace = []
        o = simulate(policy, demand, lead, costs, cfg, trace)
        violations += o.total_cost != o.holding_cost + o.ordering_cost + o.shortage_cost
        violations += o.units_met + o.units_short != o.units_demanded
        violations += any(e.on_hand < 0 for e in trace) or o.final_on_hand < 0
        violations += simulate(policy, demand, lead, costs, cfg) != o
    assert violations == 0
    return "200 configurations, 0 violations"


def _sim_evaluator(mean_demand, lead, costs):
    demand = DistributionDemand(Distribution("poisson", (mean_demand,)), 1)

    def evaluate(policy, reps, seed):
        s = replicate(policy, demand, ConstantLeadTime(lead), costs, SimConfig(2, None, seed), reps)
        return Estimate(s.total_cost_mean, s.total_cost_ci)
    return evaluate


@criterion(8, limit_s=120.0)
def test_criterion_08_optimizer_oracle():
    toy = lambda p, reps, seed: (p.rop - 7) ** 2 + (p.roq - 5) ** 2 + 10
    space = SearchSpace((0, 9), (1, 10))
    assert optimize(space, toy, OptimizerConfig(1, 1, 1)).best == exhaustive(space, toy, 1, 0).best \
        == InventoryPolicy(7, 5)
    g = np.random.default_rng(8)
    agree = 0
    for trial in range(50):
        w_r, w_q = int(g.integers(1, 11)), int(g.integers(1, 11))
        while w_r * w_q > 100:
            w_r, w_q = int(g.integers(1, 11)), int(g.integers(1, 11))
        r0, q0 = int(g.integers(0, 6)), int(g.integers(1, 12))
        space = SearchSpace((r0, r0 + w_r - 1), (q0, q0 + w_q - 1))
        ev = _sim_evaluator(float(g.uniform(1, 6)), float(g.integers(0, 3)),
                            CostRates(*(float(v) for v in g.uniform(0.5, 20, 3))))
        reps, seed = 4, int(g.integers(2**32))
        a = optimize(space, ev, OptimizerConfig(reps, reps, 1, seed))
        b = exhaustive(space, ev, reps, seed)
        agree += (a.best, a.best_cost_mean) == (b.best, b.best_cost_mean)
    assert agree == 50
    return f"{agree}/50 randomized spaces agree"


@criterion(9)
def test_criterion_09_service_level_math():
    def erf_cdf(x):
        return 0.5 * (1 + math.erf((x - 100) / (15 * math.sqrt(2))))
    lo, hi = 0.0, 200.0
    for _ in range(200):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if erf_cdf(mid) < 0.95 else (lo, mid)
    q = quantile(lead_time_demand(Distribution("normal", (100.0, 15.0)), 1), 0.95)
    assert abs(q - 124.6728) <= 1e-3 and abs(q - lo) <= 1e-6

    g = np.random.default_rng(9)
    violations = 0
    for _ in range(100):
        family = str(g.choice(FAMILIES))
        data = {
            "poisson": lambda: g.poisson(g.uniform(1, 40), 30),
            "exponential": lambda: g.exponential(g.uniform(1, 40), 30),
            "normal": lambda: g.normal(g.uniform(20, 80), g.uniform(1, 10), 30),
            "lognormal": lambda: g.lognormal(g.uniform(0, 3), g.uniform(0.1, 1), 30),
            "gamma": lambda: g.gamma(g.uniform(0.5, 8), g.uniform(0.5, 5), 30),
            "uniform": lambda: g.uniform(0, g.uniform(1, 50), 30),
        }[family]()
        dist = select_best(np.abs(data), (family,)).best.dist
        ltd = lead_time_demand(dist, float(g.uniform(0.1, 6)))
        rops = [rop_for_alpha(ltd, a) for a in DEFAULT_ALPHAS]
        violations += any(b < a for a, b in zip(rops, rops[1:]))
    assert violations == 0
    return f"q(0.95) = {q:.4f}; 100 fitted distributions monotone"


@criterion(10, limit_s=120.0)
def test_criterion_10_cost_rises_with_service_level():
    pts = CurveDemo().curve(reps=200, seed=10)
    low, high = pts[0], pts[-1]
    assert (low.alpha, high.alpha) == (0.5, 0.9999)
    assert high.total_cost_mean - high.total_cost_ci > low.total_cost_mean + low.total_cost_ci
    holding = [p.holding for p in pts]
    assert all(b >= a for a, b in zip(holding, holding[1:]))
    return (f"cost {low.total_cost_mean:.0f}+-{low.total_cost_ci:.0f} at 0.50 vs "
            f"{high.total_cost_mean:.0f}+-{high.total_cost_ci:.0f} at 0.9999")


@criterion(11)
def test_criterion_11_end_to_end(tmp_path):
    bundled = resources.files("sparesim") / "data" / "synthetic_200"
    data = tmp_path / "data"
    data.mkdir()
    for name in ("items.csv", "lead_times.csv", "config.json"):
        shutil.copyfile(bundled / name, data / name)
    assert json.loads((data / "config.json").read_text())["seed"] == 42

    times, manifests = [], []
    for run in ("first", "second"):
        t0 = time.perf_counter()
        summary = run_pipeline(load_config(data / "config.json", {"out": tmp_path / run}))
        times.append(time.perf_counter() - t0)
        manifests.append((tmp_path / run / "manifest.json").read_bytes())
        assert not summary.failures
    assert max(times) < 300, times
    assert manifests[0] == manifests[1]
    files = json.loads(manifests[0])["files"]
    for rel in files:
        assert (tmp_path / "first" / rel).read_bytes() == (tmp_path / "second" / rel).read_bytes()

    assignments = summary.classification.assignments
    a_items = [a for a in assignments if a.cls == "A"]
    a_share = len(a_items) / len(assignments)
    a_value = a_items[-1].cumulative_value_share
    assert a_share <= 0.30 and a_value >= 0.70
    return (f"{len(a_items)} A items ({a_share:.0%}) carry {a_value:.1%} of value; "
            f"runs {times[0]:.0f} s / {times[1]:.0f} s, {len(files)} files identical")

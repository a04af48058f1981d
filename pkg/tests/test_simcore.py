import numpy as np
import pytest

from _cases import GOLDEN, random_config
from sparesim.distfit import Distribution
from sparesim.simcore import (
    ConstantLeadTime,
    CostRates,
    DistributionDemand,
    DistributionLeadTime,
    InventoryPolicy,
    ScheduleDemand,
    SimConfig,
    SimulationError,
    lead_months,
    measured_service_levels,
    replicate,
    simulate,
    trace_csv,
    write_outcome_csv,
    write_trace_csv,
)


def run(name, trace=None):
    policy, demand, lead, costs, cfg = GOLDEN[name]
    return simulate(policy, demand, lead, costs, cfg, trace)


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_golden_trace(name, golden_dir, tmp_path):
    trace = []
    run(name, trace)
    out = tmp_path / "trace.csv"
    write_trace_csv(out, trace)
    assert out.read_bytes() == (golden_dir / f"{name}.csv").read_bytes()


def test_zero_demand_outcome():
    o = run("zero_demand")
    assert o.total_cost == 30 * 2 and o.holding_cost == 60
    assert o.orders_placed == 0 and o.fill_rate == 1.0 and o.cycle_service_level == 1.0


def test_unit_monthly_outcome():
    o = run("unit_monthly")
    assert o.orders_placed == 1
    assert (o.holding_cost, o.ordering_cost, o.shortage_cost) == (12, 5, 0)
    assert o.total_cost == 17 and o.units_short == 0 and o.fill_rate == 1.0


def test_spike_shortage_outcome():
    o = run("spike_shortage")
    assert o.units_short == 10 and o.shortage_cost == 10 * 100
    assert o.orders_placed == 1 and o.fill_rate == 0.0
    assert o.cycles == 0  # the order is still in transit at the horizon


def test_order_loop_places_enough_orders():
    # position must climb above rop, so a large rop with small roq needs several orders
    o = simulate(InventoryPolicy(25, 10), ScheduleDemand((0,) * 12), ConstantLeadTime(2),
                 CostRates(0, 1, 0), SimConfig(1, 0))
    assert o.orders_placed == 3 and o.final_on_hand == 30


def test_warmup_excludes_costs():
    policy, demand, lead, costs, _ = GOLDEN["zero_demand"]
    o = simulate(policy, demand, lead, costs, SimConfig(3, 10, warmup_years=1))
    assert o.holding_cost == 40


def test_average_holding_mode():
    o = simulate(InventoryPolicy(0, 5), ScheduleDemand((0,) * 12), ConstantLeadTime(1),
                 CostRates(12, 0, 0), SimConfig(1, 10, holding_mode="average"))
    assert o.holding_cost == pytest.approx(120)


def test_schedule_exhausted():
    with pytest.raises(SimulationError, match="exhausted"):
        simulate(InventoryPolicy(0, 1), ScheduleDemand((1,) * 5), ConstantLeadTime(0),
                 CostRates(1, 1, 1), SimConfig(1))


def test_negative_lead_time_signalled():
    lead = DistributionLeadTime(Distribution("normal", (-5.0, 0.1)))
    with pytest.raises(SimulationError, match="negative"):
        simulate(InventoryPolicy(5, 1), ScheduleDemand((1,) * 12), lead, CostRates(1, 1, 1), SimConfig(1, 0))


def test_lead_month_rounding():
    assert lead_months(0.49) == 0 and lead_months(0.5) == 1 and lead_months(2.5) == 3
    with pytest.raises(SimulationError):
        lead_months(float("nan"))


@pytest.mark.parametrize("kwargs", [{"rop": -1, "roq": 1}, {"rop": 0, "roq": 0}])
def test_policy_validation(kwargs):
    with pytest.raises(ValueError):
        InventoryPolicy(**kwargs)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(0)
    with pytest.raises(ValueError):
        SimConfig(2, warmup_years=2)
    with pytest.raises(ValueError):
        CostRates(-1, 0, 0)


def test_measured_service_levels_arithmetic():
    o = run("zero_demand")
    assert measured_service_levels(o) == (1.0, 1.0)
    from dataclasses import replace
    o2 = replace(o, units_demanded=100, units_met=90, cycles=4, stockout_cycles=1)
    assert measured_service_levels(o2) == (0.9, 0.75)


@pytest.mark.parametrize("i", range(40))
def test_random_invariants(i):
    policy, demand, lead, costs, cfg = random_config(np.random.default_rng(1000 + i))
    trace = []
    o = simulate(policy, demand, lead, costs, cfg, trace)
    assert o.total_cost == o.holding_cost + o.ordering_cost + o.shortage_cost
    assert o.units_met + o.units_short == o.units_demanded
    assert 0 <= o.fill_rate <= 1 and 0 <= o.cycle_service_level <= 1
    assert all(e.on_hand >= 0 and e.on_order >= 0 for e in trace)
    # replay the trace: every on-hand change is explained by its event
    level = o.initial_on_hand
    for e in trace:
        if e.event == "arrival":
            assert e.on_hand == level + e.qty
        elif e.event == "demand":
            assert e.on_hand == max(0, level - e.qty)
        else:
            assert e.on_hand == level
        level = e.on_hand
    assert level == o.final_on_hand
    assert o == simulate(policy, demand, lead, costs, cfg)


def test_replicate_single_run():
    policy, demand, lead, costs, cfg = GOLDEN["unit_monthly"]
    s = replicate(policy, demand, lead, costs, cfg, 1)
    assert s.total_cost_mean == 17 and s.total_cost_ci == 0 and not s.ci_defined


def test_replicate_deterministic_model_has_zero_variance():
    policy, demand, lead, costs, cfg = GOLDEN["unit_monthly"]
    s = replicate(policy, demand, lead, costs, cfg, 10)
    assert s.std["total_cost"] == 0 and s.total_cost_ci == 0 and s.ci_defined


def test_replicate_stochastic_is_reproducible():
    args = (InventoryPolicy(10, 30), DistributionDemand(Distribution("poisson", (8.0,)), 1),
            ConstantLeadTime(2), CostRates(1, 20, 10), SimConfig(5, None, 99))
    a, b = replicate(*args, 20), replicate(*args, 20)
    assert a == b and a.std["total_cost"] > 0
    with pytest.raises(ValueError):
        replicate(*args, 0)


def test_outcome_csv(tmp_path):
    policy, demand, lead, costs, cfg = GOLDEN["unit_monthly"]
    p = tmp_path / "o.csv"
    write_outcome_csv(p, [("x", policy, replicate(policy, demand, lead, costs, cfg, 2))])
    header, row = p.read_text().splitlines()
    assert header.startswith("item_id,rop,roq,replications,total_cost_mean")
    assert row.startswith("x,0,12,2,17,")


def test_trace_csv_header():
    assert trace_csv([]) == "t_month,event,qty,on_hand,on_order,cost_delta\n"

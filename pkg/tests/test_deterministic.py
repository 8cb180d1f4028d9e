"""Full-information day optimization and baseline strategies."""
import numpy as np
import pytest

from conftest import flat_prices, make_prices, single_ev, small_fleet_config
from evareg.analytic import schedule_objective, v1g_threshold_schedule
from evareg.deterministic import (DayProblemError, immediate_charging,
                                  save_day_schedule, smart_charging,
                                  solve_deterministic, v2g_lp)
from evareg.fleet import generate_fleet
from evareg.lp import solve_lp
from evareg.market import load_prices


def test_single_v1g_matches_threshold():
    ev = single_ev(t_a=0, t_d=3, soc_a=0.3, soc_r=0.8, capacity=20, p_max=10)
    prices = make_prices([50, 30, 10], [5, 5, 5])
    day = solve_deterministic([ev], prices, degradation_price=50, rho=0.25)
    sched = v1g_threshold_schedule(10, 10, [50, 30, 10], [5, 5, 5])
    assert day.objective == pytest.approx(
        schedule_objective(sched, [50, 30, 10], [5, 5, 5]), rel=1e-6)
    assert day.objective == pytest.approx(100.0, rel=1e-6)


def test_zero_reg_price_reduces_to_energy_only():
    evs = generate_fleet(small_fleet_config(seed=2, scale=100, v2g_fraction=0.0))
    hours = max(e.t_d for e in evs)
    lam = 30 + 10 * np.sin(np.arange(hours))
    with_reg = solve_deterministic(evs, make_prices(lam, np.zeros(hours)), 50, 0.25)
    energy_only = smart_charging(evs, make_prices(lam, np.zeros(hours)), 50, "V1G")
    assert with_reg.objective == pytest.approx(energy_only.objective, rel=1e-6)


def test_v2g_discharge_never_pays_under_price_premium():
    ev = single_ev(mode="V2G", t_a=0, t_d=4, soc_a=0.3, soc_r=0.6,
                   capacity=30, p_max=6)
    lam = np.array([30.0, 20.0, 40.0, 25.0])
    mu = np.array([30.0, 25.0, 35.0, 28.0])
    free = solve_lp(v2g_lp(9.0, 16.5, -3.0, 6.0, lam, mu, 50.0))
    fixed = solve_lp(v2g_lp(9.0, 16.5, -3.0, 6.0, lam, mu, 50.0, fix_y=True))
    assert free.objective == pytest.approx(fixed.objective, rel=1e-6)


def test_immediate_greedy_fill():
    ev = single_ev(t_a=0, t_d=5, soc_a=0.3, soc_r=0.75, capacity=40, p_max=8)
    day = immediate_charging([ev], flat_prices(5))
    assert day.schedules[0].x == pytest.approx([8, 8, 2, 0, 0])
    assert (day.schedules[0].z == 0).all()


def test_immediate_zero_demand():
    ev = single_ev(soc_a=0.5, soc_r=0.5, t_a=0, t_d=3)
    day = immediate_charging([ev], flat_prices(3))
    assert (day.schedules[0].x == 0).all()


def test_immediate_cost_is_price_weighted_energy():
    ev = single_ev(t_a=0, t_d=3, soc_a=0.3, soc_r=0.8, capacity=20, p_max=10)
    prices = make_prices([50, 30, 10], [5, 5, 5])
    day = immediate_charging([ev], prices)
    assert day.objective == pytest.approx(50 * 10)


def test_smart_v1g_fills_cheapest_slot():
    ev = single_ev(t_a=0, t_d=3, soc_a=0.3, soc_r=0.8, capacity=20, p_max=10)
    day = smart_charging([ev], make_prices([50, 30, 10], [5, 5, 5]), 50, "V1G")
    assert day.schedules[0].x == pytest.approx([0, 0, 10])
    assert day.objective == pytest.approx(100.0)


def test_smart_v2g_arbitrage_when_spread_beats_degradation():
    ev = single_ev(mode="V2G", t_a=0, t_d=2, soc_a=0.3, soc_r=0.4,
                   capacity=30, p_max=10)
    prices = make_prices([10.0, 200.0], [0.0, 0.0])
    v2g = smart_charging([ev], prices, 50.0, "V2G")
    v1g = smart_charging([ev], prices, 50.0, "V1G")
    assert v2g.objective < v1g.objective - 1e-6
    assert v2g.schedules[0].y.sum() > 1e-6


def test_smart_v2g_no_arbitrage_when_spread_below_degradation():
    ev = single_ev(mode="V2G", t_a=0, t_d=2, soc_a=0.3, soc_r=0.4,
                   capacity=30, p_max=10)
    prices = make_prices([30.0, 40.0], [0.0, 0.0])
    v2g = smart_charging([ev], prices, 50.0, "V2G")
    v1g = smart_charging([ev], prices, 50.0, "V1G")
    assert v2g.objective == pytest.approx(v1g.objective, rel=1e-6)


def test_full_information_dominates_baselines():
    evs = generate_fleet(small_fleet_config(seed=7, scale=50))
    hours = max(e.t_d for e in evs)
    rng = np.random.default_rng(7)
    prices = make_prices(38 + 8 * rng.standard_normal(hours),
                         np.abs(28 + 5 * rng.standard_normal(hours)))
    best = solve_deterministic(evs, prices, 50, 0.25)
    for baseline in (immediate_charging(evs, prices),
                     smart_charging(evs, prices, 50, "V1G"),
                     smart_charging(evs, prices, 50, "V2G")):
        assert best.objective <= baseline.objective + 1e-6


def test_per_ev_objectives_match_analytic_under_premium():
    evs = generate_fleet(small_fleet_config(seed=4, scale=100))
    hours = max(e.t_d for e in evs)
    prices = flat_prices(hours, lam=38.2, mu=30.1)
    day = solve_deterministic(evs, prices, 50, 0.25)
    from evareg.analytic import v2g_threshold_schedule
    from evareg.fleet import energy_params
    lam = np.full(hours, 38.2)
    mu = np.full(hours, 30.1)
    for ev, sched in zip(sorted(evs, key=lambda e: e.id), day.schedules):
        params = energy_params(ev, 0.25)
        window = slice(ev.t_a, ev.t_d)
        if ev.mode == "V1G":
            ref = v1g_threshold_schedule(params.e_r, ev.p_max_kw,
                                         lam[window], mu[window])
            ref_obj = schedule_objective(ref, lam[window], mu[window])
        else:
            ref = v2g_threshold_schedule(params.e_r, ev.p_max_kw,
                                         lam[window], mu[window], 50)
            ref_obj = schedule_objective(ref, lam[window], mu[window], 50)
        mine = schedule_objective(sched, lam[window], mu[window], 50)
        assert mine == pytest.approx(ref_obj, rel=1e-6, abs=1e-6)


def test_energy_balance_per_ev():
    evs = generate_fleet(small_fleet_config(seed=3, scale=100))
    hours = max(e.t_d for e in evs)
    day = solve_deterministic(evs, flat_prices(hours), 50, 0.25)
    from evareg.fleet import energy_params
    for ev, sched in zip(sorted(evs, key=lambda e: e.id), day.schedules):
        e_r = energy_params(ev, 0.25).e_r
        assert (sched.x - sched.y).sum() == pytest.approx(e_r, abs=1e-6)


def test_profiles_aggregate_schedules():
    evs = generate_fleet(small_fleet_config(seed=5, scale=100))
    hours = max(e.t_d for e in evs)
    day = solve_deterministic(evs, flat_prices(hours), 50, 0.25)
    e_profile = np.zeros(hours)
    r_profile = np.zeros(hours)
    for sched in day.schedules:
        sl = slice(sched.t_start, sched.t_start + sched.n_slots)
        e_profile[sl] += sched.x - sched.y
        r_profile[sl] += sched.z
    assert day.e_profile == pytest.approx(e_profile)
    assert day.r_profile == pytest.approx(r_profile)


def test_infeasible_demand_names_ev():
    ev = single_ev(t_a=0, t_d=2, soc_a=0.2, soc_r=0.9, capacity=40, p_max=5,
                   ev_id=13)
    with pytest.raises(DayProblemError, match="EV 13"):
        solve_deterministic([ev], flat_prices(2), 50, 0.25)


def test_missing_price_coverage_rejected():
    ev = single_ev(t_a=0, t_d=5)
    with pytest.raises(DayProblemError):
        solve_deterministic([ev], flat_prices(3), 50, 0.25)


def test_day_schedule_export(tmp_path):
    ev = single_ev(t_a=0, t_d=3, soc_a=0.3, soc_r=0.8, capacity=20, p_max=10)
    day = solve_deterministic([ev], make_prices([50, 30, 10], [5, 5, 5]), 50, 0.25)
    path = tmp_path / "day.csv"
    save_day_schedule(day, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "hour,e_kwh,r_kw,objective_cum"
    assert len(lines) == 4
    assert float(lines[-1].split(",")[3]) == pytest.approx(day.objective)

"""Acceptance gate.

Each test prints one [PASS]/[FAIL] line for its criterion; the suite is the
release gate and runs everything at the stated sizes and tolerances.
"""
import dataclasses
import statistics
import time

import numpy as np
import pytest

from conftest import single_ev
from evareg.config import load_run_config
from evareg.fleet import EvTypeSpec, FleetConfig, generate_fleet
from evareg.lp import solve_lp
from evareg.market import (SAMPLES_PER_HOUR, RegDTrace, price_arrays,
                           synth_prices, synth_regd)
from evareg.mpc import MpcConfig, build_two_stage, connect_fleet, run_day
from evareg.oracles import (run_aggregation_suite, run_v1g_suite, run_v2g_suite)
from evareg.scenarios import ScenarioConfig, generate_scenarios
from evareg.settlement import compare_strategies, run_strategy, settle_day

REL = 1e-6


def report(criterion: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


def fleet_200(seed: int) -> FleetConfig:
    return FleetConfig(types=(EvTypeSpec(120, (16, 23), (30, 37)),
                              EvTypeSpec(40, (0, 7), (14, 21)),
                              EvTypeSpec(40, (8, 15), (22, 29))), seed=seed)


def compact_fleet(seed: int, count: int = 20) -> FleetConfig:
    return FleetConfig(types=(EvTypeSpec(count, (0, 2), (8, 14)),), seed=seed)


def zero_trace(hours: int) -> RegDTrace:
    return RegDTrace(np.zeros(hours * SAMPLES_PER_HOUR))


def test_c01_v1g_threshold_oracle():
    t0 = time.monotonic()
    result = run_v1g_suite(1000, seed=101)
    elapsed = time.monotonic() - t0
    report("C1 V1G threshold oracle (1000 instances)",
           result.passed and elapsed < 60.0,
           f"{result.summary()}, {elapsed:.1f}s")


def test_c02_v2g_threshold_oracle():
    result = run_v2g_suite(1000, seed=202)
    report("C2 V2G threshold oracle (1000 instances)", result.passed,
           result.summary())


def test_c03_aggregation_oracle():
    result = run_aggregation_suite(200, seed=303)
    report("C3 virtual-EV aggregation (200 groups)", result.passed,
           result.summary())


def _hourly_instance(seed: int):
    rng = np.random.default_rng(seed)
    evs = []
    for i in range(int(rng.integers(4, 9))):
        evs.append(single_ev(mode="V2G" if i % 2 else "V1G", t_a=0,
                             t_d=int(rng.integers(3, 9)), soc_a=0.3,
                             soc_r=float(rng.uniform(0.5, 0.7)),
                             capacity=float(rng.uniform(25, 45)),
                             p_max=float(rng.uniform(5, 8)), ev_id=i))
    lam, mu = price_arrays(synth_prices(12, seed=seed))[1:]
    state = connect_fleet(evs, 0, 0.25)
    state.r_cleared = float(rng.uniform(0, 10))
    scen = generate_scenarios(lam[1:9], mu[1:9], [],
                              ScenarioConfig(n_scenarios=15, eps_p=4.0,
                                             eps_ev=0.0, horizon=8, seed=seed),
                              0)
    return state, scen, float(lam[0])


def test_c04_cvar_correctness():
    worst_gap = 0.0
    monotone = True
    for seed in range(20):
        state, scen, lam0 = _hourly_instance(1000 + seed)
        prob, _ = build_two_stage(state, scen, lam0,
                                  MpcConfig(h_window=8, cvar_alpha=0.0))
        risk0 = solve_lp(prob).objective
        prob, _ = build_two_stage(state, scen, lam0,
                                  MpcConfig(h_window=8, cvar_alpha=0.0),
                                  expected_objective=True)
        expected = solve_lp(prob).objective
        worst_gap = max(worst_gap,
                        abs(risk0 - expected) / max(1.0, abs(expected)))
        prev = -np.inf
        for alpha in (0.0, 0.2, 0.5, 0.8):
            prob, _ = build_two_stage(state, scen, lam0,
                                      MpcConfig(h_window=8, cvar_alpha=alpha))
            obj = solve_lp(prob).objective
            if obj < prev - REL * max(1.0, abs(prev)):
                monotone = False
            prev = obj
    report("C4 CVaR: alpha=0 equals expected cost and objective is "
           "non-decreasing in alpha (20 instances)",
           worst_gap <= REL and monotone,
           f"max relative gap {worst_gap:.2e}, monotone={monotone}")


def test_c05_risk_aversion_median_revenue():
    alphas = (0.0, 0.2, 0.5, 0.8)
    revenues = {a: [] for a in alphas}
    for situation in range(20):
        cfg = compact_fleet(seed=situation, count=20)
        evs = generate_fleet(cfg)
        sim_end = max(e.t_d for e in evs)
        prices = synth_prices(sim_end, seed=5000 + situation)
        regd = zero_trace(sim_end)
        for alpha in alphas:
            scen = ScenarioConfig(n_scenarios=8, eps_p=8.0, eps_ev=2.0,
                                  horizon=6, seed=9000 + situation)
            result = run_day(evs, prices, regd,
                             MpcConfig(h_window=6, cvar_alpha=alpha), scen,
                             "proposed")
            rep = settle_day(result, 130.0, 50.0)
            revenues[alpha].append(rep.daily_revenue)
    medians = [statistics.median(revenues[a]) for a in alphas]
    ok = all(hi <= lo + 1e-9 for lo, hi in zip(medians, medians[1:]))
    report("C5 median daily revenue non-increasing in CVaR alpha "
           "(20 situations)", ok,
           "medians " + ", ".join(f"{m:.2f}" for m in medians))


def test_c06_charging_request_fidelity():
    evs = generate_fleet(fleet_200(seed=42))
    sim_end = max(e.t_d for e in evs)
    prices = synth_prices(sim_end, seed=42)
    scen = ScenarioConfig(n_scenarios=10, eps_p=3.0, eps_ev=2.0, horizon=8,
                          seed=42)
    neutral = synth_regd(sim_end, seed=42, neutralize=True)
    rep_n, _ = run_strategy("proposed", evs, prices, neutral, MpcConfig(),
                            scen, 0.25)
    raw = synth_regd(sim_end, seed=43, neutralize=False)
    rep_r, _ = run_strategy("proposed", evs, prices, raw, MpcConfig(), scen,
                            0.25)
    ok = rep_n.worst_soc_dev <= 0.002 and rep_r.worst_soc_dev <= 0.05
    report("C6 worst SoC deviation: <=0.2% neutral signal, <=5% raw signal "
           "(200-EV day)", ok,
           f"neutral {100 * rep_n.worst_soc_dev:.4f}%, "
           f"raw {100 * rep_r.worst_soc_dev:.3f}%")


def test_c07_strategy_ordering():
    hits = 0
    n_days = 20
    details = []
    for seed in range(n_days):
        evs = generate_fleet(fleet_200(seed=seed))
        sim_end = max(e.t_d for e in evs)
        prices = synth_prices(sim_end, seed=2000 + seed)
        regd = synth_regd(sim_end, seed=3000 + seed, neutralize=True)
        scen = ScenarioConfig(n_scenarios=5, eps_p=3.0, eps_ev=2.0,
                              horizon=8, seed=seed)
        reports = compare_strategies(evs, prices, regd, MpcConfig(), scen,
                                     0.25)
        rev = {k: v.daily_revenue for k, v in reports.items()}
        ordered = (rev["ideal"] >= rev["proposed"] >= rev["robust"]
                   and rev["proposed"] > rev["smart-v1g"] > rev["immediate"]
                   and rev["proposed"] > rev["smart-v2g"] > rev["immediate"])
        hits += ordered
        details.append(f"seed {seed}: {'ok' if ordered else 'violated'}")
    report("C7 strategy ordering holds on >=80% of 20 seeded 200-EV days",
           hits >= 16, f"{hits}/20 days ordered")


def test_c08_window_width_behavior():
    evs = generate_fleet(compact_fleet(seed=8, count=24))
    sim_end = max(e.t_d for e in evs)
    prices = synth_prices(sim_end, seed=8)
    regd = zero_trace(sim_end)
    revenues = []
    for h in (2, 4, 6, 8):
        scen = ScenarioConfig(n_scenarios=1, eps_p=0.0, eps_ev=0.0,
                              horizon=h, seed=8)
        result = run_day(evs, prices, regd, MpcConfig(h_window=h), scen,
                         "proposed")
        revenues.append(settle_day(result, 130.0, 50.0).daily_revenue)
    ok = all(hi >= lo - 1e-9 for lo, hi in zip(revenues, revenues[1:]))
    report("C8 daily revenue non-decreasing in window width "
           "(perfect forecasts)", ok,
           "revenue " + ", ".join(f"{r:.2f}" for r in revenues))


def test_c09_penalty_behavior():
    evs = generate_fleet(compact_fleet(seed=9, count=24))
    sim_end = max(e.t_d for e in evs)
    prices = synth_prices(sim_end, seed=9)
    regd = zero_trace(sim_end)
    ratios = []
    for phi_prime in (0.0, 30.0, 60.0, 90.0, 120.0):
        scen = ScenarioConfig(n_scenarios=8, eps_p=3.0, eps_ev=2.0,
                              horizon=6, seed=9)
        result = run_day(evs, prices, regd,
                         MpcConfig(h_window=6, phi_prime=phi_prime), scen,
                         "proposed")
        ratios.append(settle_day(result, 130.0, 50.0).fulfillment_ratio)
    ok = all(hi >= lo - 1e-9 for lo, hi in zip(ratios, ratios[1:]))
    report("C9 fulfillment ratio non-decreasing in next-hour penalty", ok,
           "fulfillment " + ", ".join(f"{r:.4f}" for r in ratios))


def test_c10_performance():
    evs = generate_fleet(fleet_200(seed=10))
    sim_end = max(e.t_d for e in evs)
    prices = synth_prices(sim_end, seed=10)
    regd = synth_regd(sim_end, seed=10, neutralize=True)
    scen = ScenarioConfig(n_scenarios=20, eps_p=3.0, eps_ev=2.0, horizon=8,
                          seed=10)
    t0 = time.monotonic()
    run_strategy("proposed", evs, prices, regd, MpcConfig(), scen, 0.25)
    t_small = time.monotonic() - t0

    evs_big = generate_fleet(FleetConfig(seed=10))
    sim_end = max(e.t_d for e in evs_big)
    prices = synth_prices(sim_end, seed=10)
    regd = synth_regd(sim_end, seed=10, neutralize=True)
    t0 = time.monotonic()
    run_strategy("proposed", evs_big, prices, regd,
                 MpcConfig(aggregate_lookahead=True), scen, 0.25)
    t_big = time.monotonic() - t0
    report("C10 full-day MPC runtime: 200 EVs < 10 min, 2000 EVs "
           "(aggregated look-ahead) < 60 min",
           t_small < 600.0 and t_big < 3600.0,
           f"200-EV {t_small:.0f}s, 2000-EV {t_big:.0f}s")


def test_c11_determinism(tmp_path):
    import yaml

    from evareg.cli import main
    config = {
        "seed": 11,
        "fleet": {"types": [{"count": 10, "arrive": [0, 4],
                             "depart": [9, 15]}]},
        "scenario": {"n_scenarios": 4, "eps_p": 2.0, "eps_ev": 1.0},
        "mpc": {"h_window": 4},
    }
    cfg_path = tmp_path / "config.yaml"
    cfg_path.write_text(yaml.safe_dump(config))
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main(["run", "--config", str(cfg_path), "--strategy", "all",
                     "--out", str(out)]) == 0
        outputs.append(out)
    files = sorted(p.name for p in outputs[0].iterdir())
    identical = all((outputs[0] / f).read_bytes() == (outputs[1] / f).read_bytes()
                    for f in files)
    gen_outputs = []
    for name in ("g1.csv", "g2.csv"):
        path = tmp_path / name
        assert main(["fleet", "gen", "--config", str(cfg_path), "--seed", "5",
                     "--out", str(path)]) == 0
        gen_outputs.append(path.read_bytes())
    report("C11 repeated commands produce byte-identical reports",
           identical and gen_outputs[0] == gen_outputs[1],
           f"{len(files)} report files compared")

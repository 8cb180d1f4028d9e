"""Batch command-line entry point.

Subcommands: `fleet gen`, `run`, `sweep`, `oracle-test`. Every command is
deterministic under (config, seed); exit status 0 on success, 1 on runtime
errors, 2 on usage/config errors.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import mpc, oracles, settlement
from .config import ConfigError, RunConfig, load_run_config, with_param
from .fleet import FleetError, generate_fleet, load_fleet, save_fleet
from .market import (MarketDataError, load_prices, load_regd, synth_prices,
                     synth_regd)
from .mpc import save_decision_log

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _load_inputs(cfg: RunConfig, args):
    """Fleet, prices and signal trace from files or seeded synthesis."""
    evs = generate_fleet(cfg.fleet)
    sim_hours = max(ev.t_d for ev in evs)
    prices_path = args.prices or cfg.paths.prices
    regd_path = args.regd or cfg.paths.regd
    prices = (load_prices(prices_path) if prices_path
              else synth_prices(sim_hours, cfg.seed))
    regd = (load_regd(regd_path) if regd_path
            else synth_regd(sim_hours, cfg.seed, neutralize=False))
    return evs, prices, regd


def cmd_fleet_gen(args) -> int:
    cfg = load_run_config(args.config, args.seed)
    evs = generate_fleet(cfg.fleet)
    save_fleet(evs, args.out)
    per_type = [t.count for t in cfg.fleet.types]
    n_v2g = sum(1 for ev in evs if ev.mode == "V2G")
    print(f"wrote {len(evs)} EVs to {args.out} "
          f"(per type: {', '.join(map(str, per_type))}; "
          f"{len(evs) - n_v2g} V1G / {n_v2g} V2G)")
    return 0


def cmd_run(args) -> int:
    cfg = load_run_config(args.config, args.seed)
    evs, prices, regd = _load_inputs(cfg, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = settlement.STRATEGIES if args.strategy == "all" else (args.strategy,)
    reports = {}
    for name in names:
        report, result = settlement.run_strategy(
            name, evs, prices, regd, cfg.mpc, cfg.scenario, cfg.fleet.rho)
        reports[name] = report
        (out / f"report_{name}.json").write_text(report.to_json() + "\n")
        save_decision_log(result, out / f"hourly_{name}.csv")
        print(f"{name}: daily revenue {report.daily_revenue:.2f} $, "
              f"fulfillment {report.fulfillment_ratio:.4f}")
    if len(names) > 1:
        settlement.save_comparison(reports, out / "comparison.csv")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_run_config(args.config, args.seed)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("no sweep values given")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary_rows = []
    sample_rows = []
    for value in values:
        swept = with_param(cfg, args.param, value)
        evs, prices, regd = _load_inputs(swept, args)
        if args.situations:
            for situation in range(args.situations):
                scen = replace(swept.scenario, seed=swept.seed + 7919 * (situation + 1))
                report, _ = settlement.run_strategy(
                    mpc.STRATEGY_PROPOSED, evs, prices, regd, swept.mpc,
                    scen, swept.fleet.rho)
                sample_rows.append((value, situation, report.daily_revenue))
            revs = [r for v, s, r in sample_rows if v == value]
            revs.sort()
            median = revs[len(revs) // 2] if len(revs) % 2 else \
                0.5 * (revs[len(revs) // 2 - 1] + revs[len(revs) // 2])
            print(f"{args.param}={value}: median revenue {median:.2f} $ "
                  f"over {args.situations} situations")
        report, result = settlement.run_strategy(
            mpc.STRATEGY_PROPOSED, evs, prices, regd, swept.mpc,
            swept.scenario, swept.fleet.rho)
        (out / f"report_{args.param}_{value}.json").write_text(report.to_json() + "\n")
        save_decision_log(result, out / f"hourly_{args.param}_{value}.csv")
        summary_rows.append((value, report.daily_revenue, report.fulfillment_ratio,
                             report.worst_soc_dev))
        print(f"{args.param}={value}: revenue {report.daily_revenue:.2f} $, "
              f"fulfillment {report.fulfillment_ratio:.4f}")
    with open(out / f"sweep_{args.param}.csv", "w", newline="") as fh:
        fh.write(f"{args.param},daily_revenue,fulfillment,worst_soc_dev\n")
        for value, rev, ful, dev in summary_rows:
            fh.write(f"{value},{rev!r},{ful!r},{dev!r}\n")
    if sample_rows:
        with open(out / f"samples_{args.param}.csv", "w", newline="") as fh:
            fh.write(f"{args.param},situation,daily_revenue\n")
            for value, situation, rev in sample_rows:
                fh.write(f"{value},{situation},{rev!r}\n")
    return 0


def cmd_oracle_test(args) -> int:
    seed = 7 if args.seed is None else args.seed
    results = oracles.run_all(args.cases, args.groups, seed)
    ok = True
    for res in results:
        print(res.summary())
        for failure in res.failures[:5]:
            print(f"    {failure}")
        ok &= res.passed
    return 0 if ok else RUNTIME_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evareg")
    sub = parser.add_subparsers(dest="command", required=True)

    fleet_p = sub.add_parser("fleet", help="fleet file tools")
    fleet_sub = fleet_p.add_subparsers(dest="fleet_command", required=True)
    gen = fleet_sub.add_parser("gen", help="generate a synthetic fleet CSV")
    gen.add_argument("--config")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_fleet_gen)

    run_p = sub.add_parser("run", help="run one strategy (or all) for a day")
    run_p.add_argument("--config")
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--out", required=True)
    run_p.add_argument("--strategy", default="all",
                       choices=list(settlement.STRATEGIES) + ["all"])
    run_p.add_argument("--prices")
    run_p.add_argument("--regd")
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="re-run the proposed strategy over "
                                           "a parameter grid")
    sweep_p.add_argument("--config")
    sweep_p.add_argument("--seed", type=int)
    sweep_p.add_argument("--out", required=True)
    sweep_p.add_argument("--param", required=True)
    sweep_p.add_argument("--values", required=True)
    sweep_p.add_argument("--situations", type=int, default=0)
    sweep_p.add_argument("--prices")
    sweep_p.add_argument("--regd")
    sweep_p.set_defaults(func=cmd_sweep)

    oracle_p = sub.add_parser("oracle-test", help="run the threshold-vs-LP "
                                                  "property suites")
    oracle_p.add_argument("--cases", type=int, default=1000)
    oracle_p.add_argument("--groups", type=int, default=200)
    oracle_p.add_argument("--seed", type=int)
    oracle_p.set_defaults(func=cmd_oracle_test)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FleetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())

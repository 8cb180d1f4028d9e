#!/usr/bin/env python3
"""Fulfillment ratio and revenue versus the next-hour shortfall penalty."""
import argparse
from pathlib import Path

import numpy as np

from evareg.fleet import EvTypeSpec, FleetConfig, generate_fleet
from evareg.market import RegDTrace, synth_prices
from evareg.mpc import MpcConfig, run_day
from evareg.scenarios import ScenarioConfig
from evareg.settlement import settle_day


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--count", type=int, default=40)
    ap.add_argument("--values", default="0,30,60,90,120")
    ap.add_argument("--out", default="results/penalty_sweep.csv")
    args = ap.parse_args()

    cfg = FleetConfig(types=(EvTypeSpec(args.count, (0, 4), (10, 18)),),
                      seed=args.seed)
    evs = generate_fleet(cfg)
    sim_end = max(ev.t_d for ev in evs)
    prices = synth_prices(sim_end, args.seed)
    regd = RegDTrace(np.zeros(sim_end * 1800))
    scen = ScenarioConfig(n_scenarios=10, eps_p=3.0, eps_ev=2.0, horizon=8,
                          seed=args.seed)

    rows = []
    for phi_prime in (float(v) for v in args.values.split(",")):
        result = run_day(evs, prices, regd, MpcConfig(phi_prime=phi_prime),
                         scen, "proposed", cfg.rho)
        rep = settle_day(result, 130.0, 50.0)
        rows.append((phi_prime, rep.fulfillment_ratio, rep.daily_revenue))
        print(f"phi'={phi_prime:5.1f}: fulfillment {rep.fulfillment_ratio:.4f} "
              f"revenue {rep.daily_revenue:9.2f} $")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write("phi_prime,fulfillment,daily_revenue\n")
        for phi_prime, ful, revenue in rows:
            fh.write(f"{phi_prime},{ful!r},{revenue!r}\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Daily revenue versus look-ahead window width under different price-noise
levels (perfect EV forecasts, neutral signal)."""
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
    ap.add_argument("--widths", default="2,4,6,8")
    ap.add_argument("--eps-p", default="0,3,6")
    ap.add_argument("--out", default="results/window_sweep.csv")
    args = ap.parse_args()

    cfg = FleetConfig(types=(EvTypeSpec(args.count, (0, 4), (10, 18)),),
                      seed=args.seed)
    evs = generate_fleet(cfg)
    sim_end = max(ev.t_d for ev in evs)
    prices = synth_prices(sim_end, args.seed)
    regd = RegDTrace(np.zeros(sim_end * 1800))

    rows = []
    for eps_p in (float(v) for v in args.eps_p.split(",")):
        for h in (int(v) for v in args.widths.split(",")):
            scenarios = 1 if eps_p == 0 else 10
            scen = ScenarioConfig(n_scenarios=scenarios, eps_p=eps_p,
                                  eps_ev=0.0, horizon=h, seed=args.seed)
            result = run_day(evs, prices, regd, MpcConfig(h_window=h), scen,
                             "proposed", cfg.rho)
            revenue = settle_day(result, 130.0, 50.0).daily_revenue
            rows.append((eps_p, h, revenue))
            print(f"eps_p={eps_p:4.1f} H={h}: revenue {revenue:9.2f} $")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write("eps_p,h_window,daily_revenue\n")
        for eps_p, h, revenue in rows:
            fh.write(f"{eps_p},{h},{revenue!r}\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()

"""Daily accounting, SoC deviation statistics, and strategy comparison.

All money flows are $ with prices in $/MWh; hourly kW quantities convert to
MWh through the one-hour slot length.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import mpc
from .deterministic import immediate_charging, smart_charging
from .fleet import V1G, V2G, EvRecord
from .market import PriceRecord, RegDTrace

KWH_PER_MWH = 1000.0

STRATEGIES = ("immediate", "smart-v1g", "smart-v2g",
              mpc.STRATEGY_PROPOSED, mpc.STRATEGY_ROBUST, mpc.STRATEGY_IDEAL)


class SettlementError(Exception):
    """Missing or inconsistent hourly logs."""


@dataclass
class SettlementReport:
    strategy: str
    energy_cost: float
    degradation_cost: float
    regulation_payment: float
    penalty: float
    owner_compensation: float
    daily_revenue: float
    worst_soc_dev: float
    mean_soc_dev: float
    fulfillment_ratio: float
    unmet_energy_log: dict[int, float] = field(default_factory=dict)

    def to_json(self) -> str:
        payload = asdict(self)
        payload["unmet_energy_log"] = {str(k): v for k, v in
                                       sorted(self.unmet_energy_log.items())}
        return json.dumps(payload, sort_keys=True, indent=2)


def settle_day(result: mpc.DayResult, phi: float, psi: float,
               sigma: float = 0.0) -> SettlementReport:
    """Account one operated day from its hourly logs and departures."""
    hours = result.hours
    if hours:
        expected = list(range(hours[0].hour, hours[0].hour + len(hours)))
        if [h.hour for h in hours] != expected:
            raise SettlementError("hourly logs are not contiguous")
    energy_cost = sum(h.energy_price * h.delivered_kwh for h in hours) / KWH_PER_MWH
    degradation = psi * sum(h.discharge_kwh for h in hours) / KWH_PER_MWH
    reg_payment = sum(h.reg_price * h.r_cleared * mpc.SLOT_HOURS
                      for h in hours) / KWH_PER_MWH
    penalty = phi * sum(h.omega * mpc.SLOT_HOURS for h in hours) / KWH_PER_MWH
    owner_comp = sigma * sum(h.delivered_capacity_kw * mpc.SLOT_HOURS
                             for h in hours) / KWH_PER_MWH
    revenue = reg_payment - energy_cost - degradation - penalty - owner_comp
    devs = np.array([d.soc_dev for d in result.departures]) if result.departures \
        else np.zeros(1)
    cleared = sum(h.r_cleared for h in hours)
    delivered = sum(h.delivered_capacity_kw for h in hours)
    fulfillment = 1.0 if cleared <= 0 else min(1.0, delivered / cleared)
    return SettlementReport(
        strategy=result.strategy,
        energy_cost=energy_cost,
        degradation_cost=degradation,
        regulation_payment=reg_payment,
        penalty=penalty,
        owner_compensation=owner_comp,
        daily_revenue=revenue,
        worst_soc_dev=float(devs.max()),
        mean_soc_dev=float(devs.mean()),
        fulfillment_ratio=fulfillment,
        unmet_energy_log=dict(sorted(result.unmet.items())))


def run_strategy(strategy: str, evs: list[EvRecord], prices: list[PriceRecord],
                 regd: RegDTrace, mpc_config: mpc.MpcConfig,
                 scen_config, rho: float = 0.25
                 ) -> tuple[SettlementReport, mpc.DayResult]:
    """Run one named strategy end to end and settle it."""
    if strategy in (mpc.STRATEGY_PROPOSED, mpc.STRATEGY_ROBUST, mpc.STRATEGY_IDEAL):
        result = mpc.run_day(evs, prices, regd, mpc_config, scen_config,
                             strategy, rho)
    elif strategy == "immediate":
        day = immediate_charging(evs, prices, rho)
        result = mpc.replay_schedule(day, evs, prices, regd,
                                     with_regulation=False, strategy=strategy,
                                     rho=rho)
    elif strategy in ("smart-v1g", "smart-v2g"):
        mode = V1G if strategy.endswith("v1g") else V2G
        day = smart_charging(evs, prices, mpc_config.psi, mode, rho)
        result = mpc.replay_schedule(day, evs, prices, regd,
                                     with_regulation=False, strategy=strategy,
                                     rho=rho, degradation_price=mpc_config.psi)
    else:
        raise SettlementError(f"unknown strategy {strategy!r}")
    report = settle_day(result, mpc_config.phi, mpc_config.psi, mpc_config.sigma)
    return report, result


def compare_strategies(evs: list[EvRecord], prices: list[PriceRecord],
                       regd: RegDTrace, mpc_config: mpc.MpcConfig,
                       scen_config, rho: float = 0.25,
                       strategies: tuple[str, ...] = STRATEGIES
                       ) -> dict[str, SettlementReport]:
    """Run every strategy on identical inputs; one report per strategy."""
    return {name: run_strategy(name, evs, prices, regd, mpc_config,
                               scen_config, rho)[0]
            for name in strategies}


def save_comparison(reports: dict[str, SettlementReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strategy", "energy_cost", "degradation", "reg_payment",
                    "penalty", "daily_revenue", "worst_soc_dev", "fulfillment"])
        for name in reports:
            r = reports[name]
            w.writerow([name, repr(r.energy_cost), repr(r.degradation_cost),
                        repr(r.regulation_payment), repr(r.penalty),
                        repr(r.daily_revenue), repr(r.worst_soc_dev),
                        repr(r.fulfillment_ratio)])

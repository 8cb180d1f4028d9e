"""Intra-hour allocation of POPs and regulation tasks, and 2-second
signal tracking.

Instantaneous EV power is the constant POP minus the normalized signal times
the EV's allocated regulation capacity (positive signal = up-regulation =
less charging).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .fleet import V1G
from .market import SAMPLES_PER_HOUR, RegDTrace, hourly_stats

if TYPE_CHECKING:
    from .mpc import StageOneDecision

_TOL = 1e-9


class DispatchError(Exception):
    """Contract violation in allocation or a power-band breach."""


@dataclass
class DispatchPlan:
    """Per-EV constant POP (net, kW) and regulation assignment (kW) for one hour."""
    hour: int
    ev_ids: list[int]
    pop: np.ndarray
    reg: np.ndarray
    modes: list[str]
    p_max: np.ndarray


def allocate(decision: "StageOneDecision", r_cleared: float,
             modes: list[str], p_max: np.ndarray, hour: int) -> DispatchPlan:
    """Split the cleared regulation task across EVs.

    Fully covered bids are assigned proportionally to each EV's committed
    capacity; when there is a shortfall every EV contributes its full
    commitment.
    """
    z = np.asarray(decision.z, dtype=float)
    pop = np.asarray(decision.x, dtype=float) - np.asarray(decision.y, dtype=float)
    z_total = float(z.sum())
    if decision.omega <= _TOL:
        if z_total <= _TOL:
            if r_cleared > _TOL:
                raise DispatchError(
                    "no committed capacity against a cleared bid; "
                    "the hour solve should have reported a shortfall")
            reg = np.zeros_like(z)
        else:
            reg = r_cleared * z / z_total
    else:
        reg = z.copy()
    plan = DispatchPlan(hour=hour, ev_ids=list(decision.ev_ids), pop=pop,
                        reg=reg, modes=list(modes), p_max=np.asarray(p_max, dtype=float))
    _check_bands(plan)
    return plan


def _check_bands(plan: DispatchPlan) -> None:
    for i, mode in enumerate(plan.modes):
        if plan.reg[i] < -_TOL:
            raise DispatchError(f"EV {plan.ev_ids[i]}: negative regulation task")
        if mode == V1G:
            ok = (plan.pop[i] - plan.reg[i] >= -_TOL
                  and plan.pop[i] + plan.reg[i] <= plan.p_max[i] + _TOL)
        else:
            ok = abs(plan.pop[i]) + plan.reg[i] <= plan.p_max[i] + _TOL
        if not ok:
            raise DispatchError(
                f"EV {plan.ev_ids[i]}: POP {plan.pop[i]:.4f} kW with task "
                f"{plan.reg[i]:.4f} kW exceeds the {mode} band")


@dataclass
class DeliveryReport:
    """Per-EV realized energy and power excursions over one tracked hour."""
    hour: int
    ev_ids: list[int]
    energy_kwh: np.ndarray
    power_min_kw: np.ndarray
    power_max_kw: np.ndarray


def track_signal(plan: DispatchPlan, trace: RegDTrace, hour: int) -> DeliveryReport:
    """Follow the 2-second signal for one hour.

    Delivered energy integrates exactly to (pop - mean * reg) * 1h; power
    excursions are checked against each EV's mode band at runtime.
    """
    mean, _ = hourly_stats(trace, hour)
    block = trace.samples[hour * SAMPLES_PER_HOUR:(hour + 1) * SAMPLES_PER_HOUR]
    sig_min, sig_max = (float(block.min()), float(block.max())) if block.size else (0.0, 0.0)
    energy = (plan.pop - mean * plan.reg) * 1.0
    p_min = plan.pop - sig_max * plan.reg
    p_max = plan.pop - sig_min * plan.reg
    for i, mode in enumerate(plan.modes):
        lo = -_TOL if mode == V1G else -plan.p_max[i] - _TOL
        if p_min[i] < lo or p_max[i] > plan.p_max[i] + _TOL:
            raise DispatchError(
                f"EV {plan.ev_ids[i]}: instantaneous power escapes the {mode} band")
    return DeliveryReport(hour=plan.hour, ev_ids=list(plan.ev_ids),
                          energy_kwh=energy, power_min_kw=p_min, power_max_kw=p_max)


def save_ev_power(plan: DispatchPlan, trace: RegDTrace, hour: int,
                  ev_id: int, path) -> None:
    """Per-sample power dump for one flagged EV."""
    try:
        i = plan.ev_ids.index(ev_id)
    except ValueError as exc:
        raise DispatchError(f"EV {ev_id} not in dispatch plan") from exc
    block = trace.samples[hour * SAMPLES_PER_HOUR:(hour + 1) * SAMPLES_PER_HOUR]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_sec", "power_kw"])
        for k, sig in enumerate(block):
            w.writerow([2 * k, repr(float(plan.pop[i] - sig * plan.reg[i]))])

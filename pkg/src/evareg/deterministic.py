"""Full-information day optimization and the non-MPC baseline strategies.

The day problem separates per EV (the objective has no cross-EV terms), so
each EV is solved as its own small LP and results are merged by id.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import lp
from .analytic import PerEvSchedule
from .fleet import V1G, V2G, EvRecord, energy_params
from .market import PriceRecord, price_arrays


class DayProblemError(Exception):
    """Infeasible EV demand or missing price coverage."""


@dataclass
class DaySchedule:
    schedules: list[PerEvSchedule]
    start_hour: int
    e_profile: np.ndarray       # net scheduled energy per hour, kWh
    r_profile: np.ndarray       # offered regulation capacity per hour, kW
    cost_profile: np.ndarray    # per-hour objective contribution
    objective: float


def _check_coverage(evs: list[EvRecord], start: int, n_hours: int) -> None:
    for ev in evs:
        if ev.t_a < start or ev.t_d > start + n_hours:
            raise DayProblemError(
                f"EV {ev.id}: parked over [{ev.t_a}, {ev.t_d}) but prices cover "
                f"[{start}, {start + n_hours})")


def _check_demand(ev: EvRecord, e_r: float, slot_hours: float) -> None:
    cap = ev.p_max_kw * ev.parking_hours * slot_hours
    if e_r < -1e-9 or e_r > cap + 1e-9:
        raise DayProblemError(
            f"EV {ev.id}: required energy {e_r:.3f} kWh outside [0, {cap:.3f}]")


def v1g_lp(e_r: float, p_max: float, energy_price, reg_price,
           slot_hours: float = 1.0) -> lp.LpProblem:
    """Unidirectional EV subproblem: symmetric regulation band around x."""
    lam = np.asarray(energy_price, dtype=float)
    mu = np.asarray(reg_price, dtype=float)
    t = lam.size
    prob = lp.LpProblem()
    x = prob.add_vars(t, cost=lam * slot_hours, lower=0.0, upper=p_max)
    z = prob.add_vars(t, cost=-mu * slot_hours, lower=0.0, upper=p_max)
    rows = np.arange(t)
    # z <= x  and  x + z <= p
    prob.add_ineq_block(np.concatenate([rows, rows]),
                        np.concatenate([z, x]),
                        np.concatenate([np.ones(t), -np.ones(t)]),
                        np.zeros(t))
    prob.add_ineq_block(np.concatenate([rows, rows]),
                        np.concatenate([x, z]),
                        np.ones(2 * t),
                        np.full(t, p_max))
    prob.add_eq(x, np.full(t, slot_hours), e_r)
    return prob


def v2g_lp(e_r: float, e_max: float, e_min: float, p_max: float,
           energy_price, reg_price, degradation_price: float,
           slot_hours: float = 1.0, fix_y: bool = False) -> lp.LpProblem:
    """Bidirectional EV subproblem with running energy-level bounds."""
    lam = np.asarray(energy_price, dtype=float)
    mu = np.asarray(reg_price, dtype=float)
    t = lam.size
    prob = lp.LpProblem()
    x = prob.add_vars(t, cost=lam * slot_hours, lower=0.0, upper=p_max)
    y = prob.add_vars(t, cost=(degradation_price - lam) * slot_hours,
                      lower=0.0, upper=0.0 if fix_y else p_max)
    z = prob.add_vars(t, cost=-mu * slot_hours, lower=0.0, upper=p_max)
    rows = np.arange(t)
    ones = np.ones(2 * t)
    prob.add_ineq_block(np.concatenate([rows, rows]), np.concatenate([x, z]),
                        ones, np.full(t, p_max))
    prob.add_ineq_block(np.concatenate([rows, rows]), np.concatenate([y, z]),
                        ones, np.full(t, p_max))
    prob.add_eq(np.concatenate([x, y]),
                np.concatenate([np.full(t, slot_hours), np.full(t, -slot_hours)]),
                e_r)
    # Running energy level within [e_min, e_max] at every prefix; the final
    # prefix is the equality above, so only t-1 rows are needed.
    for tau in range(t - 1):
        cols = np.concatenate([x[:tau + 1], y[:tau + 1]])
        vals = np.concatenate([np.full(tau + 1, slot_hours),
                               np.full(tau + 1, -slot_hours)])
        prob.add_ineq(cols, vals, e_max)
        prob.add_ineq(cols, -vals, -e_min)
    return prob


def _solve_ev(prob: lp.LpProblem, ev: EvRecord) -> lp.LpSolution:
    sol = lp.solve_lp(prob)
    if not sol.is_optimal:
        raise DayProblemError(f"EV {ev.id}: subproblem reported {sol.status}")
    return sol


def _assemble(evs, schedules, per_ev_cost, start, n_hours, slot_hours):
    e_profile = np.zeros(n_hours)
    r_profile = np.zeros(n_hours)
    cost_profile = np.zeros(n_hours)
    for ev, sched in zip(evs, schedules):
        lo = sched.t_start - start
        hi = lo + sched.n_slots
        e_profile[lo:hi] += (sched.x - sched.y) * slot_hours
        r_profile[lo:hi] += sched.z
    for ev, cost in zip(evs, per_ev_cost):
        cost_profile[ev.t_a - start:ev.t_d - start] += cost
    return DaySchedule(schedules, start, e_profile, r_profile, cost_profile,
                       float(sum(c.sum() for c in per_ev_cost)))


def solve_deterministic(evs: list[EvRecord], prices: list[PriceRecord],
                        degradation_price: float, rho: float,
                        slot_hours: float = 1.0) -> DaySchedule:
    """Jointly optimal energy + regulation schedule with full information."""
    start, lam, mu = price_arrays(prices)
    _check_coverage(evs, start, lam.size)
    schedules, costs = [], []
    for ev in sorted(evs, key=lambda e: e.id):
        params = energy_params(ev, rho)
        _check_demand(ev, params.e_r, slot_hours)
        sl = slice(ev.t_a - start, ev.t_d - start)
        t = ev.parking_hours
        if ev.mode == V1G:
            prob = v1g_lp(params.e_r, ev.p_max_kw, lam[sl], mu[sl], slot_hours)
            sol = _solve_ev(prob, ev)
            x, z = sol.x[:t], sol.x[t:2 * t]
            y = np.zeros(t)
        else:
            prob = v2g_lp(params.e_r, params.e_max, params.e_min, ev.p_max_kw,
                          lam[sl], mu[sl], degradation_price, slot_hours)
            sol = _solve_ev(prob, ev)
            x, y, z = sol.x[:t], sol.x[t:2 * t], sol.x[2 * t:3 * t]
        schedules.append(PerEvSchedule(ev.id, ev.t_a, x, y, z))
        costs.append(slot_hours * (lam[sl] * (x - y) - mu[sl] * z
                                   + degradation_price * y))
    evs_sorted = sorted(evs, key=lambda e: e.id)
    return _assemble(evs_sorted, schedules, costs, start, lam.size, slot_hours)


def immediate_charging(evs: list[EvRecord], prices: list[PriceRecord],
                       rho: float = 0.25, slot_hours: float = 1.0) -> DaySchedule:
    """Charge at full power from arrival until the requirement is met."""
    start, lam, _ = price_arrays(prices)
    _check_coverage(evs, start, lam.size)
    schedules, costs = [], []
    evs_sorted = sorted(evs, key=lambda e: e.id)
    for ev in evs_sorted:
        e_r = energy_params(ev, rho).e_r
        _check_demand(ev, e_r, slot_hours)
        t = ev.parking_hours
        x = np.zeros(t)
        remaining = e_r
        for k in range(t):
            step = min(ev.p_max_kw, remaining / slot_hours)
            x[k] = step
            remaining -= step * slot_hours
            if remaining <= 1e-12:
                break
        schedules.append(PerEvSchedule(ev.id, ev.t_a, x, np.zeros(t), np.zeros(t)))
        sl = slice(ev.t_a - start, ev.t_d - start)
        costs.append(lam[sl] * x * slot_hours)
    return _assemble(evs_sorted, schedules, costs, start, lam.size, slot_hours)


def smart_charging(evs: list[EvRecord], prices: list[PriceRecord],
                   degradation_price: float, mode: str, rho: float = 0.25,
                   slot_hours: float = 1.0) -> DaySchedule:
    """Energy-only optimization (no regulation offers, z = 0).

    mode="V1G" forbids discharging fleet-wide; mode="V2G" lets records in
    V2G mode arbitrage through discharge at the degradation price.
    """
    if mode not in (V1G, V2G):
        raise DayProblemError(f"unknown smart-charging mode {mode!r}")
    start, lam, _ = price_arrays(prices)
    _check_coverage(evs, start, lam.size)
    zero_mu = np.zeros(lam.size)
    schedules, costs = [], []
    evs_sorted = sorted(evs, key=lambda e: e.id)
    for ev in evs_sorted:
        params = energy_params(ev, rho)
        _check_demand(ev, params.e_r, slot_hours)
        sl = slice(ev.t_a - start, ev.t_d - start)
        t = ev.parking_hours
        if mode == V2G and ev.mode == V2G:
            prob = v2g_lp(params.e_r, params.e_max, params.e_min, ev.p_max_kw,
                          lam[sl], zero_mu[sl], degradation_price, slot_hours)
            sol = _solve_ev(prob, ev)
            x, y = sol.x[:t], sol.x[t:2 * t]
        else:
            prob = v1g_lp(params.e_r, ev.p_max_kw, lam[sl], zero_mu[sl], slot_hours)
            sol = _solve_ev(prob, ev)
            x, y = sol.x[:t], np.zeros(t)
        schedules.append(PerEvSchedule(ev.id, ev.t_a, x, y, np.zeros(t)))
        costs.append(slot_hours * (lam[sl] * (x - y) + degradation_price * y))
    return _assemble(evs_sorted, schedules, costs, start, lam.size, slot_hours)


def save_day_schedule(day: DaySchedule, path) -> None:
    """Per-hour CSV: hour, net energy, capacity offer, cumulative objective."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["hour", "e_kwh", "r_kw", "objective_cum"])
        cum = 0.0
        for k in range(len(day.e_profile)):
            cum += float(day.cost_profile[k])
            w.writerow([day.start_hour + k, repr(float(day.e_profile[k])),
                        repr(float(day.r_profile[k])), repr(cum)])

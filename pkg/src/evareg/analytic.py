"""Closed-form per-EV optimal schedules and virtual-EV aggregation.

A charging task with energy e_r and power cap p over T priced slots reduces
to filling a fixed total width across per-slot cost segments sorted by
marginal price; the resulting schedule is extreme in every slot except at
most one marginal slot chi, and tasks sharing (t_a, t_d, flexibility index,
mode) aggregate exactly into a single virtual EV with summed energy/power.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fleet import V1G, V2G, EvRecord, energy_params


class ScheduleError(Exception):
    """Infeasible demand or precondition violation."""


@dataclass
class PerEvSchedule:
    """Per-slot charging POP x, discharging POP y, regulation capacity z (kW)
    over an EV's parking slots; chi is the marginal (fractional) slot index
    within the window, if any."""
    ev_id: int
    t_start: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    chi: Optional[int] = None

    @property
    def n_slots(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class VirtualEv:
    """Aggregate stand-in for EVs sharing (t_a, t_d, flexibility, mode)."""
    t_a: int
    t_d: int
    flex: int
    mode: str
    e_kwh: float                  # summed required energy
    p_kw: float                   # summed power rating
    member_ids: tuple[int, ...]
    e_plus_kwh: Optional[float] = None   # summed V2G upper energy bound
    e_minus_kwh: Optional[float] = None  # summed V2G lower energy bound


def _ceil_snapped(ratio: float) -> int:
    # Guards against float fuzz pushing an integral ratio to the next slot.
    nearest = round(ratio)
    if abs(ratio - nearest) < 1e-9:
        return int(nearest)
    return int(math.ceil(ratio))


def flex_index_v1g(e_r: float, p_max: float, slot_hours: float = 1.0) -> int:
    """ceil(2 e_r / (p_max slot_hours)): slots touched by an optimal
    unidirectional schedule built from {0, p/2, p} levels."""
    if e_r < 0 or p_max <= 0:
        raise ScheduleError("need e_r >= 0 and p_max > 0")
    return _ceil_snapped(2.0 * e_r / (p_max * slot_hours))


def flex_index_v2g(e_r: float, p_max: float, slot_hours: float = 1.0) -> int:
    """ceil(e_r / (p_max slot_hours)): slots touched by an optimal
    bidirectional schedule built from {0, p} levels."""
    if e_r < 0 or p_max <= 0:
        raise ScheduleError("need e_r >= 0 and p_max > 0")
    return _ceil_snapped(e_r / (p_max * slot_hours))


def _greedy_fill(order: np.ndarray, total: float) -> np.ndarray:
    """Fill unit-width segments in `order` until `total` width is placed."""
    fills = np.zeros(order.size)
    remaining = total
    for k in order:
        if remaining <= 1e-12:
            break
        take = min(1.0, remaining)
        fills[k] = take
        remaining -= take
    return fills


def v1g_threshold_schedule(e_r: float, p_max: float, energy_price, reg_price,
                           slot_hours: float = 1.0, ev_id: int = -1,
                           t_start: int = 0) -> PerEvSchedule:
    """Optimal V1G schedule by marginal-price thresholding.

    Each slot contributes two unit segments in normalized units: raising x
    from 0 to p/2 costs (lambda - mu) per unit (regulation band grows), and
    from p/2 to p costs (lambda + mu) (band shrinks). Filling 2 e_r / p
    units of the globally cheapest segments yields the optimum; ties break
    to the earliest slot.
    """
    lam = np.asarray(energy_price, dtype=float)
    mu = np.asarray(reg_price, dtype=float)
    t = lam.size
    if mu.size != t:
        raise ScheduleError("price arrays must have equal length")
    if (mu < 0).any():
        raise ScheduleError("regulation prices must be non-negative")
    if e_r < 0 or e_r > p_max * t * slot_hours + 1e-9:
        raise ScheduleError(f"demand {e_r} kWh infeasible over {t} slots")
    rates = np.concatenate([lam - mu, lam + mu])
    # Tie-break on the segment index: lower halves (0..t-1) win over upper
    # halves, earliest slot first within each half.
    order = np.lexsort((np.arange(2 * t), rates))
    fills = _greedy_fill(order, min(2.0 * e_r / (p_max * slot_hours), 2.0 * t))
    v = fills[:t] + fills[t:] - 1.0
    x = p_max * (1.0 + v) / 2.0
    z = np.minimum(x, p_max - x)
    frac = [i % t for i, f in enumerate(fills) if 1e-9 < f < 1.0 - 1e-9]
    chi = frac[0] if frac else None
    # Close the energy balance exactly against accumulated rounding.
    _balance(x, e_r, p_max, slot_hours, chi)
    z = np.minimum(x, p_max - x)
    return PerEvSchedule(ev_id, t_start, x, np.zeros(t), z, chi)


def v2g_threshold_schedule(e_r: float, p_max: float, energy_price, reg_price,
                           degradation_price: float, slot_hours: float = 1.0,
                           ev_id: int = -1, t_start: int = 0) -> PerEvSchedule:
    """Optimal V2G schedule when every slot satisfies mu + psi > lambda.

    Under that price premium discharging never pays: y = 0, the full
    complement z = p - x is offered as regulation, and charging fills the
    slots with the smallest (lambda + mu) until e_r is met.
    """
    lam = np.asarray(energy_price, dtype=float)
    mu = np.asarray(reg_price, dtype=float)
    t = lam.size
    if mu.size != t:
        raise ScheduleError("price arrays must have equal length")
    if (mu < 0).any():
        raise ScheduleError("regulation prices must be non-negative")
    bad = np.nonzero(lam >= mu + degradation_price)[0]
    if bad.size:
        raise ScheduleError(
            f"price premium condition mu + psi > lambda fails at slot {bad[0]}; "
            "solve this EV through the LP path instead")
    if e_r < 0 or e_r > p_max * t * slot_hours + 1e-9:
        raise ScheduleError(f"demand {e_r} kWh infeasible over {t} slots")
    order = np.lexsort((np.arange(t), lam + mu))
    fills = _greedy_fill(order, min(e_r / (p_max * slot_hours), float(t)))
    x = p_max * fills
    frac = [i for i, f in enumerate(fills) if 1e-9 < f < 1.0 - 1e-9]
    chi = frac[0] if frac else None
    _balance(x, e_r, p_max, slot_hours, chi)
    z = p_max - x
    return PerEvSchedule(ev_id, t_start, x, np.zeros(t), z, chi)


def _balance(x: np.ndarray, e_r: float, p_max: float, slot_hours: float,
             chi: Optional[int]) -> None:
    gap = e_r - x.sum() * slot_hours
    if abs(gap) < 1e-12:
        return
    at = chi if chi is not None else int(np.argmax(np.minimum(x, p_max - x)))
    x[at] = np.clip(x[at] + gap / slot_hours, 0.0, p_max)


def schedule_objective(sched: PerEvSchedule, energy_price, reg_price,
                       degradation_price: float = 0.0,
                       slot_hours: float = 1.0) -> float:
    """sum(lambda (x - y) - mu z + psi y) over the schedule's slots."""
    lam = np.asarray(energy_price, dtype=float)
    mu = np.asarray(reg_price, dtype=float)
    return float(slot_hours * (lam @ (sched.x - sched.y) - mu @ sched.z
                               + degradation_price * sched.y.sum()))


def partition_groups(evs: list[EvRecord], rho: float,
                     slot_hours: float = 1.0) -> list[VirtualEv]:
    """Group EVs by (t_a, t_d, flexibility index, mode) into virtual EVs with
    summed energy and power; every EV lands in exactly one group."""
    groups: dict[tuple, list[tuple[EvRecord, float, Optional[float], Optional[float]]]] = {}
    for ev in evs:
        params = energy_params(ev, rho)
        if ev.mode == V1G:
            flex = flex_index_v1g(params.e_r, ev.p_max_kw, slot_hours)
        else:
            flex = flex_index_v2g(params.e_r, ev.p_max_kw, slot_hours)
        key = (ev.t_a, ev.t_d, flex, ev.mode)
        groups.setdefault(key, []).append((ev, params.e_r, params.e_max, params.e_min))
    out = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], k[3])):
        members = groups[key]
        t_a, t_d, flex, mode = key
        v2g = mode == V2G
        out.append(VirtualEv(
            t_a=t_a, t_d=t_d, flex=flex, mode=mode,
            e_kwh=sum(m[1] for m in members),
            p_kw=sum(m[0].p_max_kw for m in members),
            member_ids=tuple(sorted(m[0].id for m in members)),
            e_plus_kwh=sum(m[2] for m in members) if v2g else None,
            e_minus_kwh=sum(m[3] for m in members) if v2g else None))
    return out

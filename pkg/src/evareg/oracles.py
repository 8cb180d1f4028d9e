"""Randomized cross-check suites: closed-form threshold schedules against
the LP formulation, and virtual-EV aggregation against summed individuals.

These back the `oracle-test` CLI subcommand and the acceptance gates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analytic import (PerEvSchedule, schedule_objective, v1g_threshold_schedule,
                       v2g_threshold_schedule)
from .deterministic import v1g_lp, v2g_lp
from .lp import REL_TOL, solve_lp

DEFAULT_PSI = 50.0


@dataclass
class SuiteResult:
    name: str
    n_cases: int
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.name}: {self.n_cases - len(self.failures)}"
                f"/{self.n_cases} cases")


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _extreme_slots(sched: PerEvSchedule, p: float, levels) -> int:
    """Count slots whose charging POP is away from every allowed level."""
    x = sched.x
    dist = np.min(np.abs(x[:, None] - np.array(levels)[None, :]), axis=1)
    return int((dist > 1e-6 * max(1.0, p)).sum())


def run_v1g_suite(n_cases: int = 1000, seed: int = 2024) -> SuiteResult:
    """Threshold objective equals the LP optimum on random V1G instances,
    and the schedule is extreme everywhere except at most one slot."""
    rng = np.random.default_rng(seed)
    result = SuiteResult("v1g threshold vs LP", n_cases)
    for case in range(n_cases):
        t = int(rng.integers(2, 13))
        p = float(rng.uniform(1.0, 20.0))
        lam = rng.uniform(0.0, 100.0, t)
        mu = rng.uniform(0.0, 50.0, t)
        e_r = float(rng.uniform(0.0, p * t))
        sched = v1g_threshold_schedule(e_r, p, lam, mu)
        obj = schedule_objective(sched, lam, mu)
        sol = solve_lp(v1g_lp(e_r, p, lam, mu))
        if not sol.is_optimal or _rel_err(obj, sol.objective) > REL_TOL:
            result.failures.append(
                f"case {case}: threshold {obj:.9g} vs LP {sol.objective}")
            continue
        if _extreme_slots(sched, p, (0.0, p / 2.0, p)) > 1:
            result.failures.append(f"case {case}: more than one marginal slot")
    return result


def run_v2g_suite(n_cases: int = 1000, seed: int = 2025,
                  psi: float = DEFAULT_PSI) -> SuiteResult:
    """Same protocol for V2G under the price premium mu + psi > lambda;
    additionally the LP optimum must not move when discharging is fixed to 0."""
    rng = np.random.default_rng(seed)
    result = SuiteResult("v2g threshold vs LP", n_cases)
    for case in range(n_cases):
        t = int(rng.integers(2, 13))
        p = float(rng.uniform(1.0, 20.0))
        mu = rng.uniform(0.0, 50.0, t)
        lam = np.minimum(rng.uniform(0.0, 100.0, t), mu + psi - 1e-6)
        e_r = float(rng.uniform(0.0, p * t))
        # Bounds wide enough to stay inactive, as a charging-only profile needs.
        e_max, e_min = e_r + p, -p
        sched = v2g_threshold_schedule(e_r, p, lam, mu, psi)
        obj = schedule_objective(sched, lam, mu, psi)
        sol = solve_lp(v2g_lp(e_r, e_max, e_min, p, lam, mu, psi))
        fixed = solve_lp(v2g_lp(e_r, e_max, e_min, p, lam, mu, psi, fix_y=True))
        if not sol.is_optimal or _rel_err(obj, sol.objective) > REL_TOL:
            result.failures.append(
                f"case {case}: threshold {obj:.9g} vs LP {sol.objective}")
            continue
        if not fixed.is_optimal or _rel_err(sol.objective, fixed.objective) > REL_TOL:
            result.failures.append(
                f"case {case}: fixing y=0 moved the optimum "
                f"({sol.objective} -> {fixed.objective})")
            continue
        if _extreme_slots(sched, p, (0.0, p)) > 1:
            result.failures.append(f"case {case}: more than one marginal slot")
    return result


def run_aggregation_suite(n_groups: int = 200, seed: int = 2026,
                          psi: float = DEFAULT_PSI) -> SuiteResult:
    """Summed individual threshold objectives equal the virtual-EV objective
    for groups sharing (window, flexibility index, mode), and the summed
    schedule is feasible for the virtual EV."""
    rng = np.random.default_rng(seed)
    result = SuiteResult("virtual-EV aggregation", n_groups)
    for case in range(n_groups):
        v2g = bool(rng.integers(0, 2))
        t = int(rng.integers(2, 13))
        n = int(rng.integers(2, 11))
        mu = rng.uniform(0.0, 50.0, t)
        lam = (np.minimum(rng.uniform(0.0, 100.0, t), mu + psi - 1e-6)
               if v2g else rng.uniform(0.0, 100.0, t))
        slots_per_unit = 1 if v2g else 2
        flex = int(rng.integers(1, slots_per_unit * t + 1))
        p = rng.uniform(1.0, 20.0, n)
        frac = rng.uniform(1e-6, 1.0, n)
        e = (flex - 1 + frac) * p / slots_per_unit
        total_obj = 0.0
        agg_x = np.zeros(t)
        agg_z = np.zeros(t)
        for i in range(n):
            if v2g:
                sched = v2g_threshold_schedule(float(e[i]), float(p[i]), lam, mu, psi)
                total_obj += schedule_objective(sched, lam, mu, psi)
            else:
                sched = v1g_threshold_schedule(float(e[i]), float(p[i]), lam, mu)
                total_obj += schedule_objective(sched, lam, mu)
            agg_x += sched.x
            agg_z += sched.z
        p_v, e_v = float(p.sum()), float(e.sum())
        if v2g:
            virt = v2g_threshold_schedule(e_v, p_v, lam, mu, psi)
            virt_obj = schedule_objective(virt, lam, mu, psi)
        else:
            virt = v1g_threshold_schedule(e_v, p_v, lam, mu)
            virt_obj = schedule_objective(virt, lam, mu)
        if _rel_err(total_obj, virt_obj) > REL_TOL:
            result.failures.append(
                f"case {case}: sum {total_obj:.9g} vs virtual {virt_obj:.9g}")
            continue
        tol = 1e-9 * max(1.0, p_v)
        band_ok = (agg_x >= -tol).all() and (agg_x <= p_v + tol).all() \
            and (agg_z >= -tol).all()
        if v2g:
            band_ok &= (agg_x + agg_z <= p_v + tol).all()
        else:
            band_ok &= (np.minimum(agg_x, p_v - agg_x) >= agg_z - tol).all()
        if not band_ok or abs(agg_x.sum() - e_v) > 1e-6 * max(1.0, e_v):
            result.failures.append(f"case {case}: aggregate schedule infeasible")
    return result


def run_all(n_cases: int = 1000, n_groups: int = 200,
            seed: int = 7) -> list[SuiteResult]:
    return [run_v1g_suite(n_cases, seed),
            run_v2g_suite(n_cases, seed + 1),
            run_aggregation_suite(n_groups, seed + 2)]

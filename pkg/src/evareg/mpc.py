"""Hourly two-stage stochastic program with CVaR, rolling-horizon driver,
and end-of-hour state correction.

Each operating hour K solves one LP over the window {K, .., K+H}: hour-K
commitments (POPs, regulation split, the next-hour capacity bid) are shared
across scenarios; look-ahead recourse variables are scenario-indexed.
Unconnected slots carry no variables at all, which enforces the
availability masks structurally.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import dispatch as rt
from .analytic import VirtualEv, partition_groups
from .deterministic import DaySchedule, immediate_charging, smart_charging, solve_deterministic
from .fleet import V1G, V2G, EvRecord, energy_params
from .lp import LpProblem, solve_lp
from .market import PriceRecord, RegDTrace, hourly_stats, price_arrays
from .scenarios import ScenarioConfig, ScenarioSet, generate_scenarios

SLOT_HOURS = 1.0

STRATEGY_PROPOSED = "proposed"
STRATEGY_ROBUST = "robust"
STRATEGY_IDEAL = "ideal"


class MpcError(Exception):
    """State inconsistency or an LP verdict that should be impossible."""


@dataclass(frozen=True)
class MpcConfig:
    h_window: int = 8
    cvar_alpha: float = 0.2
    phi: float = 130.0        # $/MWh penalty on current-hour shortfall
    phi_prime: float = 40.0   # $/MWh penalty on next-hour shortfall
    psi: float = 50.0         # $/MWh discharge degradation price
    sigma: float = 0.0        # $/MWh owner compensation per delivered capacity
    aggregate_lookahead: bool = False

    def __post_init__(self):
        if self.h_window < 1:
            raise MpcError("h_window must be >= 1")
        if not 0.0 <= self.cvar_alpha < 1.0:
            raise MpcError("cvar_alpha must lie in [0, 1)")
        if self.phi < 0 or self.phi_prime < 0:
            raise MpcError("penalty factors must be non-negative")


@dataclass
class ConnectedEv:
    """Mutable per-EV rolling state for a plugged-in vehicle."""
    id: int
    mode: str
    t_a: int
    t_d: int
    p_max: float
    capacity: float
    soc_a: float
    soc_r: float
    e_target: float                 # original required energy, kWh
    e_rem: float                    # remaining required energy, kWh
    e_plus: Optional[float] = None  # remaining V2G upper energy bound
    e_minus: Optional[float] = None
    delivered: float = 0.0          # cumulative delivered energy, kWh

    def gamma(self, hour: int) -> int:
        return self.t_d - hour


@dataclass
class MpcState:
    hour: int
    connected: list[ConnectedEv]
    r_cleared: float = 0.0          # cleared capacity for the current hour, kW
    unmet: dict[int, float] = field(default_factory=dict)


@dataclass
class StageOneDecision:
    """Hour-K commitments: per-EV POPs and regulation split, the realized
    shortfall, and the next-hour capacity bid."""
    ev_ids: list[int]
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    omega: float
    r_next: float
    objective: float


@dataclass
class DepartureRecord:
    ev_id: int
    capacity: float
    deviation_kwh: float     # residual required energy at departure (+ = short)

    @property
    def soc_dev(self) -> float:
        return abs(self.deviation_kwh) / self.capacity


def g_ratio(h: int, gamma: int) -> float:
    """Fraction of an EV's remaining required energy targeted inside an
    h-slot look-ahead when gamma slots remain before departure."""
    if gamma < 1:
        raise MpcError("gamma must be >= 1")
    return min(1.0, h / gamma)


def connect_fleet(evs: list[EvRecord], hour: int, rho: float) -> MpcState:
    """Initial state: every EV parked at `hour` with fresh energy params.
    Demands already infeasible for the remaining window are clamped and
    logged, mirroring the end-of-hour correction."""
    state = MpcState(hour=hour, connected=[
        _connect(ev, rho) for ev in sorted(evs, key=lambda e: e.id)
        if ev.t_a <= hour < ev.t_d])
    _clamp_connected(state)
    return state


def _clamp_connected(state: MpcState) -> None:
    for ev in state.connected:
        cap = ev.p_max * ev.gamma(state.hour) * SLOT_HOURS
        lo = 0.0 if ev.mode == V1G else -cap
        clamped = min(max(ev.e_rem, lo), cap)
        if clamped != ev.e_rem:
            state.unmet[ev.id] = state.unmet.get(ev.id, 0.0) + abs(ev.e_rem - clamped)
            ev.e_rem = clamped
        if ev.mode == V2G:
            ev.e_minus = min(ev.e_minus, ev.e_rem, 0.0)
            ev.e_plus = max(ev.e_plus, ev.e_rem, 0.0)


def _connect(ev: EvRecord, rho: float) -> ConnectedEv:
    params = energy_params(ev, rho)
    return ConnectedEv(
        id=ev.id, mode=ev.mode, t_a=ev.t_a, t_d=ev.t_d, p_max=ev.p_max_kw,
        capacity=ev.capacity_kwh, soc_a=ev.soc_a, soc_r=ev.soc_r,
        e_target=params.e_r, e_rem=params.e_r,
        e_plus=params.e_max, e_minus=params.e_min)


# ---------------------------------------------------------------------------
# Two-stage LP assembly
# ---------------------------------------------------------------------------

@dataclass
class _Block:
    """One look-ahead column group: a single connected EV, an aggregated
    group of connected EVs, or one upcoming virtual EV."""
    mode: str
    members: np.ndarray            # indices into state.connected ([] if upcoming)
    upcoming_idx: int              # index into scenarios.upcoming, or -1
    hs: np.ndarray                 # active look-ahead offsets within 1..H
    p: np.ndarray                  # (S,) power rating per scenario, kW
    target: np.ndarray             # (S,) windowed energy target, kWh
    e_plus: Optional[np.ndarray] = None   # (S,) V2G bounds
    e_minus: Optional[np.ndarray] = None
    x: Optional[np.ndarray] = None        # (S, nh) variable columns
    y: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None


@dataclass
class TwoStageIndex:
    """Variable map of one assembled two-stage LP, for extraction and tests."""
    ev_ids: list[int]
    x0: np.ndarray
    y0: np.ndarray
    z0: np.ndarray
    omega_col: int
    r_next_col: int
    blocks: list[_Block]
    probs: np.ndarray
    alpha: float
    var_col: int = -1
    v_cols: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    cost_rows: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    cost_cols: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    cost_vals: np.ndarray = field(default_factory=lambda: np.empty(0))

    def scenario_costs(self, x: np.ndarray) -> np.ndarray:
        """Realized per-scenario cost of a solution vector."""
        return np.bincount(self.cost_rows, weights=self.cost_vals * x[self.cost_cols],
                           minlength=self.probs.size)

    def lookahead_values(self, x: np.ndarray, s: int, kind: str) -> np.ndarray:
        """(n_blocks, H) values of x/y/z for scenario s; masked slots are 0."""
        h = max((int(b.hs.max()) for b in self.blocks if b.hs.size), default=0)
        out = np.zeros((len(self.blocks), h))
        for i, b in enumerate(self.blocks):
            cols = getattr(b, kind)
            if cols is None or not b.hs.size:
                continue
            out[i, b.hs - 1] = x[cols[s]]
        return out


def _flex_key(mode: str, e: float, p: float) -> int:
    ratio = (2.0 * e if mode == V1G else e) / p
    nearest = round(ratio)
    if abs(ratio - nearest) < 1e-9:
        return int(nearest)
    return int(math.ceil(ratio))


def _lookahead_blocks(state: MpcState, scen: ScenarioSet, h: int,
                      aggregate: bool) -> list[_Block]:
    k = state.hour
    s = scen.n_scenarios
    blocks: list[_Block] = []
    if aggregate:
        # Arrival hour is history for a connected EV: two EVs with the same
        # departure, mode, and flexibility of the *remaining* demand face
        # identical futures, so the look-ahead key drops t_a.
        groups: dict[tuple, list[int]] = {}
        for i, ev in enumerate(state.connected):
            key = (ev.t_d, _flex_key(ev.mode, ev.e_rem, ev.p_max), ev.mode)
            groups.setdefault(key, []).append(i)
        member_sets = [np.array(groups[key]) for key in sorted(groups)]
    else:
        member_sets = [np.array([i]) for i in range(len(state.connected))]
    for members in member_sets:
        evs = [state.connected[i] for i in members]
        t_d = evs[0].t_d
        gamma = t_d - k
        hs = np.arange(1, min(h, gamma - 1) + 1)
        g = g_ratio(h, gamma)
        e_sum = sum(ev.e_rem for ev in evs)
        v2g = evs[0].mode == V2G
        blocks.append(_Block(
            mode=evs[0].mode, members=members, upcoming_idx=-1, hs=hs,
            p=np.full(s, sum(ev.p_max for ev in evs)),
            target=np.full(s, e_sum * g),
            e_plus=np.full(s, sum(ev.e_plus for ev in evs)) if v2g else None,
            e_minus=np.full(s, sum(ev.e_minus for ev in evs)) if v2g else None))
    for u, group in enumerate(scen.upcoming):
        if not (k + 1 <= group.t_a <= k + h):
            raise MpcError(f"upcoming group arriving at {group.t_a} outside window")
        hs = np.arange(group.t_a - k, min(h, group.t_d - k - 1) + 1)
        g = g_ratio(h, group.t_d - group.t_a)
        p_s = scen.upcoming_p[:, u]
        cap = p_s * hs.size * SLOT_HOURS
        target = np.clip(scen.upcoming_e[:, u] * g, -cap, cap)
        v2g = group.mode == V2G
        blocks.append(_Block(
            mode=group.mode, members=np.empty(0, dtype=np.int64), upcoming_idx=u,
            hs=hs, p=p_s.copy(), target=target,
            e_plus=np.full(s, group.e_plus_kwh) if v2g else None,
            e_minus=np.full(s, group.e_minus_kwh) if v2g else None))
    return blocks


def build_two_stage(state: MpcState, scen: ScenarioSet, energy_price_now: float,
                    config: MpcConfig, expected_objective: bool = False
                    ) -> tuple[LpProblem, TwoStageIndex]:
    """Assemble the hour-K two-stage LP (CVaR objective by default;
    `expected_objective` swaps in the risk-neutral expected cost)."""
    h = config.h_window
    if scen.horizon != h:
        raise MpcError(f"scenario horizon {scen.horizon} != window {h}")
    if scen.start_hour != state.hour:
        raise MpcError("scenario set built for a different hour")
    s = scen.n_scenarios
    k = state.hour
    slot = SLOT_HOURS
    mu_eff = scen.reg_price - config.sigma
    if config.sigma > 0 and (scen.reg_price < config.sigma).any():
        raise MpcError("owner compensation sigma exceeds a regulation price")
    lam_s = scen.energy_price
    r_k = max(state.r_cleared, 0.0)

    prob = LpProblem()
    conn = state.connected
    n = len(conn)
    p_arr = np.array([ev.p_max for ev in conn])
    v2g_mask = np.array([ev.mode == V2G for ev in conn], dtype=bool)

    # First stage: per-EV hour-K POPs and regulation, shortfall, next bid.
    # Individual laxity floors keep every EV's remaining demand reachable
    # even when the look-ahead is aggregated into groups.
    x0_ub = p_arr.copy()
    x0_lb = np.zeros(n)
    for i, ev in enumerate(conn):
        slack = ev.p_max * (ev.gamma(k) - 1) * slot
        if ev.mode == V1G:
            g = g_ratio(h, ev.gamma(k))
            x0_ub[i] = min(ev.p_max, max(ev.e_rem, 0.0) * g / slot)
            x0_lb[i] = max(0.0, (ev.e_rem - slack) / slot)
    x0 = prob.add_vars(n, lower=x0_lb, upper=x0_ub)
    y0 = prob.add_vars(n, lower=0.0, upper=np.where(v2g_mask, p_arr, 0.0))
    # V1G capacity is symmetric around the POP, so it never exceeds p/2.
    z0 = prob.add_vars(n, lower=0.0, upper=np.where(v2g_mask, p_arr, p_arr / 2))
    omega_col = int(prob.add_vars(1, lower=0.0, upper=r_k)[0])
    r_next_col = int(prob.add_vars(1, lower=0.0)[0])

    if n:
        rows = np.arange(n)
        ones = np.ones(2 * n)
        prob.add_ineq_block(np.concatenate([rows, rows]), np.concatenate([x0, z0]),
                            ones, p_arr)
        prob.add_ineq_block(np.concatenate([rows, rows]), np.concatenate([y0, z0]),
                            ones, p_arr)
        v1g_rows = np.nonzero(~v2g_mask)[0]
        if v1g_rows.size:
            m = v1g_rows.size
            prob.add_ineq_block(np.concatenate([np.arange(m), np.arange(m)]),
                                np.concatenate([z0[v1g_rows], x0[v1g_rows]]),
                                np.concatenate([np.ones(m), -np.ones(m)]),
                                np.zeros(m))
        v2g_rows = np.nonzero(v2g_mask)[0]
        if v2g_rows.size:
            # Hour-K net energy inside the remaining V2G bounds, and inside
            # the per-EV laxity box (demand reachable in the remaining slots).
            m = v2g_rows.size
            slack = np.array([conn[i].p_max * (conn[i].gamma(k) - 1) * slot
                              for i in v2g_rows])
            e_rem = np.array([conn[i].e_rem for i in v2g_rows])
            hi = np.minimum(np.array([conn[i].e_plus for i in v2g_rows]),
                            e_rem + slack)
            lo = np.maximum(np.array([conn[i].e_minus for i in v2g_rows]),
                            e_rem - slack)
            rr = np.concatenate([np.arange(m), np.arange(m)])
            cc = np.concatenate([x0[v2g_rows], y0[v2g_rows]])
            vv = np.concatenate([np.full(m, slot), np.full(m, -slot)])
            prob.add_ineq_block(rr, cc, vv, hi)
            prob.add_ineq_block(rr, cc, -vv, -lo)

    blocks = _lookahead_blocks(state, scen, h, config.aggregate_lookahead)

    # Scenario cost triplets: (row = scenario, col, val). First-stage costs
    # appear in every scenario's cost expression.
    cost_rows: list[np.ndarray] = []
    cost_cols: list[np.ndarray] = []
    cost_vals: list[np.ndarray] = []

    def cost(rows_, cols_, vals_):
        cost_rows.append(np.asarray(rows_, dtype=np.int64))
        cost_cols.append(np.asarray(cols_, dtype=np.int64))
        cost_vals.append(np.asarray(vals_, dtype=float))

    srange = np.arange(s)
    if n:
        cost(np.repeat(srange, n), np.tile(x0, s),
             np.full(s * n, energy_price_now * slot))
        yc = y0[v2g_mask]
        if yc.size:
            cost(np.repeat(srange, yc.size), np.tile(yc, s),
                 np.full(s * yc.size, (config.psi - energy_price_now) * slot))
    cost(srange, np.full(s, omega_col), np.full(s, config.phi * slot))
    cost(srange, np.full(s, r_next_col), -mu_eff[:, 0] * slot)

    omega_s = prob.add_vars(s, lower=0.0)

    for b in blocks:
        nh = b.hs.size
        if nh == 0:
            # Departs right after hour K: the whole windowed target lands on
            # the first stage (one scenario-independent equality).
            m = b.members.size
            cols = [x0[b.members]]
            vals = [np.full(m, slot)]
            if b.mode == V2G:
                cols.append(y0[b.members])
                vals.append(np.full(m, -slot))
            prob.add_eq(np.concatenate(cols), np.concatenate(vals),
                        float(b.target[0]))
            continue
        total = s * nh
        p_ub = np.repeat(b.p, nh)
        b.x = prob.add_vars(total, lower=0.0, upper=p_ub).reshape(s, nh)
        b.z = prob.add_vars(total, lower=0.0,
                            upper=p_ub if b.mode == V2G else p_ub / 2).reshape(s, nh)
        if b.mode == V2G:
            b.y = prob.add_vars(total, lower=0.0, upper=p_ub).reshape(s, nh)
        p_rep = np.repeat(b.p, nh)
        rows = np.arange(total)
        rr = np.concatenate([rows, rows])
        prob.add_ineq_block(rr, np.concatenate([b.x.ravel(), b.z.ravel()]),
                            np.ones(2 * total), p_rep)
        if b.mode == V2G:
            prob.add_ineq_block(rr, np.concatenate([b.y.ravel(), b.z.ravel()]),
                                np.ones(2 * total), p_rep)
        else:
            prob.add_ineq_block(rr, np.concatenate([b.z.ravel(), b.x.ravel()]),
                                np.concatenate([np.ones(total), -np.ones(total)]),
                                np.zeros(total))

        # Windowed energy target, one equality per scenario.
        e_rows = [np.repeat(srange, nh)]
        e_cols = [b.x.ravel()]
        e_vals = [np.full(total, slot)]
        if b.mode == V2G:
            e_rows.append(np.repeat(srange, nh))
            e_cols.append(b.y.ravel())
            e_vals.append(np.full(total, -slot))
        m = b.members.size
        if m:
            e_rows.append(np.repeat(srange, m))
            e_cols.append(np.tile(x0[b.members], s))
            e_vals.append(np.full(s * m, slot))
            if b.mode == V2G:
                e_rows.append(np.repeat(srange, m))
                e_cols.append(np.tile(y0[b.members], s))
                e_vals.append(np.full(s * m, -slot))
        prob.add_eq_block(np.concatenate(e_rows), np.concatenate(e_cols),
                          np.concatenate(e_vals), b.target)

        if b.mode == V2G and nh > 1:
            # Running net-energy bounds at intermediate prefixes, skipping
            # depths too short for the bound to be reachable at full power.
            slots_inside = np.arange(1, nh) + (1 if m else 0)
            reach = float(b.p.max()) * slot * slots_inside
            j_all, jj_all = np.tril_indices(nh - 1)
            for sign, bound in ((1.0, b.e_plus), (-1.0, -b.e_minus)):
                keep = reach > float(bound.min()) - 1e-12
                if not keep.any():
                    continue
                j_min = int(np.argmax(keep))
                nk = nh - 1 - j_min
                sel = j_all >= j_min
                j_sel = j_all[sel] - j_min
                jj_sel = jj_all[sel]
                npairs = j_sel.size
                pr = np.repeat(srange * nk, npairs) + np.tile(j_sel, s)
                pc_x = b.x[np.repeat(srange, npairs), np.tile(jj_sel, s)]
                pc_y = b.y[np.repeat(srange, npairs), np.tile(jj_sel, s)]
                if m:
                    rows_fs = np.repeat(np.arange(s * nk), m)
                    cols_fs_x = np.tile(x0[b.members], s * nk)
                    cols_fs_y = np.tile(y0[b.members], s * nk)
                else:
                    rows_fs = np.empty(0, dtype=np.int64)
                    cols_fs_x = cols_fs_y = rows_fs
                all_rows = np.concatenate([pr, pr, rows_fs, rows_fs])
                all_cols = np.concatenate([pc_x, pc_y, cols_fs_x, cols_fs_y])
                all_vals = sign * np.concatenate(
                    [np.full(npairs * s, slot), np.full(npairs * s, -slot),
                     np.full(rows_fs.size, slot), np.full(rows_fs.size, -slot)])
                prob.add_ineq_block(all_rows, all_cols, all_vals,
                                    np.repeat(bound, nk))

        # Costs: energy at every slot, capacity revenue only from slot K+2 on
        # (the hour-K+1 capacity is paid through the bid r_next).
        lam_b = lam_s[:, b.hs - 1]
        cost(np.repeat(srange, nh), b.x.ravel(), (lam_b * slot).ravel())
        if b.mode == V2G:
            cost(np.repeat(srange, nh), b.y.ravel(),
                 ((config.psi - lam_b) * slot).ravel())
        rev = b.hs >= 2
        if rev.any():
            mu_b = mu_eff[:, b.hs[rev] - 1]
            cost(np.repeat(srange, int(rev.sum())), b.z[:, rev].ravel(),
                 (-mu_b * slot).ravel())

    cost(srange, omega_s, np.full(s, config.phi_prime * slot))

    # Cleared-capacity coverage at hour K.
    if n:
        prob.add_ineq(np.concatenate([z0, [omega_col]]),
                      np.concatenate([-np.ones(n), [-1.0]]), -r_k)
    # Next-hour coverage and bid cap, per scenario.
    cap = np.zeros(s)
    for b in blocks:
        if 1 in b.hs:
            cap += b.p
    for si in range(s):
        cols = [r_next_col, omega_s[si]]
        vals = [1.0, -1.0]
        for b in blocks:
            if b.hs.size and b.hs[0] <= 1 <= b.hs[-1]:
                pos = int(np.searchsorted(b.hs, 1))
                cols.append(b.z[si, pos])
                vals.append(-1.0)
        prob.add_ineq(np.array(cols), np.array(vals), 0.0)
        prob.add_ineq(np.array([omega_s[si], r_next_col]),
                      np.array([1.0, -1.0]), 0.0)
        prob.add_ineq(np.array([r_next_col]), np.array([1.0]), cap[si])

    rows_all = np.concatenate(cost_rows)
    cols_all = np.concatenate(cost_cols)
    vals_all = np.concatenate(cost_vals)
    index = TwoStageIndex(ev_ids=[ev.id for ev in conn], x0=x0, y0=y0, z0=z0,
                          omega_col=omega_col, r_next_col=r_next_col,
                          blocks=blocks, probs=scen.probs, alpha=config.cvar_alpha,
                          cost_rows=rows_all, cost_cols=cols_all, cost_vals=vals_all)

    if expected_objective:
        prob.add_cost(cols_all, scen.probs[rows_all] * vals_all)
    else:
        var_col = int(prob.add_vars(1, lower=-np.inf)[0])
        v_cols = prob.add_vars(s, lower=0.0)
        order = np.argsort(rows_all, kind="stable")
        bounds = np.searchsorted(rows_all[order], np.arange(s + 1))
        for si in range(s):
            sel = order[bounds[si]:bounds[si + 1]]
            prob.add_ineq(np.concatenate([cols_all[sel], [var_col, v_cols[si]]]),
                          np.concatenate([vals_all[sel], [-1.0, -1.0]]), 0.0)
        prob.add_cost(np.concatenate([[var_col], v_cols]),
                      np.concatenate([[1.0], scen.probs / (1.0 - config.cvar_alpha)]))
        index.var_col = var_col
        index.v_cols = v_cols
    return prob, index


def snap_to_bands(x: np.ndarray, y: np.ndarray, z: np.ndarray, p: np.ndarray,
                  modes: list[str]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project an LP point (feasible only to solver tolerance) exactly onto
    the per-EV power bands so dispatch invariants hold to float precision."""
    x = np.clip(x, 0.0, p)
    y = np.clip(y, 0.0, p)
    v1g = np.array([m == V1G for m in modes], dtype=bool)
    y = np.where(v1g, 0.0, y)
    cap = np.where(v1g, np.minimum(x, p - x), p - np.abs(x - y))
    z = np.clip(z, 0.0, np.maximum(cap, 0.0))
    return x, y, z


def solve_hour(state: MpcState, scen: ScenarioSet, energy_price_now: float,
               config: MpcConfig) -> StageOneDecision:
    """Solve the hour-K program and extract the first-stage commitments."""
    prob, index = build_two_stage(state, scen, energy_price_now, config)
    sol = solve_lp(prob)
    if not sol.is_optimal:
        raise MpcError(f"two-stage LP reported {sol.status}; "
                       "state clamping should prevent this")
    x, y, z = snap_to_bands(sol.x[index.x0], sol.x[index.y0], sol.x[index.z0],
                            np.array([ev.p_max for ev in state.connected]),
                            state_modes(state))
    r_k = max(state.r_cleared, 0.0)
    omega = max(0.0, r_k - float(z.sum()))
    r_next = max(0.0, float(sol.x[index.r_next_col]))
    return StageOneDecision(ev_ids=list(index.ev_ids), x=x, y=y, z=z,
                            omega=omega, r_next=r_next,
                            objective=float(sol.objective))


# ---------------------------------------------------------------------------
# State correction and the rolling driver
# ---------------------------------------------------------------------------

def roll(state: MpcState, decision: StageOneDecision, plan: rt.DispatchPlan,
         reg_mean: float, arrivals: list[EvRecord], rho: float
         ) -> tuple[MpcState, list[DepartureRecord]]:
    """Advance one hour: settle delivered energy into per-EV state, drop
    departures, connect arrivals, install the next cleared bid."""
    if plan.ev_ids != [ev.id for ev in state.connected]:
        raise MpcError("dispatch plan does not match connected set")
    new_hour = state.hour + 1
    departures: list[DepartureRecord] = []
    kept: list[ConnectedEv] = []
    unmet = dict(state.unmet)
    for i, ev in enumerate(state.connected):
        delivered = (plan.pop[i] - reg_mean * plan.reg[i]) * SLOT_HOURS
        ev.e_rem -= delivered
        ev.delivered += delivered
        if ev.mode == V2G:
            ev.e_plus -= delivered
            ev.e_minus -= delivered
        if ev.t_d <= new_hour:
            departures.append(DepartureRecord(ev.id, ev.capacity, ev.e_rem))
            continue
        kept.append(ev)
    for ev in sorted(arrivals, key=lambda e: e.id):
        if not ev.t_a <= new_hour < ev.t_d:
            raise MpcError(f"EV {ev.id} connected outside its parking window")
        kept.append(_connect(ev, rho))
    kept.sort(key=lambda e: e.id)
    new_state = MpcState(hour=new_hour, connected=kept,
                         r_cleared=decision.r_next, unmet=unmet)
    _clamp_connected(new_state)
    return new_state, departures


@dataclass
class HourLog:
    hour: int
    energy_price: float
    reg_price: float
    r_cleared: float          # kW cleared for this hour
    omega: float              # kW shortfall realized this hour
    net_pop_kwh: float        # scheduled net POP energy
    discharge_kwh: float      # scheduled discharging POP energy
    delivered_kwh: float      # energy actually exchanged incl. regulation
    delivered_capacity_kw: float
    objective: float


@dataclass
class DayResult:
    strategy: str
    hours: list[HourLog]
    departures: list[DepartureRecord]
    unmet: dict[int, float]


def _forecast_base(series: np.ndarray, start_idx: int, h: int) -> np.ndarray:
    """Truth-as-forecast over h hours with persistence past the series end."""
    out = np.full(h, series[-1])
    avail = series[start_idx:start_idx + h]
    out[:avail.size] = avail
    return out


def run_day(evs: list[EvRecord], prices: list[PriceRecord], regd: RegDTrace,
            mpc_config: MpcConfig, scen_config: ScenarioConfig,
            strategy: str, rho: float = 0.25,
            price_forecast: Optional[list[PriceRecord]] = None) -> "DayResult":
    """Roll the MPC (or replay the full-information schedule) over the whole
    simulation span, dispatching the regulation signal each hour.

    Scenario fans center on `price_forecast` when given (so realized prices
    may deviate from the forecast, as in live operation); by default the
    realized series itself serves as an exact forecast base.
    """
    if not evs:
        return DayResult(strategy, [], [], {})
    if strategy == STRATEGY_IDEAL:
        day = solve_deterministic(evs, prices, mpc_config.psi, rho)
        return replay_schedule(day, evs, prices, regd, with_regulation=True,
                               strategy=strategy, rho=rho,
                               degradation_price=mpc_config.psi)
    if strategy not in (STRATEGY_PROPOSED, STRATEGY_ROBUST):
        raise MpcError(f"unknown strategy {strategy!r}")
    start, lam, mu = price_arrays(prices)
    sim_end = max(ev.t_d for ev in evs)
    if sim_end > start + lam.size or min(ev.t_a for ev in evs) < start:
        raise MpcError("prices do not cover every parking hour")
    if regd.hours < sim_end - start:
        raise MpcError("regulation trace shorter than the simulation span")
    if price_forecast is None:
        lam_hat, mu_hat = lam, mu
    else:
        f_start, lam_hat, mu_hat = price_arrays(price_forecast)
        if f_start != start or lam_hat.size < lam.size:
            raise MpcError("price forecast must cover the realized series")
    h = mpc_config.h_window
    scen_config = replace(scen_config, horizon=h)
    state = connect_fleet(evs, start, rho)
    future = sorted(evs, key=lambda e: e.id)
    hours: list[HourLog] = []
    departures: list[DepartureRecord] = []
    for k in range(start, sim_end):
        if strategy == STRATEGY_PROPOSED:
            upcoming = partition_groups(
                [ev for ev in future if k + 1 <= ev.t_a <= k + h], rho)
        else:
            upcoming = []
        scen = generate_scenarios(_forecast_base(lam_hat, k - start + 1, h),
                                  _forecast_base(mu_hat, k - start + 1, h),
                                  upcoming, scen_config, k)
        decision = solve_hour(state, scen, float(lam[k - start]), mpc_config)
        plan = rt.allocate(decision, state.r_cleared, state_modes(state),
                           state_powers(state), hour=k)
        reg_mean, _ = hourly_stats(regd, k - start)
        delivery = rt.track_signal(plan, regd, k - start)
        hours.append(HourLog(
            hour=k, energy_price=float(lam[k - start]), reg_price=float(mu[k - start]),
            r_cleared=state.r_cleared, omega=decision.omega,
            net_pop_kwh=float((decision.x - decision.y).sum()) * SLOT_HOURS,
            discharge_kwh=float(decision.y.sum()) * SLOT_HOURS,
            delivered_kwh=float(delivery.energy_kwh.sum()),
            delivered_capacity_kw=float(plan.reg.sum()),
            objective=decision.objective))
        arrivals = [ev for ev in future if ev.t_a == k + 1]
        state, departed = roll(state, decision, plan, reg_mean, arrivals, rho)
        departures.extend(departed)
    return DayResult(strategy, hours, departures, state.unmet)


def state_modes(state: MpcState) -> list[str]:
    return [ev.mode for ev in state.connected]


def state_powers(state: MpcState) -> np.ndarray:
    return np.array([ev.p_max for ev in state.connected])


def replay_schedule(day: DaySchedule, evs: list[EvRecord],
                    prices: list[PriceRecord], regd: RegDTrace,
                    with_regulation: bool, strategy: str,
                    rho: float = 0.25, degradation_price: float = 0.0) -> DayResult:
    """Replay a precomputed day schedule through the dispatch loop without
    re-optimization; capacity bids are the schedule's own hourly offers."""
    start, lam, mu = price_arrays(prices)
    sim_end = max(ev.t_d for ev in evs)
    if regd.hours < sim_end - start:
        raise MpcError("regulation trace shorter than the simulation span")
    by_id = {ev.id: ev for ev in evs}
    sched = {s.ev_id: s for s in day.schedules}
    delivered = {ev.id: 0.0 for ev in evs}
    hours: list[HourLog] = []
    departures: list[DepartureRecord] = []
    for k in range(start, sim_end):
        ids = sorted(ev.id for ev in evs if ev.t_a <= k < ev.t_d)
        x = np.array([sched[i].x[k - by_id[i].t_a] for i in ids])
        y = np.array([sched[i].y[k - by_id[i].t_a] for i in ids])
        z = (np.array([sched[i].z[k - by_id[i].t_a] for i in ids])
             if with_regulation else np.zeros(len(ids)))
        x, y, z = snap_to_bands(x, y, z,
                                np.array([by_id[i].p_max_kw for i in ids]),
                                [by_id[i].mode for i in ids])
        r_k = float(z.sum())
        decision = StageOneDecision(ids, x, y, z, omega=0.0, r_next=0.0,
                                    objective=0.0)
        plan = rt.allocate(decision, r_k, [by_id[i].mode for i in ids],
                           np.array([by_id[i].p_max_kw for i in ids]), hour=k)
        reg_mean, _ = hourly_stats(regd, k - start)
        delivery = rt.track_signal(plan, regd, k - start)
        for pos, i in enumerate(ids):
            delivered[i] += float(delivery.energy_kwh[pos])
        cost_k = float(lam[k - start] * (x - y).sum() - mu[k - start] * z.sum()
                       + degradation_price * y.sum()) * SLOT_HOURS
        hours.append(HourLog(
            hour=k, energy_price=float(lam[k - start]), reg_price=float(mu[k - start]),
            r_cleared=r_k, omega=0.0,
            net_pop_kwh=float((x - y).sum()) * SLOT_HOURS,
            discharge_kwh=float(y.sum()) * SLOT_HOURS,
            delivered_kwh=float(delivery.energy_kwh.sum()),
            delivered_capacity_kw=float(plan.reg.sum()),
            objective=cost_k))
        for ev in evs:
            if ev.t_d == k + 1:
                e_r = energy_params(ev, rho).e_r
                departures.append(DepartureRecord(
                    ev.id, ev.capacity_kwh, e_r - delivered[ev.id]))
    return DayResult(strategy, hours, departures, {})


def save_decision_log(result: DayResult, path) -> None:
    """Per-hour decision log CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["hour", "R_bid_kw", "omega_kw", "energy_kwh", "objective"])
        for log in result.hours:
            w.writerow([log.hour, repr(log.r_cleared), repr(log.omega),
                        repr(log.net_pop_kwh), repr(log.objective)])

"""Monte Carlo scenario sets over the MPC look-ahead window.

Price noise grows linearly with look-ahead distance; upcoming-EV aggregates
get one Gaussian perturbation each, truncated to stay physical.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .analytic import VirtualEv
from .fleet import V2G

P_FLOOR_KW = 0.1


@dataclass(frozen=True)
class ScenarioConfig:
    n_scenarios: int = 100
    eps_p: float = 3.0     # price noise base std, $/MWh
    eps_ev: float = 2.0    # upcoming-EV noise std, kWh (reused as kW for power)
    horizon: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.n_scenarios < 1:
            raise ValueError("need at least one scenario")
        if self.eps_p < 0 or self.eps_ev < 0:
            raise ValueError("noise levels must be non-negative")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


@dataclass
class ScenarioSet:
    """Per-scenario price paths over hours K+1..K+H and per-upcoming-EV
    energy/power draws, with uniform probabilities."""
    start_hour: int                      # K
    energy_price: np.ndarray             # (S, H)
    reg_price: np.ndarray                # (S, H)
    upcoming: list[VirtualEv]
    upcoming_e: np.ndarray               # (S, U) kWh
    upcoming_p: np.ndarray               # (S, U) kW
    probs: np.ndarray                    # (S,)

    @property
    def n_scenarios(self) -> int:
        return self.probs.size

    @property
    def horizon(self) -> int:
        return self.energy_price.shape[1]


def generate_scenarios(base_energy_price, base_reg_price,
                       upcoming: list[VirtualEv], config: ScenarioConfig,
                       hour: int) -> ScenarioSet:
    """Draw scenarios around a base forecast for hours hour+1..hour+H.

    Price noise at look-ahead h has std h*eps_p (prices may go negative);
    upcoming energies are truncated at 0 (and at the group's upper energy
    bound for V2G), powers at a 0.1 kW floor.
    """
    lam = np.asarray(base_energy_price, dtype=float)
    mu = np.asarray(base_reg_price, dtype=float)
    h = config.horizon
    if lam.size != h or mu.size != h:
        raise ValueError(f"base forecast must cover {h} hours")
    s = config.n_scenarios
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, hour]))
    scale = config.eps_p * np.arange(1, h + 1)
    lam_s = lam + rng.normal(0.0, 1.0, (s, h)) * scale
    mu_s = mu + rng.normal(0.0, 1.0, (s, h)) * scale
    u = len(upcoming)
    e_s = np.empty((s, u))
    p_s = np.empty((s, u))
    for j, group in enumerate(upcoming):
        e_s[:, j] = group.e_kwh + rng.normal(0.0, config.eps_ev, s)
        p_s[:, j] = group.p_kw + rng.normal(0.0, config.eps_ev, s)
        np.clip(e_s[:, j], 0.0, group.e_plus_kwh if group.mode == V2G else None,
                out=e_s[:, j])
        np.clip(p_s[:, j], P_FLOOR_KW, None, out=p_s[:, j])
    probs = np.full(s, 1.0 / s)
    return ScenarioSet(hour, lam_s, mu_s, list(upcoming), e_s, p_s, probs)


def save_scenarios(ss: ScenarioSet, price_path, ev_path) -> None:
    """Optional dump: per-scenario price paths and upcoming-EV draws."""
    with open(price_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "hour", "lambda", "mu"])
        for s in range(ss.n_scenarios):
            for h in range(ss.horizon):
                w.writerow([s, ss.start_hour + 1 + h,
                            repr(float(ss.energy_price[s, h])),
                            repr(float(ss.reg_price[s, h]))])
    with open(ev_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "virtual_ev_key", "e_r", "p"])
        for s in range(ss.n_scenarios):
            for j, g in enumerate(ss.upcoming):
                key = f"{g.t_a}-{g.t_d}-F{g.flex}-{g.mode}"
                w.writerow([s, key, repr(float(ss.upcoming_e[s, j])),
                            repr(float(ss.upcoming_p[s, j]))])

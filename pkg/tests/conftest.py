"""Shared builders for compact test days."""
import numpy as np
import pytest

from evareg.fleet import EvRecord, EvTypeSpec, FleetConfig, generate_fleet
from evareg.market import PriceRecord


def make_prices(lam, mu, start=0):
    return [PriceRecord(start + i, float(l), float(m))
            for i, (l, m) in enumerate(zip(lam, mu))]


def flat_prices(hours, lam=38.2, mu=30.1, start=0):
    return make_prices([lam] * hours, [mu] * hours, start)


def small_fleet_config(seed=0, scale=50, v2g_fraction=0.5):
    """Table-style three-type fleet scaled down from the 2000-EV system."""
    return FleetConfig(types=(EvTypeSpec(1200 // scale, (16, 23), (30, 37)),
                              EvTypeSpec(400 // scale, (0, 7), (14, 21)),
                              EvTypeSpec(400 // scale, (8, 15), (22, 29))),
                       v2g_fraction=v2g_fraction, seed=seed)


def compact_day_config(seed=0, n_early=16, n_late=8, v2g_fraction=0.5):
    """A short simulation span (24 h) for fast rolling-horizon tests."""
    return FleetConfig(types=(EvTypeSpec(n_early, (0, 4), (9, 15)),
                              EvTypeSpec(n_late, (6, 10), (17, 23))),
                       v2g_fraction=v2g_fraction, seed=seed)


def single_ev(mode="V1G", t_a=0, t_d=3, soc_a=0.3, soc_r=0.8, capacity=20.0,
              p_max=10.0, ev_id=0):
    return EvRecord(id=ev_id, mode=mode, t_a=t_a, t_d=t_d, soc_a=soc_a,
                    soc_r=soc_r, soc_min=0.15, soc_max=0.9,
                    capacity_kwh=capacity, p_max_kw=p_max)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

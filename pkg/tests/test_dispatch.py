"""Intra-hour task allocation and signal tracking."""
import numpy as np
import pytest

from evareg.dispatch import (DispatchError, DispatchPlan, allocate,
                             save_ev_power, track_signal)
from evareg.market import SAMPLES_PER_HOUR, RegDTrace
from evareg.mpc import StageOneDecision


def decision(x, y, z, omega=0.0):
    n = len(x)
    return StageOneDecision(ev_ids=list(range(n)), x=np.array(x, float),
                            y=np.array(y, float), z=np.array(z, float),
                            omega=omega, r_next=0.0, objective=0.0)


def test_proportional_split():
    dec = decision([2, 2], [0, 0], [2, 2])
    plan = allocate(dec, 2.0, ["V1G", "V1G"], np.array([8.0, 8.0]), hour=0)
    assert plan.reg == pytest.approx([1.0, 1.0])
    assert plan.pop == pytest.approx([2.0, 2.0])


def test_full_allocation():
    dec = decision([3, 1], [0, 0], [3, 1])
    plan = allocate(dec, 4.0, ["V1G", "V1G"], np.array([8.0, 8.0]), hour=0)
    assert plan.reg == pytest.approx([3.0, 1.0])


def test_shortfall_assigns_commitments():
    dec = decision([3, 1], [0, 0], [3, 1], omega=2.0)
    plan = allocate(dec, 6.0, ["V1G", "V1G"], np.array([8.0, 8.0]), hour=0)
    assert plan.reg == pytest.approx([3.0, 1.0])


def test_cleared_bid_without_capacity_is_contract_violation():
    dec = decision([0.0], [0.0], [0.0])
    with pytest.raises(DispatchError):
        allocate(dec, 5.0, ["V1G"], np.array([8.0]), hour=0)


def test_zero_bid_zero_capacity_ok():
    dec = decision([1.0], [0.0], [0.0])
    plan = allocate(dec, 0.0, ["V1G"], np.array([8.0]), hour=0)
    assert plan.reg == pytest.approx([0.0])


def test_allocation_totals_delivered_capacity():
    dec = decision([4, 2, 3], [0, 0, 0], [2, 1, 3])
    plan = allocate(dec, 5.0, ["V1G"] * 3, np.array([8.0, 8.0, 8.0]), hour=0)
    assert plan.reg.sum() == pytest.approx(5.0, abs=1e-9)
    assert (plan.reg <= dec.z + 1e-9).all()


def flat_trace(value, hours=1):
    return RegDTrace(np.full(hours * SAMPLES_PER_HOUR, float(value)))


def test_track_zero_signal_energy_is_pop():
    plan = allocate(decision([5.0], [0.0], [2.0]), 2.0, ["V1G"],
                    np.array([8.0]), hour=0)
    report = track_signal(plan, flat_trace(0.0), 0)
    assert report.energy_kwh == pytest.approx([5.0])


def test_track_constant_up_regulation():
    plan = DispatchPlan(hour=0, ev_ids=[0], pop=np.array([5.0]),
                        reg=np.array([4.0]), modes=["V2G"], p_max=np.array([9.0]))
    report = track_signal(plan, flat_trace(1.0), 0)
    assert report.energy_kwh == pytest.approx([1.0])
    assert report.power_min_kw == pytest.approx([1.0])


def test_track_mean_based_energy():
    samples = np.full(SAMPLES_PER_HOUR, -0.25)
    plan = DispatchPlan(hour=0, ev_ids=[0], pop=np.array([5.0]),
                        reg=np.array([4.0]), modes=["V2G"], p_max=np.array([9.0]))
    report = track_signal(plan, RegDTrace(samples), 0)
    assert report.energy_kwh == pytest.approx([6.0])


def test_v1g_power_stays_in_band():
    rng = np.random.default_rng(1)
    samples = np.clip(rng.normal(0, 0.5, SAMPLES_PER_HOUR), -1, 1)
    plan = DispatchPlan(hour=0, ev_ids=[0], pop=np.array([4.0]),
                        reg=np.array([4.0]), modes=["V1G"], p_max=np.array([8.0]))
    report = track_signal(plan, RegDTrace(samples), 0)
    assert report.power_min_kw[0] >= -1e-9
    assert report.power_max_kw[0] <= 8.0 + 1e-9


def test_band_breach_raises():
    plan = DispatchPlan(hour=0, ev_ids=[0], pop=np.array([2.0]),
                        reg=np.array([4.0]), modes=["V1G"], p_max=np.array([8.0]))
    with pytest.raises(DispatchError):
        track_signal(plan, flat_trace(1.0), 0)


def test_fleet_delivery_is_linear_in_signal():
    rng = np.random.default_rng(2)
    samples = np.clip(rng.normal(0, 0.3, SAMPLES_PER_HOUR), -1, 1)
    trace = RegDTrace(samples)
    dec = decision([4, 3, 5], [0, 0, 0], [2, 1, 2])
    r_k = 5.0
    plan = allocate(dec, r_k, ["V1G"] * 3, np.array([8.0, 8.0, 10.0]), hour=0)
    # At every sample the fleet-level regulation delivery is signal * (R - omega).
    fleet_power = plan.pop.sum() - samples * plan.reg.sum()
    expected = plan.pop.sum() - samples * r_k
    assert fleet_power == pytest.approx(expected, abs=1e-9)


def test_per_sample_dump(tmp_path):
    plan = DispatchPlan(hour=0, ev_ids=[3], pop=np.array([5.0]),
                        reg=np.array([1.0]), modes=["V2G"], p_max=np.array([9.0]))
    path = tmp_path / "power.csv"
    save_ev_power(plan, flat_trace(0.5), 0, 3, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t_sec,power_kw"
    assert len(lines) == 1 + SAMPLES_PER_HOUR
    assert lines[1] == "0,4.5"
    with pytest.raises(DispatchError):
        save_ev_power(plan, flat_trace(0.5), 0, 99, path)

"""EV domain model, derived energy parameters, and the synthetic fleet generator.

Hours live on an absolute multi-day axis (a departure after midnight is mapped
past hour 24) and an EV is connected on slots t_a .. t_d-1 inclusive.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

V1G = "V1G"
V2G = "V2G"
MODES = (V1G, V2G)


class FleetError(Exception):
    """Invalid record, infeasible energy buffer, or exhausted retry budget."""


@dataclass(frozen=True)
class EvRecord:
    """One EV's declared trip and battery data.

    soc_a/soc_r are the arrival and required state of charge; capacity_kwh is
    the rated battery energy; p_max_kw the maximum (dis)charging power.
    """
    id: int
    mode: str
    t_a: int
    t_d: int
    soc_a: float
    soc_r: float
    soc_min: float
    soc_max: float
    capacity_kwh: float
    p_max_kw: float

    def __post_init__(self):
        if self.mode not in MODES:
            raise FleetError(f"EV {self.id}: unknown mode {self.mode!r}")
        if not self.t_a < self.t_d:
            raise FleetError(f"EV {self.id}: t_a must precede t_d")
        if not (self.soc_min <= self.soc_a <= self.soc_max
                and self.soc_min <= self.soc_r <= self.soc_max):
            raise FleetError(f"EV {self.id}: SoC values outside [soc_min, soc_max]")
        if self.capacity_kwh <= 0 or self.p_max_kw <= 0:
            raise FleetError(f"EV {self.id}: capacity and power must be positive")

    @property
    def parking_hours(self) -> int:
        return self.t_d - self.t_a


@dataclass(frozen=True)
class EnergyParams:
    """Required energy and (V2G only) buffer-adjusted energy bounds, in kWh."""
    e_r: float
    e_max: Optional[float] = None
    e_min: Optional[float] = None


def energy_params(ev: EvRecord, rho: float) -> EnergyParams:
    """Derive required energy and, for V2G, the buffered upper/lower bounds.

    rho is the hours of full-power regulation energy reserved as a buffer per
    unit of offered capacity.
    """
    e_r = (ev.soc_r - ev.soc_a) * ev.capacity_kwh
    if ev.mode == V1G:
        return EnergyParams(e_r=e_r)
    e_max = (ev.soc_max - ev.soc_a) * ev.capacity_kwh - rho * ev.p_max_kw
    e_min = (ev.soc_min - ev.soc_a) * ev.capacity_kwh + rho * ev.p_max_kw
    if e_r < 0 or e_r > e_max or e_min > 0:
        raise FleetError(
            f"EV {ev.id}: V2G energy targets infeasible under buffer rho={rho} "
            f"(e_r={e_r:.3f}, e_max={e_max:.3f}, e_min={e_min:.3f})")
    return EnergyParams(e_r=e_r, e_max=e_max, e_min=e_min)


@dataclass(frozen=True)
class EvTypeSpec:
    """One driving-pattern type: count plus integer arrival/departure windows
    on the absolute hour axis (departure already mapped past midnight)."""
    count: int
    arrive: tuple[int, int]
    depart: tuple[int, int]


@dataclass(frozen=True)
class FleetConfig:
    types: tuple[EvTypeSpec, ...] = (
        EvTypeSpec(1200, (16, 23), (30, 37)),   # evening arrivals, depart next morning
        EvTypeSpec(400, (0, 7), (14, 21)),
        EvTypeSpec(400, (8, 15), (22, 29)),
    )
    soc_a_range: tuple[float, float] = (0.2, 0.4)
    soc_r_range: tuple[float, float] = (0.7, 0.9)
    capacity_range: tuple[float, float] = (25.0, 45.0)
    p_max_range: tuple[float, float] = (5.0, 8.0)
    soc_min: float = 0.15
    soc_max: float = 0.90
    v2g_fraction: float = 0.5
    rho: float = 0.25
    seed: int = 0

    def __post_init__(self):
        for name in ("soc_a_range", "soc_r_range", "capacity_range", "p_max_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise FleetError(f"{name}: empty range ({lo}, {hi})")
        for t in self.types:
            if t.arrive[0] > t.arrive[1] or t.depart[0] > t.depart[1]:
                raise FleetError("empty arrival/departure window")
            if t.count < 0:
                raise FleetError("negative type count")
        if not 0.0 <= self.v2g_fraction <= 1.0:
            raise FleetError("v2g_fraction outside [0, 1]")
        if self.rho < 0:
            raise FleetError("rho must be non-negative")


_MAX_REDRAWS = 1000


def generate_fleet(config: FleetConfig) -> list[EvRecord]:
    """Draw a reproducible synthetic fleet.

    Arrival/departure hours are integers drawn uniformly from each type's
    window; battery fields are uniform over the configured ranges. V2G
    records that violate the buffered energy bounds have their battery
    fields re-drawn (trip times kept) up to a bounded retry budget.
    """
    rng = np.random.default_rng(config.seed)
    records: list[EvRecord] = []
    ev_id = 0
    for spec in config.types:
        n_v2g = int(round(spec.count * config.v2g_fraction))
        modes = np.array([V2G] * n_v2g + [V1G] * (spec.count - n_v2g))
        rng.shuffle(modes)
        for k in range(spec.count):
            t_a = int(rng.integers(spec.arrive[0], spec.arrive[1] + 1))
            t_d = int(rng.integers(spec.depart[0], spec.depart[1] + 1))
            mode = str(modes[k])
            record = None
            for _ in range(_MAX_REDRAWS):
                candidate = EvRecord(
                    id=ev_id, mode=mode, t_a=t_a, t_d=t_d,
                    soc_a=float(rng.uniform(*config.soc_a_range)),
                    soc_r=float(rng.uniform(*config.soc_r_range)),
                    soc_min=config.soc_min, soc_max=config.soc_max,
                    capacity_kwh=float(rng.uniform(*config.capacity_range)),
                    p_max_kw=float(rng.uniform(*config.p_max_range)))
                try:
                    energy_params(candidate, config.rho)
                except FleetError:
                    continue
                record = candidate
                break
            if record is None:
                raise FleetError(
                    f"EV {ev_id}: retry budget exhausted; buffer rho={config.rho} "
                    "is incompatible with the configured SoC/battery ranges")
            records.append(record)
            ev_id += 1
    return records


FLEET_COLUMNS = ["id", "mode", "t_a", "t_d", "soc_a", "soc_r", "soc_min",
                 "soc_max", "capacity_kwh", "pmax_kw"]


def save_fleet(records: list[EvRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FLEET_COLUMNS)
        for ev in records:
            w.writerow([ev.id, ev.mode, ev.t_a, ev.t_d,
                        repr(ev.soc_a), repr(ev.soc_r), repr(ev.soc_min),
                        repr(ev.soc_max), repr(ev.capacity_kwh), repr(ev.p_max_kw)])


def load_fleet(path) -> list[EvRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != FLEET_COLUMNS:
            raise FleetError(f"{path}: expected header {','.join(FLEET_COLUMNS)}")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(FLEET_COLUMNS):
                raise FleetError(f"{path}:{line_no}: expected {len(FLEET_COLUMNS)} columns")
            try:
                records.append(EvRecord(
                    id=int(row[0]), mode=row[1], t_a=int(row[2]), t_d=int(row[3]),
                    soc_a=float(row[4]), soc_r=float(row[5]), soc_min=float(row[6]),
                    soc_max=float(row[7]), capacity_kwh=float(row[8]),
                    p_max_kw=float(row[9])))
            except ValueError as exc:
                raise FleetError(f"{path}:{line_no}: {exc}") from exc
    return records

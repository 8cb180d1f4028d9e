"""Hourly market prices and 2-second regulation-signal traces.

Prices are $/MWh on the same absolute hour axis as the fleet. Regulation
signals are normalized to [-1, 1] at a fixed 2-second cadence, 1800 samples
per hour, aligned to hour boundaries.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

SAMPLES_PER_HOUR = 1800


class MarketDataError(Exception):
    """Schema violation or malformed value in a price/signal file."""


@dataclass(frozen=True)
class PriceRecord:
    hour: int
    energy_price: float          # lambda, $/MWh
    reg_price: float             # mu, $/MWh
    reg_capacity_price: Optional[float] = None   # mu_c
    reg_performance_price: Optional[float] = None  # mu_p
    mileage: Optional[float] = None


def load_prices(path) -> list[PriceRecord]:
    """Parse an hourly price file; see PRICE file formats in the README.

    Accepts `hour,lambda,mu` or `hour,lambda,mu_c,mu_p,mileage`; in the
    second form mu is composed as mu_c + mu_p * mileage.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MarketDataError(f"{path}:1: empty file")
        header = [h.strip() for h in header]
        if header == ["hour", "lambda", "mu"]:
            composed = False
        elif header == ["hour", "lambda", "mu_c", "mu_p", "mileage"]:
            composed = True
        else:
            raise MarketDataError(f"{path}:1: unrecognized header {','.join(header)}")
        records = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise MarketDataError(f"{path}:{line_no}: expected {len(header)} columns")
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise MarketDataError(f"{path}:{line_no}: {exc}") from exc
            if any(np.isnan(v) for v in values):
                raise MarketDataError(f"{path}:{line_no}: NaN value")
            hour = int(values[0])
            if hour != values[0]:
                raise MarketDataError(f"{path}:{line_no}: non-integer hour")
            if composed:
                mu_c, mu_p, mileage = values[2], values[3], values[4]
                records.append(PriceRecord(hour, values[1], mu_c + mu_p * mileage,
                                           mu_c, mu_p, mileage))
            else:
                records.append(PriceRecord(hour, values[1], values[2]))
    if not records:
        raise MarketDataError(f"{path}: no price rows")
    records.sort(key=lambda r: r.hour)
    for prev, cur in zip(records, records[1:]):
        if cur.hour != prev.hour + 1:
            raise MarketDataError(
                f"{path}: non-contiguous hours {prev.hour} -> {cur.hour}")
    return records


def save_prices(records: list[PriceRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["hour", "lambda", "mu"])
        for r in sorted(records, key=lambda r: r.hour):
            w.writerow([r.hour, repr(r.energy_price), repr(r.reg_price)])


def price_arrays(records: list[PriceRecord]) -> tuple[int, np.ndarray, np.ndarray]:
    """(first_hour, energy_price[], reg_price[]) on the contiguous hour axis."""
    start = records[0].hour
    lam = np.array([r.energy_price for r in records])
    mu = np.array([r.reg_price for r in records])
    return start, lam, mu


@dataclass(frozen=True)
class RegDTrace:
    """Normalized fast-regulation signal at 2-second cadence."""
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", s)
        if s.size % SAMPLES_PER_HOUR != 0:
            raise MarketDataError("sample count not divisible by 1800")
        if s.size and (np.abs(s) > 1.0 + 1e-12).any():
            raise MarketDataError("signal sample outside [-1, 1]")

    @property
    def hours(self) -> int:
        return self.samples.size // SAMPLES_PER_HOUR


def hourly_stats(trace: RegDTrace, hour: int) -> tuple[float, float]:
    """(mean, mileage) of one hour: arithmetic mean of the 1800 samples and
    the intra-hour total variation sum(|s_t - s_{t-1}|)."""
    if not 0 <= hour < trace.hours:
        raise MarketDataError(f"hour {hour} outside trace of {trace.hours} hours")
    block = trace.samples[hour * SAMPLES_PER_HOUR:(hour + 1) * SAMPLES_PER_HOUR]
    return float(block.mean()), float(np.abs(np.diff(block)).sum())


def synth_regd(hours: int, seed: int, neutralize: bool = True,
               ar_coef: float = 0.9, sigma: float = 0.35) -> RegDTrace:
    """Clipped first-order autoregressive test signal.

    With neutralize=True each hour's mean is subtracted and the block
    re-clipped until |hourly mean| <= 1e-3 (exactly zero when no sample hits
    the clip bounds).
    """
    if hours < 1:
        raise MarketDataError("hours must be >= 1")
    rng = np.random.default_rng(seed)
    n = hours * SAMPLES_PER_HOUR
    noise = rng.normal(0.0, sigma * np.sqrt(1.0 - ar_coef ** 2), size=n)
    s = np.empty(n)
    prev = 0.0
    for i in range(n):
        prev = np.clip(ar_coef * prev + noise[i], -1.0, 1.0)
        s[i] = prev
    if neutralize:
        for h in range(hours):
            block = s[h * SAMPLES_PER_HOUR:(h + 1) * SAMPLES_PER_HOUR]
            for _ in range(100):
                m = block.mean()
                if abs(m) <= 1e-3:
                    break
                np.clip(block - m, -1.0, 1.0, out=block)
    return RegDTrace(s)


def save_regd(trace: RegDTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_sec", "signal"])
        for i, v in enumerate(trace.samples):
            w.writerow([2 * i, repr(float(v))])


def load_regd(path) -> RegDTrace:
    samples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t_sec", "signal"]:
            raise MarketDataError(f"{path}:1: expected header t_sec,signal")
        expected_t = 0
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise MarketDataError(f"{path}:{line_no}: expected 2 columns")
            try:
                t, v = float(row[0]), float(row[1])
            except ValueError as exc:
                raise MarketDataError(f"{path}:{line_no}: {exc}") from exc
            if t != expected_t:
                raise MarketDataError(
                    f"{path}:{line_no}: t_sec must increase in steps of 2")
            expected_t += 2
            samples.append(v)
    return RegDTrace(np.array(samples))


def synth_prices(hours: int, seed: int, base_energy: float = 38.2,
                 base_reg: float = 30.1, swing: float = 12.0,
                 noise: float = 3.0, start_hour: int = 0) -> list[PriceRecord]:
    """Smooth daily-shaped synthetic price series for self-contained runs.

    A sinusoidal peak/off-peak shape around the 2021 PJM-average levels plus
    Gaussian noise; regulation prices track energy prices with a damped swing
    and less noise, staying mostly below the default next-hour shortfall
    penalty as on the reference operating day.
    """
    rng = np.random.default_rng(seed)
    hrs = np.arange(start_hour, start_hour + hours)
    shape = np.sin(2.0 * np.pi * (hrs % 24 - 6.0) / 24.0)
    lam = base_energy + swing * shape + rng.normal(0.0, noise, hours)
    mu = base_reg + 0.3 * swing * shape + rng.normal(0.0, 0.6 * noise, hours)
    mu = np.maximum(mu, 1.0)
    return [PriceRecord(int(h), float(l), float(m))
            for h, l, m in zip(hrs, lam, mu)]

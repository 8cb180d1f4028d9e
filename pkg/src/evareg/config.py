"""Run configuration: one human-readable YAML/JSON file mirroring the module
configs, with unknown keys rejected and documented defaults.

Defaults: h_window=8, cvar_alpha=0.2, psi=50, phi=130, phi_prime=40,
eps_p=3, eps_ev=2, rho=0.25, n_scenarios=100.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Optional

import yaml

from .fleet import EvTypeSpec, FleetConfig
from .mpc import MpcConfig
from .scenarios import ScenarioConfig


class ConfigError(Exception):
    """Unknown key, malformed value, or unreadable config file."""


@dataclass(frozen=True)
class PathsConfig:
    prices: Optional[str] = None
    regd: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    fleet: FleetConfig = field(default_factory=FleetConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)


def _build(cls, data, label):
    if not isinstance(data, dict):
        raise ConfigError(f"{label}: expected a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{label}: unknown key(s) {', '.join(unknown)}")
    return data


def _fleet_config(data, seed) -> FleetConfig:
    data = dict(_build(FleetConfig, data, "fleet"))
    if "types" in data:
        types = []
        for i, t in enumerate(data["types"]):
            if not isinstance(t, dict):
                raise ConfigError(f"fleet.types[{i}]: expected a mapping")
            unknown = sorted(set(t) - {"count", "arrive", "depart"})
            if unknown:
                raise ConfigError(f"fleet.types[{i}]: unknown key(s) "
                                  f"{', '.join(unknown)}")
            try:
                types.append(EvTypeSpec(int(t["count"]),
                                        tuple(int(v) for v in t["arrive"]),
                                        tuple(int(v) for v in t["depart"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"fleet.types[{i}]: {exc}") from exc
        data["types"] = tuple(types)
    for key in ("soc_a_range", "soc_r_range", "capacity_range", "p_max_range"):
        if key in data:
            data[key] = tuple(float(v) for v in data[key])
    data.setdefault("seed", seed)
    try:
        return FleetConfig(**data)
    except Exception as exc:
        raise ConfigError(f"fleet: {exc}") from exc


def load_run_config(path=None, seed_override: Optional[int] = None) -> RunConfig:
    """Load a config file (YAML or JSON); None gives pure defaults."""
    raw = {}
    if path is not None:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    raw = dict(_build(RunConfig, raw, "config"))
    seed = int(raw.get("seed", 0))
    if seed_override is not None:
        seed = seed_override
    try:
        fleet = _fleet_config(raw.get("fleet", {}), seed)
        scen_raw = dict(_build(ScenarioConfig, raw.get("scenario", {}), "scenario"))
        scen_raw.setdefault("seed", seed)
        mpc_cfg = MpcConfig(**_build(MpcConfig, raw.get("mpc", {}), "mpc"))
        scen_raw.setdefault("horizon", mpc_cfg.h_window)
        scen = ScenarioConfig(**scen_raw)
        paths = PathsConfig(**_build(PathsConfig, raw.get("paths", {}), "paths"))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(seed=seed, fleet=fleet, scenario=scen, mpc=mpc_cfg,
                     paths=paths)


def with_param(config: RunConfig, name: str, value) -> RunConfig:
    """Return a copy with one swept parameter replaced (mpc/scenario/fleet)."""
    for section in ("mpc", "scenario", "fleet"):
        target = getattr(config, section)
        if name in {f.name for f in fields(target)}:
            caster = int if name in ("h_window", "n_scenarios") else float
            return replace(config, **{section: replace(target, **{name: caster(value)})})
    raise ConfigError(f"unknown sweep parameter {name!r}")

"""Strictly parsed JSON run configuration."""
from __future__ import annotations

import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field

from .rational import RationalMap
from .weights import Weight

log = logging.getLogger(__name__)

SEED_ENV = "THERMOSCOPE_SEED"


class ConfigError(ValueError):
    pass


@dataclass
class GridConfig:
    uniform_size: int = 512
    julia_size: int = 512
    julia_depth: int = 24
    julia_only: bool | None = None
    cells: int = 4096


@dataclass
class DepthConfig:
    bracket: int = 10
    measure: int = 14
    periodic: int = 8
    cesaro: int = 2000
    mixing: list = field(default_factory=lambda: [1, 2, 5, 10, 12])


@dataclass
class ToleranceConfig:
    power: float = 1e-12
    power_max_iter: int = 20000
    theta_cap: float = 1e3
    tree_cap: int = 2 ** 20
    precision_bits: int = 256
    degree_cap: int = 4097
    entropy: float = 1e-3


@dataclass
class PressureSection:
    psi: dict
    t_values: list


@dataclass
class RunConfig:
    map: dict
    weight: dict
    seed: int | None = None
    grid: GridConfig = field(default_factory=GridConfig)
    n: DepthConfig = field(default_factory=DepthConfig)
    atom_cap: int = 2 ** 16
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    pressure: PressureSection | None = None
    outputs: dict = field(default_factory=dict)

    def build_map(self) -> RationalMap:
        return RationalMap.from_dict(self.map)

    def build_weight(self, f: RationalMap) -> Weight:
        return Weight.from_dict(self.weight, f)


_SECTIONS = {"grid": GridConfig, "n": DepthConfig, "tolerances": ToleranceConfig,
             "pressure": PressureSection}
_OUTPUT_KEYS = {"prefix"}


def _strict(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = [f.name for f in dataclasses.fields(cls)
               if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
               and f.name not in data]
    if missing:
        raise ConfigError(f"missing keys in {where}: {missing}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS and value is not None:
            value = _strict(_SECTIONS[key], value, f"{where}.{key}")
        kwargs[key] = value
    return cls(**kwargs)


def parse_config(data: dict, env=None) -> RunConfig:
    """Validate ``data`` and apply the seed override from the environment."""
    env = os.environ if env is None else env
    cfg = _strict(RunConfig, data, "config")
    if set(cfg.outputs) - _OUTPUT_KEYS:
        raise ConfigError(f"unknown keys in config.outputs: {sorted(set(cfg.outputs) - _OUTPUT_KEYS)}")
    if SEED_ENV in env:
        try:
            seed = int(env[SEED_ENV])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer") from exc
        log.info("seed %s overridden by %s=%d", cfg.seed, SEED_ENV, seed)
        cfg.seed = seed
    if cfg.seed is None:
        raise ConfigError("a seed is required (config 'seed' or THERMOSCOPE_SEED)")
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool) or cfg.seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    f = cfg.build_map()
    cfg.build_weight(f)
    if cfg.pressure is not None:
        Weight.from_dict(cfg.pressure.psi, f)
    for name in ("uniform_size", "julia_size", "julia_depth", "cells"):
        if getattr(cfg.grid, name) < 1:
            raise ConfigError(f"grid.{name} must be positive")
    if cfg.atom_cap < 1:
        raise ConfigError("atom_cap must be positive")
    return cfg


def load_config(path, env=None) -> RunConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(data, env)

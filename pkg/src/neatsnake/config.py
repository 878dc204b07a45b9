"""Evolution run configuration.

Config files are flat ``key = value`` text. The key set is fixed: unknown
keys are an error, and every configured value round-trips exactly through
:func:`dump_config` / :func:`parse_config`. Any key can also be overridden
from the environment with the ``NEATSNAKE_`` prefix, e.g.
``NEATSNAKE_POP_SIZE=16``.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass


class ConfigError(Exception):
    """Bad configuration file, key, or value."""


@dataclass
class NeatConfig:
    fitness_criterion: str = "max"
    fitness_threshold: float = 1000.0
    pop_size: int = 100
    reset_on_extinction: bool = True
    activation_default: str = "identity"
    activation_mutate_rate: float = 0.01
    activation_options: str = "identity"
    aggregation_default: str = "sum"
    aggregation_mutate_rate: float = 0.01
    aggregation_options: str = "sum"
    bias_init_mean: float = 0.0
    bias_init_stdev: float = 2.0
    bias_max_value: float = 30.0
    bias_min_value: float = -30.0
    bias_mutate_power: float = 1.5
    bias_mutate_rate: float = 0.7
    bias_replace_rate: float = 0.1
    compatibility_disjoint_coefficient: float = 1.0
    compatibility_weight_coefficient: float = 0.5
    conn_add_prob: float = 0.6
    conn_delete_prob: float = 0.3
    enabled_default: bool = True
    enabled_mutate_rate: float = 0.01
    feed_forward: bool = True
    initial_connection: str = "full_direct"
    node_add_prob: float = 0.5
    node_delete_prob: float = 0.2
    num_hidden: int = 40
    num_inputs: int = 120
    num_outputs: int = 2
    response_init_mean: float = 0.0
    response_init_stdev: float = 2.0
    response_max_value: float = 30.0
    response_min_value: float = -30.0
    response_mutate_power: float = 0.0
    response_mutate_rate: float = 0.0
    response_replace_rate: float = 0.0
    weight_init_mean: float = 0.0
    weight_init_stdev: float = 2.0
    weight_max_value: float = 30.0
    weight_min_value: float = -30.0
    weight_mutate_power: float = 3.0
    weight_mutate_rate: float = 0.8
    weight_replace_rate: float = 0.3
    compatibility_threshold: float = 4.0
    species_fitness_func: str = "max"
    max_stagnation: int = 20
    species_elitism: int = 2
    elitism: int = 2
    survival_threshold: float = 0.3


_FIELDS = {f.name: f.type for f in dataclasses.fields(NeatConfig)}


def _parse_value(key: str, text: str):
    ftype = _FIELDS[key]
    text = text.strip()
    try:
        if ftype == "bool":
            if text in ("True", "true", "1"):
                return True
            if text in ("False", "false", "0"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if ftype == "int":
            return int(text)
        if ftype == "float":
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None


def validate(cfg: NeatConfig) -> NeatConfig:
    from .network import ACTIVATIONS

    if cfg.fitness_criterion != "max":
        raise ConfigError(f"unsupported fitness_criterion {cfg.fitness_criterion!r}")
    if cfg.species_fitness_func != "max":
        raise ConfigError(f"unsupported species_fitness_func {cfg.species_fitness_func!r}")
    if cfg.initial_connection != "full_direct":
        raise ConfigError(f"unsupported initial_connection {cfg.initial_connection!r}")
    if not cfg.feed_forward:
        raise ConfigError("recurrent networks are not supported (feed_forward must be True)")
    if cfg.activation_default not in ACTIVATIONS:
        raise ConfigError(f"unknown activation {cfg.activation_default!r}")
    for option in cfg.activation_options.split():
        if option not in ACTIVATIONS:
            raise ConfigError(f"unknown activation option {option!r}")
    if cfg.aggregation_default != "sum" or cfg.aggregation_options != "sum":
        raise ConfigError("only sum aggregation is supported")
    for name in ("pop_size", "num_inputs", "num_outputs"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be >= 1")
    if cfg.num_hidden < 0:
        raise ConfigError("num_hidden must be >= 0")
    if not 0.0 < cfg.survival_threshold <= 1.0:
        raise ConfigError("survival_threshold must lie in (0, 1]")
    return cfg


def parse_config(text: str) -> NeatConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _parse_value(key, value)
    return validate(NeatConfig(**values))


def load_config(path: str | os.PathLike) -> NeatConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def dump_config(cfg: NeatConfig) -> str:
    lines = []
    for field in dataclasses.fields(NeatConfig):
        value = getattr(cfg, field.name)
        rendered = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{field.name} = {rendered}")
    return "\n".join(lines) + "\n"


ENV_PREFIX = "NEATSNAKE_"


def apply_env_overrides(cfg: NeatConfig, env=None, prefix: str = ENV_PREFIX) -> NeatConfig:
    """New config with any NEATSNAKE_<KEY> environment values applied."""
    env = os.environ if env is None else env
    values = dataclasses.asdict(cfg)
    for key in _FIELDS:
        raw = env.get(prefix + key.upper())
        if raw is not None:
            values[key] = _parse_value(key, raw)
    return validate(NeatConfig(**values))

"""Run configuration: one YAML file, schema-validated by hand.

Every tunable (grid geometry, physics constants, batch size, operator
choice) has a default matching the package's standard setup, so a minimal
config only lists seed program paths.  Unknown keys anywhere are errors —
typos should fail loudly before a run burns its evaluation budget.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .engine import EngineError, GridConfig
from .physics import PhysicsError, SimConfig

OPERATOR_NAMES = ("spec", "llm-diff", "llm-prompt")
TERRAIN_NAMES = ("flat", "left_wall", "right_wall", "tunnel", "bumpy")
TRANSPORT_NAMES = ("env", "mock")


class ConfigError(Exception):
    pass


@dataclass
class LlmSettings:
    transport: str = "env"                 # "env": HTTP client from env vars
    mock_script: list[str] = field(default_factory=list)


@dataclass
class RunConfig:
    seeds: list[str]
    run_id: str = "run0"
    rng_seed: int = 0
    operator: str = "spec"
    terrain: str = "flat"
    terrain_params: dict[str, float] = field(default_factory=dict)
    iterations: int = 10
    batch_size: int = 512
    snapshot_every: int = 0               # 0: snapshot only at the end
    jobs: int = 1
    output_dir: str = "out"
    grid: GridConfig = field(default_factory=GridConfig)
    physics: SimConfig = field(default_factory=SimConfig)
    llm: LlmSettings = field(default_factory=LlmSettings)


def _expect(doc: dict, key: str, kinds, where: str, default=None, required=False):
    if key not in doc:
        if required:
            raise ConfigError(f"{where}: missing required key {key!r}")
        return default
    value = doc.pop(key)
    if isinstance(value, bool) and bool not in (kinds if isinstance(kinds, tuple) else (kinds,)):
        raise ConfigError(f"{where}.{key}: expected {kinds}, got a boolean")
    if not isinstance(value, kinds):
        raise ConfigError(f"{where}.{key}: expected {kinds}, got {type(value).__name__}")
    return value


def _reject_extra(doc: dict, where: str) -> None:
    if doc:
        raise ConfigError(f"{where}: unknown keys {sorted(doc)}")


def _string_list(value, where: str) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ConfigError(f"{where}: expected a list of strings")
    return list(value)


def _parse_grid(doc: dict) -> GridConfig:
    dims = _expect(doc, "dims", list, "grid", default=[12, 12, 12])
    bounds = _expect(doc, "bounds", list, "grid",
                     default=[[0.0, 30.0], [0.0, 30.0], [0.0, 60.0]])
    _reject_extra(doc, "grid")
    try:
        return GridConfig(
            dims=tuple(int(d) for d in dims),
            bounds=tuple((float(lo), float(hi)) for lo, hi in bounds),
        )
    except (EngineError, TypeError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from exc


def _parse_physics(doc: dict) -> SimConfig:
    kwargs = {}
    for name in ("dt", "duration", "gravity", "period", "stiffness", "damping",
                 "friction", "restitution", "v_max", "spawn_clearance"):
        value = _expect(doc, name, (int, float), "physics")
        if value is not None:
            kwargs[name] = float(value)
    substeps = _expect(doc, "substeps", int, "physics")
    if substeps is not None:
        kwargs["substeps"] = substeps
    _reject_extra(doc, "physics")
    try:
        return SimConfig(**kwargs)
    except PhysicsError as exc:
        raise ConfigError(f"physics: {exc}") from exc


def _parse_llm(doc: dict) -> LlmSettings:
    transport = _expect(doc, "transport", str, "llm", default="env")
    if transport not in TRANSPORT_NAMES:
        raise ConfigError(f"llm.transport must be one of {TRANSPORT_NAMES}, got {transport!r}")
    script = doc.pop("mock_script", [])
    _reject_extra(doc, "llm")
    return LlmSettings(transport=transport, mock_script=_string_list(script, "llm.mock_script"))


def parse_config(doc: object) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    doc = dict(doc)
    seeds = _string_list(_expect(doc, "seeds", list, "config", required=True), "config.seeds")
    if not seeds:
        raise ConfigError("config.seeds: need at least one seed program path")
    operator = _expect(doc, "operator", str, "config", default="spec")
    if operator not in OPERATOR_NAMES:
        raise ConfigError(f"config.operator must be one of {OPERATOR_NAMES}, got {operator!r}")
    terrain = _expect(doc, "terrain", str, "config", default="flat")
    if terrain not in TERRAIN_NAMES:
        raise ConfigError(f"config.terrain must be one of {TERRAIN_NAMES}, got {terrain!r}")
    raw_params = _expect(doc, "terrain_params", dict, "config", default={})
    try:
        terrain_params = {str(k): float(v) for k, v in raw_params.items()}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config.terrain_params: values must be numbers ({exc})") from exc
    config = RunConfig(
        seeds=seeds,
        run_id=_expect(doc, "run_id", str, "config", default="run0"),
        rng_seed=_expect(doc, "rng_seed", int, "config", default=0),
        operator=operator,
        terrain=terrain,
        terrain_params=terrain_params,
        iterations=_expect(doc, "iterations", int, "config", default=10),
        batch_size=_expect(doc, "batch_size", int, "config", default=512),
        snapshot_every=_expect(doc, "snapshot_every", int, "config", default=0),
        jobs=_expect(doc, "jobs", int, "config", default=1),
        output_dir=_expect(doc, "output_dir", str, "config", default="out"),
        grid=_parse_grid(_expect(doc, "grid", dict, "config", default={})),
        physics=_parse_physics(_expect(doc, "physics", dict, "config", default={})),
        llm=_parse_llm(_expect(doc, "llm", dict, "config", default={})),
    )
    _reject_extra(doc, "config")
    if config.iterations < 0:
        raise ConfigError("config.iterations must be >= 0")
    if config.batch_size < 1:
        raise ConfigError("config.batch_size must be >= 1")
    if config.snapshot_every < 0:
        raise ConfigError("config.snapshot_every must be >= 0")
    if config.jobs < 1:
        raise ConfigError("config.jobs must be >= 1")
    return config


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return parse_config(doc)

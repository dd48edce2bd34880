"""Experiment configuration: YAML files, scenario presets, strict validation."""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .env import EnvConfig, ToyPolicy
from .grpo import GrpoConfig
from .rewards import KINDS, RewardSpec

COLD_STARTS = ("uniform", "depth_heavy", "depth_zero_locked")
DEFAULT_ADDR = "127.0.0.1:8765"


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid config:\n" + "\n".join(f"  - {e}" for e in errors))


@dataclass(frozen=True)
class ServiceConfig:
    address: str = DEFAULT_ADDR
    max_batch: int = 1024


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    reward: RewardSpec = field(default_factory=RewardSpec)
    grpo: GrpoConfig = field(default_factory=GrpoConfig)
    scenario: str = "custom"
    output_dir: str = "runs"
    cold_start: str = "uniform"
    service: ServiceConfig = field(default_factory=ServiceConfig)

    def to_dict(self) -> dict:
        reward = dataclasses.asdict(self.reward)
        reward["lambda"] = reward.pop("lam")
        return {
            "scenario": self.scenario,
            "cold_start": self.cold_start,
            "output_dir": self.output_dir,
            "env": dataclasses.asdict(self.env),
            "reward": reward,
            "grpo": dataclasses.asdict(self.grpo),
            "service": dataclasses.asdict(self.service),
        }

    def config_hash(self) -> str:
        """Hash of everything that affects results (output location and service excluded)."""
        doc = self.to_dict()
        doc.pop("output_dir")
        doc.pop("service")
        canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def initial_policy(self) -> ToyPolicy:
        return initial_policy(self.cold_start, self.env.max_depth)

    def with_seed(self, seed: int) -> ExperimentConfig:
        return dataclasses.replace(self, grpo=dataclasses.replace(self.grpo, seed=seed))


def initial_policy(cold_start: str, max_depth: int) -> ToyPolicy:
    """Initial parameters standing in for the outcome of different SFT recipes."""
    if cold_start == "uniform":
        return ToyPolicy(np.zeros(max_depth + 1), 2.0)
    if cold_start == "depth_heavy":
        return ToyPolicy(np.linspace(0.0, 3.0, max_depth + 1), 2.0)
    if cold_start == "depth_zero_locked":
        logits = np.zeros(max_depth + 1)
        logits[0] = 6.0
        return ToyPolicy(logits, -1.5)
    raise ValueError(f"unknown cold_start {cold_start!r}")


def _presets() -> dict[str, dict]:
    presets: dict[str, dict] = {}
    for kind in KINDS:
        presets[f"{kind}_default"] = {
            "env": {"depth_cost": 0.08, "dataset_size": 6400},
            "reward": {"kind": kind},
        }
        presets[f"{kind}_length"] = {
            "env": {"depth_cost": 0.02, "dataset_size": 3200},
            "reward": {"kind": kind},
        }
    presets["l1_depth_heavy"] = {
        "env": {"depth_cost": 0.02, "dataset_size": 3200},
        "reward": {"kind": "l1"},
        "cold_start": "depth_heavy",
    }
    presets["gaussian_saturated"] = {
        "env": {"depth_cost": 0.02, "dataset_size": 3200},
        "reward": {"kind": "gaussian", "d_0": 0.05},
    }
    presets["reward_hacking"] = {
        "env": {"depth_cost": 0.0, "dataset_size": 1920},
        "reward": {"kind": "gaussian", "d_0": 0.05},
        "cold_start": "depth_zero_locked",
    }
    for name, p in presets.items():
        p["scenario"] = name
    return presets


PRESETS = _presets()

_SECTIONS = {"env": EnvConfig, "reward": RewardSpec, "grpo": GrpoConfig, "service": ServiceConfig}
_TOP_LEVEL = {"scenario": str, "output_dir": str, "cold_start": str}


def _field_types(cls) -> dict[str, type]:
    types = {f.name: f.type for f in dataclasses.fields(cls)}
    if cls is RewardSpec:
        types["lambda"] = types.pop("lam")
    return {k: {"int": int, "float": float, "str": str, "bool": bool}[str(v)] for k, v in types.items()}


def _check_value(where: str, value: Any, typ: type, errors: list[str]) -> Any:
    if typ is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if typ in (str, bool) and isinstance(value, typ):
        return value
    errors.append(f"{where}: expected {typ.__name__}, got {value!r}")
    return None


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def config_from_dict(doc: dict | None) -> ExperimentConfig:
    """Build a config; a known ``scenario`` name supplies the base values.

    Every problem is collected before raising a single ``ConfigError``.
    """
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError([f"top level must be a mapping, got {type(doc).__name__}"])
    name = doc.get("scenario")
    if isinstance(name, str) and name in PRESETS:
        doc = _merge(PRESETS[name], doc)

    errors: list[str] = []
    kwargs: dict[str, Any] = {}
    for key, value in doc.items():
        if key in _TOP_LEVEL:
            v = _check_value(key, value, _TOP_LEVEL[key], errors)
            if v is not None:
                kwargs[key] = v
        elif key not in _SECTIONS:
            errors.append(f"unknown key {key!r}")
    if kwargs.get("cold_start", "uniform") not in COLD_STARTS:
        errors.append(f"cold_start: must be one of {COLD_STARTS}, got {kwargs['cold_start']!r}")

    for section, cls in _SECTIONS.items():
        raw = doc.get(section, {})
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            errors.append(f"{section}: must be a mapping")
            continue
        types = _field_types(cls)
        values = {}
        for key, value in raw.items():
            if key not in types:
                errors.append(f"unknown key {section}.{key!r}")
                continue
            v = _check_value(f"{section}.{key}", value, types[key], errors)
            if v is not None:
                values["lam" if (cls is RewardSpec and key == "lambda") else key] = v
        if len(values) != len(raw):
            continue
        try:
            kwargs[section] = cls(**values)
        except ValueError as exc:
            errors.append(f"{section}: {exc}")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(**kwargs)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: not valid YAML ({exc})"]) from exc
    return config_from_dict(doc)


def preset_config(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError([f"unknown scenario {name!r}; known: {', '.join(sorted(PRESETS))}"])
    return config_from_dict({"scenario": name})


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)

"""Experiment configuration: defaults, YAML files and command-line overrides.

Precedence is flags > file > defaults. Files are nested YAML mappings with
the sections ``model``, ``norm``, ``data``, ``optim`` and ``schedule`` plus a
few top-level keys; overrides use dotted paths such as ``norm.kind=iebn``.
"""
from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from ..attacks import ConstantNoiseSpec, MixDatasetSpec, parse_attack
from ..errors import ConfigError
from ..models import ModelSpec
from ..norm import NormLayerConfig

DATASETS = {"cifar10": 10, "cifar100": 100, "synthetic": None}

DEFAULTS: dict = {
    "name": "run",
    "model": {"widths": [16, 32, 64], "blocks_per_stage": 3, "block": "basic_residual",
              "head_init": "zeros"},
    "norm": {"kind": "bn"},
    "data": {"dataset": "cifar10", "data_dir": None, "contaminant_dir": None,
             "train_subset": 5000, "test_subset": 1000, "full": False, "augment": True,
             "synthetic": {"class_count": 10, "samples_per_class": 50, "test_per_class": 20,
                           "margin": 8.0, "cov_scale": 0.01, "seed": 0}},
    "optim": {"lr": 0.1, "momentum": 0.9, "weight_decay": 1e-4, "batch_size": 128,
              "eval_batch_size": 500},
    "schedule": {"epochs": 30, "milestones": [15, 23], "gamma": 0.1},
    "seeds": [0, 1, 2],
    "attack": None,
    "out": "runs/default",
    "precision": "float32",
    "record_wall_time": False,
}


@dataclass
class DataConfig:
    dataset: str = "cifar10"
    data_dir: str | None = None
    contaminant_dir: str | None = None
    train_subset: int = 5000
    test_subset: int = 1000
    full: bool = False
    augment: bool = True
    synthetic: dict = field(default_factory=lambda: dict(DEFAULTS["data"]["synthetic"]))


@dataclass
class OptimConfig:
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 128
    eval_batch_size: int = 500


@dataclass
class ScheduleConfig:
    epochs: int = 30
    milestones: tuple[int, ...] = (15, 23)
    gamma: float = 0.1

    def lr_at(self, lr0: float, epoch: int) -> float:
        """``lr0 * gamma ** (number of milestones <= epoch)``."""
        return lr0 * self.gamma ** sum(1 for m in self.milestones if m <= epoch)


@dataclass
class ExperimentConfig:
    model: ModelSpec
    data: DataConfig
    optim: OptimConfig
    schedule: ScheduleConfig
    seeds: tuple[int, ...] = (0, 1, 2)
    attack: ConstantNoiseSpec | MixDatasetSpec | None = None
    out: str = "runs/default"
    name: str = "run"
    precision: str = "float32"
    record_wall_time: bool = False
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def norm(self) -> NormLayerConfig:
        return self.model.norm

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-4`` style numbers as floats."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?$|^[-+]?\.(?:inf|Inf|INF)$|^\.(?:nan|NaN|NAN)$"),
    list("-+0123456789."))


def _yaml(text: str):
    return yaml.load(text, Loader=_Loader)


def deep_merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def set_path(tree: dict, dotted: str, value) -> None:
    """Assign ``value`` at a dotted key path, creating sections as needed."""
    keys = dotted.split(".")
    node = tree
    for key in keys[:-1]:
        child = node.get(key)
        if child is None:
            child = node[key] = {}
        elif not isinstance(child, dict):
            raise ConfigError(f"cannot set {dotted!r}: {key!r} is not a section")
        node = child
    node[keys[-1]] = value


def parse_assignment(text: str) -> tuple[str, object]:
    """Split ``key.path=value``; the value is parsed as YAML."""
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"override must look like key.path=value, got {text!r}")
    return key.strip(), _yaml(value)


def read_config_file(path) -> dict:
    path = Path(path)
    try:
        loaded = _yaml(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return loaded


def _section(tree: dict, name: str, cls):
    values = tree.get(name) or {}
    if not isinstance(values, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"section {name!r}: {exc}") from None


def _attack(value):
    if value is None or isinstance(value, str):
        return parse_attack(value)
    if isinstance(value, dict):
        value = dict(value)
        kind = value.pop("type", None)
        try:
            if kind == "constant":
                return ConstantNoiseSpec(**value)
            if kind == "mix":
                return MixDatasetSpec(**value)
        except TypeError as exc:
            raise ConfigError(f"attack: {exc}") from None
        raise ConfigError(f"attack type must be 'constant' or 'mix', got {kind!r}")
    raise ConfigError(f"cannot interpret attack {value!r}")


def _require_number(section: str, name: str, value) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{name} must be a number, got {value!r}")


def _require_int(section: str, name: str, value) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}.{name} must be an integer, got {value!r}")


def validate_schedule(schedule: ScheduleConfig) -> None:
    if isinstance(schedule.epochs, bool) or not isinstance(schedule.epochs, int) or schedule.epochs < 1:
        raise ConfigError(f"epochs must be a positive integer, got {schedule.epochs!r}")
    ms = list(schedule.milestones)
    if any(not isinstance(m, int) or isinstance(m, bool) for m in ms):
        raise ConfigError(f"milestones must be integers, got {ms}")
    if any(b <= a for a, b in zip(ms, ms[1:])):
        raise ConfigError(f"milestones must be strictly increasing, got {ms}")
    if ms and (ms[0] < 0 or ms[-1] >= schedule.epochs):
        raise ConfigError(f"milestones must lie in [0, epochs={schedule.epochs}), got {ms}")
    if not 0.0 < schedule.gamma <= 1.0:
        raise ConfigError(f"decay factor must lie in (0, 1], got {schedule.gamma}")


def config_from_dict(tree: dict) -> ExperimentConfig:
    """Validate a merged configuration tree and build the typed config."""
    known = set(DEFAULTS)
    unknown = set(tree) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    norm = _section(tree, "norm", NormLayerConfig)
    if norm.noise is not None:
        raise ConfigError("set constant noise through 'attack', not 'norm.noise'")
    model_values = dict(tree.get("model") or {})
    model_values["norm"] = norm
    unknown = set(model_values) - {f.name for f in fields(ModelSpec)}
    if unknown:
        raise ConfigError(f"unknown keys in 'model': {sorted(unknown)}")
    model = ModelSpec(**model_values)
    data = _section(tree, "data", DataConfig)
    if data.dataset not in DATASETS:
        raise ConfigError(f"dataset must be one of {sorted(DATASETS)}, got {data.dataset!r}")
    optim = _section(tree, "optim", OptimConfig)
    for name in ("lr", "momentum", "weight_decay"):
        _require_number("optim", name, getattr(optim, name))
    for name in ("batch_size", "eval_batch_size"):
        _require_int("optim", name, getattr(optim, name))
    if optim.lr <= 0 or optim.momentum < 0 or optim.weight_decay < 0:
        raise ConfigError("lr must be positive; momentum and weight decay non-negative")
    if optim.batch_size < 2 or optim.eval_batch_size < 1:
        raise ConfigError("batch sizes must be positive (train batch >= 2)")
    schedule = _section(tree, "schedule", ScheduleConfig)
    _require_number("schedule", "gamma", schedule.gamma)
    schedule.milestones = tuple(schedule.milestones)
    validate_schedule(schedule)
    seeds = tree.get("seeds", DEFAULTS["seeds"])
    seeds = (seeds,) if isinstance(seeds, int) else tuple(seeds)
    if not seeds or any(not isinstance(s, int) or s < 0 for s in seeds):
        raise ConfigError(f"seeds must be non-negative integers, got {seeds}")
    precision = tree.get("precision", "float32")
    if precision not in ("float32", "float64"):
        raise ConfigError(f"precision must be float32 or float64, got {precision!r}")
    attack = _attack(tree.get("attack"))
    # class count follows the dataset
    if data.dataset == "synthetic":
        classes = int(data.synthetic.get("class_count", 10))
    else:
        classes = DATASETS[data.dataset]
    if isinstance(attack, MixDatasetSpec) and attack.joint_labels:
        classes += 10
    model.num_classes = classes
    model.validate()
    return ExperimentConfig(model=model, data=data, optim=optim, schedule=schedule, seeds=seeds,
                            attack=attack, out=str(tree.get("out", DEFAULTS["out"])),
                            name=str(tree.get("name", "run")), precision=precision,
                            record_wall_time=bool(tree.get("record_wall_time", False)),
                            raw=copy.deepcopy(tree))


def build_config(path=None, overrides: dict | None = None,
                 assignments: list[str] | None = None) -> ExperimentConfig:
    """Defaults, then the file at ``path``, then dotted ``overrides`` and ``key=value`` strings."""
    tree = copy.deepcopy(DEFAULTS)
    if path is not None:
        tree = deep_merge(tree, read_config_file(path))
    for key, value in (overrides or {}).items():
        set_path(tree, key, value)
    for text in assignments or []:
        set_path(tree, *parse_assignment(text))
    return config_from_dict(tree)


def with_overrides(config: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    tree = config.to_dict()
    for key, value in overrides.items():
        set_path(tree, key, value)
    return config_from_dict(tree)

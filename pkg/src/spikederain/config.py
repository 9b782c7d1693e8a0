"""Run configuration: one strict JSON document with a section per component.

Example::

    {
      "network": {"base_channels": 16, "refine_blocks": 4},
      "neuron": {"theta": 1.0, "beta": 0.5, "d_max": 4},
      "vlif": {"r": 2, "patch_order": "row_major"},
      "train": {"iterations": 2000, "batch_size": 2},
      "rain": {"streak_count": 14},
      "data": {"count": 50, "size": 32, "test_count": 10},
      "paths": {"data_dir": "data", "run_dir": "runs/default"}
    }

Every section and key is optional, but unknown ones are rejected before any
work starts.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .data import RainSpec
from .network import NetworkConfig
from .neurons import NeuronConfig
from .train import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataConfig:
    count: int = 50
    size: int = 32
    test_count: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.count < 2 or self.size < 1:
            raise ValueError("data.count must be >= 2 and data.size >= 1")
        if not 0 < self.test_count < self.count:
            raise ValueError("data.test_count must lie in (0, count)")


@dataclass(frozen=True)
class PathsConfig:
    data_dir: str = "data"
    run_dir: str = "runs/default"


@dataclass(frozen=True)
class RunConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    rain: RainSpec = field(default_factory=RainSpec)
    data: DataConfig = field(default_factory=DataConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    @property
    def neuron(self) -> NeuronConfig:
        return self.network.neuron

    def with_seed(self, seed: int) -> "RunConfig":
        """Pin every source of randomness to ``seed``."""
        return replace(
            self,
            network=replace(self.network, seed=seed),
            train=replace(self.train, seed=seed),
            rain=replace(self.rain, seed=seed),
            data=replace(self.data, seed=seed),
        )

    def to_dict(self) -> dict:
        net = self.network.to_dict()
        neuron = net.pop("neuron")
        vlif = {"r": net.pop("r"), "patch_order": net.pop("patch_order")}
        return {
            "network": net,
            "neuron": neuron,
            "vlif": vlif,
            "train": dataclasses.asdict(self.train),
            "rain": dataclasses.asdict(self.rain),
            "data": dataclasses.asdict(self.data),
            "paths": dataclasses.asdict(self.paths),
        }


SECTIONS = ("network", "neuron", "vlif", "train", "rain", "data", "paths")
_VLIF_KEYS = ("r", "patch_order")


def _take(section: str, cls, values: dict, exclude: tuple[str, ...] = ()) -> dict:
    if not isinstance(values, dict):
        raise ConfigError(f"section [{section}] must be an object")
    allowed = {f.name for f in fields(cls)} - set(exclude)
    unknown = sorted(set(values) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}; allowed: {', '.join(sorted(allowed))}")
    return dict(values)


def run_config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = sorted(set(doc) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    try:
        net = _take("network", NetworkConfig, doc.get("network", {}), exclude=("neuron", *_VLIF_KEYS))
        net["neuron"] = NeuronConfig(**_take("neuron", NeuronConfig, doc.get("neuron", {})))
        vlif = doc.get("vlif", {})
        if not isinstance(vlif, dict) or set(vlif) - set(_VLIF_KEYS):
            raise ConfigError(f"section [vlif] accepts only {', '.join(_VLIF_KEYS)}")
        net.update(vlif)
        return RunConfig(
            network=NetworkConfig(**net),
            train=TrainConfig(**_take("train", TrainConfig, doc.get("train", {}))),
            rain=RainSpec(**_take("rain", RainSpec, doc.get("rain", {}))),
            data=DataConfig(**_take("data", DataConfig, doc.get("data", {}))),
            paths=PathsConfig(**_take("paths", PathsConfig, doc.get("paths", {}))),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_run_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
    cfg = run_config_from_dict(doc)
    cfg.rain.validate()
    return cfg


def save_run_config(path, cfg: RunConfig) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")

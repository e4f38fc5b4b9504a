"""Experiment configuration.

Every constant the networks and samplers need lives here, nested per
subsystem. Configs load from JSON with strict key checking: unknown keys are
rejected with the offending path, so a typo in a config file fails loudly
instead of silently using a default.
"""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .vocab import GridSpec


class ConfigError(ValueError):
    pass


def build_config(cls: type, data: Any, where: str) -> Any:
    """Construct ``cls`` from JSON-shaped ``data``, rejecting unknown keys."""
    if dataclasses.is_dataclass(cls):
        if not isinstance(data, dict):
            raise ConfigError(f"{where}: expected an object for {cls.__name__}")
        hints = typing.get_type_hints(cls)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
        kwargs = {k: build_config(hints[k], v, f"{where}.{k}") for k, v in data.items()}
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}") from None

    origin = typing.get_origin(cls)
    if origin is tuple:
        if not isinstance(data, (list, tuple)):
            raise ConfigError(f"{where}: expected an array")
        args = typing.get_args(cls)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(build_config(args[0], v, f"{where}[{i}]") for i, v in enumerate(data))
        if len(args) != len(data):
            raise ConfigError(f"{where}: expected {len(args)} entries, got {len(data)}")
        return tuple(build_config(a, v, f"{where}[{i}]") for i, (a, v) in enumerate(zip(args, data)))
    if origin is dict:
        if not isinstance(data, dict):
            raise ConfigError(f"{where}: expected an object")
        _, val_t = typing.get_args(cls)
        return {k: build_config(val_t, v, f"{where}.{k}") for k, v in data.items()}

    if cls is float:
        if isinstance(data, bool) or not isinstance(data, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {data!r}")
        return float(data)
    if cls is int:
        if isinstance(data, bool) or not isinstance(data, int):
            raise ConfigError(f"{where}: expected an integer, got {data!r}")
        return data
    if cls is bool:
        if not isinstance(data, bool):
            raise ConfigError(f"{where}: expected a boolean, got {data!r}")
        return data
    if cls is str:
        if not isinstance(data, str):
            raise ConfigError(f"{where}: expected a string, got {data!r}")
        return data
    raise ConfigError(f"{where}: unsupported config field type {cls!r}")


def as_plain_dict(value: Any) -> Any:
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: as_plain_dict(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, tuple):
        return [as_plain_dict(v) for v in value]
    if isinstance(value, dict):
        return {k: as_plain_dict(v) for k, v in value.items()}
    return value


@dataclass(frozen=True)
class DerivationConfig:
    """Thresholds for reading graphs out of simulation annotations."""

    z_max: float = 80.0
    lateral_gap_min: float = 0.05
    vertical_gap_min: float = 0.05
    depth_gap_min: float = 2.0
    max_edges_per_node: int = 4
    min_background_area: float = 0.005
    grid: GridSpec = GridSpec()

    def __post_init__(self) -> None:
        for name in ("z_max", "lateral_gap_min", "vertical_gap_min", "depth_gap_min", "min_background_area"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.max_edges_per_node < 1:
            raise ConfigError("max_edges_per_node must be >= 1")


@dataclass(frozen=True)
class SamplerConfig:
    """Random scene-graph sampler knobs. Sky cells land in the top rows and
    road cells in the bottom rows so sampled scenes stay plausible."""

    node_count_range: tuple[int, int] = (4, 8)
    class_weights: dict[str, float] = field(
        default_factory=lambda: {"person": 1.0, "car": 3.0, "bus": 0.5, "truck": 0.5}
    )
    background_probs: dict[str, float] = field(
        default_factory=lambda: {"tree": 0.7, "building": 0.7}
    )
    relation_density: float = 0.6

    def __post_init__(self) -> None:
        lo, hi = self.node_count_range
        if lo < 2 or hi < lo:
            raise ConfigError("node_count_range must satisfy 2 <= lo <= hi")
        weights = list(self.class_weights.values())
        if any(w < 0 for w in weights) or sum(weights) == 0:
            raise ConfigError("class weights must be non-negative and not all zero")
        if not all(0 <= p <= 1 for p in self.background_probs.values()):
            raise ConfigError("background probabilities must lie in [0, 1]")
        if not 0 <= self.relation_density <= 1:
            raise ConfigError("relation_density must lie in [0, 1]")


@dataclass(frozen=True)
class ProcessorConfig:
    """Graph-processor architecture and training schedule."""

    class_dim: int = 32
    location_dim: int = 32
    depth_dim: int = 16
    relation_dim: int = 16
    hidden_dim: int = 64
    layers: int = 3
    edge_hidden: int = 128
    box_hidden: int = 64
    mask_size: int = 32
    mask_channels: int = 32
    disc_channels: int = 16
    lambda_box: float = 10.0
    lambda_mask_gan: float = 0.05
    lambda_fm: float = 0.5
    optimizer: str = "adam"
    lr: float = 1e-3
    momentum: float = 0.99
    disc_lr: float = 1e-4
    steps: int = 1500
    batch_size: int = 16
    checkpoint_every: int = 0
    use_depth_attribute: bool = True
    use_relations: bool = True

    def __post_init__(self) -> None:
        if self.mask_size not in (16, 32):
            raise ConfigError("mask_size must be 16 or 32")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError("optimizer must be 'adam' or 'sgd'")
        if self.layers < 1 or self.steps < 1 or self.batch_size < 1:
            raise ConfigError("layers, steps and batch_size must be >= 1")


@dataclass(frozen=True)
class NCEConfig:
    """Patch-wise contrastive loss taps and sampling."""

    taps: tuple[int, ...] = (0, 1, 2)
    patches: int = 64
    temperature: float = 0.07
    projection_dim: int = 64

    def __post_init__(self) -> None:
        if self.patches < 1:
            raise ConfigError("patches must be >= 1")
        if self.temperature <= 0:
            raise ConfigError("temperature must be > 0")


@dataclass(frozen=True)
class GeneratorConfig:
    """Scene-generator architecture and training schedule."""

    base_channels: int = 24
    res_blocks: int = 2
    disc_channels: int = 32
    disc_layers: int = 4
    lambda_gan: float = 1.0
    lambda_nce: float = 1.0
    gan_mode: str = "vanilla"
    lr: float = 2e-4
    disc_lr: float = 5e-5
    beta1: float = 0.5
    beta2: float = 0.999
    steps: int = 2000
    batch_size: int = 2
    checkpoint_every: int = 0
    nce: NCEConfig = NCEConfig()

    def __post_init__(self) -> None:
        if self.gan_mode not in ("vanilla", "lsgan"):
            raise ConfigError("gan_mode must be 'vanilla' or 'lsgan'")
        if self.steps < 1 or self.batch_size < 1:
            raise ConfigError("steps and batch_size must be >= 1")


def _default_colors() -> dict[str, tuple[float, float, float]]:
    # spread across the RGB cube: nearest pair is ~0.4 apart so the oracle
    # segmenter tolerates sizable generator color error
    return {
        "sky": (0.55, 0.75, 1.00),
        "road": (0.15, 0.15, 0.15),
        "tree": (0.05, 0.65, 0.05),
        "building": (0.75, 0.45, 0.15),
        "sidewalk": (0.55, 0.55, 0.60),
        "person": (1.00, 0.10, 0.10),
        "car": (0.05, 0.20, 0.95),
        "bus": (1.00, 0.95, 0.10),
        "truck": (0.75, 0.05, 0.85),
    }


def _default_textures() -> dict[str, tuple[float, float]]:
    return {
        "sky": (1.0, 0.015),
        "road": (3.0, 0.020),
        "tree": (9.0, 0.030),
        "building": (6.0, 0.025),
        "sidewalk": (5.0, 0.020),
        "person": (2.0, 0.015),
        "car": (2.0, 0.015),
        "bus": (2.0, 0.015),
        "truck": (2.0, 0.015),
    }


@dataclass(frozen=True)
class ToyWorldConfig:
    """Deterministic stand-in target domain: class colors plus mild texture
    and noise, separable enough that nearest-color segmentation recovers the
    class almost everywhere."""

    colors: dict[str, tuple[float, float, float]] = field(default_factory=_default_colors)
    textures: dict[str, tuple[float, float]] = field(default_factory=_default_textures)
    noise_scale: float = 0.015
    seed: int = 7

    def __post_init__(self) -> None:
        for name, rgb in self.colors.items():
            if len(rgb) != 3 or not all(0 <= v <= 1 for v in rgb):
                raise ConfigError(f"color for {name!r} must be three values in [0, 1]")
        if self.noise_scale < 0:
            raise ConfigError("noise_scale must be >= 0")

    def require_classes(self, names: tuple[str, ...]) -> None:
        missing = [n for n in names if n not in self.colors or n not in self.textures]
        if missing:
            raise ConfigError(f"toy world config lacks colors/textures for {missing}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Umbrella config: everything a full experiment run needs."""

    vocab: str = "default"
    grid: GridSpec = GridSpec()
    height: int = 64
    width: int = 128
    seed: int = 0
    deterministic: bool = False
    corpus_size: int = 200
    target_corpus_size: int = 64
    probe_seed: int = 1234
    derivation: DerivationConfig = DerivationConfig()
    sampler: SamplerConfig = SamplerConfig()
    processor: ProcessorConfig = ProcessorConfig()
    generator: GeneratorConfig = GeneratorConfig()
    toyworld: ToyWorldConfig = ToyWorldConfig()

    def __post_init__(self) -> None:
        if self.height % 8 or self.width % 8:
            raise ConfigError("height and width must be multiples of 8")

    def to_dict(self) -> dict[str, Any]:
        return as_plain_dict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        return build_config(cls, data, "$")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at offset {exc.pos}: {exc.msg}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def with_overrides(self, **kwargs: Any) -> "ExperimentConfig":
        return dataclasses.replace(self, **kwargs)

"""Run configuration: `key = value` files with flag overrides.

One flat namespace covers architecture, optimizer, augmentation, and
phantom-generation settings; unknown keys are hard errors.  Defaults
follow the published training recipe (lr 2e-4, betas 0.5/0.999, eps 1e-8,
batch 2, 20 epochs, lambda 100, 256x256 inputs).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from . import palette as pal
from .errors import InvalidConfig
from .network import ArchConfig
from .phantom import PhantomSpec
from .pipeline import DEFAULT_ROTATIONS, AugmentSpec
from .trainer import TrainConfig


@dataclass(frozen=True)
class RunConfig:
    # architecture
    image_size: int = 256
    depth: int = 8
    base_width: int = 64
    input_channels: int = 1
    output_channels: int = 3
    skip_connections: bool = True
    leaky_slope: float = 0.2
    # optimizer / schedule
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 2
    epochs: int = 20
    lambda_l1: float = 100.0
    seed: int = 0
    checkpoint_every: int = 1000
    # augmentation
    rotation_degrees: tuple[float, ...] = DEFAULT_ROTATIONS
    allow_hflip: bool = True
    allow_vflip: bool = True
    max_translate: int = 16
    intensity_delta: float = 0.1
    expansion_factor: int = 360
    # phantom generation
    teeth_min: int = 3
    teeth_max: int = 6
    caries_probability: float = 0.7
    crown_probability: float = 0.5
    restoration_probability: float = 0.4
    root_canal_probability: float = 0.6
    noise_sigma: float = 8.0
    blur_radius: int = 1
    # paths (flags usually override these)
    data_dir: str = ""
    out_dir: str = ""

    def to_arch(self) -> ArchConfig:
        return ArchConfig(
            image_size=self.image_size,
            depth=self.depth,
            base_width=self.base_width,
            input_channels=self.input_channels,
            output_channels=self.output_channels,
            skip_connections=self.skip_connections,
            leaky_slope=self.leaky_slope,
        )

    def to_train(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
            batch_size=self.batch_size,
            epochs=self.epochs,
            lambda_l1=self.lambda_l1,
            seed=self.seed,
            checkpoint_every=self.checkpoint_every,
            arch=self.to_arch(),
        )

    def to_augment(self) -> AugmentSpec:
        return AugmentSpec(
            rotation_degrees=tuple(self.rotation_degrees),
            allow_hflip=self.allow_hflip,
            allow_vflip=self.allow_vflip,
            max_translate=self.max_translate,
            intensity_delta=self.intensity_delta,
            expansion_factor=self.expansion_factor,
        )

    def to_phantom(self) -> PhantomSpec:
        return PhantomSpec(
            image_size=self.image_size,
            teeth_count_range=(self.teeth_min, self.teeth_max),
            class_probabilities={
                pal.CARIES: self.caries_probability,
                pal.CROWN: self.crown_probability,
                pal.RESTORATION: self.restoration_probability,
                pal.ROOT_CANAL: self.root_canal_probability,
            },
            noise_sigma=self.noise_sigma,
            blur_radius=self.blur_radius,
        )


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise InvalidConfig(f"key '{key}': expected a boolean, got '{raw}'")


def _convert(key: str, raw: str):
    field = _FIELDS[key]
    raw = raw.strip()
    try:
        if field.type in ("int", int):
            return int(raw)
        if field.type in ("float", float):
            return float(raw)
        if field.type in ("bool", bool):
            return _parse_bool(raw, key)
        if key == "rotation_degrees":
            if not raw:
                return ()
            return tuple(float(part) for part in raw.split(","))
        return raw  # str
    except ValueError as exc:
        raise InvalidConfig(f"key '{key}': cannot parse '{raw}'") from exc


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines (UTF-8, '#' comments) into typed values."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise InvalidConfig(f"line {lineno}: expected 'key = value', got '{line.strip()}'")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise InvalidConfig(f"line {lineno}: unknown key '{key}'")
        values[key] = _convert(key, raw)
    return values


def load_run_config(config_path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then config file values, then explicit overrides."""
    values = {}
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read()))
    for key, raw in (overrides or {}).items():
        if key not in _FIELDS:
            raise InvalidConfig(f"unknown key '{key}'")
        values[key] = _convert(key, raw) if isinstance(raw, str) else raw
    return RunConfig(**values)


def render_config(cfg: RunConfig) -> str:
    """Full resolved configuration in the same `key = value` format."""
    lines = []
    for field in dataclasses.fields(RunConfig):
        value = getattr(cfg, field.name)
        if field.name == "rotation_degrees":
            value = ",".join(f"{v:g}" for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{field.name} = {value}")
    return "\n".join(lines) + "\n"

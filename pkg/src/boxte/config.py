"""Flat ``key=value`` run configuration with presets and overrides."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Mapping

from .budget import PRESETS, preset_sizes
from .errors import ConfigError
from .model import ModelConfig
from .train import TrainConfig

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class RunConfig:
    # model
    dim: int = 32
    k: int = 2
    norm_order: int = 2
    bounded: bool = False
    factor_rank: int = 0
    variant: str = "boxte"
    de_gamma: float = 0.0
    de_activation: str = "sine"
    # training
    learning_rate: float = 1e-3
    batch_size: int = 256
    num_negatives: int = 75
    epochs: int = 100
    validate_every: int = 100
    loss: str = "cross-entropy"
    margin: float = 9.0
    adversarial_temperature: float = 2.0
    reg_weight: float = 0.0
    seed: int = 0
    # files
    data_dir: str = ""
    output_dir: str = "out"
    checkpoint: str = ""
    split: str = "test"
    # parameter budgets
    preset: str = ""
    count_model: str = "boxte"
    num_entities: int = 0
    num_relations: int = 0
    num_timestamps: int = 0
    de_simple_gamma: str = ""
    budget: int = 0
    # verification batteries
    trials: int = 50
    max_entities: int = 3
    max_relations: int = 2
    max_timestamps: int = 3
    pattern_entities: int = 20

    def __post_init__(self):
        self.model_config()
        self.train_config()

    @classmethod
    def keys(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_mapping(cls, values: Mapping[str, str], base: "RunConfig | None" = None) -> "RunConfig":
        """Coerce string values; a ``preset`` entry is applied before the other keys."""
        base = cls() if base is None else base
        unknown = sorted(set(values) - set(cls.keys()))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if values.get("preset"):
            base = base.with_preset(values["preset"])
        types = {f.name: f.type for f in fields(cls)}
        coerced = {key: _coerce(key, types[key], raw) for key, raw in values.items() if key != "preset"}
        return replace(base, **coerced)

    @classmethod
    def parse(cls, text: str | Iterable[str], base: "RunConfig | None" = None) -> "RunConfig":
        lines = text.splitlines() if isinstance(text, str) else list(text)
        values: dict[str, str] = {}
        for lineno, line in enumerate(lines, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            values[key] = value
        return cls.from_mapping(values, base)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            return cls.parse(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def with_preset(self, name: str) -> "RunConfig":
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        E, R, T = preset_sizes(name)
        return replace(self, preset=name, num_entities=E, num_relations=R, num_timestamps=T, **PRESETS[name])

    def to_text(self) -> str:
        out = []
        for key, value in asdict(self).items():
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            out.append(f"{key}={value}")
        return "\n".join(out) + "\n"

    def model_config(self) -> ModelConfig:
        return ModelConfig(dim=self.dim, k=self.k, norm_order=self.norm_order, bounded=self.bounded,
                           factor_rank=self.factor_rank, variant=self.variant,
                           de_gamma=self.de_gamma, de_activation=self.de_activation)

    def train_config(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, batch_size=self.batch_size,
                           num_negatives=self.num_negatives, epochs=self.epochs,
                           validate_every=self.validate_every, loss=self.loss, margin=self.margin,
                           adversarial_temperature=self.adversarial_temperature,
                           reg_weight=self.reg_weight, seed=self.seed)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.num_entities, self.num_relations, self.num_timestamps

    def require(self, *keys: str) -> None:
        missing = [key for key in keys if not getattr(self, key)]
        if missing:
            raise ConfigError(f"missing required config keys: {', '.join(missing)}")


def _coerce(key: str, kind: str, raw) -> object:
    if not isinstance(raw, str):
        return raw
    try:
        if kind == "bool":
            low = raw.strip().lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r} (expected {kind})") from None
    return raw

"""Run configuration: one TOML file, section per module, with dotted overrides."""
from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .data import WindowSpec
from .graph import DEFAULT_TAU
from .model import ModelConfig
from .netdyn import DEFAULT_THETA
from .synth import SynthConfig
from .train import SearchSpace, TrainConfig

CONFIG_ENV = "SOZGNN_CONFIG"


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message

    def to_dict(self) -> dict:
        return {"error": "invalid_config", "field": self.path, "message": self.message}


@dataclass(frozen=True)
class FeatureSettings:
    tau: float = DEFAULT_TAU
    n_rand: int = 20
    seed: int = 0


@dataclass(frozen=True)
class ModelSettings:
    hidden_dim: int = 64
    dropout: float = 0.2
    alpha: float = 0.5
    seed: int = 0


@dataclass(frozen=True)
class CVSettings:
    k: int = 10
    train_frac: float = 0.6
    val_frac: float = 0.2
    split_seed: int = 0


@dataclass(frozen=True)
class AblationSettings:
    n_folds: int = 0  # 0 = every fold


@dataclass(frozen=True)
class PLVSettings:
    theta: float = DEFAULT_THETA
    window_s: float = 2.0
    svg_nodes: int = 8


SECTIONS: dict[str, type] = {
    "synth": SynthConfig,
    "window": WindowSpec,
    "features": FeatureSettings,
    "model": ModelSettings,
    "train": TrainConfig,
    "cv": CVSettings,
    "search": SearchSpace,
    "ablation": AblationSettings,
    "plv": PLVSettings,
}

_pos = ("> 0", lambda v: v > 0)
_nonneg = (">= 0", lambda v: v >= 0)
_unit_open = ("in (0, 1)", lambda v: 0 < v < 1)
RULES: dict[str, tuple[str, Callable[[Any], bool]]] = {
    "synth.n_patients": ("> 0", lambda v: v >= 1),
    "synth.soz_fraction": ("in (0, 0.5)", lambda v: 0 < v < 0.5),
    "synth.duration_s": _pos,
    "synth.fs": _pos,
    "synth.class0_plv_target": _unit_open,
    "synth.class1_plv_target": _unit_open,
    "synth.channels_min": (">= 2", lambda v: v >= 2),
    "window.length_s": _pos,
    "window.overlap_s": _nonneg,
    "features.tau": ("in [0, 1)", lambda v: 0 <= v < 1),
    "features.n_rand": (">= 1", lambda v: v >= 1),
    "model.hidden_dim": (">= 1", lambda v: v >= 1),
    "model.dropout": ("in [0, 1)", lambda v: 0 <= v < 1),
    "model.alpha": ("in [0, 1]", lambda v: 0 <= v <= 1),
    "train.epochs": (">= 1", lambda v: v >= 1),
    "train.learning_rate": _pos,
    "train.batch_size": (">= 1", lambda v: v >= 1),
    "train.patience": (">= 1", lambda v: v >= 1),
    "cv.k": (">= 2", lambda v: v >= 2),
    "cv.train_frac": _unit_open,
    "cv.val_frac": _unit_open,
    "search.n_trials": (">= 1", lambda v: v >= 1),
    "search.lr_min": _pos,
    "ablation.n_folds": _nonneg,
    "plv.theta": ("in [0, 1)", lambda v: 0 <= v < 1),
    "plv.window_s": _pos,
}


@dataclass(frozen=True)
class RunConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    window: WindowSpec = field(default_factory=WindowSpec)
    features: FeatureSettings = field(default_factory=FeatureSettings)
    model: ModelSettings = field(default_factory=ModelSettings)
    train: TrainConfig = field(default_factory=TrainConfig)
    cv: CVSettings = field(default_factory=CVSettings)
    search: SearchSpace = field(default_factory=SearchSpace)
    ablation: AblationSettings = field(default_factory=AblationSettings)
    plv: PLVSettings = field(default_factory=PLVSettings)

    def to_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            section = asdict(getattr(self, name))
            out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in section.items()}
        return out

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def model_config(self) -> ModelConfig:
        m = self.model
        return ModelConfig(hidden_dim=m.hidden_dim, dropout=m.dropout, alpha=m.alpha, seed=m.seed)


def _coerce(path: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)) or (default and len(value) != len(default) and path.endswith("_hz")):
            raise ConfigError(path, f"expected a list like {list(default)}, got {value!r}")
        return tuple(value)
    return value


def build_config(raw: dict) -> RunConfig:
    """Validate a nested dict section by section, field by field."""
    unknown = set(raw) - set(SECTIONS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown section")
    built = {}
    for name, cls in SECTIONS.items():
        section = raw.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(name, "expected a table")
        defaults = {f.name: getattr(cls(), f.name) for f in fields(cls)}
        values = {}
        for key, value in section.items():
            path = f"{name}.{key}"
            if key not in defaults:
                raise ConfigError(path, "unknown field")
            value = _coerce(path, value, defaults[key])
            rule = RULES.get(path)
            if rule and not rule[1](value):
                raise ConfigError(path, f"must be {rule[0]}, got {value!r}")
            values[key] = value
        try:
            built[name] = cls(**values)
        except (ValueError, TypeError) as exc:
            raise ConfigError(name, str(exc)) from None
    return RunConfig(**built)


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` overrides; values are parsed as TOML literals."""
    raw = {k: dict(v) if isinstance(v, dict) else v for k, v in raw.items()}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like section.key=value")
        path, text = item.split("=", 1)
        parts = path.strip().split(".")
        if len(parts) != 2:
            raise ConfigError(path, "override path must be section.key")
        raw.setdefault(parts[0], {})[parts[1]] = _parse_value(text.strip())
    return raw


def load_config(path: str | os.PathLike | None = None, overrides: list[str] | None = None) -> RunConfig:
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"config file not found: {p}")
        try:
            raw = tomllib.loads(p.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(str(p), f"TOML parse error: {exc}") from None
    return build_config(apply_overrides(raw, overrides or []))


def dump_toml(cfg: RunConfig) -> str:
    """Serialize back to TOML (flat tables of scalars and lists only)."""
    lines = []
    for name, section in cfg.to_dict().items():
        lines.append(f"[{name}]")
        for key, value in section.items():
            lines.append(f"{key} = {json.dumps(value)}")
        lines.append("")
    return "\n".join(lines)

"""Layered run configuration: defaults, then a ``key=value`` file, then flags.

Keys are flat and dotted by section (``model.hidden_len``, ``train.batch_size``,
``dsp.window_length``, ``synth.noise``) plus a few top-level keys.  The
top-level ``seed`` fills every per-section seed that was not set explicitly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Iterable, Mapping

from .dsp import SpectrogramSettings
from .errors import ConfigError
from .model import ModelConfig
from .synth import SyntheticSpec
from .training import TrainConfig

__all__ = ["RunConfig", "defaults", "parse_value", "format_value", "read_config_file", "resolve"]

_SECTIONS = {
    "model": ModelConfig,
    "train": TrainConfig,
    "dsp": SpectrogramSettings,
    "synth": SyntheticSpec,
}

_TOP = {"seed": 0, "mode": "av", "val_actor": "", "validation_seed": None}

# per-section seeds that follow the global seed unless given explicitly
_SEED_KEYS = ("model.init_seed", "train.shuffle_seed", "train.augment_seed", "synth.seed", "validation_seed")


def defaults() -> dict[str, Any]:
    out = dict(_TOP)
    for section, cls in _SECTIONS.items():
        inst = cls()
        for f in fields(cls):
            if section == "model" and f.name == "mode":
                continue  # follows the top-level ``mode``
            out[f"{section}.{f.name}"] = getattr(inst, f.name)
    return out


def format_value(value: Any) -> str:
    if isinstance(value, (tuple, list)):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else str(value)


def parse_value(raw: str, like: Any, key: str = "") -> Any:
    """Parse ``raw`` into the type of the default value ``like``."""
    raw = raw.strip()
    try:
        if isinstance(like, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
        if isinstance(like, tuple):
            kind = type(like[0]) if like else int
            return tuple(kind(x) for x in raw.split(",") if x.strip())
        if like is None:
            return int(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key or 'setting'} (expected {type(like).__name__})") from None
    return raw


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    """``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


@dataclass(frozen=True)
class RunConfig:
    values: Mapping[str, Any]

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    @property
    def mode(self) -> str:
        return self.values["mode"]

    def section(self, name: str) -> dict[str, Any]:
        prefix = name + "."
        return {k[len(prefix):]: v for k, v in self.values.items() if k.startswith(prefix)}

    def model_config(self, mode: str | None = None) -> ModelConfig:
        return ModelConfig(**{**self.section("model"), "mode": mode or self.mode})

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.section("train"))

    def spectrogram_settings(self) -> SpectrogramSettings:
        return SpectrogramSettings(**self.section("dsp"))

    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(**self.section("synth"))

    def to_text(self) -> str:
        return "".join(f"{k}={format_value(v)}\n" for k, v in self.values.items())

    def write(self, path: str | os.PathLike) -> None:
        tmp = f"{os.fspath(path)}.tmp"
        Path(tmp).write_text(self.to_text())
        os.replace(tmp, path)


def resolve(file_path: str | os.PathLike | None = None,
            overrides: Mapping[str, str] | Iterable[tuple[str, str]] = ()) -> RunConfig:
    """Merge defaults, the optional config file and string overrides, in that order."""
    base = defaults()
    explicit: set[str] = set()
    layers = []
    if file_path is not None:
        layers.append(read_config_file(file_path))
    layers.append(dict(overrides))
    for layer in layers:
        for key, raw in layer.items():
            if key not in base:
                raise ConfigError(f"unknown setting {key!r}")
            base[key] = parse_value(raw, base[key], key)
            explicit.add(key)
    for key in _SEED_KEYS:
        if key not in explicit:
            base[key] = base["seed"]
    cfg = RunConfig(base)
    # build each section once so bad combinations fail before any work starts
    model, dsp_settings = cfg.model_config(), cfg.spectrogram_settings()
    cfg.train_config(), cfg.synthetic_spec()
    if (model.audio_height, model.audio_width) != (dsp_settings.n_bins, dsp_settings.n_frames):
        raise ConfigError(f"model audio input {model.audio_height}x{model.audio_width} does not match the "
                          f"spectrogram size {dsp_settings.n_bins}x{dsp_settings.n_frames}")
    return cfg

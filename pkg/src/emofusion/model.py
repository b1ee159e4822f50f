"""The dual-branch fusion network and its checkpoint format.

Visual branch (frames stacked as input channels)::

    conv 20->32 k5 -> ReLU -> pool2 -> conv 32->64 k5 -> ReLU -> pool2
    -> conv 64->96 k3 -> ReLU -> pool2 -> flatten (96*12*10) -> FC 256 -> ReLU

Audio branch::

    conv 1->16 k5 -> ReLU -> pool2 -> conv 16->32 k3 -> ReLU -> pool2
    -> flatten (32*48*30) -> FC 64 -> ReLU

Classifier: concat(visual 256, audio 64) -> FC 128 -> ReLU -> FC 6.

Every convolution has stride 1 and "same" padding ``k // 2``.  The
video-only variant drops the audio branch and feeds the 256 visual features
straight into the classifier.
"""

from __future__ import annotations

import os
import zlib
from dataclasses import asdict, dataclass, field, fields
from typing import Any

import numpy as np

from .errors import ConfigError, FormatError, ModeMismatchError, ShapeError
from .tensor import Tensor, concat, conv2d, flatten, linear, maxpool2d, relu, softmax

__all__ = [
    "EMOTIONS",
    "ModelConfig",
    "FusionModel",
    "init_model",
    "visual_only_variant",
    "save_checkpoint",
    "load_checkpoint",
]

EMOTIONS = ("neutral", "happy", "anger", "disgust", "fear", "sad")

MODES = ("av", "video")


@dataclass(frozen=True)
class ModelConfig:
    n_frames: int = 20
    visual_height: int = 98
    visual_width: int = 80
    audio_height: int = 192
    audio_width: int = 120
    visual_feature_len: int = 256
    audio_feature_len: int = 64
    hidden_len: int = 128
    n_classes: int = 6
    visual_channels: tuple[int, ...] = (32, 64, 96)
    visual_kernels: tuple[int, ...] = (5, 5, 3)
    audio_channels: tuple[int, ...] = (16, 32)
    audio_kernels: tuple[int, ...] = (5, 3)
    mode: str = "av"
    init_seed: int = 0

    def __post_init__(self):
        if self.visual_feature_len != 4 * self.audio_feature_len:
            raise ConfigError("visual features must be four times as long as audio features")
        if self.n_classes < 2:
            raise ConfigError("need at least two classes")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for chans, kers, branch in ((self.visual_channels, self.visual_kernels, "visual"),
                                    (self.audio_channels, self.audio_kernels, "audio")):
            if len(chans) != len(kers) or not chans:
                raise ConfigError(f"{branch} channels and kernels must be non-empty and the same length")
            if any(k % 2 == 0 or k < 1 for k in kers):
                raise ConfigError(f"{branch} kernel sizes must be odd")
            if any(c < 1 for c in chans):
                raise ConfigError(f"{branch} channel counts must be positive")
        for h, w, n, branch in ((self.visual_height, self.visual_width, len(self.visual_channels), "visual"),
                                (self.audio_height, self.audio_width, len(self.audio_channels), "audio")):
            if h >> n < 1 or w >> n < 1:
                raise ConfigError(f"{branch} input {h}x{w} too small for {n} pooling stages")

    @property
    def visual_flat_len(self) -> int:
        n = len(self.visual_channels)
        return self.visual_channels[-1] * (self.visual_height >> n) * (self.visual_width >> n)

    @property
    def audio_flat_len(self) -> int:
        n = len(self.audio_channels)
        return self.audio_channels[-1] * (self.audio_height >> n) * (self.audio_width >> n)

    @property
    def visual_shape(self) -> tuple[int, int, int]:
        return (self.n_frames, self.visual_height, self.visual_width)

    @property
    def audio_shape(self) -> tuple[int, int, int]:
        return (1, self.audio_height, self.audio_width)

    def to_lines(self) -> list[str]:
        out = []
        for k, v in asdict(self).items():
            if isinstance(v, (tuple, list)):
                v = ",".join(str(x) for x in v)
            out.append(f"{k}={v}")
        return out

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> "ModelConfig":
        kwargs: dict[str, Any] = {}
        for f in fields(cls):
            if f.name not in values:
                continue
            raw = values[f.name]
            if f.name == "mode":
                kwargs[f.name] = raw
            elif "tuple" in str(f.type):
                kwargs[f.name] = tuple(int(x) for x in raw.split(",") if x)
            else:
                kwargs[f.name] = int(raw)
        unknown = set(values) - {f.name for f in fields(cls)}
        if unknown:
            raise FormatError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**kwargs)


def _layer_shapes(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...], int]]:
    """(name, shape, fan_in) for every parameter, in canonical order."""
    shapes = []
    c_in = cfg.n_frames
    for i, (c, k) in enumerate(zip(cfg.visual_channels, cfg.visual_kernels), 1):
        shapes.append((f"visual.conv{i}.weight", (c, c_in, k, k), c_in * k * k))
        shapes.append((f"visual.conv{i}.bias", (c,), 0))
        c_in = c
    shapes.append(("visual.fc.weight", (cfg.visual_feature_len, cfg.visual_flat_len), cfg.visual_flat_len))
    shapes.append(("visual.fc.bias", (cfg.visual_feature_len,), 0))
    classifier_in = cfg.visual_feature_len
    if cfg.mode == "av":
        c_in = 1
        for i, (c, k) in enumerate(zip(cfg.audio_channels, cfg.audio_kernels), 1):
            shapes.append((f"audio.conv{i}.weight", (c, c_in, k, k), c_in * k * k))
            shapes.append((f"audio.conv{i}.bias", (c,), 0))
            c_in = c
        shapes.append(("audio.fc.weight", (cfg.audio_feature_len, cfg.audio_flat_len), cfg.audio_flat_len))
        shapes.append(("audio.fc.bias", (cfg.audio_feature_len,), 0))
        classifier_in += cfg.audio_feature_len
    shapes.append(("classifier.fc1.weight", (cfg.hidden_len, classifier_in), classifier_in))
    shapes.append(("classifier.fc1.bias", (cfg.hidden_len,), 0))
    shapes.append(("classifier.fc2.weight", (cfg.n_classes, cfg.hidden_len), cfg.hidden_len))
    shapes.append(("classifier.fc2.bias", (cfg.n_classes,), 0))
    return shapes


@dataclass
class FusionModel:
    config: ModelConfig
    params: dict[str, Tensor] = field(default_factory=dict)

    @property
    def mode(self) -> str:
        return self.config.mode

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def branch_parameters(self, prefix: str) -> dict[str, Tensor]:
        return {k: v for k, v in self.params.items() if k.startswith(prefix + ".")}

    def parameter_count(self, prefix: str = "") -> int:
        return sum(v.size for k, v in self.params.items() if k.startswith(prefix))

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def copy(self) -> "FusionModel":
        return FusionModel(self.config, {k: Tensor(v.data.copy(), requires_grad=v.requires_grad, name=k)
                                         for k, v in self.params.items()})

    # -- forward ------------------------------------------------------------
    def _branch(self, prefix: str, x: Tensor, kernels: tuple[int, ...], batched: bool) -> Tensor:
        p = self.params
        for i, k in enumerate(kernels, 1):
            x = conv2d(x, p[f"{prefix}.conv{i}.weight"], p[f"{prefix}.conv{i}.bias"], stride=1, padding=k // 2)
            x = maxpool2d(relu(x))
        x = flatten(x, batched)
        return relu(linear(x, p[f"{prefix}.fc.weight"], p[f"{prefix}.fc.bias"]))

    @staticmethod
    def _check_input(x, expected: tuple[int, ...], what: str) -> tuple[Tensor, bool]:
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.shape == expected:
            return x, False
        if x.ndim == len(expected) + 1 and x.shape[1:] == expected:
            return x, True
        raise ShapeError(f"{what} input must be {'x'.join(map(str, expected))} (optionally batched), got {x.shape}")

    def forward_visual(self, stack) -> Tensor:
        x, batched = self._check_input(stack, self.config.visual_shape, "visual")
        return self._branch("visual", x, self.config.visual_kernels, batched)

    def forward_audio(self, spec) -> Tensor:
        if self.mode != "av":
            raise ModeMismatchError("video-only model has no audio branch")
        x, batched = self._check_input(spec, self.config.audio_shape, "audio")
        return self._branch("audio", x, self.config.audio_kernels, batched)

    def forward_fused(self, stack, spec=None, capture: dict | None = None) -> Tensor:
        """Raw class scores; ``capture`` (if given) receives the branch features."""
        if self.mode == "video" and spec is not None:
            raise ModeMismatchError("video-only model was given audio input")
        if self.mode == "av" and spec is None:
            raise ModeMismatchError("audio+video model needs a spectrogram")
        visual = self.forward_visual(stack)
        features = visual
        if self.mode == "av":
            audio = self.forward_audio(spec)
            if audio.ndim != visual.ndim:
                raise ShapeError("visual and audio inputs must both be batched or both single")
            features = concat([visual, audio])
            if capture is not None:
                capture["audio"] = audio
        if capture is not None:
            capture["visual"] = visual
            capture["features"] = features
        p = self.params
        h = relu(linear(features, p["classifier.fc1.weight"], p["classifier.fc1.bias"]))
        return linear(h, p["classifier.fc2.weight"], p["classifier.fc2.bias"])

    def predict(self, stack, spec=None) -> tuple[np.ndarray, int | np.ndarray]:
        """Softmax probabilities and argmax label (lowest index wins ties)."""
        probs = softmax(self.forward_fused(stack, spec)).data
        return probs, (np.argmax(probs, axis=-1) if probs.ndim == 2 else int(np.argmax(probs)))


def init_model(config: ModelConfig = ModelConfig()) -> FusionModel:
    """He-normal weights (std ``sqrt(2 / fan_in)``) and zero biases.

    Each weight tensor draws from its own generator keyed by ``init_seed``
    and the parameter name, so the visual branch is identical between the
    audio+video and video-only variants built with the same seed.
    """
    params = {}
    for name, shape, fan_in in _layer_shapes(config):
        if name.endswith(".bias"):
            data = np.zeros(shape)
        else:
            rng = np.random.default_rng([config.init_seed, zlib.crc32(name.encode())])
            data = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        params[name] = Tensor(data, requires_grad=True, name=name)
    return FusionModel(config, params)


def visual_only_variant(config: ModelConfig = ModelConfig()) -> FusionModel:
    cfg = ModelConfig(**{**asdict(config), "mode": "video"})
    return init_model(cfg)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

_MAGIC = "EMOFUSION-CHECKPOINT 1"


def save_checkpoint(model: FusionModel, path: str | os.PathLike) -> None:
    """Text header (magic, ``key=value`` config, one ``name shape count`` line per
    tensor), a blank line, then little-endian float64 payloads in header order."""
    lines = [_MAGIC, *model.config.to_lines()]
    for name, t in model.params.items():
        lines.append(f"{name} {','.join(map(str, t.shape))} {t.size}")
    header = ("\n".join(lines) + "\n\n").encode("ascii")
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        for t in model.params.values():
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_checkpoint(path: str | os.PathLike) -> FusionModel:
    data = open(path, "rb").read()
    sep = data.find(b"\n\n")
    if sep < 0 or not data.startswith(_MAGIC.encode()):
        raise FormatError(f"{path}: not an emofusion checkpoint")
    lines = data[:sep].decode("ascii").split("\n")[1:]
    cfg_values: dict[str, str] = {}
    entries = []
    for line in lines:
        if "=" in line:
            k, v = line.split("=", 1)
            cfg_values[k] = v
        else:
            try:
                name, shape_s, count_s = line.split(" ")
                shape = tuple(int(x) for x in shape_s.split(","))
                count = int(count_s)
            except ValueError:
                raise FormatError(f"{path}: bad tensor line {line!r}") from None
            if int(np.prod(shape)) != count:
                raise FormatError(f"{path}: tensor {name} shape {shape} does not hold {count} elements")
            entries.append((name, shape, count))
    config = ModelConfig.from_mapping(cfg_values)
    expected = [(n, s) for n, s, _ in _layer_shapes(config)]
    if [(n, s) for n, s, _ in entries] != expected:
        raise FormatError(f"{path}: tensor list does not match the stored model config")
    offset = sep + 2
    params = {}
    for name, shape, count in entries:
        nbytes = count * 8
        chunk = data[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise OSError(f"{path}: truncated payload for {name}")
        params[name] = Tensor(np.frombuffer(chunk, dtype="<f8").reshape(shape).astype(np.float64), requires_grad=True, name=name)
        offset += nbytes
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes after payload")
    return FusionModel(config, params)

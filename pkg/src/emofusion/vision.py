"""Frame sampling, face cropping, and clip-level augmentation.

A visual sample is an ``n_frames x 98 x 80`` float array in [0, 1].  All
geometric operations go through one bilinear sampler with border
replication, using pixel-centre alignment, so a unit-scale resize reproduces
its input bit for bit.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, GeometryError, ShapeError
from .netpbm import read_image

__all__ = [
    "FRAME_SIZE",
    "N_FRAMES",
    "FaceBox",
    "AugmentSettings",
    "AugmentParams",
    "sample_indices",
    "sample_frames",
    "to_grayscale",
    "resize_bilinear",
    "crop_and_resize",
    "draw_params",
    "apply_augmentation",
    "augment",
    "expand_dataset",
    "read_boxes",
    "load_frames",
    "prepare_visual",
]

N_FRAMES = 20
FRAME_SIZE = (98, 80)  # height, width


@dataclass(frozen=True)
class FaceBox:
    frame_index: int
    x: int
    y: int
    width: int
    height: int

    def check_inside(self, frame_shape: tuple[int, int]) -> None:
        h, w = frame_shape
        if self.width < 1 or self.height < 1:
            raise GeometryError(f"face box {self} has non-positive size")
        if self.x < 0 or self.y < 0 or self.x + self.width > w or self.y + self.height > h:
            raise GeometryError(f"face box {self} does not fit in a {h}x{w} frame")


# ---------------------------------------------------------------------------
# frame selection
# ---------------------------------------------------------------------------

def sample_indices(total: int, n: int) -> np.ndarray:
    """Indices ``round_half_up(i * (total - 1) / (n - 1))`` for ``i < n``."""
    if n < 1:
        raise ConfigError("number of frames to keep must be positive")
    if total < 1:
        raise ShapeError("frame sequence is empty")
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    i = np.arange(n, dtype=np.int64)
    # integer form of floor(i * (T-1) / (n-1) + 1/2)
    return (2 * i * (total - 1) + (n - 1)) // (2 * (n - 1))


def sample_frames(frames: Sequence[np.ndarray] | np.ndarray, n: int = N_FRAMES):
    """Keep ``n`` equally spaced frames (repeating frames when there are fewer)."""
    idx = sample_indices(len(frames), n)
    if isinstance(frames, np.ndarray):
        return frames[idx]
    return [frames[i] for i in idx]


def to_grayscale(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3 and image.shape[-1] == 3:
        return image @ np.array([0.299, 0.587, 0.114])
    if image.ndim != 2:
        raise ShapeError(f"expected H x W or H x W x 3 image, got {image.shape}")
    return image


# ---------------------------------------------------------------------------
# bilinear sampling
# ---------------------------------------------------------------------------

def _bilinear(images: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample ``images[..., H, W]`` at fractional ``(ys, xs)``; out-of-range coordinates clamp to the border."""
    h, w = images.shape[-2:]
    ys = np.clip(ys, 0.0, h - 1)
    xs = np.clip(xs, 0.0, w - 1)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = ys - y0
    fx = xs - x0
    top = images[..., y0, x0] * (1 - fx) + images[..., y0, x1] * fx
    bottom = images[..., y1, x0] * (1 - fx) + images[..., y1, x1] * fx
    return top * (1 - fy) + bottom * fy


def resize_bilinear(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Resize the last two axes with pixel-centre aligned bilinear interpolation."""
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape[-2:]
    ys = (np.arange(height) + 0.5) * (h / height) - 0.5
    xs = (np.arange(width) + 0.5) * (w / width) - 0.5
    return _bilinear(image, ys[:, None], xs[None, :])


def crop_and_resize(frame: np.ndarray, box: FaceBox, size: tuple[int, int] = FRAME_SIZE) -> np.ndarray:
    frame = np.asarray(frame, dtype=np.float64)
    box.check_inside(frame.shape)
    crop = frame[box.y:box.y + box.height, box.x:box.x + box.width]
    if crop.shape == tuple(size):
        return np.clip(crop, 0.0, 1.0)
    return np.clip(resize_bilinear(crop, *size), 0.0, 1.0)


# ---------------------------------------------------------------------------
# augmentation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AugmentSettings:
    max_rotation_deg: float = 10.0
    crop_area: float = 0.9
    brightness_range: tuple[float, float] = (0.7, 1.3)
    flip_probability: float = 0.5

    def __post_init__(self):
        if not 0 < self.crop_area <= 1:
            raise ConfigError("crop_area must lie in (0, 1]")
        lo, hi = self.brightness_range
        if not 0 < lo <= hi:
            raise ConfigError("brightness range must be positive and ordered")
        if not 0 <= self.flip_probability <= 1:
            raise ConfigError("flip probability must lie in [0, 1]")


@dataclass(frozen=True)
class AugmentParams:
    """One draw of transform parameters, shared by every frame of a clip.

    ``crop_scale`` is the side length of the crop relative to the frame and
    ``crop_y``/``crop_x`` place it within the leftover margin (0 = top/left,
    1 = bottom/right).
    """

    angle_deg: float = 0.0
    crop_scale: float = 1.0
    crop_y: float = 0.5
    crop_x: float = 0.5
    brightness: float = 1.0
    flip: bool = False


def draw_params(rng: np.random.Generator, settings: AugmentSettings = AugmentSettings()) -> AugmentParams:
    angle = rng.uniform(-settings.max_rotation_deg, settings.max_rotation_deg)
    cy, cx = rng.uniform(0.0, 1.0, size=2)
    brightness = rng.uniform(*settings.brightness_range)
    flip = bool(rng.uniform() < settings.flip_probability)
    return AugmentParams(float(angle), math.sqrt(settings.crop_area), float(cy), float(cx), float(brightness), flip)


def apply_augmentation(stack: np.ndarray, params: AugmentParams) -> np.ndarray:
    """Apply flip, crop-and-rescale, rotation, and brightness to every frame alike."""
    stack = np.asarray(stack, dtype=np.float64)
    h, w = stack.shape[-2:]
    ys = np.arange(h, dtype=np.float64)[:, None] * np.ones((1, w))
    xs = np.ones((h, 1)) * np.arange(w, dtype=np.float64)[None, :]
    # inverse map: output pixel -> source coordinate, applied last-to-first
    if params.flip:
        xs = (w - 1) - xs
    s = params.crop_scale
    if s != 1.0:
        oy = params.crop_y * h * (1 - s)
        ox = params.crop_x * w * (1 - s)
        ys = oy + (ys + 0.5) * s - 0.5
        xs = ox + (xs + 0.5) * s - 0.5
    if params.angle_deg != 0.0:
        theta = math.radians(params.angle_deg)
        c, sn = math.cos(theta), math.sin(theta)
        cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
        dy, dx = ys - cy, xs - cx
        ys = cy + c * dy - sn * dx
        xs = cx + sn * dy + c * dx
    out = _bilinear(stack, ys, xs)
    if params.brightness != 1.0:
        out = out * params.brightness
    return np.clip(out, 0.0, 1.0)


def augment(stack: np.ndarray, seed: int, settings: AugmentSettings = AugmentSettings()) -> np.ndarray:
    """Randomly transformed copy of ``stack``; the same ``seed`` gives the same output."""
    return apply_augmentation(stack, draw_params(np.random.default_rng(seed), settings))


def expand_dataset(stack: np.ndarray, base_seed: int, copies: int = 30,
                   settings: AugmentSettings = AugmentSettings()) -> list[np.ndarray]:
    """The original followed by ``copies`` augmented variants seeded ``base_seed + i``."""
    return [np.array(stack, dtype=np.float64, copy=True)] + [
        augment(stack, base_seed + i, settings) for i in range(1, copies + 1)
    ]


# ---------------------------------------------------------------------------
# file ingestion
# ---------------------------------------------------------------------------

def read_boxes(path: str | os.PathLike) -> dict[int, FaceBox]:
    """Parse ``frame_index,x,y,width,height`` lines (blank and ``#`` lines ignored)."""
    boxes = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            vals = [int(v) for v in line.split(",")]
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: expected integers, got {line!r}") from None
        if len(vals) != 5:
            raise ConfigError(f"{path}:{lineno}: expected 5 fields, got {len(vals)}")
        boxes[vals[0]] = FaceBox(*vals)
    return boxes


IMAGE_SUFFIXES = (".pgm", ".ppm", ".pnm")


def load_frames(frames_path: str | os.PathLike) -> list[np.ndarray]:
    """Read every PGM/PPM image in a directory, sorted by file name."""
    root = Path(frames_path)
    if root.is_file():
        return [read_image(root)]
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise FileNotFoundError(f"no PGM/PPM frames found in {root}")
    return [read_image(p) for p in files]


def prepare_visual(frames: Sequence[np.ndarray], boxes: dict[int, FaceBox] | None = None,
                   n_frames: int = N_FRAMES, size: tuple[int, int] = FRAME_SIZE) -> np.ndarray:
    """Sample ``n_frames`` frames, crop faces (when boxes are given), and resize to ``size``.

    Frames without a box of their own reuse the nearest earlier box, falling
    back to the first box in the file.
    """
    idx = sample_indices(len(frames), n_frames)
    shape = np.shape(frames[0])[:2]
    out = np.empty((n_frames, *size))
    known = sorted(boxes) if boxes else []
    for j, i in enumerate(idx):
        frame = to_grayscale(frames[i])
        if frame.shape != shape:
            raise ShapeError("all frames of a clip must share dimensions")
        if boxes:
            prior = [k for k in known if k <= i]
            box = boxes[prior[-1] if prior else known[0]]
            out[j] = crop_and_resize(frame, box, size)
        else:
            out[j] = frame if frame.shape == tuple(size) else resize_bilinear(frame, *size)
    return np.clip(out, 0.0, 1.0)

"""Synthetic audio-visual emotion corpus with controllable modality overlap.

Each class maps to a bar orientation (visual rule) and a tone frequency
(audio rule).  By default classes share orientations in pairs {0,1}, {2,3},
{4,5} and share tones in the shifted pairs {1,2}, {3,4}, {5,0}.  Either
modality alone can at best tell a class apart from all but one partner, so
a video-only model tops out near 50% while the fused model can separate
all six.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import ClipRecord, write_manifest
from .dsp import write_wav
from .errors import ConfigError
from .model import EMOTIONS
from .netpbm import write_pgm

__all__ = ["SyntheticSpec", "render_frames", "render_audio", "generate"]


@dataclass(frozen=True)
class SyntheticSpec:
    n_actors: int = 6
    clips_per_class: int = 10
    visual_groups: tuple[int, ...] = (0, 0, 1, 1, 2, 2)
    audio_groups: tuple[int, ...] = (0, 1, 1, 2, 2, 0)
    angles_deg: tuple[float, ...] = (0.0, 60.0, 120.0)
    frequencies_hz: tuple[float, ...] = (440.0, 1000.0, 2000.0)
    frame_height: int = 120
    frame_width: int = 100
    frames_range: tuple[int, int] = (20, 30)
    duration_range: tuple[float, float] = (1.0, 2.0)
    sample_rate_hz: int = 16000
    noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if len(self.visual_groups) != len(EMOTIONS) or len(self.audio_groups) != len(EMOTIONS):
            raise ConfigError("visual_groups and audio_groups need one entry per class (6)")
        if max(self.visual_groups) >= len(self.angles_deg) or max(self.audio_groups) >= len(self.frequencies_hz):
            raise ConfigError("group index without a matching angle/frequency")
        if self.n_actors < 1 or self.clips_per_class < 1:
            raise ConfigError("need at least one actor and one clip per class")
        if self.frame_height < 98 or self.frame_width < 80:
            raise ConfigError("frames must be at least 98x80 to hold a face box")

    def class_angle(self, cls: int) -> float:
        return self.angles_deg[self.visual_groups[cls]]

    def class_frequency(self, cls: int) -> float:
        return self.frequencies_hz[self.audio_groups[cls]]


def _actor_style(spec: SyntheticSpec, actor: int) -> dict:
    rng = np.random.default_rng([spec.seed, actor, 7919])
    bh = int(rng.integers(98, min(spec.frame_height, 112) + 1))
    bw = int(rng.integers(80, min(spec.frame_width, 92) + 1))
    return {
        "box": (int(rng.integers(0, spec.frame_width - bw + 1)), int(rng.integers(0, spec.frame_height - bh + 1)), bw, bh),
        "face": rng.uniform(0.35, 0.55),
        "background": rng.uniform(0.05, 0.2),
        "bar": rng.uniform(0.85, 1.0),
        "thickness": rng.uniform(5.0, 8.0),
        "pitch": rng.uniform(0.995, 1.005),
        "amplitude": rng.uniform(0.3, 0.6),
    }


def render_frames(spec: SyntheticSpec, style: dict, cls: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Frames with an oriented bar drawn inside an elliptical face region."""
    n = int(rng.integers(spec.frames_range[0], spec.frames_range[1] + 1))
    bx, by, bw, bh = style["box"]
    h, w = spec.frame_height, spec.frame_width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    cy, cx = by + bh / 2.0, bx + bw / 2.0
    face = ((ys - cy) / (bh / 2.0)) ** 2 + ((xs - cx) / (bw / 2.0)) ** 2 <= 1.0
    theta = np.radians(spec.class_angle(cls) + rng.uniform(-5.0, 5.0))
    phase = rng.uniform(0, 2 * np.pi)
    half_len = 0.35 * min(bh, bw)
    frames = []
    for t in range(n):
        shift = 3.0 * np.sin(phase + 2 * np.pi * t / n)
        dy, dx = ys - (cy + shift), xs - cx
        along = dx * np.cos(theta) + dy * np.sin(theta)
        across = -dx * np.sin(theta) + dy * np.cos(theta)
        bar = (np.abs(across) <= style["thickness"] / 2) & (np.abs(along) <= half_len)
        img = np.full((h, w), style["background"])
        img[face] = style["face"]
        img[bar & face] = style["bar"]
        img += rng.normal(0.0, spec.noise, size=img.shape)
        frames.append(np.clip(img, 0.0, 1.0))
    return frames


def render_audio(spec: SyntheticSpec, style: dict, cls: int, rng: np.random.Generator) -> np.ndarray:
    duration = rng.uniform(*spec.duration_range)
    t = np.arange(int(duration * spec.sample_rate_hz)) / spec.sample_rate_hz
    f = spec.class_frequency(cls) * style["pitch"]
    envelope = 0.6 + 0.4 * np.sin(np.pi * t / duration)
    x = style["amplitude"] * envelope * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    x += rng.normal(0.0, spec.noise, size=t.size)
    return np.clip(x, -1.0, 1.0)


def generate(spec: SyntheticSpec, out_dir: str | os.PathLike) -> list[ClipRecord]:
    """Write frames, face boxes, WAV files and ``manifest.tsv`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for actor in range(spec.n_actors):
        style = _actor_style(spec, actor)
        actor_id = f"A{actor + 1:02d}"
        for cls, label in enumerate(EMOTIONS):
            for k in range(spec.clips_per_class):
                rng = np.random.default_rng([spec.seed, actor, cls, k])
                clip_id = f"{actor_id}_{label}_{k:02d}"
                clip_dir = out / "clips" / clip_id
                frames_dir = clip_dir / "frames"
                frames_dir.mkdir(parents=True, exist_ok=True)
                frames = render_frames(spec, style, cls, rng)
                for i, img in enumerate(frames):
                    write_pgm(frames_dir / f"{i:04d}.pgm", np.floor(img * 255 + 0.5).astype(np.uint8))
                bx, by, bw, bh = style["box"]
                (clip_dir / "boxes.csv").write_text("".join(f"{i},{bx},{by},{bw},{bh}\n" for i in range(len(frames))))
                write_wav(clip_dir / "audio.wav", render_audio(spec, style, cls, rng), spec.sample_rate_hz)
                records.append(ClipRecord(clip_id, actor_id, label, frames_dir, clip_dir / "audio.wav",
                                          clip_dir / "boxes.csv"))
    write_manifest(out / "manifest.tsv", records)
    return records

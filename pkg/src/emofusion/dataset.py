"""Manifest parsing and clip loading."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import dsp, vision
from .errors import ConfigError, FormatError
from .model import EMOTIONS

__all__ = [
    "ClipRecord",
    "ClipSample",
    "read_manifest",
    "write_manifest",
    "load_sample",
    "load_samples",
    "label_index",
]


@dataclass(frozen=True)
class ClipRecord:
    clip_id: str
    actor_id: str
    label: str
    frames_path: Path
    audio_path: Path
    boxes_path: Path | None = None

    @property
    def label_index(self) -> int:
        return label_index(self.label)


@dataclass
class ClipSample:
    """A preprocessed clip ready for the network."""

    clip_id: str
    actor_id: str
    label: int
    visual: np.ndarray
    audio: np.ndarray | None = None


def label_index(label: str) -> int:
    try:
        return EMOTIONS.index(label)
    except ValueError:
        raise ConfigError(f"unknown emotion label {label!r}; expected one of {EMOTIONS}") from None


def read_manifest(path: str | os.PathLike) -> list[ClipRecord]:
    """Parse a tab-separated manifest.

    Columns: clip_id, actor_id, label, frames_path, audio_path and an optional
    boxes_path.  Relative paths are resolved against the manifest directory.
    Blank lines and lines starting with ``#`` are skipped.
    """
    path = Path(path)
    root = path.parent
    records = []
    seen = set()
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) not in (5, 6):
            raise FormatError(f"{path}:{lineno}: expected 5 or 6 tab-separated fields, got {len(cols)}")
        clip_id, actor, label, frames, audio = cols[:5]
        boxes = cols[5] if len(cols) == 6 and cols[5] else None
        if clip_id in seen:
            raise FormatError(f"{path}:{lineno}: duplicate clip id {clip_id!r}")
        seen.add(clip_id)
        label_index(label)
        records.append(ClipRecord(
            clip_id, actor, label, root / frames, root / audio,
            root / boxes if boxes else None,
        ))
    if not records:
        raise FormatError(f"{path}: manifest has no records")
    return records


def write_manifest(path: str | os.PathLike, records: Iterable[ClipRecord]) -> None:
    """Write records with paths relative to the manifest directory."""
    root = Path(path).parent

    def rel(p):
        return os.path.relpath(p, root) if p is not None else ""

    lines = []
    for r in records:
        cols = [r.clip_id, r.actor_id, r.label, rel(r.frames_path), rel(r.audio_path)]
        if r.boxes_path is not None:
            cols.append(rel(r.boxes_path))
        lines.append("\t".join(cols))
    Path(path).write_text("\n".join(lines) + "\n")


def load_sample(record: ClipRecord, mode: str = "av",
                settings: dsp.SpectrogramSettings = dsp.SpectrogramSettings(),
                n_frames: int = vision.N_FRAMES, frame_size: tuple[int, int] = vision.FRAME_SIZE,
                audio_loader: Callable[[os.PathLike], dsp.AudioClip] | None = None) -> ClipSample:
    """Read frames (and audio unless ``mode == "video"``) into network inputs."""
    frames = vision.load_frames(record.frames_path)
    boxes = vision.read_boxes(record.boxes_path) if record.boxes_path else None
    visual = vision.prepare_visual(frames, boxes, n_frames, frame_size)
    audio = None
    if mode == "av":
        clip = (audio_loader or dsp.load_wav)(record.audio_path)
        audio = dsp.spectrogram_pipeline(clip, settings)
    elif mode != "video":
        raise ConfigError(f"unknown mode {mode!r}")
    return ClipSample(record.clip_id, record.actor_id, record.label_index, visual, audio)


def load_samples(records: Sequence[ClipRecord], mode: str = "av", **kwargs) -> list[ClipSample]:
    return [load_sample(r, mode, **kwargs) for r in records]

"""Audio ingestion and fixed-size log-magnitude spectrograms.

The default settings (Hann window of 384 samples, hop 256, 16 kHz) give a
one-sided spectrum of 193 bins.  Dropping the Nyquist bin leaves exactly
192 frequency rows, so every spectrogram has the same height without any
resampling along the frequency axis; only the time axis is stretched to 120
columns.
"""

from __future__ import annotations

import os
import wave
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FormatError
from .netpbm import quantize, write_pgm

__all__ = [
    "AudioClip",
    "Spectrogram",
    "SpectrogramSettings",
    "load_wav",
    "write_wav",
    "resample_linear",
    "window",
    "frame_count",
    "stft",
    "to_log_magnitude",
    "resize_width",
    "minmax_normalize",
    "spectrogram_pipeline",
    "compute_spectrogram",
    "export_pgm",
]


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class Spectrogram:
    """Frequency rows x time columns of non-negative values."""

    values: np.ndarray
    window_length: int
    hop_length: int
    sample_rate_hz: int

    @property
    def n_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SpectrogramSettings:
    sample_rate_hz: int = 16000
    window_length: int = 384
    hop_length: int = 256
    window_fn: str = "hann"
    n_bins: int = 192
    n_frames: int = 120
    log_compress: bool = True

    def __post_init__(self):
        if self.window_length < 2 or self.window_length % 2:
            raise ConfigError("window_length must be even and at least 2")
        if not 0 < self.hop_length <= self.window_length:
            raise ConfigError("hop_length must lie in (0, window_length]")
        if not 1 <= self.n_bins <= self.window_length // 2 + 1:
            raise ConfigError(f"n_bins must lie in [1, {self.window_length // 2 + 1}]")
        if self.n_frames < 1:
            raise ConfigError("n_frames must be positive")
        if self.sample_rate_hz < 1:
            raise ConfigError("sample rate must be positive")
        window(self.window_fn, 2)


# ---------------------------------------------------------------------------
# WAV I/O
# ---------------------------------------------------------------------------

def load_wav(path: str | os.PathLike) -> AudioClip:
    """Read a 16-bit PCM RIFF/WAVE file, averaging channels to mono.

    Samples are scaled by 1/32768 into [-1, 1).
    """
    try:
        with wave.open(os.fspath(path), "rb") as wf:
            width = wf.getsampwidth()
            channels = wf.getnchannels()
            rate = wf.getframerate()
            n = wf.getnframes()
            if width != 2:
                raise FormatError(f"{path}: 'fmt ' chunk declares {8 * width}-bit samples; only 16-bit PCM is supported")
            raw = wf.readframes(n)
    except wave.Error as exc:
        msg = str(exc)
        chunk = "'fmt ' chunk" if ("format" in msg or "sample width" in msg) else "'RIFF' header"
        if "chunk" in msg and "missing" in msg:
            chunk = "'fmt '/'data' chunks"
        raise FormatError(f"{path}: {chunk}: {msg}") from None
    except EOFError:
        raise OSError(f"{path}: truncated WAV file") from None
    if len(raw) < n * channels * 2:
        raise OSError(f"{path}: truncated 'data' chunk ({len(raw)} of {n * channels * 2} bytes)")
    pcm = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    pcm = pcm.reshape(-1, channels).mean(axis=1)
    return AudioClip(pcm, rate)


def write_wav(path: str | os.PathLike, samples: np.ndarray, sample_rate_hz: int) -> None:
    """Write mono 16-bit PCM; values are scaled by 32768, rounded and clipped."""
    pcm = np.clip(np.round(np.asarray(samples, dtype=np.float64) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(os.fspath(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(sample_rate_hz))
        wf.writeframes(pcm.tobytes())


def resample_linear(clip: AudioClip, target_rate_hz: int) -> AudioClip:
    if clip.sample_rate_hz == target_rate_hz:
        return clip
    n_out = max(1, int(round(clip.samples.size * target_rate_hz / clip.sample_rate_hz)))
    src_pos = np.arange(n_out) * (clip.sample_rate_hz / target_rate_hz)
    out = np.interp(src_pos, np.arange(clip.samples.size), clip.samples)
    return AudioClip(out, target_rate_hz)


# ---------------------------------------------------------------------------
# STFT
# ---------------------------------------------------------------------------

def window(name: str, length: int) -> np.ndarray:
    """Periodic analysis window (``hann``, ``hamming``) or ``rectangular``."""
    n = np.arange(length)
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2 * np.pi * n / length)
    if name == "hamming":
        return 0.54 - 0.46 * np.cos(2 * np.pi * n / length)
    if name in ("rectangular", "boxcar", "rect"):
        return np.ones(length)
    raise ConfigError(f"unknown window function {name!r}")


def frame_count(n_samples: int, window_length: int, hop_length: int) -> int:
    """Frames after zero-padding the tail so the last frame is complete."""
    if n_samples <= window_length:
        return 1
    return 1 + -(-(n_samples - window_length) // hop_length)


def stft(clip: AudioClip, window_length: int, hop_length: int, window_fn: str = "hann") -> np.ndarray:
    """One-sided STFT as a ``(window_length // 2 + 1) x frames`` complex grid.

    Column ``t`` is the DFT of ``w * x[t*hop : t*hop + window_length]``.
    """
    if window_length < 1:
        raise ConfigError("window_length must be positive")
    if not 0 < hop_length <= window_length:
        raise ConfigError(f"hop_length {hop_length} must lie in (0, {window_length}]")
    x = np.asarray(clip.samples, dtype=np.float64)
    if x.size < 1:
        raise ConfigError("clip has no samples")
    frames = frame_count(x.size, window_length, hop_length)
    padded = np.zeros(window_length + (frames - 1) * hop_length)
    padded[: x.size] = x
    idx = np.arange(frames)[:, None] * hop_length + np.arange(window_length)[None, :]
    segments = padded[idx] * window(window_fn, window_length)
    return np.fft.rfft(segments, axis=1).T


def to_log_magnitude(grid: np.ndarray, log_compress: bool = True) -> np.ndarray:
    mag = np.abs(grid)
    return np.log1p(mag) if log_compress else mag


def resize_width(values, target_frames: int):
    """Linearly interpolate each row onto ``target_frames`` evenly spaced points.

    The sample points span the original first and last column, so the
    endpoints are kept; equal widths return the input unchanged.  Accepts a
    bare 2-D array or a :class:`Spectrogram` and returns the same kind.
    """
    if isinstance(values, Spectrogram):
        return Spectrogram(resize_width(values.values, target_frames), values.window_length,
                           values.hop_length, values.sample_rate_hz)
    if target_frames < 1:
        raise ConfigError("target_frames must be positive")
    values = np.asarray(values, dtype=np.float64)
    frames = values.shape[1]
    if frames < 1:
        raise ConfigError("spectrogram has no frames")
    if frames == target_frames:
        return values.copy()
    if frames == 1:
        return np.repeat(values, target_frames, axis=1)
    pos = np.linspace(0.0, frames - 1, target_frames)
    left = np.minimum(np.floor(pos).astype(int), frames - 2)
    frac = pos - left
    out = values[:, left] * (1.0 - frac) + values[:, left + 1] * frac
    # constant rows must stay exactly constant
    const = np.all(values == values[:, :1], axis=1)
    out[const] = values[const, :1]
    return out


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Scale to [0, 1]; a constant array maps to all zeros."""
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def compute_spectrogram(clip: AudioClip, settings: SpectrogramSettings = SpectrogramSettings()) -> Spectrogram:
    """STFT magnitude (log-compressed by default), before bin cropping or resizing."""
    clip = resample_linear(clip, settings.sample_rate_hz)
    grid = stft(clip, settings.window_length, settings.hop_length, settings.window_fn)
    return Spectrogram(
        to_log_magnitude(grid, settings.log_compress),
        settings.window_length,
        settings.hop_length,
        settings.sample_rate_hz,
    )


def spectrogram_pipeline(clip: AudioClip, settings: SpectrogramSettings = SpectrogramSettings()) -> np.ndarray:
    """Audio clip to a ``1 x n_bins x n_frames`` array in [0, 1] (default 1 x 192 x 120)."""
    spec = compute_spectrogram(clip, settings)
    values = resize_width(spec.values[: settings.n_bins], settings.n_frames)
    return minmax_normalize(values)[None]


def export_pgm(values: np.ndarray, path: str | os.PathLike) -> None:
    """Save a spectrogram as an 8-bit P5 image with frequency row 0 at the bottom."""
    if isinstance(values, Spectrogram):
        values = values.values
    values = np.asarray(values)
    if values.ndim == 3 and values.shape[0] == 1:
        values = values[0]
    if values.ndim != 2:
        raise ConfigError(f"expected a 2-D spectrogram, got shape {values.shape}")
    write_pgm(path, quantize(values)[::-1])

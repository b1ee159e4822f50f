"""Minimal reader/writer for binary and ASCII PGM/PPM images.

Images are returned as float arrays in ``[0, 1]``; colour images are reduced
to luminance ``0.299 R + 0.587 G + 0.114 B``.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import FormatError

__all__ = ["read_image", "write_pgm", "quantize", "LUMA"]

LUMA = np.array([0.299, 0.587, 0.114])


def _tokens(buf: bytes, count: int, pos: int) -> tuple[list[int], int]:
    out = []
    n = len(buf)
    while len(out) < count:
        while pos < n and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos : pos + 1] == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated netpbm header")
        try:
            out.append(int(buf[start:pos]))
        except ValueError:
            raise FormatError(f"bad netpbm header token {buf[start:pos]!r}") from None
    return out, pos


def read_image(path: str | os.PathLike) -> np.ndarray:
    """Read a P2/P3/P5/P6 file as a grayscale ``H x W`` float array in [0, 1]."""
    buf = Path(path).read_bytes()
    magic = buf[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise FormatError(f"{path}: unsupported image magic {magic!r}")
    (width, height, maxval), pos = _tokens(buf, 3, 2)
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise FormatError(f"{path}: invalid image header {width}x{height} max {maxval}")
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels
    if magic in (b"P5", b"P6"):
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = buf[pos : pos + count * dtype.itemsize]
        if len(raw) < count * dtype.itemsize:
            raise OSError(f"{path}: truncated pixel data")
        values = np.frombuffer(raw, dtype=dtype).astype(np.float64)
    else:
        vals, _ = _tokens(buf, count, pos)
        values = np.asarray(vals, dtype=np.float64)
    img = values.reshape(height, width, channels) / maxval
    if channels == 3:
        return img @ LUMA
    return img[:, :, 0]


def quantize(values: np.ndarray) -> np.ndarray:
    """Map to 0..255 with ``round(255 (v - min) / (max - min))``; constant input maps to 0."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        return np.zeros(v.shape, dtype=np.uint8)
    return np.floor(255.0 * (v - lo) / (hi - lo) + 0.5).astype(np.uint8)


def write_pgm(path: str | os.PathLike, pixels: np.ndarray) -> None:
    """Write an ``H x W`` uint8 array as binary PGM (P5), first row at the top."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise FormatError("write_pgm expects a 2-D uint8 array")
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(pixels).tobytes())

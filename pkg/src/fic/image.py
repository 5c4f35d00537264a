"""Grayscale image I/O (PGM) and fidelity metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class PgmError(ValueError):
    """Raised for malformed, unsupported, or truncated PGM input."""


@dataclass(frozen=True)
class FidelityReport:
    rms: float
    psnr: float  # math.inf when rms == 0

    @property
    def lossless(self) -> bool:
        return math.isinf(self.psnr)


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read `count` whitespace-separated header tokens, honoring # comments.

    Returns the tokens and the offset one byte past the final token's
    trailing whitespace byte (the raster start for P5).
    """
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] not in (0x0A, 0x0D):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i] != ord("#"):
            i += 1
        if i == start:
            raise PgmError("malformed header: fewer fields than expected")
        tokens.append(data[start:i])
    if i < n and data[i : i + 1].isspace():
        i += 1  # single whitespace byte separating header from raster
    return tokens, i


def load_pgm(path) -> np.ndarray:
    """Load a P2 (ASCII) or P5 (binary) PGM as a (height, width) uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 2 or data[:2] not in (b"P2", b"P5"):
        raise PgmError("malformed header: not a P2/P5 PGM")
    magic = data[:2]
    try:
        tokens, raster_at = _header_tokens(data[2:], 3)
    except PgmError:
        raise
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise PgmError("malformed header: non-numeric size field") from None
    if width <= 0 or height <= 0:
        raise PgmError("malformed header: non-positive dimensions")
    if maxval > 255:
        raise PgmError(f"unsupported maxval {maxval} (must be <= 255)")
    if maxval <= 0:
        raise PgmError("malformed header: non-positive maxval")
    count = width * height
    if magic == b"P5":
        raster = data[2 + raster_at :]
        if len(raster) < count:
            raise PgmError("truncated pixel data")
        pixels = np.frombuffer(raster[:count], dtype=np.uint8)
    else:
        fields = data[2 + raster_at :].split()
        if len(fields) < count:
            raise PgmError("truncated pixel data")
        try:
            pixels = np.array([int(f) for f in fields[:count]], dtype=np.int64)
        except ValueError:
            raise PgmError("malformed pixel data: non-numeric sample") from None
        if pixels.min() < 0 or pixels.max() > maxval:
            raise PgmError("malformed pixel data: sample out of range")
        pixels = pixels.astype(np.uint8)
    return pixels.reshape(height, width).copy()


def save_pgm(image: np.ndarray, path) -> None:
    """Write a uint8 grayscale array as a binary (P5) PGM."""
    arr = np.asarray(image)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise ValueError("image must be a 2-D uint8 array")
    height, width = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height))
        fh.write(arr.tobytes())


def fidelity(original: np.ndarray, reconstructed: np.ndarray) -> FidelityReport:
    """RMS error and PSNR (peak 255) between two same-shaped uint8 images."""
    a = np.asarray(original)
    b = np.asarray(reconstructed)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    rms = math.sqrt(mse)
    psnr = math.inf if mse == 0.0 else 10.0 * math.log10(255.0**2 / mse)
    return FidelityReport(rms=rms, psnr=psnr)

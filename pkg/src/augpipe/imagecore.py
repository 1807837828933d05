"""Image buffers and the deterministic random streams that drive sampling.

Two contracts everything downstream relies on are fixed here. Images are
immutable 8-bit rasters whose pixel (i, j) covers the unit square
[i, i+1) x [j, j+1), so its center sits at (i + 0.5, j + 0.5) and the
continuous domain of a w x h image is [0, w] x [0, h]. Randomness comes
from explicit single-owner streams derived from (master seed, sample
index), so any sample can be regenerated in isolation and results do not
depend on scheduling or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "PixelFormat",
    "Image",
    "RngStream",
    "derive_sample_rng",
    "mix64",
    "clamp_round",
    "clamp_round_array",
    "round_half_away",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class PixelFormat(Enum):
    """Channel layout of an image buffer; all channels are 8-bit unsigned."""

    GRAY8 = 1
    RGB8 = 3
    RGBA8 = 4

    @property
    def channels(self) -> int:
        return self.value

    @property
    def color_channels(self) -> int:
        """Channels carrying intensity (alpha excluded)."""
        return 3 if self is PixelFormat.RGBA8 else self.value


@dataclass(frozen=True, eq=False)
class Image:
    """Immutable raster: row-major, channel-interleaved uint8 pixels.

    The pixel array has shape (height, width, channels) and is marked
    read-only, so instances can be shared freely across threads and
    cached without defensive copies.
    """

    width: int
    height: int
    format: PixelFormat
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be >= 1, got {self.width}x{self.height}")
        expected = (self.height, self.width, self.format.channels)
        if self.pixels.shape != expected or self.pixels.dtype != np.uint8:
            raise ValueError(
                f"pixel buffer shape {self.pixels.shape}/{self.pixels.dtype} "
                f"does not match {expected}/uint8"
            )

    @property
    def channels(self) -> int:
        return self.format.channels

    @classmethod
    def from_array(cls, arr: np.ndarray, fmt: PixelFormat) -> "Image":
        """Build an image from an array, copying it (the copy is then frozen).

        Accepts (h, w) for single-channel data or (h, w, channels).
        """
        arr = np.asarray(arr, dtype=np.uint8)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise ValueError(f"expected a 2-d or 3-d array, got shape {arr.shape}")
        return cls._wrap(arr.copy(), fmt)

    @classmethod
    def _wrap(cls, arr: np.ndarray, fmt: PixelFormat) -> "Image":
        # Takes ownership of arr; callers must not keep a writable reference.
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        arr.flags.writeable = False
        h, w = arr.shape[:2]
        return cls(width=w, height=h, format=fmt, pixels=arr)

    @classmethod
    def filled(cls, width: int, height: int, fmt: PixelFormat, value) -> "Image":
        """Constant image; value is a scalar or a per-channel sequence."""
        arr = np.empty((height, width, fmt.channels), dtype=np.uint8)
        arr[:] = value
        return cls._wrap(arr, fmt)


def round_half_away(value: float) -> int:
    """Round to the nearest integer, halves away from zero."""
    if value >= 0:
        return int(math.floor(value + 0.5))
    return int(math.ceil(value - 0.5))


def clamp_round(value: float) -> int:
    """Quantise a real channel value: round half away from zero, clamp to [0, 255]."""
    r = round_half_away(value)
    if r < 0:
        return 0
    if r > 255:
        return 255
    return r


def clamp_round_array(values: np.ndarray) -> np.ndarray:
    """Vectorised clamp_round; returns uint8."""
    rounded = np.where(values >= 0.0, np.floor(values + 0.5), np.ceil(values - 0.5))
    return np.clip(rounded, 0.0, 255.0).astype(np.uint8)


def mix64(z: int) -> int:
    """Avalanching 64-bit finalizer (splitmix64 style).

    The single hash behind all seed derivation; a one-bit change in the
    input flips about half the output bits.
    """
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


class RngStream:
    """Deterministic 64-bit generator (xoshiro256**, splitmix64-seeded).

    Identical seeds give bit-identical draw sequences across runs and
    process restarts. A stream is single-owner: never share one between
    samples or threads; derive one stream per unit of work instead.

    Each uniform_* call counts as one logical draw for ordering purposes,
    even when rejection sampling consumes several raw words internally.
    """

    __slots__ = ("_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int):
        acc = seed & _MASK64
        words = []
        for _ in range(4):
            acc = (acc + _GOLDEN) & _MASK64
            words.append(mix64(acc))
        if not any(words):
            words[0] = _GOLDEN
        self._s0, self._s1, self._s2, self._s3 = words

    def next_word(self) -> int:
        """Next raw 64-bit output word."""
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        x = (s1 * 5) & _MASK64
        result = (((x << 7) | (x >> 57)) & _MASK64) * 9 & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def unit_real(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_word() >> 11) * 1.1102230246251565e-16  # 2**-53

    def uniform_real(self, lo: float, hi: float) -> float:
        """Uniform float in [lo, hi)."""
        if lo > hi:
            raise ValueError(f"empty range: lo={lo} > hi={hi}")
        return lo + self.unit_real() * (hi - lo)

    def uniform_int(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive.

        Rejection sampling on raw words, so every value is equally likely
        (no modulo bias).
        """
        if lo > hi:
            raise ValueError(f"empty range: lo={lo} > hi={hi}")
        n = hi - lo + 1
        limit = ((1 << 64) // n) * n
        w = self.next_word()
        while w >= limit:
            w = self.next_word()
        return lo + (w % n)


def derive_sample_rng(master_seed: int, sample_index: int) -> RngStream:
    """Independent stream for one sample, keyed by (master seed, index).

    The stream seed is output number ``sample_index`` of a splitmix64
    sequence started at ``master_seed``, so streams for distinct indices
    are statistically independent and the same pair always reproduces the
    identical stream regardless of evaluation order or worker count.
    """
    if sample_index < 0:
        raise ValueError(f"sample_index must be >= 0, got {sample_index}")
    seed = mix64((master_seed + (sample_index + 1) * _GOLDEN) & _MASK64)
    return RngStream(seed)

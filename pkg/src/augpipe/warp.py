"""Inverse-mapping resampling engine.

Every warp walks the destination lattice and pulls a source coordinate
for each pixel center, so outputs are gap-free by construction. Source
coordinates live in the continuous plane (pixel centers at half-integers);
neighbour indices that fall off the raster clamp to the nearest edge
pixel. Interpolation is per channel; callers get real values and the
warps quantise once at the end, which keeps identity mappings bit-exact.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import GeometryError
from .geometry import Homography
from .imagecore import Image, clamp_round_array

__all__ = [
    "Filter",
    "AffineTransform",
    "DisplacementGrid",
    "SamplingMonitor",
    "monitor_source_bounds",
    "sample",
    "warp_affine",
    "warp_projective",
    "warp_mesh",
    "resize",
]


class Filter(Enum):
    NEAREST = "nearest"
    BILINEAR = "bilinear"
    BICUBIC = "bicubic"  # Catmull-Rom kernel (a = -0.5)


@dataclass(frozen=True)
class AffineTransform:
    """2x3 destination-to-source matrix (linear part plus translation)."""

    m: np.ndarray

    def __post_init__(self):
        if self.m.shape != (2, 3):
            raise ValueError(f"affine matrix must be 2x3, got {self.m.shape}")

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    @classmethod
    def translation(cls, tx: float, ty: float) -> "AffineTransform":
        return cls(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty]]))

    def map_points(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        m = self.m
        return (
            m[0, 0] * xs + m[0, 1] * ys + m[0, 2],
            m[1, 0] * xs + m[1, 1] * ys + m[1, 2],
        )


@dataclass(frozen=True)
class DisplacementGrid:
    """Node offsets of a gw x gh cell lattice over a host image.

    nodes has shape (gh + 1, gw + 1, 2) holding (dx, dy) per node; node
    (a, b) rests at (a * W / gw, b * H / gh) on a W x H host. Boundary
    nodes must carry zero offset, which pins the image border in place.
    """

    gw: int
    gh: int
    nodes: np.ndarray

    def __post_init__(self):
        if self.gw < 1 or self.gh < 1:
            raise ValueError(f"grid must have >= 1 cell per axis, got {self.gw}x{self.gh}")
        expected = (self.gh + 1, self.gw + 1, 2)
        if self.nodes.shape != expected:
            raise ValueError(f"node array shape {self.nodes.shape} does not match {expected}")
        border = np.concatenate(
            [self.nodes[0], self.nodes[-1], self.nodes[:, 0], self.nodes[:, -1]]
        )
        if np.any(border != 0.0):
            raise ValueError("boundary nodes must have zero offset")

    @classmethod
    def zero(cls, gw: int, gh: int) -> "DisplacementGrid":
        return cls(gw, gh, np.zeros((gh + 1, gw + 1, 2), dtype=np.float64))

    def rest_positions(self, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
        """Node rest coordinates (xs of columns, ys of rows) on a host image."""
        xs = np.arange(self.gw + 1) * (width / self.gw)
        ys = np.arange(self.gh + 1) * (height / self.gh)
        return xs, ys


class SamplingMonitor:
    """Collects out-of-domain source coordinates seen while active.

    A coordinate is a violation when it leaves [0, W] x [0, H] before
    edge clamping. Used by tests to prove the no-fill guarantee.
    """

    def __init__(self):
        self.warps = 0
        self.violations = 0
        self.worst = 0.0  # largest excursion outside the domain, in pixels

    def observe(self, xs: np.ndarray, ys: np.ndarray, width: int, height: int) -> None:
        self.warps += 1
        excess = max(
            float(-xs.min()),
            float(xs.max() - width),
            float(-ys.min()),
            float(ys.max() - height),
            0.0,
        )
        if excess > 0.0:
            self.violations += 1
            self.worst = max(self.worst, excess)


_active_monitors: list[SamplingMonitor] = []


@contextmanager
def monitor_source_bounds():
    """Context manager yielding a SamplingMonitor wired into the sampler."""
    monitor = SamplingMonitor()
    _active_monitors.append(monitor)
    try:
        yield monitor
    finally:
        _active_monitors.remove(monitor)


@lru_cache(maxsize=32)
def _dest_centers(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    xs = np.broadcast_to(np.arange(width, dtype=np.float64) + 0.5, (height, width))
    ys = np.broadcast_to((np.arange(height, dtype=np.float64) + 0.5)[:, None], (height, width))
    return xs, ys


def _sample_values(img: Image, xs: np.ndarray, ys: np.ndarray, filt: Filter) -> np.ndarray:
    """Sample per-channel real values at continuous coordinates.

    Returns float64 with shape xs.shape + (channels,).
    """
    if _active_monitors:
        for monitor in _active_monitors:
            monitor.observe(xs, ys, img.width, img.height)
    if filt is Filter.NEAREST:
        return _sample_nearest(img, xs, ys)
    if filt is Filter.BILINEAR:
        return _sample_bilinear(img, xs, ys)
    return _sample_bicubic(img, xs, ys)


def _sample_nearest(img: Image, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    ix = np.clip(np.floor(xs).astype(np.int64), 0, img.width - 1)
    iy = np.clip(np.floor(ys).astype(np.int64), 0, img.height - 1)
    return img.pixels[iy, ix].astype(np.float64)


def _sample_bilinear(img: Image, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    px = img.pixels
    u = xs - 0.5
    v = ys - 0.5
    x0 = np.floor(u)
    y0 = np.floor(v)
    fx = (u - x0)[..., None]
    fy = (v - y0)[..., None]
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    x0c = np.clip(x0, 0, img.width - 1)
    x1c = np.clip(x0 + 1, 0, img.width - 1)
    y0c = np.clip(y0, 0, img.height - 1)
    y1c = np.clip(y0 + 1, 0, img.height - 1)
    p00 = px[y0c, x0c].astype(np.float64)
    p10 = px[y0c, x1c].astype(np.float64)
    p01 = px[y1c, x0c].astype(np.float64)
    p11 = px[y1c, x1c].astype(np.float64)
    top = p00 * (1.0 - fx) + p10 * fx
    bottom = p01 * (1.0 - fx) + p11 * fx
    return top * (1.0 - fy) + bottom * fy


def _catmull_rom_weights(t: np.ndarray) -> tuple[np.ndarray, ...]:
    # Basis for taps at offsets -1, 0, +1, +2; weights sum to 1.
    t2 = t * t
    t3 = t2 * t
    w0 = 0.5 * (-t3 + 2.0 * t2 - t)
    w1 = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0)
    w2 = 0.5 * (-3.0 * t3 + 4.0 * t2 + t)
    w3 = 0.5 * (t3 - t2)
    return w0, w1, w2, w3


def _sample_bicubic(img: Image, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    px = img.pixels
    u = xs - 0.5
    v = ys - 0.5
    x1 = np.floor(u)
    y1 = np.floor(v)
    wx = _catmull_rom_weights(u - x1)
    wy = _catmull_rom_weights(v - y1)
    x1 = x1.astype(np.int64)
    y1 = y1.astype(np.int64)
    cols = [np.clip(x1 + d, 0, img.width - 1) for d in (-1, 0, 1, 2)]
    rows = [np.clip(y1 + d, 0, img.height - 1) for d in (-1, 0, 1, 2)]
    out = np.zeros(xs.shape + (img.channels,), dtype=np.float64)
    for wj, rj in zip(wy, rows):
        row_acc = np.zeros_like(out)
        for wi, ci in zip(wx, cols):
            row_acc += wi[..., None] * px[rj, ci].astype(np.float64)
        out += wj[..., None] * row_acc
    return out


def sample(img: Image, x: float, y: float, filt: Filter = Filter.BILINEAR) -> tuple[float, ...]:
    """Per-channel real values at one continuous coordinate."""
    values = _sample_values(
        img, np.array([x], dtype=np.float64), np.array([y], dtype=np.float64), filt
    )
    return tuple(float(v) for v in values[0])


def _finish(values: np.ndarray, fmt) -> Image:
    return Image._wrap(clamp_round_array(values), fmt)


def warp_affine(
    img: Image,
    transform: AffineTransform,
    out_w: int,
    out_h: int,
    filt: Filter = Filter.BILINEAR,
) -> Image:
    """Resample through a destination-to-source affine map."""
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output dimensions must be >= 1, got {out_w}x{out_h}")
    xs, ys = _dest_centers(out_w, out_h)
    sx, sy = transform.map_points(xs, ys)
    return _finish(_sample_values(img, sx, sy, filt), img.format)


def warp_projective(
    img: Image,
    hom: Homography,
    out_w: int,
    out_h: int,
    filt: Filter = Filter.BILINEAR,
) -> Image:
    """Resample through a destination-to-source homography.

    Raises GeometryError if the projective denominator vanishes at any
    destination pixel center (horizon crossing the output).
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output dimensions must be >= 1, got {out_w}x{out_h}")
    xs, ys = _dest_centers(out_w, out_h)
    sx, sy = hom.map_points(xs, ys)
    return _finish(_sample_values(img, sx, sy, filt), img.format)


def warp_mesh(img: Image, grid: DisplacementGrid, filt: Filter = Filter.BILINEAR) -> Image:
    """Elastic mesh warp driven by a displacement grid.

    Output dimensions equal the input's. Each destination pixel center p
    in cell (a, b) samples the source at p plus the bilinear blend of the
    four surrounding node offsets, evaluated at p's fractional position
    within the cell; shared nodes make the field continuous across cell
    boundaries, and zero boundary nodes pin the image border.
    """
    w, h = img.width, img.height
    xs, ys = _dest_centers(w, h)
    tx = xs * (grid.gw / w)
    ty = ys * (grid.gh / h)
    ax = np.clip(np.floor(tx).astype(np.int64), 0, grid.gw - 1)
    by = np.clip(np.floor(ty).astype(np.int64), 0, grid.gh - 1)
    fx = (tx - ax)[..., None]
    fy = (ty - by)[..., None]
    nodes = grid.nodes
    n00 = nodes[by, ax]
    n10 = nodes[by, ax + 1]
    n01 = nodes[by + 1, ax]
    n11 = nodes[by + 1, ax + 1]
    disp = (n00 * (1.0 - fx) + n10 * fx) * (1.0 - fy) + (n01 * (1.0 - fx) + n11 * fx) * fy
    return _finish(_sample_values(img, xs + disp[..., 0], ys + disp[..., 1], filt), img.format)


def resize(img: Image, out_w: int, out_h: int, filt: Filter = Filter.BILINEAR) -> Image:
    """Point-sampled resize: destination centers map proportionally to source.

    A same-size bilinear resize is bit-identical to the input.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output dimensions must be >= 1, got {out_w}x{out_h}")
    xs, ys = _dest_centers(out_w, out_h)
    sx = xs * (img.width / out_w)
    sy = ys * (img.height / out_h)
    return _finish(_sample_values(img, sx, sy, filt), img.format)

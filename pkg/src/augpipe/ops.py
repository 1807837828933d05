"""Augmentation operation catalogue.

Two layers live here. The kernels are deterministic image transforms
(rotate, shear, skew, elastic, zoom, crop, flips, pixel ops). On top of
them, each OpSpec subclass is an immutable, validated description of one
configured operation; ``apply_op`` turns a spec plus a random stream into
an applied transformation, recording every value drawn along the way.

Draw order is part of the determinism contract. Per variant:

- rotate:           angle = real(-max_left, +max_right)
- rotate_cardinal:  int(0, 2) -> {90, 180, 270}   (only when which=random)
- flip:             int(0, 1) -> {horizontal, vertical}   (only when random)
- shear:            axis int(0, 1) if random, then angle = real(-max, +max)
- skew:             kind int(0, 3) if random, then
                    d = int(0, floor(severity * min(W, H) / 2))
- elastic:          per interior node, row-major: dx = int(-m, m), dy = int(-m, m)
- zoom:             factor = real(min_factor, max_factor)
- crop_random:      x = int(0, W - cw), then y = int(0, H - ch)
- everything else:  draws nothing

Geometric kernels that could leave blank borders (rotate, shear, skew)
crop to the largest usable region and resize back, composed into a single
inverse-mapping warp, so every source sample stays inside the image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np

from .errors import ConfigError, GeometryError, OpError
from .geometry import CropRect, Quad, inscribed_crop_rect, shear_crop_rect, solve_homography
from .imagecore import Image, PixelFormat, RngStream, clamp_round_array, round_half_away
from .warp import AffineTransform, DisplacementGrid, Filter, warp_affine, warp_mesh, warp_projective, resize

__all__ = [
    "OpSpec",
    "OpApplication",
    "apply_op",
    "Rotate",
    "RotateCardinal",
    "Flip",
    "Shear",
    "Skew",
    "Elastic",
    "Zoom",
    "CropRandom",
    "CropCentre",
    "Resize",
    "Scale",
    "Greyscale",
    "Invert",
    "Equalize",
    "rotate_arbitrary",
    "rotate_cardinal",
    "flip",
    "shear_kernel",
    "skew_kernel",
    "elastic_kernel",
    "zoom_kernel",
    "crop_kernel",
    "greyscale",
    "invert",
    "equalize",
]

_SNAP = 1e-9


# --------------------------------------------------------------------------
# Kernels


def rotate_arbitrary(img: Image, theta_deg: float, filt: Filter = Filter.BILINEAR) -> Image:
    """Rotate about the center without introducing fill regions.

    Conceptually: rotate onto the expanded bounding box, crop to the
    largest same-aspect inscribed rectangle, resize back to the input
    size. Implemented as one composed destination-to-source affine warp.
    Positive angles turn clockwise, negative counter-clockwise.
    """
    if abs(theta_deg) > 45:
        raise GeometryError(f"rotation angle must satisfy |theta| <= 45, got {theta_deg}")
    w, h = img.width, img.height
    crop = inscribed_crop_rect(w, h, theta_deg)
    rad = math.radians(theta_deg)
    cs, sn = math.cos(rad), math.sin(rad)
    kx = crop.w / w
    ky = crop.h / h
    a, b = cs * kx, sn * ky
    d, e = -sn * kx, cs * ky
    c = w / 2 - a * (w / 2) - b * (h / 2)
    f = h / 2 - d * (w / 2) - e * (h / 2)
    m = AffineTransform(np.array([[a, b, c], [d, e, f]], dtype=np.float64))
    return warp_affine(img, m, w, h, filt)


def rotate_cardinal(img: Image, k: int) -> Image:
    """Lossless quarter-turn rotation (clockwise); 90/270 swap dimensions."""
    px = img.pixels
    if k == 90:
        out = px.transpose(1, 0, 2)[:, ::-1]
    elif k == 180:
        out = px[::-1, ::-1]
    elif k == 270:
        out = px.transpose(1, 0, 2)[::-1]
    else:
        raise ValueError(f"cardinal rotation must be 90, 180 or 270, got {k}")
    return Image._wrap(np.ascontiguousarray(out), img.format)


def flip(img: Image, axis: str) -> Image:
    """Exact mirror: 'horizontal' swaps left-right, 'vertical' top-bottom."""
    if axis == "horizontal":
        out = img.pixels[:, ::-1]
    elif axis == "vertical":
        out = img.pixels[::-1]
    else:
        raise ValueError(f"flip axis must be 'horizontal' or 'vertical', got {axis!r}")
    return Image._wrap(np.ascontiguousarray(out), img.format)


def shear_kernel(img: Image, axis: str, angle_deg: float, filt: Filter = Filter.BILINEAR) -> Image:
    """Shear along one axis, cropped and stretched back to the input size.

    Composed into a single affine warp; all source samples stay in-bounds.
    """
    w, h = img.width, img.height
    t = math.tan(math.radians(angle_deg))
    try:
        crop = shear_crop_rect(w, h, axis, t)
    except GeometryError as exc:
        raise OpError(str(exc), op_kind="shear") from exc
    if axis == "x":
        m = np.array([[crop.w / w, -t, crop.x], [0.0, 1.0, 0.0]], dtype=np.float64)
    else:
        m = np.array([[1.0, 0.0, 0.0], [-t, crop.h / h, crop.y]], dtype=np.float64)
    return warp_affine(img, AffineTransform(m), w, h, filt)


def _skew_quad(kind: str, w: int, h: int, d: int) -> Quad:
    if kind == "forward":
        corners = ((float(d), 0.0), (float(w - d), 0.0), (float(w), float(h)), (0.0, float(h)))
    elif kind == "backward":
        corners = ((0.0, 0.0), (float(w), 0.0), (float(w - d), float(h)), (float(d), float(h)))
    elif kind == "left":
        corners = ((0.0, float(d)), (float(w), 0.0), (float(w), float(h)), (0.0, float(h - d)))
    elif kind == "right":
        corners = ((0.0, 0.0), (float(w), float(d)), (float(w), float(h - d)), (0.0, float(h)))
    else:
        raise ValueError(f"skew kind must be forward/backward/left/right, got {kind!r}")
    return Quad(corners)


def skew_kernel(img: Image, kind: str, d: int, filt: Filter = Filter.BILINEAR) -> Image:
    """Perspective tilt: two corners of the source move inward by d pixels.

    The source quad stays inside the image, so the warp needs no fill.
    """
    w, h = img.width, img.height
    if not 0 <= d < min(w, h) / 2:
        raise OpError(
            f"skew displacement {d} out of range [0, {min(w, h) / 2}) for {w}x{h}",
            op_kind="skew",
        )
    src = _skew_quad(kind, w, h, d)
    hom = solve_homography(src, Quad.from_rect(w, h))
    return warp_projective(img, hom, w, h, filt)


def _interior_nodes(gw: int, gh: int):
    # Row-major over interior lattice nodes; boundary nodes stay pinned.
    for b in range(1, gh):
        for a in range(1, gw):
            yield a, b


def _grid_from_offsets(gw: int, gh: int, values) -> DisplacementGrid:
    nodes = np.zeros((gh + 1, gw + 1, 2), dtype=np.float64)
    it = iter(values)
    for a, b in _interior_nodes(gw, gh):
        nodes[b, a, 0] = next(it)
        nodes[b, a, 1] = next(it)
    return DisplacementGrid(gw, gh, nodes)


def elastic_kernel(
    img: Image,
    grid_width: int,
    grid_height: int,
    magnitude: int,
    rng: RngStream,
    filt: Filter = Filter.BILINEAR,
) -> Image:
    """Random elastic distortion on a grid_width x grid_height cell lattice.

    Interior node offsets are drawn uniformly from [-magnitude, magnitude]
    per axis (dx then dy, nodes in row-major order); boundary nodes are
    pinned, which keeps the output the same size as the input.
    """
    values = []
    for _a, _b in _interior_nodes(grid_width, grid_height):
        values.append(rng.uniform_int(-magnitude, magnitude))
        values.append(rng.uniform_int(-magnitude, magnitude))
    return warp_mesh(img, _grid_from_offsets(grid_width, grid_height, values), filt)


def zoom_kernel(img: Image, factor: float, filt: Filter = Filter.BILINEAR) -> Image:
    """Enlarge by factor >= 1, then centre-crop back to the input size."""
    if factor < 1:
        raise OpError(f"zoom-out would require padding (factor {factor} < 1)", op_kind="zoom")
    w, h = img.width, img.height
    nw = round_half_away(w * factor)
    nh = round_half_away(h * factor)
    enlarged = resize(img, nw, nh, filt)
    ox = (nw - w) // 2
    oy = (nh - h) // 2
    return crop_kernel(enlarged, CropRect(ox, oy, w, h))


def crop_kernel(
    img: Image,
    region: CropRect,
    resize_back: bool = False,
    filt: Filter = Filter.BILINEAR,
) -> Image:
    """Exact sub-rectangle copy, optionally resized back to the input size."""
    x, y = region.x, region.y
    if x != int(x) or y != int(y):
        raise OpError(f"pixel crops need integral offsets, got ({x}, {y})", op_kind="crop")
    x, y = int(x), int(y)
    if x < 0 or y < 0 or x + region.w > img.width or y + region.h > img.height:
        raise OpError(
            f"crop region ({x}, {y}, {region.w}, {region.h}) exceeds "
            f"{img.width}x{img.height} image",
            op_kind="crop",
        )
    sub = Image._wrap(np.ascontiguousarray(img.pixels[y : y + region.h, x : x + region.w]), img.format)
    if resize_back and (region.w, region.h) != (img.width, img.height):
        return resize(sub, img.width, img.height, filt)
    return sub


def greyscale(img: Image) -> Image:
    """Luma conversion (BT.601 weights); alpha is dropped. Identity on Gray8."""
    if img.format is PixelFormat.GRAY8:
        return img
    rgb = img.pixels[..., :3].astype(np.float64)
    y = clamp_round_array(0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2])
    return Image._wrap(y[..., None], PixelFormat.GRAY8)


def invert(img: Image) -> Image:
    """Negate every colour channel (v -> 255 - v); alpha untouched."""
    arr = img.pixels.copy()
    cc = img.format.color_channels
    arr[..., :cc] = 255 - arr[..., :cc]
    return Image._wrap(arr, img.format)


def equalize(img: Image) -> Image:
    """Histogram equalisation, independently per colour channel.

    Remaps v to (cdf(v) - cdf_min) / (N - cdf_min) * 255 where cdf_min is
    the smallest nonzero cdf value; a channel with a single intensity is
    left unchanged. Alpha untouched.
    """
    arr = img.pixels.copy()
    n = img.width * img.height
    for ch in range(img.format.color_channels):
        channel = arr[..., ch]
        hist = np.bincount(channel.ravel(), minlength=256)
        cdf = np.cumsum(hist)
        cdf_min = int(cdf[np.nonzero(hist)[0][0]])
        if cdf_min == n:
            continue
        lut = clamp_round_array((cdf - cdf_min) / (n - cdf_min) * 255.0)
        arr[..., ch] = lut[channel]
    return Image._wrap(arr, img.format)


# --------------------------------------------------------------------------
# Operation specs


@dataclass(frozen=True)
class OpApplication:
    """Audit record of one operation within one sample.

    drawn_params preserves draw order and is empty when the op was
    skipped by its probability gate.
    """

    op_kind: str
    applied: bool
    drawn_params: tuple[tuple[str, Any], ...] = ()

    def params_dict(self) -> dict[str, Any]:
        return dict(self.drawn_params)


def _require(condition: bool, field: str, message: str) -> None:
    if not condition:
        raise ConfigError(f"{field} {message}", field=field)


@dataclass(frozen=True)
class OpSpec:
    """Base of all operation descriptions; every op has a gate probability."""

    probability: float
    kind: ClassVar[str] = ""

    def __post_init__(self):
        _require(
            isinstance(self.probability, (int, float)) and 0.0 <= self.probability <= 1.0,
            "probability",
            f"must be in [0, 1], got {self.probability}",
        )

    def draw(self, rng: RngStream, width: int, height: int) -> list[tuple[str, Any]]:
        """Draw this op's random parameters, in the documented order."""
        return []

    def apply(self, img: Image, drawn: list[tuple[str, Any]]) -> Image:
        raise NotImplementedError


@dataclass(frozen=True)
class Rotate(OpSpec):
    """Continuous rotation; angle drawn from [-max_left, +max_right] degrees."""

    max_left: float = 0.0
    max_right: float = 0.0
    kind: ClassVar[str] = "rotate"

    def __post_init__(self):
        super().__post_init__()
        _require(0.0 <= self.max_left <= 45.0, "max_left_rotation",
                 f"must be in [0, 45], got {self.max_left}")
        _require(0.0 <= self.max_right <= 45.0, "max_right_rotation",
                 f"must be in [0, 45], got {self.max_right}")

    def draw(self, rng, width, height):
        return [("angle", rng.uniform_real(-self.max_left, self.max_right))]

    def apply(self, img, drawn):
        return rotate_arbitrary(img, dict(drawn)["angle"])


@dataclass(frozen=True)
class RotateCardinal(OpSpec):
    """Lossless 90/180/270 rotation, fixed or uniformly random."""

    which: str = "random"
    kind: ClassVar[str] = "rotate_cardinal"

    def __post_init__(self):
        super().__post_init__()
        _require(self.which in ("r90", "r180", "r270", "random"), "which",
                 f"must be one of r90/r180/r270/random, got {self.which!r}")

    def draw(self, rng, width, height):
        if self.which == "random":
            return [("degrees", (90, 180, 270)[rng.uniform_int(0, 2)])]
        return []

    def apply(self, img, drawn):
        if self.which == "random":
            return rotate_cardinal(img, dict(drawn)["degrees"])
        return rotate_cardinal(img, int(self.which[1:]))


@dataclass(frozen=True)
class Flip(OpSpec):
    """Mirror along a fixed or randomly chosen axis."""

    axis: str = "random"
    kind: ClassVar[str] = "flip"

    def __post_init__(self):
        super().__post_init__()
        _require(self.axis in ("horizontal", "vertical", "random"), "axis",
                 f"must be horizontal/vertical/random, got {self.axis!r}")

    def draw(self, rng, width, height):
        if self.axis == "random":
            return [("axis", ("horizontal", "vertical")[rng.uniform_int(0, 1)])]
        return []

    def apply(self, img, drawn):
        return flip(img, dict(drawn).get("axis", self.axis))


@dataclass(frozen=True)
class Shear(OpSpec):
    """Shear by a random angle, along a fixed or random axis."""

    max_angle: float = 0.0
    axis: str = "random"
    kind: ClassVar[str] = "shear"

    def __post_init__(self):
        super().__post_init__()
        _require(0.0 <= self.max_angle < 45.0, "max_angle",
                 f"must be in [0, 45), got {self.max_angle}")
        _require(self.axis in ("x", "y", "random"), "axis",
                 f"must be x/y/random, got {self.axis!r}")

    def draw(self, rng, width, height):
        drawn = []
        if self.axis == "random":
            drawn.append(("axis", ("x", "y")[rng.uniform_int(0, 1)]))
        drawn.append(("angle", rng.uniform_real(-self.max_angle, self.max_angle)))
        return drawn

    def apply(self, img, drawn):
        d = dict(drawn)
        return shear_kernel(img, d.get("axis", self.axis), d["angle"])


@dataclass(frozen=True)
class Skew(OpSpec):
    """Perspective tilt with displacement scaled by severity.

    The displacement is an integer drawn from
    [0, floor(severity * min(W, H) / 2)].
    """

    severity: float = 1.0
    skew_kind: str = "random"
    kind: ClassVar[str] = "skew"

    def __post_init__(self):
        super().__post_init__()
        _require(0.0 < self.severity <= 1.0, "severity",
                 f"must be in (0, 1], got {self.severity}")
        _require(self.skew_kind in ("forward", "backward", "left", "right", "random"), "kind",
                 f"must be forward/backward/left/right/random, got {self.skew_kind!r}")

    def draw(self, rng, width, height):
        drawn = []
        if self.skew_kind == "random":
            drawn.append(("kind", ("forward", "backward", "left", "right")[rng.uniform_int(0, 3)]))
        d_max = int(math.floor(self.severity * min(width, height) / 2 + _SNAP))
        drawn.append(("displacement", rng.uniform_int(0, d_max)))
        return drawn

    def apply(self, img, drawn):
        d = dict(drawn)
        return skew_kernel(img, d.get("kind", self.skew_kind), d["displacement"])


@dataclass(frozen=True)
class Elastic(OpSpec):
    """Grid-based elastic distortion; grid size sets the granularity and
    magnitude bounds the node displacement per axis."""

    grid_width: int = 1
    grid_height: int = 1
    magnitude: int = 0
    kind: ClassVar[str] = "elastic"

    def __post_init__(self):
        super().__post_init__()
        _require(isinstance(self.grid_width, int) and self.grid_width >= 1, "grid_width",
                 f"must be an integer >= 1, got {self.grid_width}")
        _require(isinstance(self.grid_height, int) and self.grid_height >= 1, "grid_height",
                 f"must be an integer >= 1, got {self.grid_height}")
        _require(isinstance(self.magnitude, int) and self.magnitude >= 0, "magnitude",
                 f"must be an integer >= 0, got {self.magnitude}")

    def draw(self, rng, width, height):
        drawn = []
        m = self.magnitude
        for a, b in _interior_nodes(self.grid_width, self.grid_height):
            drawn.append((f"dx_{a}_{b}", rng.uniform_int(-m, m)))
            drawn.append((f"dy_{a}_{b}", rng.uniform_int(-m, m)))
        return drawn

    def apply(self, img, drawn):
        grid = _grid_from_offsets(self.grid_width, self.grid_height, (v for _, v in drawn))
        return warp_mesh(img, grid)


@dataclass(frozen=True)
class Zoom(OpSpec):
    """Zoom in by a factor drawn from [min_factor, max_factor]."""

    min_factor: float = 1.0
    max_factor: float = 1.0
    kind: ClassVar[str] = "zoom"

    def __post_init__(self):
        super().__post_init__()
        _require(self.min_factor >= 1.0, "min_factor",
                 f"must be >= 1, got {self.min_factor}")
        _require(self.max_factor >= self.min_factor, "max_factor",
                 f"must be >= min_factor, got {self.max_factor}")

    def draw(self, rng, width, height):
        return [("factor", rng.uniform_real(self.min_factor, self.max_factor))]

    def apply(self, img, drawn):
        return zoom_kernel(img, dict(drawn)["factor"])


@dataclass(frozen=True)
class CropRandom(OpSpec):
    """Randomly positioned crop keeping area_fraction of the image area.

    Crop extent is round(dim * sqrt(area_fraction)) per axis, so the
    retained area fraction is as requested and the aspect ratio is kept.
    """

    area_fraction: float = 1.0
    resize_back: bool = False
    kind: ClassVar[str] = "crop_random"

    def __post_init__(self):
        super().__post_init__()
        _require(0.0 < self.area_fraction <= 1.0, "area_fraction",
                 f"must be in (0, 1], got {self.area_fraction}")

    def _extent(self, width: int, height: int) -> tuple[int, int]:
        side = math.sqrt(self.area_fraction)
        return round_half_away(width * side), round_half_away(height * side)

    def draw(self, rng, width, height):
        cw, ch = self._extent(width, height)
        cw, ch = min(cw, width), min(ch, height)
        return [("x", rng.uniform_int(0, width - cw)), ("y", rng.uniform_int(0, height - ch))]

    def apply(self, img, drawn):
        d = dict(drawn)
        cw, ch = self._extent(img.width, img.height)
        cw, ch = min(cw, img.width), min(ch, img.height)
        return crop_kernel(img, CropRect(d["x"], d["y"], cw, ch), resize_back=self.resize_back)


@dataclass(frozen=True)
class CropCentre(OpSpec):
    """Fixed-size crop from the image center."""

    width: int = 1
    height: int = 1
    kind: ClassVar[str] = "crop_centre"

    def __post_init__(self):
        super().__post_init__()
        _require(isinstance(self.width, int) and self.width >= 1, "width",
                 f"must be an integer >= 1, got {self.width}")
        _require(isinstance(self.height, int) and self.height >= 1, "height",
                 f"must be an integer >= 1, got {self.height}")

    def apply(self, img, drawn):
        if self.width > img.width or self.height > img.height:
            raise OpError(
                f"centre crop {self.width}x{self.height} exceeds image "
                f"{img.width}x{img.height}",
                op_kind=self.kind,
            )
        ox = (img.width - self.width) // 2
        oy = (img.height - self.height) // 2
        return crop_kernel(img, CropRect(ox, oy, self.width, self.height))


@dataclass(frozen=True)
class Resize(OpSpec):
    """Resize to fixed dimensions."""

    width: int = 1
    height: int = 1
    kind: ClassVar[str] = "resize"

    def __post_init__(self):
        super().__post_init__()
        _require(isinstance(self.width, int) and self.width >= 1, "width",
                 f"must be an integer >= 1, got {self.width}")
        _require(isinstance(self.height, int) and self.height >= 1, "height",
                 f"must be an integer >= 1, got {self.height}")

    def apply(self, img, drawn):
        return resize(img, self.width, self.height)


@dataclass(frozen=True)
class Scale(OpSpec):
    """Uniformly scale both dimensions by a fixed factor."""

    factor: float = 1.0
    kind: ClassVar[str] = "scale"

    def __post_init__(self):
        super().__post_init__()
        _require(self.factor > 0.0, "factor", f"must be > 0, got {self.factor}")

    def apply(self, img, drawn):
        nw = round_half_away(img.width * self.factor)
        nh = round_half_away(img.height * self.factor)
        if nw < 1 or nh < 1:
            raise OpError(f"scale factor {self.factor} collapses the image", op_kind=self.kind)
        return resize(img, nw, nh)


@dataclass(frozen=True)
class Greyscale(OpSpec):
    kind: ClassVar[str] = "greyscale"

    def apply(self, img, drawn):
        return greyscale(img)


@dataclass(frozen=True)
class Invert(OpSpec):
    kind: ClassVar[str] = "invert"

    def apply(self, img, drawn):
        return invert(img)


@dataclass(frozen=True)
class Equalize(OpSpec):
    kind: ClassVar[str] = "equalize"

    def apply(self, img, drawn):
        return equalize(img)


def apply_op(spec: OpSpec, img: Image, rng: RngStream) -> tuple[Image, OpApplication]:
    """Draw the spec's parameters, run its kernel, and record the draws.

    Probability gating happens in the pipeline; apply_op always applies.
    Kernel failures after drawing surface as OpError carrying the drawn
    values, so a failing sample can be reproduced exactly.
    """
    drawn = spec.draw(rng, img.width, img.height)
    try:
        out = spec.apply(img, drawn)
    except OpError as exc:
        raise OpError(str(exc), op_kind=spec.kind, drawn=tuple(drawn)) from exc
    except GeometryError as exc:
        raise OpError(f"{spec.kind}: {exc}", op_kind=spec.kind, drawn=tuple(drawn)) from exc
    return out, OpApplication(spec.kind, True, tuple(drawn))

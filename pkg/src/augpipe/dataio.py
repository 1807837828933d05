"""Image file I/O, dataset scanning, and output naming.

Codecs are deliberately small and lossless: PNG (8-bit, non-interlaced)
plus binary PPM/PGM with maxval 255. Lossy formats are excluded so a
save/load round trip is always the identity on pixel buffers, which the
reproducibility contract depends on.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DatasetError, DecodeError, UnsupportedImageError
from .imagecore import Image, PixelFormat

__all__ = [
    "DatasetEntry",
    "DatasetIndex",
    "ImageRecord",
    "load_image",
    "load_record",
    "save_image",
    "scan_dataset",
    "split_by_class",
    "output_name",
    "FLAT_LABEL",
]

_PNG_SIG = b"\x89PNG\r\n\x1a\n"
_IMAGE_SUFFIXES = (".png", ".ppm", ".pgm")

# Label used for images sitting directly in the dataset root.
FLAT_LABEL = "·"


class DatasetEntry(NamedTuple):
    rel_path: str  # posix-style, relative to the dataset root
    label: str     # first-level subdirectory, or FLAT_LABEL


@dataclass(frozen=True)
class DatasetIndex:
    """Sorted index of the decodable images below a root directory."""

    root: Path
    entries: tuple[DatasetEntry, ...]

    def path_of(self, entry: DatasetEntry) -> Path:
        return self.root / entry.rel_path


@dataclass(frozen=True)
class ImageRecord:
    """A decoded image together with where it came from."""

    path: Path
    image: Image
    format_tag: str  # "png", "ppm" or "pgm"


# --------------------------------------------------------------------------
# PNG


def _png_chunks(data: bytes):
    pos = 8
    while pos < len(data):
        if pos + 8 > len(data):
            raise DecodeError("truncated PNG: chunk header cut short")
        length, ctype = struct.unpack(">I4s", data[pos : pos + 8])
        end = pos + 8 + length
        if end + 4 > len(data):
            raise DecodeError(f"truncated PNG: {ctype!r} chunk cut short")
        payload = data[pos + 8 : end]
        (crc,) = struct.unpack(">I", data[end : end + 4])
        if crc != (zlib.crc32(payload, zlib.crc32(ctype)) & 0xFFFFFFFF):
            raise DecodeError(f"corrupt PNG: bad CRC in {ctype!r} chunk")
        yield ctype, payload
        pos = end + 4


def _unfilter_rows(raw: bytes, height: int, stride: int, bpp: int) -> bytearray:
    out = bytearray()
    prev = bytearray(stride)
    pos = 0
    for _y in range(height):
        ftype = raw[pos]
        row = bytearray(raw[pos + 1 : pos + 1 + stride])
        pos += 1 + stride
        if ftype == 0:
            pass
        elif ftype == 1:  # Sub
            for x in range(bpp, stride):
                row[x] = (row[x] + row[x - bpp]) & 0xFF
        elif ftype == 2:  # Up
            for x in range(stride):
                row[x] = (row[x] + prev[x]) & 0xFF
        elif ftype == 3:  # Average
            for x in range(stride):
                left = row[x - bpp] if x >= bpp else 0
                row[x] = (row[x] + (left + prev[x]) // 2) & 0xFF
        elif ftype == 4:  # Paeth
            for x in range(stride):
                a = row[x - bpp] if x >= bpp else 0
                b = prev[x]
                c = prev[x - bpp] if x >= bpp else 0
                p = a + b - c
                pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                if pa <= pb and pa <= pc:
                    pred = a
                elif pb <= pc:
                    pred = b
                else:
                    pred = c
                row[x] = (row[x] + pred) & 0xFF
        else:
            raise DecodeError(f"corrupt PNG: unknown filter type {ftype}")
        out += row
        prev = row
    return out


def _decode_png(data: bytes) -> Image:
    ihdr = None
    palette = None
    idat = bytearray()
    for ctype, payload in _png_chunks(data):
        if ctype == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", payload)
        elif ctype == b"PLTE":
            palette = payload
        elif ctype == b"IDAT":
            idat += payload
        elif ctype == b"IEND":
            break
    if ihdr is None:
        raise DecodeError("corrupt PNG: missing IHDR")
    width, height, depth, color, compression, filter_method, interlace = ihdr
    if width < 1 or height < 1:
        raise DecodeError("corrupt PNG: zero dimension")
    if compression != 0 or filter_method != 0:
        raise DecodeError("corrupt PNG: unknown compression or filter method")
    if interlace != 0:
        raise UnsupportedImageError("interlaced PNG is not supported")
    if depth != 8:
        raise UnsupportedImageError(f"unsupported PNG bit depth {depth} (only 8)")
    channels = {0: 1, 2: 3, 3: 1, 4: 2, 6: 4}.get(color)
    if channels is None:
        raise UnsupportedImageError(f"unsupported PNG colour type {color}")
    if not idat:
        raise DecodeError("corrupt PNG: no IDAT data")
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise DecodeError(f"corrupt PNG: {exc}") from exc
    stride = width * channels
    if len(raw) != height * (stride + 1):
        raise DecodeError("truncated PNG: pixel data length mismatch")
    flat = np.frombuffer(bytes(_unfilter_rows(raw, height, stride, channels)), dtype=np.uint8)
    arr = flat.reshape(height, width, channels)
    if color == 0:
        return Image.from_array(arr, PixelFormat.GRAY8)
    if color == 2:
        return Image.from_array(arr, PixelFormat.RGB8)
    if color == 3:
        if palette is None or len(palette) % 3 != 0 or len(palette) == 0:
            raise DecodeError("corrupt PNG: missing or malformed palette")
        pal = np.frombuffer(palette, dtype=np.uint8).reshape(-1, 3)
        indices = arr[..., 0]
        if int(indices.max()) >= pal.shape[0]:
            raise DecodeError("corrupt PNG: palette index out of range")
        return Image.from_array(pal[indices], PixelFormat.RGB8)
    if color == 4:  # grey + alpha, expanded to RGBA
        out = np.empty((height, width, 4), dtype=np.uint8)
        out[..., 0] = out[..., 1] = out[..., 2] = arr[..., 0]
        out[..., 3] = arr[..., 1]
        return Image.from_array(out, PixelFormat.RGBA8)
    return Image.from_array(arr, PixelFormat.RGBA8)


def _encode_png(img: Image) -> bytes:
    color = {PixelFormat.GRAY8: 0, PixelFormat.RGB8: 2, PixelFormat.RGBA8: 6}[img.format]
    ihdr = struct.pack(">IIBBBBB", img.width, img.height, 8, color, 0, 0, 0)
    stride = img.width * img.channels
    rows = np.zeros((img.height, stride + 1), dtype=np.uint8)
    rows[:, 1:] = img.pixels.reshape(img.height, stride)
    pieces = [_PNG_SIG, _png_chunk(b"IHDR", ihdr)]
    pieces.append(_png_chunk(b"IDAT", zlib.compress(rows.tobytes(), 6)))
    pieces.append(_png_chunk(b"IEND", b""))
    return b"".join(pieces)


def _png_chunk(ctype: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(payload, zlib.crc32(ctype)) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + ctype + payload + struct.pack(">I", crc)


# --------------------------------------------------------------------------
# PPM / PGM (binary, maxval 255)


def _pnm_tokens(data: bytes, count: int, start: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated integers, honouring # comments."""
    tokens: list[int] = []
    pos = start
    current = b""
    while len(tokens) < count:
        if pos >= len(data):
            raise DecodeError("truncated PNM header")
        ch = data[pos : pos + 1]
        if ch == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            if current:
                tokens.append(int(current))
                current = b""
            pos += 1
        elif ch.isdigit():
            current += ch
            pos += 1
        else:
            raise DecodeError(f"malformed PNM header near byte {pos}")
    return tokens, pos


def _decode_pnm(data: bytes) -> Image:
    magic = data[:2]
    fmt = PixelFormat.GRAY8 if magic == b"P5" else PixelFormat.RGB8
    (width, height, maxval), pos = _pnm_tokens(data, 3, 2)
    if maxval != 255:
        raise UnsupportedImageError(f"unsupported PNM maxval {maxval} (only 255)")
    # `pos` is just past the single whitespace byte terminating the header.
    channels = fmt.channels
    need = width * height * channels
    pixels = data[pos : pos + need]
    if len(pixels) != need:
        raise DecodeError("truncated PNM pixel data")
    arr = np.frombuffer(pixels, dtype=np.uint8).reshape(height, width, channels)
    return Image.from_array(arr, fmt)


def _encode_pnm(img: Image) -> bytes:
    if img.format is PixelFormat.GRAY8:
        magic = b"P5"
    elif img.format is PixelFormat.RGB8:
        magic = b"P6"
    else:
        raise UnsupportedImageError("PPM/PGM cannot store RGBA images; use PNG")
    header = magic + f"\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


# --------------------------------------------------------------------------
# Public API


def load_image(path) -> Image:
    """Decode a PNG, PPM (P6) or PGM (P5) file."""
    data = Path(path).read_bytes()
    if data[:8] == _PNG_SIG:
        return _decode_png(data)
    if data[:2] in (b"P5", b"P6"):
        return _decode_pnm(data)
    raise UnsupportedImageError(f"unrecognised image format: {path}")


def load_record(path) -> ImageRecord:
    path = Path(path)
    data = path.read_bytes()
    if data[:8] == _PNG_SIG:
        return ImageRecord(path, _decode_png(data), "png")
    if data[:2] == b"P5":
        return ImageRecord(path, _decode_pnm(data), "pgm")
    if data[:2] == b"P6":
        return ImageRecord(path, _decode_pnm(data), "ppm")
    raise UnsupportedImageError(f"unrecognised image format: {path}")


def save_image(img: Image, path, image_format: str = "png") -> None:
    """Losslessly encode to PNG or to the PPM family.

    ``image_format`` is "png" or "ppm"; with "ppm", Gray8 images are
    written as binary PGM and RGB8 as binary PPM. RGBA cannot be stored
    in the PPM family.
    """
    if image_format == "png":
        payload = _encode_png(img)
    elif image_format == "ppm":
        payload = _encode_pnm(img)
    else:
        raise ValueError(f"image_format must be 'png' or 'ppm', got {image_format!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(payload)


def scan_dataset(root) -> DatasetIndex:
    """Index every decodable image under root, sorted by relative path.

    The first-level subdirectory is recorded as the class label; images
    directly in the root get the placeholder label. Ordering is plain
    lexicographic on posix-style relative paths, so it is identical on
    every platform.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root is not a readable directory: {root}")
    entries = []
    for path in root.rglob("*"):
        if not path.is_file() or path.suffix.lower() not in _IMAGE_SUFFIXES:
            continue
        rel = path.relative_to(root).as_posix()
        label = rel.split("/", 1)[0] if "/" in rel else FLAT_LABEL
        entries.append(DatasetEntry(rel, label))
    if not entries:
        raise DatasetError(f"empty dataset: no .png/.ppm/.pgm files under {root}")
    entries.sort(key=lambda e: e.rel_path)
    return DatasetIndex(root=root, entries=tuple(entries))


def split_by_class(dataset: DatasetIndex) -> list[tuple[str, DatasetIndex]]:
    """Partition a dataset by class label, labels in sorted order."""
    by_label: dict[str, list[DatasetEntry]] = {}
    for entry in dataset.entries:
        by_label.setdefault(entry.label, []).append(entry)
    return [
        (label, DatasetIndex(root=dataset.root, entries=tuple(by_label[label])))
        for label in sorted(by_label)
    ]


def output_name(stem: str, sample_index: int, ext: str = "png") -> str:
    """Deterministic output filename: <stem>_aug_<index, zero-padded to 6>."""
    if not stem:
        raise ValueError("output stem must be non-empty")
    if sample_index < 0:
        raise ValueError(f"sample index must be >= 0, got {sample_index}")
    return f"{stem}_aug_{sample_index:06d}.{ext}"

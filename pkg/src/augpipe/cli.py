"""Command-line front end.

Three subcommands: ``run`` generates augmented datasets from a config and
an input folder, ``validate`` checks a config and prints its canonical
form, and ``sheet`` renders a tiled contact sheet of augmented variants
of a single image.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 runtime
operation failure. Seed precedence: --seed flag, then the config's seed,
then 0.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import pipeline as pipeline_mod
from .config import canonical_text, parse_config
from .dataio import (
    FLAT_LABEL,
    DatasetEntry,
    DatasetIndex,
    load_image,
    save_image,
    scan_dataset,
    split_by_class,
)
from .errors import (
    AugpipeError,
    ConfigError,
    DatasetError,
    DecodeError,
    OpError,
    OutputCollisionError,
    UnsupportedImageError,
)
from .imagecore import Image, PixelFormat, mix64
from .pipeline import CollectingSink, DirectorySink, Pipeline, write_trace

__all__ = ["main", "entrypoint"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_RUNTIME = 3

_SEPARATOR = 2  # white gap between contact sheet tiles, in pixels


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="augpipe",
        description="Stochastic image augmentation pipelines with reproducible seeding.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="generate augmented images from a dataset")
    run.add_argument("--config", required=True, help="pipeline config (JSON)")
    run.add_argument("--input", required=True, help="dataset root directory")
    run.add_argument("--output", required=True, help="output root directory")
    run.add_argument("--count", type=int, help="samples to generate (sample mode)")
    run.add_argument("--mode", choices=("sample", "process"), default="sample")
    run.add_argument("--seed", type=int, help="master seed (overrides the config)")
    run.add_argument("--jobs", type=int, default=1, help="worker processes")
    run.add_argument("--trace", help="write a JSON-lines trace to this file")
    run.add_argument("--format", choices=("png", "ppm"), default="png",
                     help="output image format")
    run.add_argument("--overwrite", action="store_true",
                     help="allow overwriting existing output files")
    run.add_argument("--per-class", action="store_true",
                     help="run the pipeline independently per first-level subdirectory")

    validate = sub.add_parser("validate", help="check a config and print its canonical form")
    validate.add_argument("--config", required=True)

    sheet = sub.add_parser("sheet", help="render a contact sheet of augmented variants")
    sheet.add_argument("--config", required=True)
    sheet.add_argument("--input", required=True, help="a single source image")
    sheet.add_argument("--output", required=True, help="montage PNG to write")
    sheet.add_argument("--rows", type=int, required=True)
    sheet.add_argument("--cols", type=int, required=True)
    sheet.add_argument("--seed", type=int)
    sheet.add_argument("--include-original", action="store_true",
                       help="use the unmodified image as the first tile")
    return parser


def _load_pipeline(config_path: str, seed_flag: int | None) -> Pipeline:
    try:
        text = Path(config_path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _IoFailure(f"cannot read config: {exc}") from exc
    pipe = parse_config(text)
    if seed_flag is not None:
        pipe = pipe.with_seed(seed_flag)
    return pipe


class _IoFailure(AugpipeError):
    """Internal marker for failures that must exit with the I/O code."""


def _fnv1a64(text: str) -> int:
    acc = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        acc = ((acc ^ byte) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return acc


def _cmd_run(args) -> int:
    pipe = _load_pipeline(args.config, args.seed)
    if args.mode == "sample" and args.count is None:
        raise ConfigError("--count is required in sample mode")
    if args.count is not None and args.count < 0:
        raise ConfigError(f"--count must be >= 0, got {args.count}")
    if args.jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
    dataset = scan_dataset(args.input)
    sink = DirectorySink(args.output, image_format=args.format, overwrite=args.overwrite)

    started = time.perf_counter()
    records = []
    if args.per_class:
        # Each class gets its own seed, mixed from the master seed and the
        # label, so classes are augmented independently yet reproducibly.
        for label, class_dataset in split_by_class(dataset):
            class_pipe = pipe.with_seed(mix64(pipe.master_seed ^ _fnv1a64(label)))
            if args.mode == "sample":
                records.extend(
                    pipeline_mod.sample(class_pipe, class_dataset, args.count, sink, jobs=args.jobs)
                )
            else:
                records.extend(
                    pipeline_mod.process(class_pipe, class_dataset, sink, jobs=args.jobs)
                )
    elif args.mode == "sample":
        records = pipeline_mod.sample(pipe, dataset, args.count, sink, jobs=args.jobs)
    else:
        records = pipeline_mod.process(pipe, dataset, sink, jobs=args.jobs)
    elapsed = time.perf_counter() - started

    if args.trace:
        write_trace(records, args.trace)

    print(f"images read: {len(dataset.entries)}")
    print(f"images generated: {len(records)}")
    for position, spec in enumerate(pipe.ops):
        applied = sum(1 for r in records if r.ops[position].applied)
        print(f"applied[{position}] {spec.kind}: {applied}/{len(records)}")
    rate = len(records) / elapsed if elapsed > 0 else float("inf")
    print(f"elapsed: {elapsed:.2f} s ({rate:.1f} images/s)")
    return EXIT_OK


def _cmd_validate(args) -> int:
    pipe = _load_pipeline(args.config, None)
    print(canonical_text(pipe))
    return EXIT_OK


def _promote(img: Image, fmt: PixelFormat) -> Image:
    if img.format is fmt:
        return img
    arr = img.pixels
    if img.format is PixelFormat.GRAY8:
        arr = np.repeat(arr, 3, axis=2)
    if fmt is PixelFormat.RGBA8 and arr.shape[2] == 3:
        alpha = np.full(arr.shape[:2] + (1,), 255, dtype=np.uint8)
        arr = np.concatenate([arr, alpha], axis=2)
    return Image._wrap(arr.copy(), fmt)


def _montage(tiles: list[Image], rows: int, cols: int) -> Image:
    widths = {t.width for t in tiles}
    heights = {t.height for t in tiles}
    if len(widths) != 1 or len(heights) != 1:
        raise OpError(
            "contact sheet tiles have differing sizes; add a resize or "
            "crop_centre operation to the pipeline to make dimensions uniform"
        )
    fmt = PixelFormat.GRAY8
    for tile in tiles:
        if tile.format is PixelFormat.RGBA8:
            fmt = PixelFormat.RGBA8
        elif tile.format is PixelFormat.RGB8 and fmt is PixelFormat.GRAY8:
            fmt = PixelFormat.RGB8
    tiles = [_promote(t, fmt) for t in tiles]
    tw, th = tiles[0].width, tiles[0].height
    width = cols * tw + (cols - 1) * _SEPARATOR
    height = rows * th + (rows - 1) * _SEPARATOR
    canvas = np.full((height, width, fmt.channels), 255, dtype=np.uint8)
    for i, tile in enumerate(tiles):
        r, c = divmod(i, cols)
        y = r * (th + _SEPARATOR)
        x = c * (tw + _SEPARATOR)
        canvas[y : y + th, x : x + tw] = tile.pixels
    return Image._wrap(canvas, fmt)


def _cmd_sheet(args) -> int:
    if args.rows < 1 or args.cols < 1:
        raise ConfigError(f"--rows and --cols must be >= 1, got {args.rows}x{args.cols}")
    pipe = _load_pipeline(args.config, args.seed)
    source = Path(args.input)
    if not source.is_file():
        raise _IoFailure(f"input image not found: {source}")
    original = load_image(source)

    total = args.rows * args.cols
    variant_count = total - 1 if args.include_original else total
    sink = CollectingSink()
    # A one-image dataset gives sheet variants the exact sampling path
    # (and draw layout) of the run command.
    dataset = DatasetIndex(root=source.parent, entries=(DatasetEntry(source.name, FLAT_LABEL),))
    if variant_count > 0:
        pipeline_mod.sample(pipe, dataset, variant_count, sink)
    tiles = [original] if args.include_original else []
    tiles.extend(img for _name, img in sink.images)
    montage = _montage(tiles, args.rows, args.cols)
    save_image(montage, args.output, "png")
    print(f"wrote {args.output} ({montage.width}x{montage.height}, "
          f"{len(tiles)} tile{'s' if len(tiles) != 1 else ''})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "validate":
            return _cmd_validate(args)
        return _cmd_sheet(args)
    except ConfigError as exc:
        print(f"augpipe: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, _IoFailure, DatasetError, DecodeError, UnsupportedImageError,
            OutputCollisionError) as exc:
        print(f"augpipe: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OpError, AugpipeError) as exc:
        print(f"augpipe: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entrypoint() -> None:
    sys.exit(main())

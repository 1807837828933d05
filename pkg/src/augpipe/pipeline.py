"""Pipeline assembly and the stochastic sampling loop.

A pipeline is an ordered list of probability-gated operations plus a
master seed. Each generated sample owns an independent random stream
derived from (master seed, sample index), so results are byte-identical
regardless of execution order or worker count: parallelism is free of
coordination by construction.

Within one sample the draw layout is fixed: first the source selection
(sample mode only), then per operation one gate draw, then that op's
parameter draws when the gate passes. The gate draw happens even for
probabilities 0 and 1, which keeps draw sequences structurally identical
across probability edits.
"""

from __future__ import annotations

import atexit
import json
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .dataio import DatasetIndex, load_image, output_name, save_image
from .errors import DatasetError, OpError, OutputCollisionError, UnsupportedImageError
from .imagecore import Image, PixelFormat, RngStream, derive_sample_rng
from .ops import OpApplication, OpSpec, apply_op

__all__ = [
    "Pipeline",
    "TraceRecord",
    "run_sample",
    "sample",
    "process",
    "DirectorySink",
    "CollectingSink",
    "write_trace",
]


@dataclass(frozen=True)
class Pipeline:
    """Ordered operations plus the master seed of the sampled distribution."""

    ops: tuple[OpSpec, ...] = ()
    master_seed: int = 0

    def add(self, spec: OpSpec) -> "Pipeline":
        """Return a pipeline with spec appended; insertion order is kept."""
        if not isinstance(spec, OpSpec):
            raise TypeError(f"expected an OpSpec, got {type(spec).__name__}")
        return replace(self, ops=self.ops + (spec,))

    def with_seed(self, master_seed: int) -> "Pipeline":
        return replace(self, master_seed=master_seed)


@dataclass(frozen=True)
class TraceRecord:
    """Audit record of one generated sample."""

    sample_index: int
    source: str
    ops: tuple[OpApplication, ...]
    output: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "sample": self.sample_index,
                "source": self.source,
                "ops": [
                    {"op": app.op_kind, "applied": app.applied, "params": app.params_dict()}
                    for app in self.ops
                ],
                "output": self.output,
            }
        )


def run_sample(pipeline: Pipeline, img: Image, rng: RngStream) -> tuple[Image, list[OpApplication]]:
    """Pass one image through the pipeline using the given stream.

    Per op: draw the gate; apply when gate < probability, else record a
    skip. Op failures are annotated with the index of the failing op.
    """
    applications: list[OpApplication] = []
    for index, spec in enumerate(pipeline.ops):
        gate = rng.unit_real()
        if gate < spec.probability:
            try:
                img, application = apply_op(spec, img, rng)
            except OpError as exc:
                raise OpError(
                    f"op {index} ({spec.kind}): {exc}",
                    op_kind=exc.op_kind,
                    drawn=exc.drawn,
                    op_index=index,
                ) from exc
        else:
            application = OpApplication(spec.kind, False)
        applications.append(application)
    return img, applications


class DirectorySink:
    """Writes augmented images under a root directory, mirroring the
    source's relative directory (its class subdirectory in particular).

    Collisions with pre-existing files are an error unless overwrite is
    set; within one run names are unique by construction because the
    sample index is part of every filename.
    """

    def __init__(self, root, image_format: str = "png", overwrite: bool = False):
        if image_format not in ("png", "ppm"):
            raise ValueError(f"image_format must be 'png' or 'ppm', got {image_format!r}")
        self.root = Path(root)
        self.image_format = image_format
        self.overwrite = overwrite

    def _extension(self, img: Image) -> str:
        if self.image_format == "png":
            return "png"
        return "pgm" if img.format is PixelFormat.GRAY8 else "ppm"

    def write(self, rel_dir: str, stem: str, sample_index: int, img: Image) -> str:
        name = output_name(stem, sample_index, self._extension(img))
        rel = f"{rel_dir}/{name}" if rel_dir else name
        target = self.root / rel
        if target.exists() and not self.overwrite:
            raise OutputCollisionError(f"output file already exists: {target} (use overwrite)")
        save_image(img, target, self.image_format)
        return rel


class CollectingSink:
    """Keeps generated images in memory; used by the contact sheet and tests."""

    def __init__(self):
        self.images: list[tuple[str, Image]] = []

    def write(self, rel_dir: str, stem: str, sample_index: int, img: Image) -> str:
        name = output_name(stem, sample_index, "png")
        rel = f"{rel_dir}/{name}" if rel_dir else name
        self.images.append((rel, img))
        return rel


# Per-process cache of decoded source images; entries are immutable.
_IMAGE_CACHE: dict[str, Image] = {}


def _load_cached(path: Path) -> Image:
    key = str(path)
    img = _IMAGE_CACHE.get(key)
    if img is None:
        img = load_image(path)
        _IMAGE_CACHE[key] = img
    return img


def _generate_one(
    pipeline: Pipeline,
    dataset: DatasetIndex,
    index: int,
    sink,
    choose_source: bool,
) -> TraceRecord:
    rng = derive_sample_rng(pipeline.master_seed, index)
    position = rng.uniform_int(0, len(dataset.entries) - 1) if choose_source else index
    entry = dataset.entries[position]
    img = _load_cached(dataset.path_of(entry))
    try:
        out, applications = run_sample(pipeline, img, rng)
    except OpError as exc:
        raise OpError(
            f"sample {index} (source {entry.rel_path}): {exc}",
            op_kind=exc.op_kind,
            drawn=exc.drawn,
            op_index=exc.op_index,
        ) from exc
    rel_path = Path(entry.rel_path)
    rel_dir = rel_path.parent.as_posix() if rel_path.parent != Path(".") else ""
    try:
        written = sink.write(rel_dir, rel_path.stem, index, out)
    except OutputCollisionError as exc:
        raise OutputCollisionError(f"sample {index}: {exc}") from exc
    except UnsupportedImageError as exc:
        raise UnsupportedImageError(f"sample {index}: {exc}") from exc
    except OSError as exc:
        raise OSError(f"sample {index}: {exc}") from exc
    return TraceRecord(index, entry.rel_path, tuple(applications), written)


def _generate_chunk(pipeline, dataset, indices, sink, choose_source) -> list[TraceRecord]:
    return [_generate_one(pipeline, dataset, i, sink, choose_source) for i in indices]


# Worker pools are reused across calls (creating one costs far more than a
# typical per-class batch); shut down at interpreter exit.
_POOLS: dict[int, ProcessPoolExecutor] = {}


def _get_pool(jobs: int) -> ProcessPoolExecutor:
    pool = _POOLS.get(jobs)
    if pool is None:
        ctx = multiprocessing.get_context("fork")
        pool = ProcessPoolExecutor(max_workers=jobs, mp_context=ctx)
        _POOLS[jobs] = pool
    return pool


def _shutdown_pools() -> None:
    while _POOLS:
        _POOLS.popitem()[1].shutdown()


atexit.register(_shutdown_pools)


def _run_indices(pipeline, dataset, indices, sink, choose_source, jobs) -> list[TraceRecord]:
    if jobs <= 1 or len(indices) <= 1:
        return _generate_chunk(pipeline, dataset, indices, sink, choose_source)
    # Contiguous chunks keep per-worker cache locality; results are in
    # index order regardless because map preserves argument order.
    chunk_count = min(len(indices), jobs * 4)
    step = (len(indices) + chunk_count - 1) // chunk_count
    chunks = [indices[i : i + step] for i in range(0, len(indices), step)]
    records: list[TraceRecord] = []
    pool = _get_pool(jobs)
    for part in pool.map(
        _generate_chunk,
        [pipeline] * len(chunks),
        [dataset] * len(chunks),
        chunks,
        [sink] * len(chunks),
        [choose_source] * len(chunks),
    ):
        records.extend(part)
    return records


def sample(
    pipeline: Pipeline,
    dataset: DatasetIndex,
    count: int,
    sink,
    jobs: int = 1,
) -> list[TraceRecord]:
    """Generate `count` samples, drawing sources with replacement.

    Sample i derives its stream from (master_seed, i) and draws its
    source position as the first value, so outputs and traces depend only
    on (pipeline, dataset, count), never on scheduling.
    """
    if not dataset.entries:
        raise DatasetError("cannot sample from an empty dataset")
    if count < 0:
        raise ValueError(f"sample count must be >= 0, got {count}")
    return _run_indices(pipeline, dataset, list(range(count)), sink, True, jobs)


def process(pipeline: Pipeline, dataset: DatasetIndex, sink, jobs: int = 1) -> list[TraceRecord]:
    """Pass every dataset image through the pipeline exactly once, in
    dataset order; sample i is dataset entry i."""
    if not dataset.entries:
        raise DatasetError("cannot process an empty dataset")
    return _run_indices(pipeline, dataset, list(range(len(dataset.entries))), sink, False, jobs)


def write_trace(records: list[TraceRecord], path) -> None:
    """Write one JSON object per line, in sample order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record.to_json())
            fh.write("\n")

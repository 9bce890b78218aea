"""Frame-to-grid processing: the wiring both the CLI and the service run.

Per frame: back-project depth -> semantic gate on the label image -> align to
the world frame -> condition (voxel / outlier removal / MLS) -> plane-based
slope and roughness classification -> occupancy grid update. Points rejected
by the semantic gate skip the geometric stages and feed the grid directly as
unsafe evidence.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cloud as cl
from . import dataset as dsio
from .config import RunConfig
from .dataset import FrameBundle
from .geometry import (
    FRAME_WORLD,
    PointCloud,
    RigidTransform,
    depth_to_cloud,
    transform_cloud,
)
from .grid import GridMap
from .semantics import ClassTable, DEFAULT_CLASS_TABLE, corrupt_labels, filter_cloud_by_semantics

STAGES = ("load", "to_cloud", "semantics", "transform", "condition", "classify", "grid")


@dataclass
class FrameTiming:
    index: int
    stage_ms: dict[str, float] = field(default_factory=dict)
    total_ms: float = 0.0


@dataclass
class ProcessResult:
    grid: GridMap
    timings: list[FrameTiming]
    frames: int


def _frame_seed(base_seed: int, index: int) -> int:
    return (base_seed * 1_000_003 + index) & 0x7FFFFFFF


def compute_frame_clouds(
    bundle: FrameBundle,
    cfg: RunConfig,
    frame_index: int,
    table: ClassTable = DEFAULT_CLASS_TABLE,
    sl_to_rgb: RigidTransform | None = None,
    timing: FrameTiming | None = None,
) -> tuple[PointCloud, PointCloud]:
    """World-frame (safe, unsafe) evidence clouds for one frame."""
    timing = timing if timing is not None else FrameTiming(frame_index)
    if sl_to_rgb is None:
        sl_to_rgb = RigidTransform.identity()

    tic = time.perf_counter()
    labels = bundle.labels
    if cfg.label_corruption > 0:
        rng = np.random.default_rng((cfg.seed, frame_index, 0xC0))
        labels = corrupt_labels(labels, cfg.label_corruption, rng)
    sl_cloud = depth_to_cloud(bundle.depth, bundle.intrinsics)
    timing.stage_ms["to_cloud"] = (time.perf_counter() - tic) * 1e3

    tic = time.perf_counter()
    sem_safe, sem_unsafe = filter_cloud_by_semantics(
        sl_cloud, labels, bundle.intrinsics, sl_to_rgb, table
    )
    timing.stage_ms["semantics"] = (time.perf_counter() - tic) * 1e3

    tic = time.perf_counter()
    safe_world = transform_cloud(sem_safe, bundle.pose, FRAME_WORLD)
    unsafe_world = transform_cloud(sem_unsafe, bundle.pose, FRAME_WORLD)
    timing.stage_ms["transform"] = (time.perf_counter() - tic) * 1e3

    tic = time.perf_counter()
    conditioned = cl.condition_cloud(safe_world, cfg.pipeline)
    timing.stage_ms["condition"] = (time.perf_counter() - tic) * 1e3

    tic = time.perf_counter()
    geo_safe, geo_unsafe = cl.classify_cloud(
        conditioned, cfg.pipeline, _frame_seed(cfg.seed, frame_index)
    )
    unsafe_all = PointCloud(
        np.vstack([geo_unsafe.xyz, unsafe_world.xyz]), FRAME_WORLD
    )
    timing.stage_ms["classify"] = (time.perf_counter() - tic) * 1e3
    return geo_safe, unsafe_all


def process_dataset(
    dataset_dir,
    cfg: RunConfig,
    dump_cloud_dir=None,
    progress=None,
) -> ProcessResult:
    """Run the full pipeline over a dataset directory in timestamp order.

    With cfg.threads > 1, frames are conditioned and classified by a worker
    pool while grid updates stay serialized in frame order, so results are
    identical to a single-threaded run.
    """
    root = Path(dataset_dir)
    frame_dirs = dsio.list_frame_dirs(root)
    grid = GridMap(cfg.resolution)
    timings: list[FrameTiming] = []
    if not frame_dirs:
        return ProcessResult(grid, timings, 0)

    intr_path = root / "intrinsics.txt"
    if not intr_path.is_file():
        raise FileNotFoundError(f"missing intrinsics file: {intr_path}")
    intrinsics, _baseline, sl_to_rgb = dsio.load_intrinsics(intr_path)
    classes_path = root / "classes.txt"
    table = dsio.load_class_table(classes_path) if classes_path.is_file() else DEFAULT_CLASS_TABLE

    dump_dir = Path(dump_cloud_dir) if dump_cloud_dir is not None else None
    if dump_dir is not None:
        dump_dir.mkdir(parents=True, exist_ok=True)

    def run_frame(item: tuple[int, Path]):
        index, frame_dir = item
        timing = FrameTiming(index)
        start = time.perf_counter()
        tic = time.perf_counter()
        bundle = dsio.load_frame(frame_dir, intrinsics)
        timing.stage_ms["load"] = (time.perf_counter() - tic) * 1e3
        safe, unsafe = compute_frame_clouds(
            bundle, cfg, index, table, sl_to_rgb, timing
        )
        return index, safe, unsafe, timing, start

    items = list(enumerate(frame_dirs))
    if cfg.threads > 1:
        executor = ThreadPoolExecutor(max_workers=cfg.threads)
        results = executor.map(run_frame, items)  # preserves submission order
    else:
        executor = None
        results = map(run_frame, items)

    try:
        for index, safe, unsafe, timing, start in results:
            tic = time.perf_counter()
            grid.update(safe, unsafe, cfg.grid)
            timing.stage_ms["grid"] = (time.perf_counter() - tic) * 1e3
            timing.total_ms = (time.perf_counter() - start) * 1e3
            timings.append(timing)
            if dump_dir is not None:
                dsio.save_xyz(dump_dir / f"{index:06d}_safe.xyz", safe.xyz)
                dsio.save_xyz(dump_dir / f"{index:06d}_unsafe.xyz", unsafe.xyz)
            if progress is not None:
                progress(index)
    finally:
        if executor is not None:
            executor.shutdown()
    return ProcessResult(grid, timings, len(frame_dirs))


def write_timing_log(path, timings: list[FrameTiming]) -> None:
    cols = ["frame"] + [f"{s}_ms" for s in STAGES] + ["total_ms"]
    lines = [",".join(cols)]
    for t in timings:
        row = [str(t.index)]
        row += [f"{t.stage_ms.get(s, 0.0):.3f}" for s in STAGES]
        row.append(f"{t.total_ms:.3f}")
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")

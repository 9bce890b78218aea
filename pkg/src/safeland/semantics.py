"""Semantic label images and the gate that keeps 3D points on landable pixels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraIntrinsics, PointCloud, RigidTransform, project_points

NUM_CLASSES = 11

CLASS_NAMES = {
    0: "safe landing site",
    1: "people/animals",
    2: "man-made obstacles",
    3: "nature obstacles",
    4: "water",
    5: "sky",
    6: "trees",
    7: "light",
    8: "vehicles",
    9: "background",
    10: "buildings",
}

BACKGROUND_CLASS = 9


@dataclass(frozen=True, eq=False)
class LabelImage:
    """Per-pixel class ids in [0, 10]."""

    labels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise ValueError("label image must be a 2D array")
        if arr.size and (arr.min() < 0 or arr.max() >= NUM_CLASSES):
            raise ValueError(f"class ids must lie in [0, {NUM_CLASSES - 1}]")
        object.__setattr__(self, "labels", arr.astype(np.uint8))

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class ClassTable:
    """The 11 clustered classes and the subset considered landable."""

    entries: dict[int, str] = field(default_factory=lambda: dict(CLASS_NAMES))
    safe_set: frozenset[int] = frozenset({0})

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))
        object.__setattr__(self, "safe_set", frozenset(self.safe_set))
        if len(self.entries) != NUM_CLASSES:
            raise ValueError(f"class table must have exactly {NUM_CLASSES} entries")
        if sorted(self.entries) != list(range(NUM_CLASSES)):
            raise ValueError(f"class ids must be exactly 0..{NUM_CLASSES - 1}")
        if not self.safe_set:
            raise ValueError("safe set must not be empty")
        if not self.safe_set <= set(self.entries):
            raise ValueError("safe set must be a subset of the class ids")


DEFAULT_CLASS_TABLE = ClassTable()


def is_safe_class(c: int, table: ClassTable) -> bool:
    """True iff class id `c` belongs to the table's safe set."""
    if not 0 <= c < NUM_CLASSES:
        raise ValueError(f"class id {c} out of range [0, {NUM_CLASSES - 1}]")
    return c in table.safe_set


def filter_cloud_by_semantics(
    cloud: PointCloud,
    labels: LabelImage,
    intrinsics: CameraIntrinsics,
    xform_sl_to_rgb: RigidTransform,
    table: ClassTable,
) -> tuple[PointCloud, PointCloud]:
    """Split a cloud by projecting each point onto the segmented image.

    Points landing on safe-class pixels go to the first output, points on any
    other class to the second; points that project out of frame (including
    behind the camera) are dropped. Lookup uses nearest-pixel rounding of the
    sub-pixel projection. Both outputs keep the input coordinates and frame.
    """
    if labels.width != intrinsics.width or labels.height != intrinsics.height:
        raise ValueError(
            f"label image {labels.width}x{labels.height} does not match "
            f"intrinsics {intrinsics.width}x{intrinsics.height}"
        )
    if len(cloud) == 0:
        return PointCloud.empty(cloud.frame), PointCloud.empty(cloud.frame)

    uv, valid = project_points(cloud.xyz, intrinsics, xform_sl_to_rgb)
    ui = np.full(len(cloud), -1, dtype=np.int64)
    vi = np.full(len(cloud), -1, dtype=np.int64)
    ui[valid] = np.floor(uv[valid, 0] + 0.5).astype(np.int64)
    vi[valid] = np.floor(uv[valid, 1] + 0.5).astype(np.int64)
    # Sub-pixel coords just inside the right/bottom edge can round past them.
    valid &= (ui >= 0) & (ui < labels.width) & (vi >= 0) & (vi < labels.height)

    safe_lut = np.zeros(NUM_CLASSES, dtype=bool)
    safe_lut[sorted(table.safe_set)] = True
    hit = np.zeros(len(cloud), dtype=bool)
    hit[valid] = safe_lut[labels.labels[vi[valid], ui[valid]]]
    safe_mask = valid & hit
    unsafe_mask = valid & ~hit
    return (
        PointCloud(cloud.xyz[safe_mask], cloud.frame),
        PointCloud(cloud.xyz[unsafe_mask], cloud.frame),
    )


def corrupt_labels(labels: LabelImage, rate: float, rng: np.random.Generator) -> LabelImage:
    """Flip a fraction of pixels to a uniformly random *different* class.

    Stands in for segmentation errors; `rate` = 0 returns the input unchanged.
    """
    if not 0 <= rate <= 1:
        raise ValueError("corruption rate must lie in [0, 1]")
    if rate == 0 or labels.labels.size == 0:
        return labels
    flat = labels.labels.reshape(-1).copy()
    n_flip = int(round(rate * flat.size))
    if n_flip == 0:
        return labels
    idx = rng.choice(flat.size, size=n_flip, replace=False)
    # Adding 1..10 mod 11 guarantees a different class, uniformly.
    offsets = rng.integers(1, NUM_CLASSES, size=n_flip)
    flat[idx] = (flat[idx].astype(np.int64) + offsets) % NUM_CLASSES
    return LabelImage(flat.reshape(labels.labels.shape))

"""On-disk dataset layout and loaders for the processing pipeline.

A dataset directory looks like:

    dataset/
      intrinsics.txt       fx= fy= cx= cy= width= height= [baseline=]
                           [sl_to_rgb=r00 r01 r02 r10 .. r22 tx ty tz]
      classes.txt          id=name lines (11 classes) plus safe=<ids>
      truth.pgm, truth.hdr optional ground-truth map (simulated datasets)
      000000/
        depth.pgm          16-bit PGM, millimeters, 0 = invalid
        labels.pgm         8-bit PGM, pixel value = class id
        pose.txt           t=<seconds> pose=<12 numbers, camera-to-world>
      000001/ ...

Map images (map.pgm / truth.pgm) carry a sidecar .hdr with
origin_x= origin_y= resolution=.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import formats
from .formats import ParseError, fmt
from .geometry import (
    CameraIntrinsics,
    DepthImage,
    KIND_DEPTH,
    RigidTransform,
)
from .grid import ClassGrid
from .semantics import ClassTable, LabelImage

MM_PER_M = 1000.0
DEPTH_MAX_MM = 65535


@dataclass(frozen=True)
class FrameBundle:
    """One timestamped observation: depth, labels, camera pose, camera model."""

    t: float
    depth: DepthImage
    labels: LabelImage
    pose: RigidTransform  # camera-to-world
    intrinsics: CameraIntrinsics


# -- depth and label images ------------------------------------------------


def depth_to_pgm_array(depth: DepthImage) -> np.ndarray:
    if depth.kind != KIND_DEPTH:
        raise ValueError("only metric depth images are stored as PGM")
    mm = np.round(depth.values * MM_PER_M)
    # a valid sub-half-millimeter depth must not quantize into the 0 sentinel
    mm[(depth.values > 0) & (mm < 1)] = 1
    if (mm > DEPTH_MAX_MM).any():
        raise ValueError(f"depth exceeds the {DEPTH_MAX_MM} mm PGM range")
    return mm.astype(np.uint16)


def save_depth_pgm(path: str | os.PathLike, depth: DepthImage) -> None:
    formats.write_pgm(path, depth_to_pgm_array(depth))


def load_depth_pgm(path: str | os.PathLike) -> DepthImage:
    arr = formats.read_pgm(path)
    if arr.dtype != np.uint16:
        raise ParseError(f"{path}: depth PGM must be 16-bit")
    return DepthImage(arr.astype(float) / MM_PER_M, KIND_DEPTH)


def save_label_pgm(path: str | os.PathLike, labels: LabelImage) -> None:
    formats.write_pgm(path, labels.labels)


def load_label_pgm(path: str | os.PathLike) -> LabelImage:
    arr = formats.read_pgm(path)
    if arr.dtype != np.uint8:
        raise ParseError(f"{path}: label PGM must be 8-bit")
    try:
        return LabelImage(arr)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


# -- transforms and intrinsics ----------------------------------------------


def format_transform(xform: RigidTransform) -> str:
    vals = list(xform.rotation.reshape(-1)) + list(xform.translation)
    return " ".join(repr(float(v)) for v in vals)


def parse_transform(text: str, source: str = "<text>") -> RigidTransform:
    parts = text.split()
    if len(parts) != 12:
        raise ParseError(f"{source}: transform needs 12 numbers, got {len(parts)}")
    try:
        vals = [float(p) for p in parts]
    except ValueError as exc:
        raise ParseError(f"{source}: non-numeric transform entry") from exc
    try:
        return RigidTransform(np.array(vals[:9]).reshape(3, 3), np.array(vals[9:]))
    except ValueError as exc:
        raise ParseError(f"{source}: {exc}") from exc


def save_intrinsics(
    path: str | os.PathLike,
    intr: CameraIntrinsics,
    baseline: float | None = None,
    sl_to_rgb: RigidTransform | None = None,
) -> None:
    items = {
        "fx": repr(intr.fx),
        "fy": repr(intr.fy),
        "cx": repr(intr.cx),
        "cy": repr(intr.cy),
        "width": str(intr.width),
        "height": str(intr.height),
    }
    if baseline is not None:
        items["baseline"] = repr(baseline)
    if sl_to_rgb is not None:
        items["sl_to_rgb"] = format_transform(sl_to_rgb)
    formats.write_kv(path, items)


def load_intrinsics(
    path: str | os.PathLike,
) -> tuple[CameraIntrinsics, float | None, RigidTransform | None]:
    """Returns (intrinsics, baseline or None, stereo-left-to-rgb or None)."""
    kv = formats.read_kv(path)
    try:
        intr = CameraIntrinsics(
            fx=float(kv["fx"]),
            fy=float(kv["fy"]),
            cx=float(kv["cx"]),
            cy=float(kv["cy"]),
            width=int(kv["width"]),
            height=int(kv["height"]),
        )
    except KeyError as exc:
        raise ParseError(f"{path}: missing intrinsics key {exc}") from exc
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    baseline = float(kv["baseline"]) if "baseline" in kv else None
    xform = parse_transform(kv["sl_to_rgb"], str(path)) if "sl_to_rgb" in kv else None
    return intr, baseline, xform


def save_pose(path: str | os.PathLike, t: float, pose: RigidTransform) -> None:
    formats.write_kv(path, {"t": repr(float(t)), "pose": format_transform(pose)})


def load_pose(path: str | os.PathLike) -> tuple[float, RigidTransform]:
    kv = formats.read_kv(path)
    if "pose" not in kv:
        raise ParseError(f"{path}: missing pose= entry")
    t = float(kv.get("t", 0.0))
    return t, parse_transform(kv["pose"], str(path))


# -- class table -------------------------------------------------------------


def save_class_table(path: str | os.PathLike, table: ClassTable) -> None:
    items = {str(cid): table.entries[cid] for cid in sorted(table.entries)}
    items["safe"] = " ".join(str(c) for c in sorted(table.safe_set))
    formats.write_kv(path, items)


def load_class_table(path: str | os.PathLike) -> ClassTable:
    entries: dict[int, str] = {}
    safe: set[int] = set()
    for lineno, key, value in formats.read_kv_lines(path):
        if key == "safe":
            try:
                safe = {int(tok) for tok in re.split(r"[,\s]+", value) if tok}
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad safe id list") from exc
        else:
            try:
                entries[int(key)] = value
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: class id must be an integer") from exc
    try:
        return ClassTable(entries, frozenset(safe))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


# -- classified maps ---------------------------------------------------------


def header_path(pgm_path: str | os.PathLike) -> Path:
    return Path(pgm_path).with_suffix(".hdr")


def save_class_grid(pgm_path: str | os.PathLike, cg: ClassGrid, image: np.ndarray | None = None) -> None:
    """Write map.pgm plus its georeferencing sidecar map.hdr.

    `image` overrides the byte image (used for annotated maps).
    """
    formats.write_pgm(pgm_path, cg.classes if image is None else image)
    formats.write_kv(
        header_path(pgm_path),
        {
            "origin_x": fmt(cg.origin[0]),
            "origin_y": fmt(cg.origin[1]),
            "resolution": fmt(cg.resolution),
        },
    )


_MAP_BYTES = (0, 64, 128, 255)


def load_class_grid(
    pgm_path: str | os.PathLike, hdr_path: str | os.PathLike | None = None
) -> ClassGrid:
    arr = formats.read_pgm(pgm_path)
    if arr.dtype != np.uint8:
        raise ParseError(f"{pgm_path}: map PGM must be 8-bit")
    if arr.size and not np.isin(arr, _MAP_BYTES).all():
        raise ParseError(f"{pgm_path}: map bytes must be one of {_MAP_BYTES}")
    arr = arr.copy()
    arr[arr == 64] = 0  # annotated landing cell is a safe cell
    hdr = formats.read_kv(hdr_path if hdr_path is not None else header_path(pgm_path))
    try:
        return ClassGrid(
            arr,
            (float(hdr["origin_x"]), float(hdr["origin_y"])),
            float(hdr["resolution"]),
        )
    except KeyError as exc:
        raise ParseError(f"{pgm_path}: header missing key {exc}") from exc


# -- frames ------------------------------------------------------------------

_FRAME_DIR = re.compile(r"^\d{6}$")


def frame_dir_name(index: int) -> str:
    return f"{index:06d}"


def list_frame_dirs(dataset_dir: str | os.PathLike) -> list[Path]:
    root = Path(dataset_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    return sorted(p for p in root.iterdir() if p.is_dir() and _FRAME_DIR.match(p.name))


def save_frame(frame_dir: str | os.PathLike, bundle: FrameBundle) -> None:
    d = Path(frame_dir)
    d.mkdir(parents=True, exist_ok=True)
    save_depth_pgm(d / "depth.pgm", bundle.depth)
    save_label_pgm(d / "labels.pgm", bundle.labels)
    save_pose(d / "pose.txt", bundle.t, bundle.pose)


def load_frame(frame_dir: str | os.PathLike, intrinsics: CameraIntrinsics) -> FrameBundle:
    d = Path(frame_dir)
    for name in ("depth.pgm", "labels.pgm", "pose.txt"):
        if not (d / name).is_file():
            raise FileNotFoundError(f"missing frame file: {d / name}")
    depth = load_depth_pgm(d / "depth.pgm")
    labels = load_label_pgm(d / "labels.pgm")
    t, pose = load_pose(d / "pose.txt")
    return FrameBundle(t, depth, labels, pose, intrinsics)


def save_xyz(path: str | os.PathLike, xyz: np.ndarray) -> None:
    """ASCII XYZ dump: one `x y z` line per point."""
    pts = np.asarray(xyz, dtype=float).reshape(-1, 3)
    with open(path, "w") as fh:
        for x, y, z in pts:
            fh.write(f"{fmt(x)} {fmt(y)} {fmt(z)}\n")

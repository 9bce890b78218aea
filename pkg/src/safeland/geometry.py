"""Camera models, rigid transforms, and conversions between image space and 3D space.

Conventions:
  - Pixel centers sit at integer coordinates; (u, v) = (column, row).
  - Depth is the distance along the optical axis (camera z), in meters.
  - Invalid depth is encoded as exactly 0; negative values are rejected.
  - Clouds carry a frame tag ("stereo-left", "rgb" or "world").
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FRAME_STEREO_LEFT = "stereo-left"
FRAME_RGB = "rgb"
FRAME_WORLD = "world"

KIND_DEPTH = "metric-depth"
KIND_DISPARITY = "disparity"

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters: focal lengths and principal point, in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """SE(3) transform: p_out = rotation @ p_in + translation."""

    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=float).reshape(3, 3)
        trans = np.array(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)
        if not np.allclose(rot.T @ rot, np.eye(3), rtol=0.0, atol=_ORTHO_TOL):
            raise ValueError("rotation matrix is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation matrix must have determinant +1")
        if not np.isfinite(trans).all():
            raise ValueError("translation must be finite")

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def inverse(self) -> "RigidTransform":
        rot_inv = self.rotation.T
        return RigidTransform(rot_inv, -rot_inv @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform equal to applying `other` first, then `self`."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to one (3,) point or an (N, 3) array of points."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def matrix(self) -> np.ndarray:
        mat = np.eye(4)
        mat[:3, :3] = self.rotation
        mat[:3, 3] = self.translation
        return mat


@dataclass(frozen=True, eq=False)
class PointCloud:
    """3D points (N, 3) in a named reference frame."""

    xyz: np.ndarray
    frame: str

    def __post_init__(self):
        pts = np.asarray(self.xyz, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "xyz", pts)
        if not self.frame:
            raise ValueError("point cloud requires a frame tag")
        if pts.size and not np.isfinite(pts).all():
            raise ValueError("point cloud contains non-finite coordinates")

    def __len__(self) -> int:
        return self.xyz.shape[0]

    @staticmethod
    def empty(frame: str) -> "PointCloud":
        return PointCloud(np.empty((0, 3)), frame)


@dataclass(frozen=True, eq=False)
class DepthImage:
    """Per-pixel depth (meters) or disparity (pixels); 0 marks invalid pixels."""

    values: np.ndarray  # (height, width)
    kind: str = KIND_DEPTH

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValueError("depth image must be a 2D array")
        object.__setattr__(self, "values", vals)
        if self.kind not in (KIND_DEPTH, KIND_DISPARITY):
            raise ValueError(f"unknown depth image kind: {self.kind!r}")
        if vals.size and (not np.isfinite(vals).all() or (vals < 0).any()):
            raise ValueError("depth values must be finite and non-negative")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def disparity_to_depth(
    disp: DepthImage, intrinsics: CameraIntrinsics, baseline: float
) -> DepthImage:
    """Convert a disparity image to metric depth via z = fx * baseline / d.

    Zero-disparity pixels stay invalid (depth 0).
    """
    if disp.kind != KIND_DISPARITY:
        raise ValueError("input image kind must be 'disparity'")
    if baseline <= 0:
        raise ValueError("baseline must be positive")
    depth = np.zeros_like(disp.values)
    valid = disp.values > 0
    depth[valid] = intrinsics.fx * baseline / disp.values[valid]
    return DepthImage(depth, KIND_DEPTH)


def depth_to_cloud(depth: DepthImage, intrinsics: CameraIntrinsics) -> PointCloud:
    """Back-project every valid pixel into the stereo-left camera frame.

    x = (u - cx) * z / fx, y = (v - cy) * z / fy, z = depth(u, v).
    Points come out in row-major pixel order.
    """
    if depth.kind != KIND_DEPTH:
        raise ValueError("depth image kind must be 'metric-depth'")
    if depth.width != intrinsics.width or depth.height != intrinsics.height:
        raise ValueError(
            f"depth image {depth.width}x{depth.height} does not match "
            f"intrinsics {intrinsics.width}x{intrinsics.height}"
        )
    v, u = np.nonzero(depth.values > 0)
    z = depth.values[v, u]
    x = (u - intrinsics.cx) * z / intrinsics.fx
    y = (v - intrinsics.cy) * z / intrinsics.fy
    return PointCloud(np.column_stack([x, y, z]), FRAME_STEREO_LEFT)


def project_points(
    xyz: np.ndarray, intrinsics: CameraIntrinsics, xform: RigidTransform
) -> tuple[np.ndarray, np.ndarray]:
    """Project (N, 3) points; returns ((N, 2) sub-pixel uv, (N,) in-frame mask).

    A point is out of frame when its depth after the transform is <= 0 or the
    projected coordinate falls outside [0, width) x [0, height).
    """
    pts = xform.apply(np.asarray(xyz, dtype=float).reshape(-1, 3))
    w = pts[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intrinsics.fx * pts[:, 0] / w + intrinsics.cx
        v = intrinsics.fy * pts[:, 1] / w + intrinsics.cy
    uv = np.column_stack([u, v])
    valid = (
        (w > 0)
        & (u >= 0)
        & (u < intrinsics.width)
        & (v >= 0)
        & (v < intrinsics.height)
    )
    return uv, valid


def project_point(
    p, intrinsics: CameraIntrinsics, xform: RigidTransform
) -> tuple[float, float] | None:
    """Project a single point; None when it lands out of frame."""
    uv, valid = project_points(np.asarray(p, dtype=float).reshape(1, 3), intrinsics, xform)
    if not valid[0]:
        return None
    return float(uv[0, 0]), float(uv[0, 1])


def transform_cloud(
    cloud: PointCloud, xform: RigidTransform, target_frame: str
) -> PointCloud:
    """Apply a rigid transform to every point and retag the cloud's frame."""
    return PointCloud(xform.apply(cloud.xyz), target_frame)

"""Point-cloud conditioning and plane-based safety classification.

The conditioning chain (voxel downsample -> statistical outlier removal ->
moving-least-squares smoothing) cleans the back-projected cloud before planes
are extracted. A point is geometrically landable when it is an inlier of a
fitted plane whose inclination against gravity stays below the slope limit
and whose distance to that plane stays below the roughness limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import PointCloud


@dataclass(frozen=True, eq=False)
class PlaneModel:
    """Normalized plane a*x + b*y + c*z + d = 0 with its inlier set.

    The normal is unit length and oriented so that c >= 0, which makes the
    inclination `slope_deg` (angle between the normal and world +z) well
    defined in [0, 90] degrees.
    """

    a: float
    b: float
    c: float
    d: float
    inlier_indices: np.ndarray
    slope_deg: float

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    @staticmethod
    def from_coefficients(coeffs, inlier_indices=None) -> "PlaneModel":
        """Build a model from raw (a, b, c, d), normalizing and orienting it."""
        a, b, c, d = (float(x) for x in coeffs)
        norm = math.sqrt(a * a + b * b + c * c)
        if norm < 1e-12:
            raise ValueError("degenerate plane: zero normal")
        a, b, c, d = a / norm, b / norm, c / norm, d / norm
        if c < 0 or (c == 0 and (b < 0 or (b == 0 and a < 0))):
            a, b, c, d = -a, -b, -c, -d
        slope = math.degrees(math.acos(min(1.0, abs(c))))
        if inlier_indices is None:
            inlier_indices = np.empty(0, dtype=np.int64)
        return PlaneModel(a, b, c, d, np.asarray(inlier_indices, dtype=np.int64), slope)


@dataclass(frozen=True)
class PipelineParams:
    """Knobs for the conditioning chain and the slope/roughness gates."""

    leaf_size: float = 0.1
    sor_neighbors: int = 20
    sor_std_mult: float = 1.0
    mls_radius: float = 0.3
    ransac_dist: float = 0.05
    ransac_iters: int = 200
    slope_max_deg: float = 15.0
    rough_max: float = 0.05
    min_plane_points: int = 30

    def __post_init__(self):
        for name in (
            "leaf_size",
            "sor_neighbors",
            "sor_std_mult",
            "mls_radius",
            "ransac_dist",
            "ransac_iters",
            "slope_max_deg",
            "rough_max",
            "min_plane_points",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.slope_max_deg >= 90:
            raise ValueError("slope_max_deg must be below 90")


def voxel_downsample(cloud: PointCloud, leaf_size: float) -> PointCloud:
    """Keep one point per occupied cubic voxel: the centroid of its members.

    Voxel index of a point is floor(p / leaf_size) componentwise.
    """
    if leaf_size <= 0:
        raise ValueError("leaf_size must be positive")
    if len(cloud) == 0:
        return cloud
    idx = np.floor(cloud.xyz / leaf_size).astype(np.int64)
    rel = idx - idx.min(axis=0)
    if rel.max(initial=0) < (1 << 21):
        keys = (rel[:, 0] << 42) | (rel[:, 1] << 21) | rel[:, 2]
        _, inverse = np.unique(keys, return_inverse=True)
    else:
        _, inverse = np.unique(idx, axis=0, return_inverse=True)
    n_voxels = int(inverse.max()) + 1
    counts = np.bincount(inverse, minlength=n_voxels).astype(float)
    centroids = np.column_stack(
        [np.bincount(inverse, weights=cloud.xyz[:, k], minlength=n_voxels) for k in range(3)]
    )
    return PointCloud(centroids / counts[:, None], cloud.frame)


def statistical_outlier_removal(cloud: PointCloud, k: int, std_mult: float) -> PointCloud:
    """Drop points whose mean k-nearest-neighbor distance is anomalously large.

    The threshold is mean + std_mult * std over the per-point mean distances.
    Clouds with at most k points pass through unchanged.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    n = len(cloud)
    if n <= k:
        return cloud
    tree = cKDTree(cloud.xyz)
    dists, _ = tree.query(cloud.xyz, k=k + 1)  # column 0 is the point itself
    mean_d = dists[:, 1:].mean(axis=1)
    thresh = mean_d.mean() + std_mult * mean_d.std()
    return PointCloud(cloud.xyz[mean_d <= thresh], cloud.frame)


def mls_smooth(cloud: PointCloud, radius: float) -> PointCloud:
    """Project each point onto the least-squares plane of its radius neighborhood.

    The neighborhood includes the point itself; points with fewer than 3
    neighbors (or a degenerate, collinear neighborhood) pass through unchanged.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    n = len(cloud)
    if n < 3:
        return cloud
    center = cloud.xyz.mean(axis=0)
    pts = cloud.xyz - center
    tree = cKDTree(pts)
    pairs = tree.query_pairs(radius, output_type="ndarray")

    # Neighborhood first and second moments, accumulated symmetrically over
    # the pair list (bincount is far cheaper than per-point neighbor loops).
    counts = np.ones(n)
    sums = pts.copy()
    outers = pts[:, :, None] * pts[:, None, :]
    if pairs.size:
        dst = np.concatenate([pairs[:, 0], pairs[:, 1]])
        src = np.concatenate([pairs[:, 1], pairs[:, 0]])
        counts += np.bincount(dst, minlength=n)
        for k in range(3):
            sums[:, k] += np.bincount(dst, weights=pts[src, k], minlength=n)
        for k in range(3):
            for l in range(k, 3):
                acc = np.bincount(dst, weights=pts[src, k] * pts[src, l], minlength=n)
                outers[:, k, l] += acc
                if l != k:
                    outers[:, l, k] += acc

    mu = sums / counts[:, None]
    cov = outers / counts[:, None, None] - mu[:, :, None] * mu[:, None, :]
    eligible = counts >= 3
    out = pts.copy()
    if eligible.any():
        eigvals, eigvecs = np.linalg.eigh(cov[eligible])
        normals = eigvecs[:, :, 0]  # eigenvector of the smallest eigenvalue
        planar = eigvals[:, 1] > 1e-12  # collinear neighborhoods have two ~0 eigenvalues
        sel = np.flatnonzero(eligible)[planar]
        if sel.size:
            nrm = normals[planar]
            offset = np.einsum("ij,ij->i", pts[sel] - mu[sel], nrm)
            out[sel] = pts[sel] - offset[:, None] * nrm
    return PointCloud(out + center, cloud.frame)


def point_plane_distance(p, plane) -> float:
    """Perpendicular distance |a*x + b*y + c*z + d| / ||(a, b, c)||.

    `plane` is a PlaneModel or a raw (a, b, c, d) sequence (normalization is
    not required).
    """
    if isinstance(plane, PlaneModel):
        coeffs = np.array([plane.a, plane.b, plane.c, plane.d])
    else:
        coeffs = np.asarray(plane, dtype=float).reshape(4)
    norm = np.linalg.norm(coeffs[:3])
    if norm < 1e-12:
        raise ValueError("degenerate plane: zero normal")
    x, y, z = np.asarray(p, dtype=float).reshape(3)
    return float(abs(coeffs[0] * x + coeffs[1] * y + coeffs[2] * z + coeffs[3]) / norm)


def plane_slope(plane: PlaneModel) -> float:
    """Inclination in degrees: angle between the plane normal and world +z."""
    return math.degrees(math.acos(min(1.0, abs(plane.c))))


def _plane_distances(xyz: np.ndarray, a: float, b: float, c: float, d: float) -> np.ndarray:
    return np.abs(xyz @ np.array([a, b, c]) + d)


def _least_squares_plane(xyz: np.ndarray) -> tuple[float, float, float, float]:
    """Total-least-squares plane through a point set (>= 3 points)."""
    centroid = xyz.mean(axis=0)
    centered = xyz - centroid
    cov = centered.T @ centered
    _, eigvecs = np.linalg.eigh(cov)
    normal = eigvecs[:, 0]
    d = -float(normal @ centroid)
    return float(normal[0]), float(normal[1]), float(normal[2]), d


def ransac_plane(
    cloud: PointCloud,
    dist_thresh: float,
    iters: int,
    seed: int,
    min_points: int = 3,
) -> PlaneModel | None:
    """RANSAC plane fit: repeated 3-point sampling, inlier counting, LS refit.

    Inliers are points within dist_thresh of the plane. The best consensus is
    refined by a total-least-squares fit over its inliers, and the inlier set
    is recomputed against the refined plane. Returns None when the cloud has
    fewer than max(3, min_points) points or no non-degenerate sample is found.
    """
    if dist_thresh <= 0:
        raise ValueError("dist_thresh must be positive")
    if iters < 1:
        raise ValueError("iters must be at least 1")
    n = len(cloud)
    if n < 3 or n < min_points:
        return None
    xyz = cloud.xyz
    rng = np.random.default_rng(seed)

    best_count = 0
    best = None
    for _ in range(iters):
        i0, i1, i2 = rng.choice(n, size=3, replace=False)
        p0 = xyz[i0]
        normal = np.cross(xyz[i1] - p0, xyz[i2] - p0)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:  # collinear sample
            continue
        normal = normal / norm
        d = -float(normal @ p0)
        count = int((_plane_distances(xyz, *normal, d) <= dist_thresh).sum())
        if count > best_count:
            best_count = count
            best = (float(normal[0]), float(normal[1]), float(normal[2]), d)
    if best is None:
        return None

    mask = _plane_distances(xyz, *best) <= dist_thresh
    if mask.sum() >= 3:
        refined = _least_squares_plane(xyz[mask])
    else:
        refined = best
    inliers = np.flatnonzero(_plane_distances(xyz, *refined) <= dist_thresh)
    if inliers.size < 3:
        return None
    return PlaneModel.from_coefficients(refined, inliers)


def extract_planes(
    cloud: PointCloud, params: PipelineParams, seed: int
) -> tuple[list[tuple[PlaneModel, np.ndarray]], np.ndarray]:
    """Iteratively extract planes, removing each plane's inliers.

    Returns (list of (plane, indices into `cloud`), residual indices). Stops
    when no plane is found or the best plane's support drops below
    min_plane_points.
    """
    remaining = np.arange(len(cloud))
    planes: list[tuple[PlaneModel, np.ndarray]] = []
    round_idx = 0
    while remaining.size >= params.min_plane_points:
        sub = PointCloud(cloud.xyz[remaining], cloud.frame)
        plane = ransac_plane(
            sub,
            params.ransac_dist,
            params.ransac_iters,
            seed + round_idx,
            min_points=params.min_plane_points,
        )
        if plane is None or plane.inlier_indices.size < params.min_plane_points:
            break
        global_inliers = remaining[plane.inlier_indices]
        planes.append((plane, global_inliers))
        remaining = np.setdiff1d(remaining, global_inliers, assume_unique=True)
        round_idx += 1
    return planes, remaining


def classify_cloud(
    cloud: PointCloud, params: PipelineParams, seed: int
) -> tuple[PointCloud, PointCloud]:
    """Split a world-frame cloud into landable and non-landable points.

    Inliers of planes inclined at most slope_max_deg and within rough_max of
    their plane are landable; steeper planes' inliers, rough inliers, and all
    residual points are not. The outputs partition the input.
    """
    planes, residual = extract_planes(cloud, params, seed)
    safe_parts = []
    unsafe_parts = [residual]
    for plane, indices in planes:
        if plane.slope_deg <= params.slope_max_deg:
            dists = _plane_distances(cloud.xyz[indices], plane.a, plane.b, plane.c, plane.d)
            smooth = dists <= params.rough_max
            safe_parts.append(indices[smooth])
            unsafe_parts.append(indices[~smooth])
        else:
            unsafe_parts.append(indices)
    safe_idx = np.sort(np.concatenate(safe_parts)) if safe_parts else np.empty(0, dtype=np.int64)
    unsafe_idx = np.sort(np.concatenate(unsafe_parts))
    return (
        PointCloud(cloud.xyz[safe_idx], cloud.frame),
        PointCloud(cloud.xyz[unsafe_idx], cloud.frame),
    )


def condition_cloud(cloud: PointCloud, params: PipelineParams) -> PointCloud:
    """Full conditioning chain: voxel downsample, outlier removal, MLS smoothing."""
    out = voxel_downsample(cloud, params.leaf_size)
    out = statistical_outlier_removal(out, params.sor_neighbors, params.sor_std_mult)
    return mls_smooth(out, params.mls_radius)

"""Landing site selection: all-safe patch search and cost-based ranking.

A candidate patch is a square window of Safe cells large enough for the drone
plus a safety margin. Each candidate is scored as

    cost = alpha * J_d + beta / J_un

where J_d is the 3D Euclidean distance from the drone to the patch center at
ground level and J_un is the clearance: the distance from the patch center to
the nearest non-safe (Unsafe or Unknown) cell. The lowest cost wins; higher
alpha favors nearby sites, higher beta favors obstacle clearance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import CellClass, ClassGrid


@dataclass(frozen=True, eq=False)
class DroneState:
    position: np.ndarray  # world (x, y, z), meters
    yaw: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        object.__setattr__(self, "position", pos)
        if not (np.isfinite(pos).all() and math.isfinite(self.yaw)):
            raise ValueError("drone state must be finite")


@dataclass(frozen=True)
class SelectorConfig:
    alpha: float = 0.65
    beta: float = 0.35
    drone_diameter: float = 0.27
    patch_scale: float = 1.85
    clearance_cap: float = 5.0

    def __post_init__(self):
        if not (0 <= self.alpha <= 1 and 0 <= self.beta <= 1):
            raise ValueError("alpha and beta must lie in [0, 1]")
        if abs(self.alpha + self.beta - 1.0) > 1e-9:
            raise ValueError("alpha + beta must equal 1")
        if self.drone_diameter <= 0 or self.patch_scale <= 0 or self.clearance_cap <= 0:
            raise ValueError("drone_diameter, patch_scale and clearance_cap must be positive")

    def patch_side(self, resolution: float) -> int:
        """Patch side in cells: ceil(patch_scale * drone_diameter / resolution)."""
        return max(1, int(math.ceil(self.patch_scale * self.drone_diameter / resolution - 1e-9)))


@dataclass(frozen=True)
class LandingPatch:
    center_cell: tuple[int, int]  # (ix, iy)
    center_world: tuple[float, float]
    j_d: float
    j_un: float
    cost: float


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    z: float
    yaw: float


def clearance_transform(cg: ClassGrid, clearance_cap: float) -> np.ndarray:
    """Per-cell distance (meters, cell center to cell center) to the nearest
    non-safe cell, capped at clearance_cap. Non-safe cells get 0; a grid with
    no non-safe cells gets the cap everywhere."""
    if cg.classes.size == 0:
        return np.zeros(cg.classes.shape)
    safe = cg.classes == CellClass.SAFE
    if safe.all():
        return np.full(cg.classes.shape, float(clearance_cap))
    dist = ndimage.distance_transform_edt(safe, sampling=cg.resolution)
    return np.minimum(dist, clearance_cap)


def find_patches(cg: ClassGrid, cfg: SelectorConfig) -> list[tuple[int, int]]:
    """Centers (ix, iy) of every patch_side x patch_side all-Safe window.

    Uses a summed-area table, so the scan is O(cells). The center of a window
    anchored at (c0, r0) is (c0 + side // 2, r0 + side // 2).
    """
    side = cfg.patch_side(cg.resolution)
    rows, cols = cg.classes.shape
    if rows < side or cols < side:
        return []
    safe = (cg.classes == CellClass.SAFE).astype(np.int64)
    sat = np.zeros((rows + 1, cols + 1), dtype=np.int64)
    np.cumsum(np.cumsum(safe, axis=0), axis=1, out=sat[1:, 1:])
    window = (
        sat[side:, side:]
        - sat[:-side, side:]
        - sat[side:, :-side]
        + sat[:-side, :-side]
    )
    r0, c0 = np.nonzero(window == side * side)
    half = side // 2
    return [(int(c + half), int(r + half)) for r, c in zip(r0, c0)]


def patch_cost(
    center: tuple[int, int],
    drone: DroneState,
    cg: ClassGrid,
    clearance: np.ndarray,
    cfg: SelectorConfig,
) -> LandingPatch:
    """Score one candidate center; the landing point is taken at ground z = 0."""
    ix, iy = center
    j_un = float(clearance[iy, ix])
    if j_un <= 0:
        raise RuntimeError("candidate patch center touches a non-safe cell")
    cx, cy = cg.cell_center(ix, iy)
    j_d = float(np.linalg.norm(drone.position - np.array([cx, cy, 0.0])))
    cost = cfg.alpha * j_d + cfg.beta / j_un
    return LandingPatch((ix, iy), (cx, cy), j_d, j_un, cost)


def select_landing_site(
    cg: ClassGrid,
    drone: DroneState,
    cfg: SelectorConfig,
    clearance: np.ndarray | None = None,
) -> LandingPatch | None:
    """Lowest-cost patch over the whole map, or None when no patch exists.

    Ties break toward the smaller J_d, then row-major cell order.
    """
    centers = find_patches(cg, cfg)
    if not centers:
        return None
    if clearance is None:
        clearance = clearance_transform(cg, cfg.clearance_cap)
    best = None
    best_key = None
    for ix, iy in centers:
        patch = patch_cost((ix, iy), drone, cg, clearance, cfg)
        key = (patch.cost, patch.j_d, iy, ix)
        if best_key is None or key < best_key:
            best, best_key = patch, key
    return best


def landing_waypoints(drone: DroneState, site: LandingPatch) -> list[Waypoint]:
    """Two-step landing: move above the site at the current altitude, then descend."""
    x, y = site.center_world
    z = float(drone.position[2])
    return [Waypoint(x, y, z, drone.yaw), Waypoint(x, y, 0.0, drone.yaw)]


ANNOTATION_BYTE = 64


def annotate_map(cg: ClassGrid, site: LandingPatch) -> np.ndarray:
    """Copy of the class image with the selected center cell marked (byte 64)."""
    out = cg.classes.copy()
    ix, iy = site.center_cell
    out[iy, ix] = ANNOTATION_BYTE
    return out

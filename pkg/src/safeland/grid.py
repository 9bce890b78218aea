"""Growing 2D occupancy grid over world x-y with per-cell landing-safety log-odds.

Cell probability follows the standard log-odds update: p = 1 - 1/(1 + exp(L)).
Each frame contributes at most one hit and one miss per cell so that point
density (which depends only on viewing distance) cannot inflate confidence.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass

import numpy as np

from .geometry import PointCloud


class CellClass(enum.IntEnum):
    """Cell classification; values double as export byte values."""

    SAFE = 0
    UNSAFE = 128
    UNKNOWN = 255


@dataclass(frozen=True)
class GridParams:
    """Log-odds increments, clamping bounds, and classification thresholds."""

    l_hit: float = 0.85
    l_miss: float = -0.4
    l_min: float = -2.0
    l_max: float = 3.5
    p_safe: float = 0.95
    p_unsafe: float = 0.3

    def __post_init__(self):
        if not self.l_miss < 0 < self.l_hit:
            raise ValueError("require l_miss < 0 < l_hit")
        if not self.l_min < 0 < self.l_max:
            raise ValueError("require l_min < 0 < l_max")
        if not 0.5 < self.p_safe <= 1:
            raise ValueError("require 0.5 < p_safe <= 1")
        if not 0 <= self.p_unsafe < 0.5:
            raise ValueError("require 0 <= p_unsafe < 0.5")


@dataclass(frozen=True)
class CellState:
    log_odds: float
    observed: bool


def probability_from_log_odds(log_odds) -> np.ndarray | float:
    return 1.0 - 1.0 / (1.0 + np.exp(log_odds))


@dataclass(frozen=True, eq=False)
class ClassGrid:
    """Immutable classified grid: one CellClass byte per cell plus georeferencing.

    `origin` is the world (x, y) of the corner of cell (0, 0); cell (ix, iy)
    is stored at classes[iy, ix].
    """

    classes: np.ndarray  # (rows, cols) uint8
    origin: tuple[float, float]
    resolution: float

    def __post_init__(self):
        arr = np.asarray(self.classes, dtype=np.uint8)
        if arr.ndim != 2:
            raise ValueError("class grid must be a 2D array")
        object.__setattr__(self, "classes", arr)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")

    @property
    def cols(self) -> int:
        return self.classes.shape[1]

    @property
    def rows(self) -> int:
        return self.classes.shape[0]

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (
            self.origin[0] + (ix + 0.5) * self.resolution,
            self.origin[1] + (iy + 0.5) * self.resolution,
        )

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return (
            int(math.floor((x - self.origin[0]) / self.resolution)),
            int(math.floor((y - self.origin[1]) / self.resolution)),
        )

    def extent(self) -> tuple[float, float, float, float]:
        """(x_min, x_max, y_min, y_max) of the covered area."""
        return (
            self.origin[0],
            self.origin[0] + self.cols * self.resolution,
            self.origin[1],
            self.origin[1] + self.rows * self.resolution,
        )


class GridMap:
    """Variable-dimension grid of log-odds cells, growable in all directions.

    Growth reallocates with a 25% margin beyond the bounding box of all
    evidence and never moves existing cells relative to the world: the origin
    only ever shifts by whole cells. Updates must be serialized (single
    writer); readers should take `snapshot()` copies.
    """

    def __init__(self, resolution: float = 0.1):
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.resolution = float(resolution)
        self._origin_cell = np.zeros(2, dtype=np.int64)  # (cx, cy) in absolute cells
        self.log_odds = np.zeros((0, 0))
        self.observed = np.zeros((0, 0), dtype=bool)
        self._ev_lo = None  # absolute-cell bounding box of all evidence
        self._ev_hi = None
        self.lock = threading.Lock()

    # -- georeferencing ----------------------------------------------------

    @property
    def origin(self) -> tuple[float, float]:
        return (
            float(self._origin_cell[0] * self.resolution),
            float(self._origin_cell[1] * self.resolution),
        )

    @property
    def cols(self) -> int:
        return self.log_odds.shape[1]

    @property
    def rows(self) -> int:
        return self.log_odds.shape[0]

    def _abs_cells(self, xy: np.ndarray) -> np.ndarray:
        # Canonical, origin-independent cell indices: growth can never remap
        # a world coordinate to a different cell.
        return np.floor(np.asarray(xy, dtype=float) / self.resolution).astype(np.int64)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Grid index (ix, iy) of a world point; may lie outside the array."""
        c = self._abs_cells(np.array([[x, y]]))[0] - self._origin_cell
        return int(c[0]), int(c[1])

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        ox, oy = self.origin
        return (ox + (ix + 0.5) * self.resolution, oy + (iy + 0.5) * self.resolution)

    # -- growth ------------------------------------------------------------

    def _ensure_cover(self, cells: np.ndarray) -> None:
        lo = cells.min(axis=0)
        hi = cells.max(axis=0)
        if self._ev_lo is None:
            self._ev_lo, self._ev_hi = lo.copy(), hi.copy()
        else:
            self._ev_lo = np.minimum(self._ev_lo, lo)
            self._ev_hi = np.maximum(self._ev_hi, hi)
        span = self._ev_hi - self._ev_lo + 1
        margin = np.maximum(1, np.ceil(0.25 * span).astype(np.int64))
        want_lo = self._ev_lo - margin
        want_hi = self._ev_hi + margin
        if self.log_odds.size:
            cur_lo = self._origin_cell
            cur_hi = self._origin_cell + np.array([self.cols, self.rows]) - 1
            if (want_lo >= cur_lo).all() and (want_hi <= cur_hi).all():
                return
            want_lo = np.minimum(want_lo, cur_lo)
            want_hi = np.maximum(want_hi, cur_hi)
        shape = (int(want_hi[1] - want_lo[1] + 1), int(want_hi[0] - want_lo[0] + 1))
        new_lo_arr = np.zeros(shape)
        new_obs = np.zeros(shape, dtype=bool)
        if self.log_odds.size:
            off = self._origin_cell - want_lo
            new_lo_arr[off[1] : off[1] + self.rows, off[0] : off[0] + self.cols] = self.log_odds
            new_obs[off[1] : off[1] + self.rows, off[0] : off[0] + self.cols] = self.observed
        self.log_odds = new_lo_arr
        self.observed = new_obs
        self._origin_cell = want_lo

    # -- updates -----------------------------------------------------------

    def update(self, safe: PointCloud, unsafe: PointCloud, params: GridParams) -> None:
        """Apply one frame of evidence.

        Every cell containing at least one safe point gains l_hit, every cell
        containing at least one unsafe point gains l_miss (once each per call,
        regardless of how many points fall inside), clamped to [l_min, l_max].
        """
        parts = [c.xyz[:, :2] for c in (safe, unsafe) if len(c)]
        if not parts:
            return
        self._ensure_cover(self._abs_cells(np.vstack(parts)))
        for cloud_part, delta in ((safe, params.l_hit), (unsafe, params.l_miss)):
            if not len(cloud_part):
                continue
            cells = self._abs_cells(cloud_part.xyz[:, :2]) - self._origin_cell
            flat = np.unique(cells[:, 1] * self.cols + cells[:, 0])
            self.log_odds.flat[flat] = np.clip(
                self.log_odds.flat[flat] + delta, params.l_min, params.l_max
            )
            self.observed.flat[flat] = True

    # -- queries -----------------------------------------------------------

    def _in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.cols and 0 <= iy < self.rows

    def cell_state(self, ix: int, iy: int) -> CellState:
        if not self._in_bounds(ix, iy):
            return CellState(0.0, False)
        return CellState(float(self.log_odds[iy, ix]), bool(self.observed[iy, ix]))

    def probability(self, ix: int, iy: int) -> float:
        """Safety probability of a cell; unobserved (or out-of-bounds) cells are 0.5."""
        state = self.cell_state(ix, iy)
        if not state.observed:
            return 0.5
        return float(probability_from_log_odds(state.log_odds))

    def classify(self, ix: int, iy: int, params: GridParams) -> CellClass:
        state = self.cell_state(ix, iy)
        if not state.observed:
            return CellClass.UNKNOWN
        p = probability_from_log_odds(state.log_odds)
        if p >= params.p_safe:
            return CellClass.SAFE
        if p <= params.p_unsafe:
            return CellClass.UNSAFE
        return CellClass.UNKNOWN

    def class_grid(self, params: GridParams) -> ClassGrid:
        """Classify every cell, cropped to the bounding box of observed cells."""
        if not self.observed.any():
            return ClassGrid(np.zeros((0, 0), dtype=np.uint8), self.origin, self.resolution)
        rows = np.flatnonzero(self.observed.any(axis=1))
        cols = np.flatnonzero(self.observed.any(axis=0))
        r0, r1 = rows[0], rows[-1] + 1
        c0, c1 = cols[0], cols[-1] + 1
        lo = self.log_odds[r0:r1, c0:c1]
        obs = self.observed[r0:r1, c0:c1]
        p = probability_from_log_odds(lo)
        classes = np.full(lo.shape, CellClass.UNKNOWN, dtype=np.uint8)
        classes[obs & (p >= params.p_safe)] = CellClass.SAFE
        classes[obs & (p <= params.p_unsafe)] = CellClass.UNSAFE
        ox, oy = self.origin
        origin = (ox + c0 * self.resolution, oy + r0 * self.resolution)
        return ClassGrid(classes, origin, self.resolution)

    def snapshot(self) -> "GridMap":
        """Deep copy for readers; never reflects a partially applied frame."""
        out = GridMap(self.resolution)
        out._origin_cell = self._origin_cell.copy()
        out.log_odds = self.log_odds.copy()
        out.observed = self.observed.copy()
        out._ev_lo = None if self._ev_lo is None else self._ev_lo.copy()
        out._ev_hi = None if self._ev_hi is None else self._ev_hi.copy()
        return out


def update_grid(grid: GridMap, safe: PointCloud, unsafe: PointCloud, params: GridParams) -> GridMap:
    """Functional wrapper over GridMap.update (mutates and returns `grid`)."""
    grid.update(safe, unsafe, params)
    return grid


def export_map(grid: GridMap, params: GridParams) -> tuple[np.ndarray, dict]:
    """Byte image (0 safe / 128 unsafe / 255 unknown) plus georeferencing header."""
    cg = grid.class_grid(params)
    header = {
        "origin_x": cg.origin[0],
        "origin_y": cg.origin[1],
        "resolution": cg.resolution,
    }
    return cg.classes.copy(), header

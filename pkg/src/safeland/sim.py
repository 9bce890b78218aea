"""Synthetic scenes, flight trajectories, depth/label rendering, map evaluation.

Scenes are a flat floor at z = 0 inside a rectangular extent, populated with
axis-aligned boxes and inclined rectangular ramps. Rendering casts a pinhole
ray per pixel and records the camera-z depth of the first surface hit plus the
class id of that surface, standing in for a real stereo camera and segmentor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataset as dsio
from .dataset import FrameBundle
from .formats import ParseError, fmt, read_kv_lines, write_kv
from .geometry import CameraIntrinsics, DepthImage, KIND_DEPTH, RigidTransform
from .grid import CellClass, ClassGrid, GridMap, GridParams, probability_from_log_odds
from .semantics import BACKGROUND_CLASS, ClassTable, DEFAULT_CLASS_TABLE, LabelImage, NUM_CLASSES

# Camera looks straight down: camera x -> world +x, camera y -> world -y.
CAMERA_DOWN = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])

PATTERN_FIGURE_EIGHT = "figure-eight"
PATTERN_LAWNMOWER = "lawnmower"
PATTERN_HOVER = "hover"


@dataclass(frozen=True)
class Box:
    """Axis-aligned box standing on the floor, z in [0, height]."""

    cx: float
    cy: float
    sx: float
    sy: float
    height: float
    class_id: int

    def bounds(self) -> tuple[float, float, float, float]:
        return (
            self.cx - self.sx / 2,
            self.cx + self.sx / 2,
            self.cy - self.sy / 2,
            self.cy + self.sy / 2,
        )


@dataclass(frozen=True)
class Ramp:
    """Inclined rectangular surface rising along +x from z = 0 at its -x edge."""

    cx: float
    cy: float
    sx: float
    sy: float
    tilt_deg: float
    class_id: int

    def bounds(self) -> tuple[float, float, float, float]:
        return (
            self.cx - self.sx / 2,
            self.cx + self.sx / 2,
            self.cy - self.sy / 2,
            self.cy + self.sy / 2,
        )

    def height_at(self, x: float) -> float:
        return (x - (self.cx - self.sx / 2)) * math.tan(math.radians(self.tilt_deg))

    def max_height(self) -> float:
        return self.sx * math.tan(math.radians(self.tilt_deg))


@dataclass(frozen=True)
class SceneSpec:
    extent: tuple[float, float, float, float]  # (x_min, x_max, y_min, y_max)
    floor_class: int = 0
    obstacles: tuple[Box, ...] = ()
    ramps: tuple[Ramp, ...] = ()
    rng_seed: int = 0

    def __post_init__(self):
        x0, x1, y0, y1 = self.extent
        if not (x1 > x0 and y1 > y0):
            raise ValueError("extent must have positive area")
        if not 0 <= self.floor_class < NUM_CLASSES:
            raise ValueError("floor class id out of range")
        for ramp in self.ramps:
            if not 0 <= ramp.tilt_deg <= 89:
                raise ValueError("ramp tilt must lie in [0, 89] degrees")
        for obj in list(self.obstacles) + list(self.ramps):
            bx0, bx1, by0, by1 = obj.bounds()
            if bx0 < x0 or bx1 > x1 or by0 < y0 or by1 > y1:
                raise ValueError(f"scene object extends outside the extent: {obj}")
            if not 0 <= obj.class_id < NUM_CLASSES:
                raise ValueError("object class id out of range")


class Scene:
    """Queryable surface model: height and class at any (x, y)."""

    def __init__(self, spec: SceneSpec, background_class: int = BACKGROUND_CLASS):
        self.spec = spec
        self.background_class = background_class

    def height_at(self, x: float, y: float) -> float | None:
        """Topmost surface height at (x, y); None outside the extent."""
        x0, x1, y0, y1 = self.spec.extent
        if not (x0 <= x <= x1 and y0 <= y <= y1):
            return None
        h = 0.0
        for box in self.spec.obstacles:
            bx0, bx1, by0, by1 = box.bounds()
            if bx0 <= x <= bx1 and by0 <= y <= by1:
                h = max(h, box.height)
        for ramp in self.spec.ramps:
            bx0, bx1, by0, by1 = ramp.bounds()
            if bx0 <= x <= bx1 and by0 <= y <= by1:
                h = max(h, ramp.height_at(x))
        return h

    def class_at(self, x: float, y: float) -> int:
        """Class of the topmost surface at (x, y); background outside the extent."""
        x0, x1, y0, y1 = self.spec.extent
        if not (x0 <= x <= x1 and y0 <= y <= y1):
            return self.background_class
        best_h, best_c = 0.0, self.spec.floor_class
        for box in self.spec.obstacles:
            bx0, bx1, by0, by1 = box.bounds()
            if bx0 <= x <= bx1 and by0 <= y <= by1 and box.height >= best_h:
                best_h, best_c = box.height, box.class_id
        for ramp in self.spec.ramps:
            bx0, bx1, by0, by1 = ramp.bounds()
            if bx0 <= x <= bx1 and by0 <= y <= by1 and ramp.height_at(x) >= best_h:
                best_h, best_c = ramp.height_at(x), ramp.class_id
        return best_c

    def max_height(self) -> float:
        heights = [b.height for b in self.spec.obstacles]
        heights += [r.max_height() for r in self.spec.ramps]
        return max(heights, default=0.0)


def _rects_overlap(a, b) -> bool:
    ax0, ax1, ay0, ay1 = a
    bx0, bx1, by0, by1 = b
    return ax0 < bx1 - 1e-12 and bx0 < ax1 - 1e-12 and ay0 < by1 - 1e-12 and by0 < ay1 - 1e-12


def build_scene(
    spec: SceneSpec,
    resolution: float = 0.1,
    safety_margin: float = 0.25,
    slope_max_deg: float = 15.0,
    table: ClassTable = DEFAULT_CLASS_TABLE,
) -> tuple[Scene, ClassGrid]:
    """Construct the scene and its ground-truth map on the extent lattice.

    A truth cell is Unsafe when it intersects a hazard footprint inflated by
    `safety_margin`. Hazards are: every box, every ramp steeper than
    slope_max_deg, and every surface whose class is not in the safe set. A
    non-landable floor class makes the whole extent Unsafe.
    """
    hazards = []
    objects = list(spec.obstacles) + list(spec.ramps)
    for i, a in enumerate(objects):
        for b in objects[i + 1 :]:
            if a.class_id != b.class_id and _rects_overlap(a.bounds(), b.bounds()):
                raise ValueError(f"contradictory overlapping scene objects: {a} vs {b}")
    for box in spec.obstacles:
        hazards.append(box.bounds())
    for ramp in spec.ramps:
        if ramp.tilt_deg > slope_max_deg or ramp.class_id not in table.safe_set:
            hazards.append(ramp.bounds())

    x0, x1, y0, y1 = spec.extent
    cols = max(1, int(round((x1 - x0) / resolution)))
    rows = max(1, int(round((y1 - y0) / resolution)))
    labels = np.full((rows, cols), CellClass.SAFE, dtype=np.uint8)
    if spec.floor_class not in table.safe_set:
        labels[:] = CellClass.UNSAFE
    for hx0, hx1, hy0, hy1 in hazards:
        c0 = max(0, int(math.floor((hx0 - safety_margin - x0) / resolution)))
        c1 = min(cols, int(math.ceil((hx1 + safety_margin - x0) / resolution)))
        r0 = max(0, int(math.floor((hy0 - safety_margin - y0) / resolution)))
        r1 = min(rows, int(math.ceil((hy1 + safety_margin - y0) / resolution)))
        labels[r0:r1, c0:c1] = CellClass.UNSAFE
    return Scene(spec), ClassGrid(labels, (x0, y0), resolution)


# -- trajectories -------------------------------------------------------------


@dataclass(frozen=True)
class TrajectorySpec:
    pattern: str = PATTERN_FIGURE_EIGHT
    altitude: float = 3.0
    speed: float = 1.0
    frame_rate: float = 2.0
    duration: float = 60.0
    row_spacing: float = 1.0

    def __post_init__(self):
        if self.pattern not in (PATTERN_FIGURE_EIGHT, PATTERN_LAWNMOWER, PATTERN_HOVER):
            raise ValueError(f"unknown trajectory pattern: {self.pattern!r}")
        if self.frame_rate <= 0 or self.duration <= 0 or self.altitude <= 0:
            raise ValueError("altitude, frame_rate and duration must be positive")
        if self.pattern != PATTERN_HOVER and self.speed <= 0:
            raise ValueError("speed must be positive for moving patterns")
        if self.pattern == PATTERN_LAWNMOWER and self.row_spacing <= 0:
            raise ValueError("row_spacing must be positive")


def _figure_eight_path(extent, samples: int = 4096) -> np.ndarray:
    """Closed Lissajous bowtie (sin s, sin s cos s) scaled to 90% of the extent."""
    x0, x1, y0, y1 = extent
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    ax = 0.45 * (x1 - x0)
    ay = 0.9 * (y1 - y0)
    s = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
    return np.column_stack([cx + ax * np.sin(s), cy + ay * np.sin(s) * np.cos(s)])


def _lawnmower_path(extent, row_spacing: float) -> np.ndarray:
    """Boustrophedon vertices: full-width rows every row_spacing, ends included."""
    x0, x1, y0, y1 = extent
    ys = np.arange(y0, y1 + 1e-9, row_spacing)
    pts = []
    for k, y in enumerate(ys):
        row = [(x0, y), (x1, y)] if k % 2 == 0 else [(x1, y), (x0, y)]
        pts.extend(row)
    return np.array(pts)


def _walk_path(path: np.ndarray, distances: np.ndarray, closed: bool) -> np.ndarray:
    """Positions along a polyline at the given arc-length distances."""
    if closed:
        verts = np.vstack([path, path[:1]])
    else:
        verts = path
    seg = np.linalg.norm(np.diff(verts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if closed:
        distances = np.mod(distances, total)
    else:
        distances = np.clip(distances, 0.0, total)
    idx = np.clip(np.searchsorted(cum, distances, side="right") - 1, 0, len(seg) - 1)
    frac = np.where(seg[idx] > 0, (distances - cum[idx]) / np.where(seg[idx] > 0, seg[idx], 1.0), 0.0)
    return verts[idx] + frac[:, None] * (verts[idx + 1] - verts[idx])


def generate_trajectory(
    spec: TrajectorySpec, extent: tuple[float, float, float, float]
) -> list[tuple[float, RigidTransform]]:
    """Timestamped downward-facing camera poses along the requested pattern."""
    count = int(round(spec.duration * spec.frame_rate))
    times = np.arange(count) / spec.frame_rate
    x0, x1, y0, y1 = extent
    if spec.pattern == PATTERN_HOVER:
        xy = np.tile([(x0 + x1) / 2, (y0 + y1) / 2], (count, 1))
    elif spec.pattern == PATTERN_FIGURE_EIGHT:
        xy = _walk_path(_figure_eight_path(extent), spec.speed * times, closed=True)
    else:
        xy = _walk_path(_lawnmower_path(extent, spec.row_spacing), spec.speed * times, closed=False)
    return [
        (float(t), RigidTransform(CAMERA_DOWN, np.array([x, y, spec.altitude])))
        for t, (x, y) in zip(times, xy)
    ]


# -- rendering ----------------------------------------------------------------


def render_frame(
    scene: Scene,
    pose: RigidTransform,
    intrinsics: CameraIntrinsics,
    noise_sigma: float = 0.0,
    rng_seed=0,
) -> FrameBundle:
    """Ray-cast a depth and label image from a camera pose (camera-to-world).

    Depth is the camera-z distance to the first surface hit, with optional
    additive Gaussian range noise. Rays that leave the scene produce invalid
    depth (0) and the background class.
    """
    cam = pose.translation
    h_here = scene.height_at(float(cam[0]), float(cam[1]))
    if h_here is not None and cam[2] <= h_here:
        raise ValueError("camera pose is not above the terrain")

    width, height = intrinsics.width, intrinsics.height
    u = np.arange(width)
    v = np.arange(height)
    du = (u - intrinsics.cx) / intrinsics.fx
    dv = (v - intrinsics.cy) / intrinsics.fy
    dir_cam = np.empty((height, width, 3))
    dir_cam[:, :, 0] = du[None, :]
    dir_cam[:, :, 1] = dv[:, None]
    dir_cam[:, :, 2] = 1.0
    dirs = dir_cam @ pose.rotation.T  # world direction per pixel, camera-z normalized

    best_t = np.full((height, width), np.inf)
    best_class = np.full((height, width), scene.background_class, dtype=np.uint8)

    def consider(t: np.ndarray, hit: np.ndarray, class_id: int) -> None:
        closer = hit & (t < best_t)
        best_t[closer] = t[closer]
        best_class[closer] = class_id

    x0, x1, y0, y1 = scene.spec.extent
    with np.errstate(divide="ignore", invalid="ignore"):
        # floor plane z = 0 clipped to the extent
        t_floor = -cam[2] / dirs[:, :, 2]
        fx_ = cam[0] + t_floor * dirs[:, :, 0]
        fy_ = cam[1] + t_floor * dirs[:, :, 1]
        hit = (t_floor > 0) & (fx_ >= x0) & (fx_ <= x1) & (fy_ >= y0) & (fy_ <= y1)
        consider(t_floor, hit, scene.spec.floor_class)

        for box in scene.spec.obstacles:
            bx0, bx1, by0, by1 = box.bounds()
            lo = np.array([bx0, by0, 0.0])
            hi = np.array([bx1, by1, box.height])
            t1 = (lo - cam) / dirs
            t2 = (hi - cam) / dirs
            tmin = np.nanmax(np.minimum(t1, t2), axis=2)
            tmax = np.nanmin(np.maximum(t1, t2), axis=2)
            hit = (tmax >= tmin) & (tmin > 1e-9)
            consider(tmin, hit, box.class_id)

        for ramp in scene.spec.ramps:
            bx0, bx1, by0, by1 = ramp.bounds()
            slope = math.tan(math.radians(ramp.tilt_deg))
            # surface z = slope * (x - bx0); solve along the ray
            denom = dirs[:, :, 2] - slope * dirs[:, :, 0]
            t = (slope * (cam[0] - bx0) - cam[2]) / denom
            rx = cam[0] + t * dirs[:, :, 0]
            ry = cam[1] + t * dirs[:, :, 1]
            hit = (
                (t > 1e-9)
                & np.isfinite(t)
                & (rx >= bx0)
                & (rx <= bx1)
                & (ry >= by0)
                & (ry <= by1)
            )
            consider(t, hit, ramp.class_id)

    valid = np.isfinite(best_t)
    depth = np.where(valid, best_t, 0.0)
    if noise_sigma > 0:
        rng = np.random.default_rng(rng_seed)
        noise = rng.normal(0.0, noise_sigma, size=int(valid.sum()))
        depth[valid] = np.maximum(depth[valid] + noise, 1e-3)
    labels = best_class.copy()
    labels[~valid] = scene.background_class
    return FrameBundle(0.0, DepthImage(depth, KIND_DEPTH), LabelImage(labels), pose, intrinsics)


# -- evaluation ---------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    """Cell-level confusion counts; the positive class is Safe."""

    tp: int
    tn: int
    fp: int
    fn: int
    acc: float


def _count(pred_safe: np.ndarray, truth_safe: np.ndarray) -> EvalReport:
    tp = int((pred_safe & truth_safe).sum())
    tn = int((~pred_safe & ~truth_safe).sum())
    fp = int((pred_safe & ~truth_safe).sum())
    fn = int((~pred_safe & truth_safe).sum())
    total = tp + tn + fp + fn
    return EvalReport(tp, tn, fp, fn, (tp + tn) / total if total else 0.0)


def _truth_lookup(truth: ClassGrid, cx: np.ndarray, cy: np.ndarray):
    """Truth labels at world cell centers; mask selects centers inside the truth."""
    tix = np.floor((cx - truth.origin[0]) / truth.resolution).astype(np.int64)
    tiy = np.floor((cy - truth.origin[1]) / truth.resolution).astype(np.int64)
    inside = (tix >= 0) & (tix < truth.cols) & (tiy >= 0) & (tiy < truth.rows)
    return tix, tiy, inside


def evaluate_map(grid: GridMap, truth: ClassGrid, params: GridParams) -> EvalReport:
    """Confusion counts over observed grid cells, resampled onto the truth lattice.

    Unknown (observed but inconclusive) cells count as predicted-Unsafe; cells
    whose centers fall outside the truth extent are skipped. Raises ValueError
    when nothing overlaps.
    """
    iy, ix = np.nonzero(grid.observed)
    if iy.size == 0:
        raise ValueError("grid has no observed cells to evaluate")
    ox, oy = grid.origin
    cx = ox + (ix + 0.5) * grid.resolution
    cy = oy + (iy + 0.5) * grid.resolution
    tix, tiy, inside = _truth_lookup(truth, cx, cy)
    if not inside.any():
        raise ValueError("grid and truth extents are disjoint")
    probability = probability_from_log_odds(grid.log_odds[iy[inside], ix[inside]])
    pred_safe = probability >= params.p_safe
    truth_safe = truth.classes[tiy[inside], tix[inside]] == CellClass.SAFE
    return _count(pred_safe, truth_safe)


def evaluate_class_grid(pred: ClassGrid, truth: ClassGrid) -> EvalReport:
    """File-level evaluation: every exported cell inside the truth extent counts.

    Unknown cells count as predicted-Unsafe.
    """
    if pred.classes.size == 0:
        raise ValueError("predicted map is empty")
    iy, ix = np.mgrid[0 : pred.rows, 0 : pred.cols]
    ix = ix.reshape(-1)
    iy = iy.reshape(-1)
    cx = pred.origin[0] + (ix + 0.5) * pred.resolution
    cy = pred.origin[1] + (iy + 0.5) * pred.resolution
    tix, tiy, inside = _truth_lookup(truth, cx, cy)
    if not inside.any():
        raise ValueError("map and truth extents are disjoint")
    pred_safe = pred.classes[iy[inside], ix[inside]] == CellClass.SAFE
    truth_safe = truth.classes[tiy[inside], tix[inside]] == CellClass.SAFE
    return _count(pred_safe, truth_safe)


# -- spec files ---------------------------------------------------------------


def parse_scene_spec(path) -> SceneSpec:
    """Scene key=value file: extent=, floor_class=, seed=, box= and ramp= lines.

    box=cx cy sx sy height class ; ramp=cx cy sx sy tilt_deg class
    """
    extent = None
    floor_class = 0
    seed = 0
    boxes: list[Box] = []
    ramps: list[Ramp] = []
    for lineno, key, value in read_kv_lines(path):
        try:
            if key == "extent":
                vals = [float(tok) for tok in value.split()]
                if len(vals) != 4:
                    raise ValueError("extent needs 4 numbers: x_min x_max y_min y_max")
                extent = tuple(vals)
            elif key == "floor_class":
                floor_class = int(value)
            elif key == "seed":
                seed = int(value)
            elif key == "box":
                vals = [float(tok) for tok in value.split()]
                if len(vals) != 6:
                    raise ValueError("box needs 6 numbers: cx cy sx sy height class")
                boxes.append(Box(vals[0], vals[1], vals[2], vals[3], vals[4], int(vals[5])))
            elif key == "ramp":
                vals = [float(tok) for tok in value.split()]
                if len(vals) != 6:
                    raise ValueError("ramp needs 6 numbers: cx cy sx sy tilt_deg class")
                ramps.append(Ramp(vals[0], vals[1], vals[2], vals[3], vals[4], int(vals[5])))
            else:
                raise ValueError(f"unknown scene key {key!r}")
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if extent is None:
        raise ParseError(f"{path}: missing extent= line")
    try:
        return SceneSpec(extent, floor_class, tuple(boxes), tuple(ramps), seed)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def parse_trajectory_spec(path) -> TrajectorySpec:
    kv = {}
    for lineno, key, value in read_kv_lines(path):
        try:
            if key == "pattern":
                kv["pattern"] = value
            elif key in ("altitude", "speed", "frame_rate", "duration", "row_spacing"):
                kv[key] = float(value)
            else:
                raise ValueError(f"unknown trajectory key {key!r}")
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    try:
        return TrajectorySpec(**kv)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def simulate_dataset(
    scene_spec: SceneSpec,
    traj_spec: TrajectorySpec,
    out_dir,
    intrinsics: CameraIntrinsics,
    noise_sigma: float = 0.01,
    seed: int = 0,
    resolution: float = 0.1,
    safety_margin: float = 0.25,
    slope_max_deg: float = 15.0,
    table: ClassTable = DEFAULT_CLASS_TABLE,
) -> int:
    """Render a full dataset (frames + intrinsics + classes + truth) to disk."""
    scene, truth = build_scene(
        scene_spec, resolution, safety_margin, slope_max_deg, table
    )
    if traj_spec.altitude <= scene.max_height():
        raise ValueError("trajectory altitude must clear the tallest obstacle")
    poses = generate_trajectory(traj_spec, scene_spec.extent)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dsio.save_intrinsics(out / "intrinsics.txt", intrinsics)
    dsio.save_class_table(out / "classes.txt", table)
    dsio.save_class_grid(out / "truth.pgm", truth)
    write_kv(
        out / "sim_config.txt",
        {
            "noise_sigma": fmt(noise_sigma),
            "seed": str(seed),
            "resolution": fmt(resolution),
            "safety_margin": fmt(safety_margin),
            "frames": str(len(poses)),
        },
    )
    for i, (t, pose) in enumerate(poses):
        bundle = render_frame(scene, pose, intrinsics, noise_sigma, rng_seed=(seed, i))
        bundle = FrameBundle(t, bundle.depth, bundle.labels, pose, intrinsics)
        dsio.save_frame(out / dsio.frame_dir_name(i), bundle)
    return len(poses)

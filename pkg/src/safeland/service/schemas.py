"""Request/response models for the mapping service.

Images travel as base64-encoded binary PGM, using the same conventions as the
on-disk dataset (16-bit millimeter depth, 8-bit class-id labels, 8-bit maps).
Poses are 12 row-major numbers: r00..r22 then tx ty tz (camera-to-world).
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class IntrinsicsModel(BaseModel):
    fx: float = Field(gt=0)
    fy: float = Field(gt=0)
    cx: float
    cy: float
    width: int = Field(gt=0)
    height: int = Field(gt=0)


class ConfigModel(BaseModel):
    """Flat config overrides; omitted fields keep their defaults."""

    resolution: float | None = None
    seed: int | None = None
    threads: int | None = None
    label_corruption: float | None = None
    leaf_size: float | None = None
    sor_neighbors: int | None = None
    sor_std_mult: float | None = None
    mls_radius: float | None = None
    ransac_dist: float | None = None
    ransac_iters: int | None = None
    slope_max_deg: float | None = None
    rough_max: float | None = None
    min_plane_points: int | None = None
    l_hit: float | None = None
    l_miss: float | None = None
    l_min: float | None = None
    l_max: float | None = None
    p_safe: float | None = None
    p_unsafe: float | None = None
    alpha: float | None = None
    beta: float | None = None
    drone_diameter: float | None = None
    patch_scale: float | None = None
    clearance_cap: float | None = None


class CreateSessionRequest(BaseModel):
    intrinsics: IntrinsicsModel
    config: ConfigModel | None = None
    sl_to_rgb: list[float] | None = Field(default=None, min_length=12, max_length=12)


class SessionInfo(BaseModel):
    session_id: str
    frames: int
    observed_cells: int
    resolution: float


class FrameRequest(BaseModel):
    t: float = 0.0
    pose: list[float] = Field(min_length=12, max_length=12)
    depth_pgm: str
    labels_pgm: str


class FrameResponse(BaseModel):
    frames: int
    stage_ms: dict[str, float]


class MapResponse(BaseModel):
    pgm: str
    origin_x: float
    origin_y: float
    resolution: float
    width: int
    height: int


class SelectRequest(BaseModel):
    x: float
    y: float
    z: float
    yaw: float = 0.0


class SiteModel(BaseModel):
    x: float
    y: float
    cell_x: int
    cell_y: int
    cost: float
    j_d: float
    j_un: float


class WaypointModel(BaseModel):
    x: float
    y: float
    z: float
    yaw: float


class SelectResponse(BaseModel):
    found: bool
    site: SiteModel | None = None
    waypoints: list[WaypointModel] = []


class EvaluateRequest(BaseModel):
    truth_pgm: str
    origin_x: float
    origin_y: float
    resolution: float = Field(gt=0)


class EvalResponse(BaseModel):
    tp: int
    tn: int
    fp: int
    fn: int
    acc: float

"""FastAPI application: per-session occupancy mapping over HTTP.

A session owns one growing grid. Frame posts are serialized per session
(single writer); map, selection and evaluation endpoints work on snapshots,
so concurrent readers never see a partially applied frame.
"""

from __future__ import annotations

import base64
import binascii
import threading
import uuid

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import RunConfig
from ..dataset import FrameBundle, parse_transform
from ..formats import ParseError, read_pgm_bytes, write_pgm_bytes
from ..geometry import CameraIntrinsics, DepthImage, KIND_DEPTH, RigidTransform
from ..grid import ClassGrid, GridMap
from ..pipeline import compute_frame_clouds
from ..selector import DroneState, landing_waypoints, select_landing_site
from ..semantics import DEFAULT_CLASS_TABLE, LabelImage
from ..sim import evaluate_class_grid
from . import schemas

MM_PER_M = 1000.0


class Session:
    def __init__(self, cfg: RunConfig, intrinsics: CameraIntrinsics,
                 sl_to_rgb: RigidTransform | None):
        self.cfg = cfg
        self.intrinsics = intrinsics
        self.sl_to_rgb = sl_to_rgb
        self.grid = GridMap(cfg.resolution)
        self.frames = 0
        self.lock = threading.Lock()

    def info(self, session_id: str) -> schemas.SessionInfo:
        with self.lock:
            observed = int(self.grid.observed.sum())
            frames = self.frames
        return schemas.SessionInfo(
            session_id=session_id,
            frames=frames,
            observed_cells=observed,
            resolution=self.cfg.resolution,
        )

    def snapshot_class_grid(self) -> ClassGrid:
        with self.lock:
            snap = self.grid.snapshot()
        return snap.class_grid(self.cfg.grid)


def _bad_request(message: str) -> HTTPException:
    return HTTPException(status_code=400, detail=message)


def _decode_pgm(b64: str, what: str) -> np.ndarray:
    try:
        raw = base64.b64decode(b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise _bad_request(f"{what}: invalid base64") from exc
    try:
        return read_pgm_bytes(raw, source=what)
    except ParseError as exc:
        raise _bad_request(str(exc)) from exc


def create_app() -> FastAPI:
    app = FastAPI(title="safeland mapping service", version=__version__)
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()

    def get_session(session_id: str) -> Session:
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    @app.get("/")
    def root():
        return {"name": "safeland", "version": __version__}

    @app.post("/sessions", response_model=schemas.SessionInfo, status_code=201)
    def create_session(req: schemas.CreateSessionRequest):
        try:
            intr = CameraIntrinsics(
                req.intrinsics.fx,
                req.intrinsics.fy,
                req.intrinsics.cx,
                req.intrinsics.cy,
                req.intrinsics.width,
                req.intrinsics.height,
            )
            cfg = RunConfig()
            if req.config is not None:
                overrides = {
                    k: v for k, v in req.config.model_dump().items() if v is not None
                }
                cfg = cfg.with_overrides(overrides)
            sl_to_rgb = None
            if req.sl_to_rgb is not None:
                sl_to_rgb = parse_transform(
                    " ".join(repr(v) for v in req.sl_to_rgb), "sl_to_rgb"
                )
        except (ParseError, ValueError) as exc:
            raise _bad_request(str(exc)) from exc
        session_id = uuid.uuid4().hex
        with registry_lock:
            sessions[session_id] = Session(cfg, intr, sl_to_rgb)
        return sessions[session_id].info(session_id)

    @app.get("/sessions", response_model=list[schemas.SessionInfo])
    def list_sessions():
        with registry_lock:
            items = list(sessions.items())
        return [session.info(sid) for sid, session in items]

    @app.get("/sessions/{session_id}", response_model=schemas.SessionInfo)
    def session_info(session_id: str):
        return get_session(session_id).info(session_id)

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        with registry_lock:
            if sessions.pop(session_id, None) is None:
                raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    @app.post("/sessions/{session_id}/frames", response_model=schemas.FrameResponse)
    def push_frame(session_id: str, req: schemas.FrameRequest):
        session = get_session(session_id)
        depth_arr = _decode_pgm(req.depth_pgm, "depth_pgm")
        labels_arr = _decode_pgm(req.labels_pgm, "labels_pgm")
        if depth_arr.dtype != np.uint16:
            raise _bad_request("depth_pgm must be a 16-bit PGM (millimeters)")
        if labels_arr.dtype != np.uint8:
            raise _bad_request("labels_pgm must be an 8-bit PGM of class ids")
        try:
            pose = parse_transform(" ".join(repr(v) for v in req.pose), "pose")
            bundle = FrameBundle(
                req.t,
                DepthImage(depth_arr.astype(float) / MM_PER_M, KIND_DEPTH),
                LabelImage(labels_arr),
                pose,
                session.intrinsics,
            )
        except (ParseError, ValueError) as exc:
            raise _bad_request(str(exc)) from exc
        with session.lock:
            index = session.frames
            try:
                safe, unsafe = compute_frame_clouds(
                    bundle,
                    session.cfg,
                    index,
                    DEFAULT_CLASS_TABLE,
                    session.sl_to_rgb,
                )
            except ValueError as exc:
                raise _bad_request(str(exc)) from exc
            session.grid.update(safe, unsafe, session.cfg.grid)
            session.frames = index + 1
        return schemas.FrameResponse(frames=session.frames, stage_ms={})

    @app.get("/sessions/{session_id}/map", response_model=schemas.MapResponse)
    def export_session_map(session_id: str):
        session = get_session(session_id)
        cg = session.snapshot_class_grid()
        return schemas.MapResponse(
            pgm=base64.b64encode(write_pgm_bytes(cg.classes)).decode("ascii"),
            origin_x=cg.origin[0],
            origin_y=cg.origin[1],
            resolution=cg.resolution,
            width=cg.cols,
            height=cg.rows,
        )

    @app.post("/sessions/{session_id}/select", response_model=schemas.SelectResponse)
    def select_site(session_id: str, req: schemas.SelectRequest):
        session = get_session(session_id)
        cg = session.snapshot_class_grid()
        drone = DroneState(np.array([req.x, req.y, req.z]), req.yaw)
        site = select_landing_site(cg, drone, session.cfg.selector)
        if site is None:
            return schemas.SelectResponse(found=False)
        waypoints = landing_waypoints(drone, site)
        return schemas.SelectResponse(
            found=True,
            site=schemas.SiteModel(
                x=site.center_world[0],
                y=site.center_world[1],
                cell_x=site.center_cell[0],
                cell_y=site.center_cell[1],
                cost=site.cost,
                j_d=site.j_d,
                j_un=site.j_un,
            ),
            waypoints=[
                schemas.WaypointModel(x=w.x, y=w.y, z=w.z, yaw=w.yaw) for w in waypoints
            ],
        )

    @app.post("/sessions/{session_id}/evaluate", response_model=schemas.EvalResponse)
    def evaluate_session(session_id: str, req: schemas.EvaluateRequest):
        session = get_session(session_id)
        truth_arr = _decode_pgm(req.truth_pgm, "truth_pgm")
        if truth_arr.dtype != np.uint8:
            raise _bad_request("truth_pgm must be an 8-bit map PGM")
        try:
            truth = ClassGrid(truth_arr, (req.origin_x, req.origin_y), req.resolution)
            cg = session.snapshot_class_grid()
            report = evaluate_class_grid(cg, truth)
        except ValueError as exc:
            raise _bad_request(str(exc)) from exc
        return schemas.EvalResponse(
            tp=report.tp, tn=report.tn, fp=report.fp, fn=report.fn, acc=report.acc
        )

    return app

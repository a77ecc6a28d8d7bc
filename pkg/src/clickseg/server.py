"""Interactive annotation sessions over HTTP/WebSocket: hold window
state, apply clicks through the configured segmenter, support undo and
export. The segmentation is always a pure function of the click history."""

from __future__ import annotations

import copy
import json
import os
import secrets
import struct
import threading

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import Response

from . import ingest, spacetime
from .config import RunConfig, make_segmenter
from .errors import ClicksegError
from .evaluation import ObjectTable, iou
from .segment import WindowContext, snap_click_position
from .types import Click

DEFAULT_SNAP_RADIUS = 0.5  # meters
PREVIEW_BUDGET = 300_000  # points


class Session:
    def __init__(self, session_id: str, run_cfg: RunConfig, window_start: int, tau: int,
                 scene: int, segmenter_name: str | None):
        from .cli import _build_scene

        self.id = session_id
        self.scene = scene
        self.lock = threading.Lock()
        sequence = _build_scene(run_cfg, scene)
        length = min(tau, len(sequence) - window_start)
        if length < 1:
            raise ClicksegError(f"window start {window_start} outside sequence")
        window = spacetime.Window(start=window_start, length=length, overlap_scan=None)
        self.window = window
        self.cloud = spacetime.window_cloud(sequence, window)
        self.grid = spacetime.voxelize(self.cloud, run_cfg.voxel_size)
        self.table = ObjectTable(sequence) if sequence.scans[0].has_labels else None
        gt = None
        if self.cloud.semantic is not None and self.table is not None:
            gt = self.table.map_points(self.cloud.semantic, self.cloud.instance)
        self.ctx = WindowContext(cloud=self.cloud, grid=self.grid, gt_object_ids=gt)
        if segmenter_name is not None:
            run_cfg = copy.copy(run_cfg)
            run_cfg.segmenter = segmenter_name
        self.run_cfg = run_cfg
        self.segmenter = make_segmenter(run_cfg)
        self.snap_radius = run_cfg.snap_radius
        self.history: list[Click] = []
        self.voxel_ids = np.zeros(self.grid.n_voxels, dtype=np.int64)

    def _recompute(self) -> np.ndarray:
        if not self.history:
            return np.zeros(self.grid.n_voxels, dtype=np.int64)
        point_ids = self.segmenter.predict(self.ctx, self.history)
        # collapse to voxels: all points of a voxel share the prediction
        voxel_ids = np.zeros(self.grid.n_voxels, dtype=np.int64)
        voxel_ids[self.grid.point_to_voxel] = point_ids
        return voxel_ids

    def _delta(self, before: np.ndarray, after: np.ndarray) -> list[list[int]]:
        changed = np.nonzero(before != after)[0]
        return [[int(v), int(after[v])] for v in changed]

    def object_ious(self) -> dict[str, float]:
        if self.ctx.gt_object_ids is None:
            return {}
        pred_points = self.voxel_ids[self.grid.point_to_voxel]
        gt = self.ctx.gt_object_ids
        out = {}
        for oid in sorted({c.object_id for c in self.history}):
            out[str(oid)] = round(iou(pred_points == oid, gt == oid), 12)
        return out

    def apply_click(self, pos, object_id: int):
        with self.lock:
            voxel = snap_click_position(self.grid, pos, self.snap_radius)
            if voxel is None:
                return None
            snapped = tuple(float(v) for v in self.grid.centers[voxel])
            scan = int(self.grid.scan_sets[voxel][0])
            click = Click(
                position=snapped,
                scan_index=scan,
                object_id=int(object_id),
                order_k=len(self.history),
            )
            before = self.voxel_ids
            self.history.append(click)
            self.voxel_ids = self._recompute()
            return {
                "changed": self._delta(before, self.voxel_ids),
                "ious": self.object_ious(),
                "order": click.order_k,
            }

    def undo(self):
        with self.lock:
            if not self.history:
                return {"noop": True, "changed": [], "ious": self.object_ious()}
            self.history.pop()
            before = self.voxel_ids
            self.voxel_ids = self._recompute()
            return {
                "noop": False,
                "changed": self._delta(before, self.voxel_ids),
                "ious": self.object_ious(),
            }

    def export(self, out_dir: str):
        with self.lock:
            os.makedirs(out_dir, exist_ok=True)
            point_ids = self.voxel_ids[self.grid.point_to_voxel]
            per_scan = self.cloud.split_per_scan(point_ids)
            files = []
            for t, ids in sorted(per_scan.items()):
                semantic = np.zeros(len(ids), dtype=np.int64)
                if self.table is not None:
                    for oid in np.unique(ids):
                        if int(oid) in self.table.meta:
                            semantic[ids == oid] = self.table.semantic_of(int(oid))
                path = os.path.join(out_dir, f"{t:06d}.label")
                ingest.write_labels(path, semantic, ids)
                files.append(path)
            trace = []
            for click in self.history:
                trace.append(
                    {"scene": self.scene, "window": self.window.start,
                     "click": click.to_dict()}
                )
            trace_path = os.path.join(out_dir, "trace.jsonl")
            with open(trace_path, "w") as fh:
                for rec in trace:
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
            return {"dir": out_dir, "files": files, "trace_file": trace_path, "trace": trace}

    def cloud_blob(self, budget: int = PREVIEW_BUDGET) -> bytes:
        """Length-prefixed header JSON + float32 positions + int32 scan
        indices + int32 voxel indices + int32 current ids, uniformly
        subsampled to the render budget. The voxel index lets clients
        apply voxel-level deltas to their per-point copy."""
        n = self.cloud.n_points
        if n > budget:
            step = int(np.ceil(n / budget))
            sel = np.arange(0, n, step)
        else:
            sel = np.arange(n)
        point_ids = self.voxel_ids[self.grid.point_to_voxel]
        header = json.dumps(
            {
                "count": int(len(sel)),
                "total": int(n),
                "window": {"start": self.window.start, "length": self.window.length},
                "fields": ["positions:f32x3", "scan_index:i32", "voxel:i32", "ids:i32"],
            }
        ).encode()
        parts = [struct.pack("<I", len(header)), header]
        parts.append(self.cloud.xyz[sel].astype("<f4").tobytes())
        parts.append(self.cloud.scan_index[sel].astype("<i4").tobytes())
        parts.append(self.grid.point_to_voxel[sel].astype("<i4").tobytes())
        parts.append(point_ids[sel].astype("<i4").tobytes())
        return b"".join(parts)

    def close(self):
        self.segmenter.close()


class SessionManager:
    def __init__(self, run_cfg: RunConfig):
        self.run_cfg = run_cfg
        self.sessions: dict[str, Session] = {}
        self.lock = threading.Lock()

    def create(self, window_start: int, tau: int, scene: int, segmenter: str | None) -> Session:
        session = Session(
            secrets.token_hex(8), self.run_cfg, window_start, tau, scene, segmenter
        )
        with self.lock:
            self.sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session


def create_app(run_cfg: RunConfig) -> FastAPI:
    app = FastAPI(title="clickseg annotation server")
    manager = SessionManager(run_cfg)
    app.state.manager = manager

    @app.post("/sessions")
    def create_session(body: dict):
        window = body.get("window") or {}
        try:
            session = manager.create(
                window_start=int(window.get("start", 0)),
                tau=int(window.get("tau", run_cfg.tau)),
                scene=int(window.get("scene", 0)),
                segmenter=body.get("segmenter"),
            )
        except ClicksegError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {
            "id": session.id,
            "n_points": session.cloud.n_points,
            "n_voxels": session.grid.n_voxels,
            "window": {"start": session.window.start, "length": session.window.length},
            "has_gt": session.ctx.gt_object_ids is not None,
        }

    @app.get("/sessions/{session_id}/cloud")
    def get_cloud(session_id: str):
        session = manager.get(session_id)
        return Response(content=session.cloud_blob(), media_type="application/octet-stream")

    @app.post("/sessions/{session_id}/click")
    def post_click(session_id: str, body: dict):
        session = manager.get(session_id)
        try:
            result = session.apply_click(body["pos"], int(body["object"]))
        except ClicksegError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        if result is None:
            return {"rejected": "no target"}
        return result

    @app.post("/sessions/{session_id}/undo")
    def post_undo(session_id: str):
        return manager.get(session_id).undo()

    @app.post("/sessions/{session_id}/export")
    def post_export(session_id: str):
        session = manager.get(session_id)
        out_dir = os.path.join(run_cfg.out, "sessions", session.id)
        return session.export(out_dir)

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        session = manager.get(session_id)
        return {
            "n_clicks": len(session.history),
            "ious": session.object_ious(),
            "ids": [int(v) for v in np.unique(session.voxel_ids)],
        }

    @app.websocket("/ws")
    async def websocket_channel(ws: WebSocket):
        await ws.accept()
        session: Session | None = None
        try:
            while True:
                msg = json.loads(await ws.receive_text())
                mtype = msg.get("type")
                if mtype == "create":
                    window = msg.get("window") or {}
                    session = manager.create(
                        window_start=int(window.get("start", 0)),
                        tau=int(window.get("tau", run_cfg.tau)),
                        scene=int(window.get("scene", 0)),
                        segmenter=msg.get("segmenter"),
                    )
                    await ws.send_text(json.dumps({
                        "type": "created", "id": session.id,
                        "n_points": session.cloud.n_points,
                        "has_gt": session.ctx.gt_object_ids is not None,
                    }))
                    await ws.send_bytes(session.cloud_blob())
                elif session is None:
                    await ws.send_text(json.dumps({"type": "error", "msg": "no session"}))
                elif mtype == "click":
                    result = session.apply_click(msg["pos"], int(msg["object"]))
                    if result is None:
                        await ws.send_text(json.dumps({"type": "rejected", "msg": "no target"}))
                    else:
                        await ws.send_text(json.dumps({"type": "state_delta", **result}))
                elif mtype == "undo":
                    await ws.send_text(json.dumps({"type": "state_delta", **session.undo()}))
                elif mtype == "export":
                    out_dir = os.path.join(run_cfg.out, "sessions", session.id)
                    result = session.export(out_dir)
                    await ws.send_text(json.dumps({"type": "exported", **result}))
                else:
                    await ws.send_text(json.dumps({"type": "error", "msg": f"unknown {mtype}"}))
        except WebSocketDisconnect:
            pass
        except ClicksegError as exc:
            await ws.send_text(json.dumps({"type": "error", "msg": str(exc)}))

    return app

"""FastAPI application exposing the exploration pipeline.

Error contract: 404 for unknown ids, 409 for state-machine conflicts
(training running, classify before features exist), 422 for invalid
documents with the offending field path in the body.
"""

from __future__ import annotations

import base64
import io

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse, Response

from ..forest import (ProbabilityVolume, ScribbleError, ScribbleSet,
                      apply_background_rule)
from ..harness import classify_features
from ..inr import InrFeatures
from ..render import (Camera, CameraError, RenderConfig, TfError,
                      TransferFunctionSet, default_class_tfs, grayscale_tf,
                      encode_png, render, render_intensity, render_slice)
from ..render.camera import orbit_camera
from ..viewpoints import recommend_viewpoints
from ..volume import ScalarVolume, VolumeError, load_volume
from .schemas import (ClassifyRequest, RenderRequest, ScribblePut,
                      TrainRequest, ViewpointsRequest, VolumeRegister)
from .sessions import SessionError, SessionStore


def _unprocessable(field: str, message: str):
    return HTTPException(status_code=422,
                         detail=[{"loc": ["query", field], "msg": message,
                                  "type": "value_error"}])


def _camera_from(doc, vol: ScalarVolume) -> Camera:
    extent = np.array(vol.dims) * np.array(vol.spacing)
    center = extent / 2.0
    try:
        if doc.direction is not None:
            return orbit_camera(center, doc.direction,
                                doc.radius_scale * float(np.linalg.norm(extent)),
                                width=doc.width, height=doc.height,
                                fov_y_deg=doc.fov_y_deg)
        if doc.eye is None:
            return orbit_camera(center, (1.0, 1.0, 1.0),
                                1.5 * float(np.linalg.norm(extent)),
                                width=doc.width, height=doc.height,
                                fov_y_deg=doc.fov_y_deg)
        look_at = doc.look_at if doc.look_at is not None else tuple(center)
        return Camera(tuple(doc.eye), tuple(look_at), tuple(doc.up),
                      doc.fov_y_deg, doc.width, doc.height)
    except CameraError as exc:
        raise HTTPException(status_code=422,
                            detail=[{"loc": ["body", "camera"], "msg": str(exc),
                                     "type": "value_error"}]) from exc


def create_app(cache_dir=None) -> FastAPI:
    app = FastAPI(title="voxplore", version="0.1.0")
    store = SessionStore(cache_dir=cache_dir)
    app.state.store = store

    @app.exception_handler(SessionError)
    async def session_error_handler(_, exc: SessionError):
        return JSONResponse(status_code=exc.status, content={"detail": exc.detail})

    # -- volumes ---------------------------------------------------------

    @app.post("/volumes")
    def register_volume(req: VolumeRegister):
        try:
            if req.path:
                vol = load_volume(req.path)
            elif req.data_b64 and req.dims and req.dtype:
                raw = base64.b64decode(req.data_b64)
                dtype = np.dtype({"uint8": np.uint8, "uint16": np.uint16,
                                  "float32": np.float32}[req.dtype]).newbyteorder("<")
                arr = np.frombuffer(raw, dtype=dtype)
                if arr.size != int(np.prod(req.dims)):
                    raise VolumeError(f"payload holds {arr.size} values, dims "
                                      f"imply {int(np.prod(req.dims))}")
                arr = arr.reshape(tuple(req.dims), order="F").astype(np.float32)
                lo, hi = float(arr.min()), float(arr.max())
                arr = (arr - lo) / (hi - lo) if hi > lo else np.zeros_like(arr)
                vol = ScalarVolume(arr, tuple(req.spacing or (1.0, 1.0, 1.0)))
            else:
                raise VolumeError("provide either 'path' or "
                                  "'dims'+'dtype'+'data_b64'")
        except (VolumeError, KeyError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=[
                {"loc": ["body"], "msg": str(exc), "type": "value_error"}]) from exc
        session = store.add(vol)
        return {"id": session.volume_id, "dims": vol.dims,
                "spacing": vol.spacing}

    @app.get("/volumes/{vid}")
    def volume_info(vid: str):
        session = store.get(vid)
        return {"id": vid, "dims": session.volume.dims,
                "spacing": session.volume.spacing,
                "training": session.training_state,
                "n_scribbles": len(session.scribbles) if session.scribbles else 0}

    # -- training --------------------------------------------------------

    @app.post("/volumes/{vid}/train", status_code=202)
    def train_volume(vid: str, req: TrainRequest):
        session = store.get(vid)
        est = InrFeatures(levels=req.levels,
                          features_per_level=req.features_per_level,
                          table_size=req.table_size,
                          base_resolution=req.base_resolution,
                          fusion=req.fusion, learning_rate=req.learning_rate,
                          epochs=req.epochs, batch_size=req.batch_size,
                          lambda_grad=req.lambda_grad,
                          lambda_stat=req.lambda_stat, seed=req.seed)
        ticket = store.start_training(session, est)
        return ticket.snapshot()

    @app.get("/jobs/{jid}")
    def job_info(jid: str):
        return store.job(jid).snapshot()

    # -- scribbles -------------------------------------------------------

    @app.put("/volumes/{vid}/scribbles")
    def put_scribbles(vid: str, req: ScribblePut):
        session = store.get(vid)
        doc = [{"voxel": e.voxel, "class": e.cls, "stroke": e.stroke,
                **({"slice": {"axis": e.slice.axis, "index": e.slice.index}}
                   if e.slice else {})}
               for e in req.entries]
        try:
            scribbles = ScribbleSet.from_document(doc, dims=session.volume.dims)
        except ScribbleError as exc:
            raise HTTPException(status_code=422, detail=[
                {"loc": ["body", "entries"], "msg": str(exc),
                 "type": "value_error"}]) from exc
        with session.lock:
            session.scribbles = scribbles
            session.forest = None
            session.prob_volume = None
        return {"accepted": len(scribbles),
                "per_class": {str(k): v for k, v in scribbles.class_counts().items()},
                "conflicts": scribbles.conflict_count}

    @app.get("/volumes/{vid}/scribbles")
    def get_scribbles(vid: str):
        session = store.get(vid)
        return {"entries": session.scribbles.to_document()
                if session.scribbles else []}

    # -- classification --------------------------------------------------

    @app.post("/volumes/{vid}/classify")
    def classify(vid: str, req: ClassifyRequest = ClassifyRequest()):
        session = store.get(vid)
        features = store.require_features(session)
        with session.lock:
            scribbles = session.scribbles
        if scribbles is None or len(scribbles) == 0:
            raise _unprocessable("scribbles", "no scribbles submitted")
        try:
            pred, pv, forest = classify_features(
                features.features, scribbles, session.volume.dims,
                {"trees": req.trees, "min_samples_split": req.min_samples_split,
                 "seed": req.seed}, req.tau)
        except ScribbleError as exc:
            raise _unprocessable("scribbles", str(exc)) from exc
        flat = scribbles.flat_indices(session.volume.dims)
        train_pred = pred[flat]
        accuracy = {}
        for cid in sorted(set(scribbles.classes.tolist())):
            sel = scribbles.classes == cid
            accuracy[str(cid)] = float((train_pred[sel] == cid).mean())
        with session.lock:
            session.forest = forest
            session.prob_volume = pv
            if session.tf_set is None:
                session.tf_set = default_class_tfs(pv.foreground_ids)
        return {"classes": [int(c) for c in forest.classes_],
                "n_scribbles": len(scribbles),
                "train_accuracy_per_class": accuracy, "tau": req.tau}

    # -- slices ----------------------------------------------------------

    @app.get("/volumes/{vid}/slice")
    def slice_image(vid: str, axis: int = Query(default=2, ge=0, le=2),
                    index: int = 0,
                    overlay: str = Query(default="none"),
                    overlay_alpha: float = Query(default=0.6, ge=0.0, le=1.0)):
        session = store.get(vid)
        if overlay not in ("none", "scribbles", "probability", "label"):
            raise _unprocessable("overlay", f"unknown overlay '{overlay}'")
        if not 0 <= index < session.volume.dims[axis]:
            raise _unprocessable(
                "index", f"index {index} out of range for axis {axis} with "
                         f"{session.volume.dims[axis]} slices")
        if overlay == "probability" and session.prob_volume is None:
            raise SessionError(409, {"message": "no probability volume; "
                                     "classify first",
                                     "state": session.training_state})
        img = render_slice(session.volume, axis, index, overlay,
                           scribbles=session.scribbles,
                           prob=session.prob_volume,
                           labels=None, overlay_alpha=overlay_alpha)
        return Response(content=encode_png(img), media_type="image/png")

    # -- transfer functions ----------------------------------------------

    @app.put("/volumes/{vid}/tf")
    def put_tf(vid: str, doc: dict):
        session = store.get(vid)
        body = dict(doc)
        mode = body.pop("mode", None)
        try:
            tf_set = TransferFunctionSet.from_document(body)
            if mode is not None and mode not in ("probabilistic",
                                                 "probability_intensity"):
                raise TfError(f"unknown mode '{mode}'")
        except TfError as exc:
            raise HTTPException(status_code=422, detail=[
                {"loc": ["body"], "msg": str(exc), "type": "value_error"}]) from exc
        with session.lock:
            session.tf_set = tf_set
            if mode is not None:
                session.tf_mode = mode
        return {"classes": tf_set.class_ids(), "mode": session.tf_mode}

    @app.get("/volumes/{vid}/tf")
    def get_tf(vid: str):
        session = store.get(vid)
        doc = session.tf_set.to_document() if session.tf_set else {}
        doc["mode"] = session.tf_mode
        return doc

    # -- rendering -------------------------------------------------------

    @app.post("/volumes/{vid}/render")
    def render_volume(vid: str, req: RenderRequest = RenderRequest()):
        session = store.get(vid)
        if session.prob_volume is None:
            raise SessionError(409, {"message": "no probability volume; "
                                     "classify first",
                                     "state": session.training_state})
        cam = _camera_from(req.camera, session.volume)
        tf_set = session.tf_set or default_class_tfs(
            session.prob_volume.foreground_ids)
        cfg = RenderConfig(mode=req.mode, step_size=req.step_size)
        img = render(session.volume, session.prob_volume, tf_set, cam, cfg)
        return Response(content=encode_png(img), media_type="image/png")

    # -- viewpoints ------------------------------------------------------

    @app.post("/volumes/{vid}/viewpoints")
    def viewpoints(vid: str, req: ViewpointsRequest = ViewpointsRequest()):
        session = store.get(vid)
        features = store.require_features(session)
        if session.volume.n_voxels < req.k:
            raise _unprocessable("k", "k exceeds the voxel count")
        report, _ = recommend_viewpoints(features, session.volume,
                                         session.fields, k=req.k, m=req.m,
                                         seed=req.seed,
                                         coverage_target=req.coverage,
                                         max_views=req.max_views)
        body = report.to_document()
        if req.thumbnails:
            gray = grayscale_tf()
            thumbs = []
            for idx in report.selected:
                cam = orbit_camera(report.views.center,
                                   report.views.directions[idx],
                                   report.views.radius,
                                   width=req.thumb_size, height=req.thumb_size)
                png = encode_png(render_intensity(session.volume, gray, cam))
                thumbs.append(base64.b64encode(png).decode())
            body["thumbnails_png_b64"] = thumbs
        return body

    return app

"""Service API consumed by the companion UI.

REST endpoints drive the customization session; a WebSocket accepts
100 Hz frame batches and pushes back window predictions and gesture
events. One recognizer automaton per connection, so concurrent clients
never share state. JSON message schema is documented in docs/formats.md.
"""
from __future__ import annotations

import threading

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from ..augmentation import tensor_crops
from ..errors import DataError, FewgestError, ProtocolError
from ..runtime import StreamRecognizer
from ..signal import ImuStream
from .profile import UserProfile
from .session import CustomizationSession, ModelBundle, train_gesture_pipeline


def _frames_array(payload) -> np.ndarray:
    frames = np.asarray(payload, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != 6:
        raise DataError(f"frames must be (n, 6), got {frames.shape}")
    if not np.all(np.isfinite(frames)):
        raise DataError("frames contain NaN/Inf")
    return frames


def create_app(profile: UserProfile, seed: int = 0) -> FastAPI:
    app = FastAPI(title="fewgest service")
    bundle = ModelBundle.from_profile(profile)
    lock = threading.Lock()
    state = {"session": CustomizationSession(profile, bundle, seed=seed)}

    def session() -> CustomizationSession:
        return state["session"]

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "gestures": list(profile.gesture_names())}

    @app.get("/session/state")
    def session_state():
        with lock:
            return session().state()

    @app.post("/session/start-recording")
    def start_recording(body: dict):
        with lock:
            try:
                refs = session().start_recording(
                    str(body["gesture"]), int(body.get("shots", 3)))
            except ProtocolError as e:
                raise HTTPException(409, str(e))
            return {"reference_times": refs, "state": session().state()}

    @app.post("/session/submit-recording")
    def submit_recording(body: dict):
        with lock:
            try:
                frames = _frames_array(body["frames"])
                stream = ImuStream(frames,
                                   float(body.get("sample_rate", 100.0)))
                verdict = session().submit_recording(
                    stream, body.get("reference_times"))
            except ProtocolError as e:
                raise HTTPException(409, str(e))
            except (DataError, KeyError, ValueError) as e:
                raise HTTPException(400, str(e))
            return {"verdict": verdict.to_dict(), "state": session().state()}

    @app.post("/session/gate-decision")
    def gate_decision(body: dict):
        with lock:
            try:
                session().gate_decision(str(body.get("choice", "")))
            except ProtocolError as e:
                raise HTTPException(409, str(e))
            return {"state": session().state()}

    @app.post("/session/reset")
    def reset_session():
        with lock:
            session().reset()
            return {"state": session().state()}

    @app.get("/gestures")
    def list_gestures():
        from ..backbone import BASE_CLASSES
        return {"base": list(BASE_CLASSES[1:]),
                "custom": [g.__dict__ for g in profile.gestures()]}

    @app.delete("/gestures/{name}")
    def delete_gesture(name: str):
        with lock:
            remaining = [g for g in profile.gestures() if g.name != name]
            if len(remaining) == len(profile.gestures()):
                raise HTTPException(404, f"gesture {name!r} not registered")
            head = None
            if remaining:
                shots = {g.name: profile.load_shot_tensors(g.name, bundle.bank)
                         for g in remaining}
                last = remaining[-1]
                prior = {k: v for k, v in shots.items() if k != last.name}
                result = train_gesture_pipeline(bundle, last.name,
                                                shots[last.name], prior,
                                                seed=last.seed)
                head = result.head
            try:
                profile.delete_gesture(name, head)
            except DataError as e:
                raise HTTPException(404, str(e))
            state["session"] = CustomizationSession(profile, bundle, seed=seed)
            return {"state": state["session"].state()}

    @app.get("/export-embeddings")
    def export_embeddings():
        """t-SNE-ready CSV: label column + 120 embedding columns."""
        lines = ["label," + ",".join(f"e{i}" for i in range(120))]
        neg = profile.negative_embeddings()[:2000]
        for row in neg:
            lines.append("negative," + ",".join(f"{v:.5g}" for v in row))
        for g in profile.gestures():
            tensors = profile.load_shot_tensors(g.name, bundle.bank)
            emb = bundle.backbone.embed(tensor_crops(tensors))
            for row in emb:
                lines.append(g.name + "," +
                             ",".join(f"{v:.5g}" for v in row))
        from fastapi.responses import PlainTextResponse
        return PlainTextResponse("\n".join(lines), media_type="text/csv")

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        recognizer = StreamRecognizer(bundle.backbone, profile.head(),
                                      bundle.bank, profile.policy())
        while True:
            try:
                msg = await ws.receive_json()
            except WebSocketDisconnect:
                break
            except Exception:
                await ws.send_json({"error": "malformed message"})
                continue
            try:
                frames = _frames_array(msg["frames"])
                preds, events = recognizer.push(frames)
            except (FewgestError, KeyError, ValueError) as e:
                await ws.send_json({"error": str(e)})
                continue
            await ws.send_json({
                "predictions": [
                    {"t": round(p.t, 4), "label": p.label,
                     "confidence": round(p.confidence, 4), "source": p.source}
                    for p in preds],
                "events": [e.to_dict() for e in events],
            })
    return app


def serve(profile: UserProfile, host: str = "127.0.0.1", port: int = 8470,
          seed: int = 0) -> None:
    import uvicorn
    uvicorn.run(create_app(profile, seed), host=host, port=port,
                log_level="warning")

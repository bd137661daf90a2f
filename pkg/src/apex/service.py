"""HTTP surface for the session engine.

Endpoints mirror the domain types field-for-field as JSON. The event
stream is server-sent events, seq-ordered and resumable: ``?from=N``
replays everything after seq N before going live.
"""

from __future__ import annotations

import json

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse

from . import session as sess
from .errors import (
    ApexError,
    InvalidConfig,
    NoPendingQuery,
    SessionClosedError,
    StepOutOfRange,
    UnknownSession,
)
from .perception import RawFrame, context_from_dict
from .planner import (
    ExperimentPlan,
    FallbackReasoningBackend,
    PlanDefaults,
    Protocol,
    StepTrackingPlan,
    make_experiment_plan,
    make_tracking_plan,
)
from .sop import SopAtlas

STREAM_POLL_SECONDS = 15.0

_STATUS = {
    UnknownSession: 404,
    SessionClosedError: 409,
    NoPendingQuery: 409,
    StepOutOfRange: 400,
    InvalidConfig: 400,
}


def build_config_for_sop(
    atlas: SopAtlas,
    sop_id: str,
    backend: str = "scripted",
    mode: str = sess.MODE_LIVE,
    planner_backend=None,
) -> sess.SessionConfig:
    """Convenience: derive plans for a single-SOP protocol via the planner."""
    doc = atlas.lookup(sop_id)
    planner_backend = planner_backend or FallbackReasoningBackend()
    protocol = Protocol(intent=f"run {doc.title}", sop_ids=(sop_id,))
    defaults = getattr(planner_backend, "config", None)
    defaults = defaults.defaults if defaults is not None else PlanDefaults()
    return sess.SessionConfig(
        protocol=protocol,
        active_sop=sop_id,
        experiment_plan=make_experiment_plan(doc, planner_backend),
        tracking_plan=make_tracking_plan(doc, planner_backend, defaults),
        backend=backend,
        mode=mode,
    )


def config_from_dict(obj: dict, atlas: SopAtlas) -> sess.SessionConfig:
    if "sop_id" in obj and "experiment_plan" not in obj:
        return build_config_for_sop(
            atlas,
            obj["sop_id"],
            backend=obj.get("backend", "scripted"),
            mode=obj.get("mode", sess.MODE_LIVE),
        )
    try:
        protocol = Protocol(
            intent=obj["protocol"]["intent"],
            sop_ids=tuple(obj["protocol"]["sop_ids"]),
        )
        sop_id = obj["active_sop"]
        doc = atlas.lookup(sop_id) if sop_id in atlas else None
        plan_obj = obj["experiment_plan"]
        experiment_plan = ExperimentPlan(
            sop_id=plan_obj["sop_id"],
            steps=doc.steps if doc is not None else (),
            inventory=tuple(plan_obj["inventory"]),
        )
        tp = obj["tracking_plan"]
        tracking_plan = StepTrackingPlan(
            sop_id=tp["sop_id"],
            memory_update_interval=int(tp["memory_update_interval"]),
            prediction_interval=int(tp["prediction_interval"]),
            confidence_threshold=float(tp["confidence_threshold"]),
            rationale=str(tp.get("rationale", "")),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidConfig(f"bad session config: {e}") from e
    return sess.SessionConfig(
        protocol=protocol,
        active_sop=sop_id,
        experiment_plan=experiment_plan,
        tracking_plan=tracking_plan,
        backend=obj.get("backend", "scripted"),
        backend_params=obj.get("backend_params", {}),
        mode=obj.get("mode", sess.MODE_LIVE),
    )


def frame_from_dict(obj: dict) -> RawFrame:
    frame_index = int(obj["frame_index"])
    timestamp = int(obj["timestamp"])
    context = None
    if "context" in obj:
        context = context_from_dict(obj["context"], frame_index, timestamp)
    predicted = tuple(obj["predicted"]) if "predicted" in obj else None
    return RawFrame(
        frame_index=frame_index,
        timestamp=timestamp,
        payload=obj.get("payload"),
        aux=obj.get("aux"),
        context=context,
        predicted=predicted,
    )


def _sse(event: sess.SessionEvent) -> str:
    return f"id: {event.seq}\ndata: {json.dumps(event.to_dict(), sort_keys=True)}\n\n"


def create_app(store: sess.SessionStore) -> FastAPI:
    app = FastAPI(title="apex session service")

    @app.exception_handler(ApexError)
    async def apex_error(request: Request, exc: ApexError):
        status = next(
            (code for klass, code in _STATUS.items() if isinstance(exc, klass)), 400
        )
        return JSONResponse(status_code=status, content={"error": str(exc)})

    @app.post("/sessions")
    async def create_session(body: dict):
        config = config_from_dict(body, store.atlas)
        session_id = store.create(config)
        return {"session_id": session_id}

    @app.post("/sessions/{session_id}/frames")
    async def post_frame(session_id: str, body: dict):
        events = store.handle(session_id, sess.FrameArrival(frame_from_dict(body)))
        return {"events": [e.to_dict() for e in events]}

    @app.post("/sessions/{session_id}/answer")
    async def post_answer(session_id: str, body: dict):
        events = store.handle(session_id, sess.HumanAnswer(step=int(body["step"])))
        return {"events": [e.to_dict() for e in events]}

    @app.post("/sessions/{session_id}/query")
    async def post_query(session_id: str, body: dict):
        events = store.handle(session_id, sess.HumanQuestion(question=str(body["question"])))
        return {"events": [e.to_dict() for e in events]}

    @app.post("/sessions/{session_id}/close")
    async def post_close(session_id: str):
        events = store.handle(session_id, sess.Close())
        return {"events": [e.to_dict() for e in events]}

    @app.get("/sessions/{session_id}/log")
    async def get_log(session_id: str):
        return PlainTextResponse(store.export_log(session_id), media_type="application/json")

    @app.get("/sessions/{session_id}/events")
    async def get_events(session_id: str, from_seq: int = Query(0, alias="from")):
        engine = store.get(session_id)

        def stream():
            last = from_seq
            while True:
                with engine.new_events:
                    batch = engine.events_after(last)
                    if not batch and not engine.closed:
                        engine.new_events.wait(STREAM_POLL_SECONDS)
                        batch = engine.events_after(last)
                if not batch and not engine.closed:
                    yield ": keepalive\n\n"
                    continue
                for event in batch:
                    last = event.seq
                    yield _sse(event)
                if engine.closed and not engine.events_after(last):
                    return

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app

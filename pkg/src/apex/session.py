"""Session engine: one totally ordered event stream per live procedure.

Every input (frame, human answer, human question, close) is funneled
through a per-session lock and appended to the log as a gap-free,
seq-numbered event list; derived state is always recomputable from the
stream. In live mode timestamps come from the wall clock; in replay mode
they are copied from the recording so exports are bit-exact.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

from . import analysis, tracker
from .analysis import AnalysisHistory, FallbackQueryBackend
from .errors import (
    FrameDropped,
    InvalidConfig,
    SessionClosedError,
    UnknownSession,
)
from .perception import ContextFrame, RawFrame, ScriptedPerceptionBackend, contextualize
from .planner import ExperimentPlan, Protocol, StepTrackingPlan
from .sop import SopAtlas, SopDoc, bundled_atlas
from .tracker import ScriptedPredictionBackend, TrackerState
from .wire import canonical_json

MODE_LIVE = "live"
MODE_REPLAY = "replay"

EV_SESSION_STARTED = "SessionStarted"
EV_FRAME_INGESTED = "FrameIngested"
EV_FRAME_DROPPED = "FrameDropped"
EV_STEP_CONFIRMED = "StepConfirmed"
EV_CLARIFICATION_REQUESTED = "ClarificationRequested"
EV_CLARIFICATION_ANSWERED = "ClarificationAnswered"
EV_ALERT_RAISED = "AlertRaised"
EV_GUIDANCE_ISSUED = "GuidanceIssued"
EV_QUERY_ASKED = "QueryAsked"
EV_QUERY_ANSWERED = "QueryAnswered"
EV_LOG_APPENDED = "LogAppended"
EV_SESSION_CLOSED = "SessionClosed"


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    timestamp: int
    kind: str
    data: dict

    def to_dict(self) -> dict:
        return {"seq": self.seq, "timestamp": self.timestamp, "kind": self.kind, "data": self.data}


@dataclass(frozen=True)
class SessionConfig:
    protocol: Protocol
    active_sop: str
    experiment_plan: ExperimentPlan
    tracking_plan: StepTrackingPlan
    backend: str = "scripted"
    backend_params: dict = field(default_factory=dict)
    mode: str = MODE_REPLAY

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol.to_dict(),
            "active_sop": self.active_sop,
            "experiment_plan": self.experiment_plan.to_dict(),
            "tracking_plan": self.tracking_plan.to_dict(),
            "backend": self.backend,
            "backend_params": self.backend_params,
            "mode": self.mode,
        }

    def validate(self, atlas: SopAtlas) -> None:
        if not self.protocol.sop_ids:
            raise InvalidConfig("protocol has no SOPs")
        if self.active_sop not in self.protocol.sop_ids:
            raise InvalidConfig(
                f"active_sop {self.active_sop!r} not in protocol {list(self.protocol.sop_ids)}"
            )
        if self.active_sop not in atlas:
            raise InvalidConfig(f"active_sop {self.active_sop!r} not in atlas")
        if self.experiment_plan.sop_id != self.active_sop:
            raise InvalidConfig("experiment plan is for a different SOP")
        if self.tracking_plan.sop_id != self.active_sop:
            raise InvalidConfig("tracking plan is for a different SOP")
        doc = atlas.lookup(self.active_sop)
        if [s.index for s in self.experiment_plan.steps] != [s.index for s in doc.steps]:
            raise InvalidConfig("experiment plan steps do not match the SOP")
        tp = self.tracking_plan
        if tp.memory_update_interval < 1 or tp.prediction_interval < tp.memory_update_interval:
            raise InvalidConfig("tracking plan intervals out of range")
        if not 0 < tp.confidence_threshold <= 1:
            raise InvalidConfig("confidence threshold outside (0,1]")


# Inputs accepted by handle_event.
@dataclass(frozen=True)
class FrameArrival:
    frame: RawFrame


@dataclass(frozen=True)
class HumanAnswer:
    step: int


@dataclass(frozen=True)
class HumanQuestion:
    question: str


@dataclass(frozen=True)
class Close:
    pass


class SessionEngine:
    """Single-writer event loop for one session."""

    def __init__(
        self,
        config: SessionConfig,
        atlas: SopAtlas | None = None,
        session_id: str | None = None,
        perception_backend=None,
        prediction_backend=None,
        query_backend=None,
        log_path=None,
    ):
        atlas = atlas or bundled_atlas()
        config.validate(atlas)
        self.config = config
        self.session_id = session_id or uuid.uuid4().hex
        self.doc: SopDoc = atlas.lookup(config.active_sop)
        self.perception_backend = perception_backend or ScriptedPerceptionBackend()
        self.prediction_backend = prediction_backend or ScriptedPredictionBackend()
        self.query_backend = query_backend or FallbackQueryBackend()
        self.tracker_state = TrackerState(plan=config.tracking_plan, n_steps=self.doc.n_steps)
        self.history = AnalysisHistory(total_steps=self.doc.n_steps)
        self.events: list[SessionEvent] = []
        self.closed = False
        self._last_context: ContextFrame | None = None
        self._clock_ms = 0
        self._t0 = time.time()
        self._lock = threading.RLock()
        self.new_events = threading.Condition(self._lock)
        self._log_file = open(log_path, "a", encoding="utf-8") if log_path else None
        self._append(EV_SESSION_STARTED, {"config": config.to_dict()})

    # -- event plumbing ----------------------------------------------------

    def _now(self) -> int:
        if self.config.mode == MODE_REPLAY:
            return self._clock_ms
        return int((time.time() - self._t0) * 1000)

    def _append(self, kind: str, data: dict) -> SessionEvent:
        event = SessionEvent(
            seq=len(self.events) + 1, timestamp=self._now(), kind=kind, data=data
        )
        self.events.append(event)
        if self._log_file is not None:
            # durable before the input that caused it is acknowledged
            self._log_file.write(canonical_json(event.to_dict()) + "\n")
            self._log_file.flush()
        return event

    # -- input handling ----------------------------------------------------

    def handle(self, message) -> list[SessionEvent]:
        """Process one input; returns the events it appended, in order."""
        with self._lock:
            start = len(self.events)
            if isinstance(message, Close):
                self._handle_close()
            elif self.closed:
                raise SessionClosedError(self.session_id)
            elif isinstance(message, FrameArrival):
                self._handle_frame(message.frame)
            elif isinstance(message, HumanAnswer):
                self._handle_answer(message.step)
            elif isinstance(message, HumanQuestion):
                self._handle_question(message.question)
            else:
                raise TypeError(f"unsupported input {message!r}")
            appended = self.events[start:]
            if appended:
                self.new_events.notify_all()
            return appended

    def _handle_frame(self, frame: RawFrame) -> None:
        if self.config.mode == MODE_REPLAY:
            self._clock_ms = frame.timestamp
        if frame.predicted is not None and hasattr(self.prediction_backend, "table"):
            self.prediction_backend.table[frame.frame_index] = frame.predicted
        try:
            context = contextualize(frame, self.config.experiment_plan, self.perception_backend)
        except FrameDropped as e:
            self._append(
                EV_FRAME_DROPPED,
                {"frame_index": frame.frame_index, "stage": "perception", "reason": str(e)},
            )
            return
        self._last_context = context
        self._append(EV_FRAME_INGESTED, context.to_dict())
        result = tracker.ingest_frame(
            self.tracker_state, context, self.prediction_backend, self.history
        )
        if result.update_skipped:
            self._append(
                EV_FRAME_DROPPED,
                {
                    "frame_index": frame.frame_index,
                    "stage": "prediction",
                    "reason": result.update_skipped,
                },
            )
        if result.confirmed is not None:
            self._emit_confirmation(result.confirmed, context, with_analysis=True)
        if result.query is not None:
            self._append(EV_CLARIFICATION_REQUESTED, result.query.to_dict())

    def _emit_confirmation(self, confirmed, context: ContextFrame, with_analysis: bool) -> None:
        self._append(EV_STEP_CONFIRMED, confirmed.to_dict())
        if with_analysis:
            step = self.doc.step(confirmed.top.step)
            for alert in analysis.detect_errors(context, step):
                self._append(EV_ALERT_RAISED, alert.to_dict())
            guidance = analysis.make_guidance(confirmed, context, self.doc)
            self._append(EV_GUIDANCE_ISSUED, guidance.to_dict())
        record = analysis.append_record(
            self.history, confirmed, context, self.config.tracking_plan.confidence_threshold
        )
        if record is not None:
            self._append(EV_LOG_APPENDED, record.to_dict())

    def _handle_answer(self, step: int) -> None:
        confirmed = tracker.apply_clarification(self.tracker_state, step)
        self._append(EV_CLARIFICATION_ANSWERED, {"step": step})
        context = self._last_context or ContextFrame(frame_index=-1, timestamp=self._now())
        self._emit_confirmation(confirmed, context, with_analysis=False)

    def _handle_question(self, question: str) -> None:
        self._append(EV_QUERY_ASKED, {"question": question})
        answer = analysis.answer_query(question, self.history, self.query_backend)
        self._append(EV_QUERY_ANSWERED, answer.to_dict())

    def _handle_close(self) -> None:
        if self.closed:
            return
        self.closed = True
        self._append(EV_SESSION_CLOSED, {})
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None

    # -- observers -----------------------------------------------------------

    @property
    def current_step(self) -> int:
        return self.tracker_state.previous_step

    def events_after(self, seq: int) -> list[SessionEvent]:
        with self._lock:
            return self.events[seq:]

    def export_log(self) -> str:
        """Canonical JSON document; byte-identical across repeated exports."""
        with self._lock:
            doc = {
                "session_id": self.session_id,
                "partial": not self.closed,
                "config": self.config.to_dict(),
                "events": [e.to_dict() for e in self.events],
                "records": [r.to_dict() for r in self.history.records],
            }
        return canonical_json(doc) + "\n"

    def derived_view(self) -> "DerivedView":
        return fold_events([e.to_dict() for e in self.events])


@dataclass(frozen=True)
class DerivedView:
    """State any consumer can rebuild by folding the event stream."""

    last_step: int
    accepted: tuple[tuple[int, str], ...]  # (step, source) per StepConfirmed
    pending_clarification: bool
    frames: int
    dropped: int
    alerts: int
    hitl_requests: int
    records: tuple[tuple[int, int, str], ...]  # (seq, step, source) per LogAppended
    closed: bool


def fold_events(events: list[dict]) -> DerivedView:
    """Pure fold; feeding an exported stream back in reproduces the state."""
    last_step = 0
    accepted: list[tuple[int, str]] = []
    pending = False
    frames = dropped = alerts = hitl = 0
    records: list[tuple[int, int, str]] = []
    closed = False
    for event in sorted(events, key=lambda e: e["seq"]):
        kind, data = event["kind"], event["data"]
        if kind == EV_FRAME_INGESTED:
            frames += 1
        elif kind == EV_FRAME_DROPPED:
            dropped += 1
        elif kind == EV_STEP_CONFIRMED:
            last_step = data["top"]["step"]
            accepted.append((last_step, data["source"]))
        elif kind == EV_CLARIFICATION_REQUESTED:
            pending = True
            hitl += 1
        elif kind == EV_CLARIFICATION_ANSWERED:
            pending = False
        elif kind == EV_ALERT_RAISED:
            alerts += 1
        elif kind == EV_LOG_APPENDED:
            records.append((data["seq"], data["step"], data["source"]))
        elif kind == EV_SESSION_CLOSED:
            closed = True
    return DerivedView(
        last_step=last_step,
        accepted=tuple(accepted),
        pending_clarification=pending,
        frames=frames,
        dropped=dropped,
        alerts=alerts,
        hitl_requests=hitl,
        records=tuple(records),
        closed=closed,
    )


class SessionStore:
    """All live sessions in one process; cross-session calls may run in parallel."""

    def __init__(self, atlas: SopAtlas | None = None, backend_factory=None, log_dir=None):
        from pathlib import Path

        self.atlas = atlas or bundled_atlas()
        self.backend_factory = backend_factory
        self.log_dir = Path(log_dir) if log_dir else None
        if self.log_dir:
            self.log_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, SessionEngine] = {}
        self._lock = threading.Lock()

    def create(self, config: SessionConfig, session_id: str | None = None, **backends) -> str:
        if self.backend_factory is not None and not backends:
            backends = self.backend_factory(config)
        session_id = session_id or uuid.uuid4().hex
        log_path = self.log_dir / f"{session_id}.events.jsonl" if self.log_dir else None
        engine = SessionEngine(
            config, atlas=self.atlas, session_id=session_id, log_path=log_path, **backends
        )
        with self._lock:
            self._sessions[engine.session_id] = engine
        return engine.session_id

    def get(self, session_id: str) -> SessionEngine:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSession(session_id) from None

    def handle(self, session_id: str, message) -> list[SessionEvent]:
        return self.get(session_id).handle(message)

    def export_log(self, session_id: str) -> str:
        return self.get(session_id).export_log()

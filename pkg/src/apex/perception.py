"""Frame contextualization: raw observations to structured scene records.

Backends implement ``describe(frame, plan) -> ContextFrame-ish dict`` and
may fail; contextualize() normalizes equipment names against the plan
inventory so downstream agents only ever see canonical names (or
"unknown"). A scripted backend replays table- or frame-embedded context
rows; the remote backend posts to an HTTP model endpoint.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import BackendFailure, FrameDropped, MalformedRecording, UnknownSop
from .planner import ExperimentPlan, StepTrackingPlan
from .sop import SopAtlas

UNKNOWN = "unknown"
NONE_OBSERVED = "none observed"
_WORD_RE = re.compile(r"[a-z0-9]+")
_QUANTITY_RE = re.compile(r"^\s*([+-]?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)\s*(\S.*)?$")


@dataclass(frozen=True)
class Reading:
    name: str
    value: float | str
    unit: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "unit": self.unit}


@dataclass(frozen=True)
class EquipmentObservation:
    name: str
    position: str = ""
    readings: tuple[Reading, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "position": self.position,
            "readings": [r.to_dict() for r in self.readings],
        }


@dataclass(frozen=True)
class ContextFrame:
    frame_index: int
    timestamp: int
    equipment: tuple[EquipmentObservation, ...] = ()
    environment: str = NONE_OBSERVED
    action: str = NONE_OBSERVED

    def readings(self) -> list[Reading]:
        return [r for obs in self.equipment for r in obs.readings]

    def to_dict(self) -> dict:
        return {
            "frame_index": self.frame_index,
            "timestamp": self.timestamp,
            "equipment": [o.to_dict() for o in self.equipment],
            "environment": self.environment,
            "action": self.action,
        }


@dataclass(frozen=True)
class RawFrame:
    """One observation frame as it arrives from the device or a recording.

    ``context`` and ``predicted`` carry scripted rows when the frame comes
    from a replay fixture; live frames leave them unset.
    """

    frame_index: int
    timestamp: int
    payload: dict | str | None = None
    aux: str | None = None
    context: ContextFrame | None = None
    predicted: tuple[dict, ...] | None = None

    def to_dict(self) -> dict:
        d: dict = {"frame_index": self.frame_index, "timestamp": self.timestamp}
        if self.payload is not None:
            d["payload"] = self.payload
        if self.aux is not None:
            d["aux"] = self.aux
        if self.context is not None:
            c = self.context.to_dict()
            del c["frame_index"], c["timestamp"]
            d["context"] = c
        if self.predicted is not None:
            d["predicted"] = list(self.predicted)
        return d


@dataclass(frozen=True)
class RecordingHeader:
    sop_id: str
    experiment_plan: ExperimentPlan
    tracking_plan: StepTrackingPlan


@dataclass(frozen=True)
class Recording:
    header: RecordingHeader
    frames: tuple[RawFrame, ...]

    def __len__(self) -> int:
        return len(self.frames)

    def prediction_table(self) -> dict[int, tuple[dict, ...]]:
        return {
            f.frame_index: f.predicted for f in self.frames if f.predicted is not None
        }

    def context_table(self) -> dict[int, ContextFrame]:
        return {f.frame_index: f.context for f in self.frames if f.context is not None}


def parse_quantity(text: str) -> tuple[float | str, str]:
    """Split "50 W" into (50.0, "W"); non-numeric text stays a token."""
    m = _QUANTITY_RE.match(text)
    if not m:
        return text.strip(), ""
    value, unit = m.groups()
    return float(value), (unit or "").strip()


def _reading_from(obj: dict) -> Reading:
    value = obj.get("value", "")
    unit = str(obj.get("unit", ""))
    if isinstance(value, str) and not unit:
        value, unit = parse_quantity(value)
    if isinstance(value, bool):
        value = str(value)
    return Reading(name=str(obj.get("name", "")), value=value, unit=unit)


def context_from_dict(obj: dict, frame_index: int, timestamp: int) -> ContextFrame:
    equipment = tuple(
        EquipmentObservation(
            name=str(e.get("name", UNKNOWN)),
            position=str(e.get("position", "")),
            readings=tuple(_reading_from(r) for r in e.get("readings", ())),
        )
        for e in obj.get("equipment", ())
    )
    return ContextFrame(
        frame_index=frame_index,
        timestamp=timestamp,
        equipment=equipment,
        environment=str(obj.get("environment") or NONE_OBSERVED),
        action=str(obj.get("action") or NONE_OBSERVED),
    )


def normalize_equipment_name(raw: str, plan: ExperimentPlan) -> str:
    """Map free text onto the inventory entry it overlaps most.

    Overlap counts distinct case-folded word tokens; a match needs at
    least one shared token of length >= 3. Ties go to the longest
    inventory name, then lexicographically smallest. No overlap maps to
    "unknown". Idempotent: inventory names and "unknown" map to themselves.
    """
    trimmed = raw.strip()
    if trimmed == UNKNOWN:
        return UNKNOWN
    folded = trimmed.casefold()
    for name in plan.inventory:
        if name.strip().casefold() == folded:
            return name
    raw_tokens = set(_WORD_RE.findall(folded))
    best_name = None
    best_key = None
    for name in plan.inventory:
        shared = raw_tokens & set(_WORD_RE.findall(name.casefold()))
        if not any(len(t) >= 3 for t in shared):
            continue
        key = (len(shared), len(name), [-ord(c) for c in name])
        if best_key is None or key > best_key:
            best_key, best_name = key, name
    return best_name if best_name is not None else UNKNOWN


class ScriptedPerceptionBackend:
    """Replays context rows embedded in frames or provided as a table."""

    def __init__(self, table: dict[int, ContextFrame] | None = None):
        self.table = table or {}

    def describe(self, frame: RawFrame, plan: ExperimentPlan) -> ContextFrame:
        if frame.context is not None:
            return frame.context
        row = self.table.get(frame.frame_index)
        if row is not None:
            return row
        if isinstance(frame.payload, dict):
            return context_from_dict(frame.payload, frame.frame_index, frame.timestamp)
        raise BackendFailure(f"no scripted context for frame {frame.frame_index}")

    retries = 0  # deterministic: retrying a table lookup cannot help


class RemotePerceptionBackend:
    """HTTP adapter: posts the frame plus plan inventory, parses the reply."""

    retries = 1

    def __init__(self, client, examples: list[dict] | None = None):
        self.client = client
        self.examples = examples or []

    def describe(self, frame: RawFrame, plan: ExperimentPlan) -> ContextFrame:
        reply = self.client.call(
            "contextualize",
            {
                "frame": frame.to_dict(),
                "inventory": list(plan.inventory),
                "examples": self.examples,
            },
        )
        return context_from_dict(reply, frame.frame_index, frame.timestamp)


def contextualize(frame: RawFrame, plan: ExperimentPlan, backend) -> ContextFrame:
    """Describe one frame and ground every equipment name in the plan.

    One retry on backend failure, then the frame is dropped: skipped
    frames are logged upstream, never fabricated.
    """
    attempts = getattr(backend, "retries", 1) + 1
    last_error: Exception | None = None
    for _ in range(attempts):
        try:
            described = backend.describe(frame, plan)
            break
        except BackendFailure as e:
            last_error = e
    else:
        raise FrameDropped(
            f"frame {frame.frame_index}: backend failed after retry ({last_error})"
        )
    equipment = tuple(
        EquipmentObservation(
            name=normalize_equipment_name(obs.name, plan),
            position=obs.position,
            readings=obs.readings,
        )
        for obs in described.equipment
    )
    return ContextFrame(
        frame_index=frame.frame_index,
        timestamp=frame.timestamp,
        equipment=equipment,
        environment=described.environment or NONE_OBSERVED,
        action=described.action or NONE_OBSERVED,
    )


def _frame_from_line(obj: dict, line_no: int) -> RawFrame:
    if "frame_index" not in obj or "timestamp" not in obj:
        raise MalformedRecording("frame needs frame_index and timestamp", line_no)
    frame_index = obj["frame_index"]
    timestamp = obj["timestamp"]
    context = None
    if "context" in obj or "equipment" in obj:
        body = obj.get("context", obj)
        context = context_from_dict(body, frame_index, timestamp)
    predicted = None
    if "predicted" in obj:
        predicted = tuple(obj["predicted"])
    return RawFrame(
        frame_index=frame_index,
        timestamp=timestamp,
        payload=obj.get("payload"),
        aux=obj.get("aux"),
        context=context,
        predicted=predicted,
    )


def load_recording(path: str | Path, atlas: SopAtlas | None = None) -> Recording:
    """Load a line-delimited recording: header line, then one frame per line."""
    from .sop import bundled_atlas

    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].strip():
        raise MalformedRecording("missing header record", 1)
    try:
        header_obj = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise MalformedRecording(f"header: {e.msg}", 1) from e
    atlas = atlas or bundled_atlas()
    sop_id = header_obj.get("sop_id")
    if sop_id not in atlas:
        raise UnknownSop(str(sop_id))
    doc = atlas.lookup(sop_id)
    plan_obj = header_obj.get("experiment_plan", {})
    experiment_plan = ExperimentPlan(
        sop_id=sop_id,
        steps=doc.steps,
        inventory=tuple(plan_obj.get("inventory", doc.equipment)),
    )
    tp = header_obj.get("tracking_plan", {})
    tracking_plan = StepTrackingPlan(
        sop_id=sop_id,
        memory_update_interval=int(tp.get("memory_update_interval", 1)),
        prediction_interval=int(tp.get("prediction_interval", 3)),
        confidence_threshold=float(tp.get("confidence_threshold", 0.7)),
        rationale=str(tp.get("rationale", "")),
    )
    frames: list[RawFrame] = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise MalformedRecording(e.msg, line_no) from e
        frame = _frame_from_line(obj, line_no)
        if frames:
            if frame.frame_index <= frames[-1].frame_index:
                raise MalformedRecording(
                    f"frame_index {frame.frame_index} not increasing", line_no
                )
            if frame.timestamp < frames[-1].timestamp:
                raise MalformedRecording(
                    f"timestamp {frame.timestamp} decreases", line_no
                )
        frames.append(frame)
    return Recording(
        header=RecordingHeader(sop_id, experiment_plan, tracking_plan),
        frames=tuple(frames),
    )


def save_recording(path: str | Path, recording: Recording) -> None:
    from .wire import canonical_json

    header = {
        "sop_id": recording.header.sop_id,
        "experiment_plan": {"inventory": list(recording.header.experiment_plan.inventory)},
        "tracking_plan": {
            "memory_update_interval": recording.header.tracking_plan.memory_update_interval,
            "prediction_interval": recording.header.tracking_plan.prediction_interval,
            "confidence_threshold": recording.header.tracking_plan.confidence_threshold,
        },
    }
    lines = [canonical_json(header)]
    lines += [canonical_json(f.to_dict()) for f in recording.frames]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

"""Evolving experiment log, setpoint checking, guidance, and grounded Q&A.

The history is append-only: records are never reordered or rewritten, and
serializing a prefix of a run yields a byte prefix of the full run's
serialization. Error detection compares frame readings against the active
step's parameter specs; unit disagreement on a matching name is itself a
mismatch (silent unit confusion is the dangerous failure mode), while a
spec with no matching reading stays quiet because the operator may simply
not be at that panel yet.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import StepOutOfRange
from .perception import ContextFrame, Reading
from .sop import SopDoc, SopStep
from .tracker import SOURCE_HUMAN, ConfirmedStep
from .wire import number_text

_WORD_RE = re.compile(r"[a-z0-9]+")
_STOPWORDS = frozenset(
    "a an and are at did do does for how i in is it my of on or the to was "
    "what when where which who you".split()
)

KIND_PARAMETER_MISMATCH = "ParameterMismatch"
KIND_SEQUENCE_DEVIATION = "SequenceDeviation"


def canonical_param_name(name: str) -> str:
    """Fold "RF Power" and "rf_power" onto the same key."""
    return "_".join(_WORD_RE.findall(name.casefold()))

PROCEDURE_COMPLETE = "procedure complete"


@dataclass(frozen=True)
class LogRecord:
    seq: int
    timestamp: int
    step: int
    key_actions: tuple[str, ...]
    key_parameters: tuple[Reading, ...]
    summary: str
    progress: float
    source: str

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "step": self.step,
            "key_actions": list(self.key_actions),
            "key_parameters": [r.to_dict() for r in self.key_parameters],
            "summary": self.summary,
            "progress": self.progress,
            "source": self.source,
        }


@dataclass(frozen=True)
class Alert:
    kind: str
    step: int
    parameter: str
    observed: str
    expected: str
    message: str

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "step": self.step,
            "parameter": self.parameter,
            "observed": self.observed,
            "expected": self.expected,
            "message": self.message,
        }


@dataclass(frozen=True)
class Guidance:
    current_action: str
    required_action: str
    next_step_preview: str

    def to_dict(self) -> dict:
        return {
            "current_action": self.current_action,
            "required_action": self.required_action,
            "next_step_preview": self.next_step_preview,
        }


@dataclass(frozen=True)
class GroundedAnswer:
    text: str
    citations: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {"text": self.text, "citations": list(self.citations)}


class AnalysisHistory:
    """Append-only record list for one SOP session."""

    def __init__(self, total_steps: int):
        if total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        self.total_steps = total_steps
        self.records: list[LogRecord] = []

    def step_sequence(self) -> list[int]:
        return [r.step for r in self.records]

    def tail_dicts(self, n: int = 3) -> list[dict]:
        return [r.to_dict() for r in self.records[-n:]]

    def __len__(self) -> int:
        return len(self.records)


def append_record(
    history: AnalysisHistory,
    confirmed: ConfirmedStep,
    frame: ContextFrame,
    threshold: float,
) -> LogRecord | None:
    """Consolidate a confirmed step into the log, if it clears the bar.

    Human-sourced confirmations always log; vote-sourced ones only at or
    above the confidence threshold. Key parameters are the frame's
    readings, copied verbatim.
    """
    if confirmed.source != SOURCE_HUMAN and confirmed.top.aggregated_confidence < threshold:
        return None
    step = confirmed.top.step
    record = LogRecord(
        seq=len(history.records) + 1,
        timestamp=frame.timestamp,
        step=step,
        key_actions=(frame.action,),
        key_parameters=tuple(frame.readings()),
        summary=f"step {step}/{history.total_steps}: {frame.action}; environment: {frame.environment}",
        progress=step / history.total_steps,
        source=confirmed.source,
    )
    history.records.append(record)
    return record


def _quantity_text(value, unit: str) -> str:
    text = number_text(value)
    return f"{text} {unit}".strip()


def detect_errors(frame: ContextFrame, step: SopStep) -> list[Alert]:
    """One alert per (spec, matching reading) pair that violates the spec."""
    alerts: list[Alert] = []
    for spec in step.params:
        spec_name = canonical_param_name(spec.name)
        for reading in frame.readings():
            if canonical_param_name(reading.name) != spec_name:
                continue
            observed = _quantity_text(reading.value, reading.unit)
            if spec.mode == "numeric":
                tolerance = spec.tolerance or 0.0
                expected = (
                    f"{_quantity_text(spec.expected, spec.unit)}"
                    f" ± {_quantity_text(tolerance, spec.unit)}"
                )
                if reading.unit.strip().casefold() != spec.unit.strip().casefold():
                    alerts.append(
                        Alert(
                            kind=KIND_PARAMETER_MISMATCH,
                            step=step.index,
                            parameter=spec.name,
                            observed=observed,
                            expected=expected,
                            message=(
                                f"unit disagreement on {spec.name}: observed {observed}, "
                                f"required {expected}"
                            ),
                        )
                    )
                    continue
                violated = (
                    not isinstance(reading.value, (int, float))
                    or isinstance(reading.value, bool)
                    or abs(float(reading.value) - float(spec.expected)) > tolerance
                )
                if violated:
                    alerts.append(
                        Alert(
                            kind=KIND_PARAMETER_MISMATCH,
                            step=step.index,
                            parameter=spec.name,
                            observed=observed,
                            expected=expected,
                            message=(
                                f"The current settings are incorrect: {spec.name} reads "
                                f"{observed}, required {expected}"
                            ),
                        )
                    )
            else:
                expected = str(spec.expected)
                if str(reading.value).strip().casefold() != expected.strip().casefold():
                    alerts.append(
                        Alert(
                            kind=KIND_PARAMETER_MISMATCH,
                            step=step.index,
                            parameter=spec.name,
                            observed=observed,
                            expected=expected,
                            message=(
                                f"The current settings are incorrect: {spec.name} shows "
                                f"{observed}, required {expected}"
                            ),
                        )
                    )
    return alerts


def make_guidance(confirmed: ConfirmedStep, frame: ContextFrame, doc: SopDoc) -> Guidance:
    """What the operator is doing, what the step needs, and what comes next."""
    step = confirmed.top.step
    if not 1 <= step <= doc.n_steps:
        raise StepOutOfRange(step, doc.n_steps)
    next_preview = (
        doc.step(step + 1).instruction if step < doc.n_steps else PROCEDURE_COMPLETE
    )
    return Guidance(
        current_action=frame.action,
        required_action=doc.step(step).instruction,
        next_step_preview=next_preview,
    )


def _record_search_text(record: LogRecord) -> set[str]:
    parts = [record.summary, f"step {record.step}", str(record.step)]
    parts.extend(record.key_actions)
    for reading in record.key_parameters:
        parts.append(reading.name)
        parts.append(_quantity_text(reading.value, reading.unit))
    return set(_WORD_RE.findall(" ".join(parts).casefold()))


class FallbackQueryBackend:
    """Keyword retrieval over the log; total and deterministic."""

    def answer(self, question: str, history: AnalysisHistory) -> GroundedAnswer:
        if not history.records:
            return GroundedAnswer("no records available")
        q_tokens = set(_WORD_RE.findall(question.casefold())) - _STOPWORDS
        best: LogRecord | None = None
        best_key = (0, 0)
        for record in history.records:
            score = len(q_tokens & _record_search_text(record))
            key = (score, record.seq)  # tie: prefer the latest record
            if score > 0 and key > best_key:
                best, best_key = record, key
        if best is None:
            return GroundedAnswer(f"no matching records for: {question}")
        params = ", ".join(
            f"{r.name}={_quantity_text(r.value, r.unit)}" for r in best.key_parameters
        )
        text = (
            f"Record #{best.seq}: step {best.step} at timestamp {best.timestamp} ms "
            f"({best.summary})."
        )
        if params:
            text += f" You set {params}."
        return GroundedAnswer(text, citations=(best.seq,))


class RemoteQueryBackend:
    """HTTP adapter for memory-grounded Q&A; citations are validated."""

    def __init__(self, client):
        self.client = client

    def answer(self, question: str, history: AnalysisHistory) -> GroundedAnswer:
        reply = self.client.call(
            "answer",
            {"question": question, "records": [r.to_dict() for r in history.records]},
        )
        valid = {r.seq for r in history.records}
        citations = tuple(
            int(c) for c in reply.get("citations", ()) if isinstance(c, (int, float)) and int(c) in valid
        )
        return GroundedAnswer(str(reply.get("text", "")), citations)


def answer_query(question: str, history: AnalysisHistory, backend) -> GroundedAnswer:
    """Answer from the log; never cites a seq that does not exist."""
    return backend.answer(question, history)

"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class ApexError(Exception):
    """Base class for all engine errors."""


class MalformedDocument(ApexError):
    """SOP file is not syntactically valid."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class SchemaViolation(ApexError):
    """SOP file parsed but violates the document schema."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class UnknownSop(ApexError):
    def __init__(self, sop_id: str):
        self.sop_id = sop_id
        super().__init__(f"unknown SOP id {sop_id!r}")


class NoMatchingSop(ApexError):
    """Fallback protocol composition found nothing matching the intent."""


class BackendFailure(ApexError):
    """A model backend failed after its retry budget."""


class FrameDropped(ApexError):
    """Perception could not describe a frame; the frame is skipped."""


class MalformedRecording(ApexError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class EmptyMemory(ApexError):
    """Vote aggregation was asked to run over a memory with no predictions."""


class NoPendingQuery(ApexError):
    """A clarification answer arrived but no query is pending."""


class StepOutOfRange(ApexError):
    def __init__(self, step: int, n_steps: int):
        self.step = step
        super().__init__(f"step {step} outside 1..{n_steps}")


class UnknownSession(ApexError):
    def __init__(self, session_id: str):
        self.session_id = session_id
        super().__init__(f"unknown session {session_id!r}")


class SessionClosedError(ApexError):
    """Input other than close arrived on a closed session."""


class InvalidConfig(ApexError):
    """Session configuration violates its invariants."""


class LengthMismatch(ApexError):
    """Recording and ground truth disagree on frame count."""


class EmptyScores(ApexError):
    pass


class OutOfRangeScore(ApexError):
    def __init__(self, score):
        self.score = score
        super().__init__(f"score {score!r} outside 1..5")

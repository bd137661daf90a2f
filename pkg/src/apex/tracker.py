"""Step tracking: interval-driven FIFO memory and confidence-weighted voting.

Per-frame predictions (ranked top-3 step candidates with self-reported
confidence in [0,1]) accumulate in a FIFO memory sized to span exactly one
prediction window. At each prediction boundary the memory votes: rank-1
candidates elect the top confirmed step, rank-2 the second, rank-3 the
third, each rank excluding steps already confirmed above it. A rank whose
pool has no eligible votes falls back to the nearest lower rank's
remaining votes, so a memory of single-candidate predictions still yields
a runner-up. The aggregated confidence of a winner is the sum of its
votes' confidences divided by its pool size, i.e. vote share times mean
confidence.

Confirmed steps pass a transition guard (confidence threshold, step delta
in {0, 1}); failures either auto-resolve against a consistent history or
block the tracker behind a human clarification query.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import BackendFailure, EmptyMemory, NoPendingQuery, StepOutOfRange
from .perception import ContextFrame
from .planner import StepTrackingPlan

SOURCE_VOTE = "vote"
SOURCE_HUMAN = "human"

REASON_LOW_CONFIDENCE = "LowConfidence"
REASON_ILLEGAL_TRANSITION = "IllegalTransition"


@dataclass(frozen=True)
class Candidate:
    step: int
    confidence: float

    def to_dict(self) -> dict:
        return {"step": self.step, "confidence": self.confidence}


@dataclass(frozen=True)
class FramePrediction:
    frame_index: int
    candidates: tuple[Candidate, ...]
    reasoning: str = ""


def sanitize_candidates(raw: list[dict] | tuple[dict, ...], n_steps: int) -> tuple[Candidate, ...]:
    """Clamp confidences into [0,1], drop out-of-range steps, keep top 3."""
    out: list[Candidate] = []
    for entry in raw:
        try:
            step = int(entry["step"])
            confidence = float(entry["confidence"])
        except (KeyError, TypeError, ValueError):
            continue
        if not 1 <= step <= n_steps:
            continue
        out.append(Candidate(step, min(1.0, max(0.0, confidence))))
        if len(out) == 3:
            break
    return tuple(out)


@dataclass
class MemoryEntry:
    frame: ContextFrame
    prediction: FramePrediction | None


class TrackerMemory:
    """First-in-first-out store of (frame, prediction) pairs."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.entries: list[MemoryEntry] = []

    def push(self, frame: ContextFrame, prediction: FramePrediction) -> None:
        if self.entries and frame.frame_index <= self.entries[-1].frame.frame_index:
            raise ValueError("frame_index must exceed everything in memory")
        self.entries.append(MemoryEntry(frame, prediction))
        if len(self.entries) > self.capacity:
            self.entries.pop(0)

    def predictions(self) -> list[FramePrediction]:
        return [e.prediction for e in self.entries if e.prediction is not None]

    def has_predictions(self) -> bool:
        return any(e.prediction is not None for e in self.entries)

    def clear_predictions(self) -> None:
        # Frames stay (they are context); stale votes must not re-trigger.
        for entry in self.entries:
            entry.prediction = None

    def last_frame(self) -> ContextFrame | None:
        return self.entries[-1].frame if self.entries else None

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class RankedStep:
    step: int
    aggregated_confidence: float

    def to_dict(self) -> dict:
        return {"step": self.step, "aggregated_confidence": self.aggregated_confidence}


@dataclass(frozen=True)
class VoteDetail:
    rank: int
    step: int
    votes: int
    confidence_sum: float

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "step": self.step,
            "votes": self.votes,
            "confidence_sum": self.confidence_sum,
        }


@dataclass(frozen=True)
class ConfirmedStep:
    frame_index: int
    top: RankedStep
    second: RankedStep | None = None
    third: RankedStep | None = None
    vote_detail: tuple[VoteDetail, ...] = ()
    source: str = SOURCE_VOTE

    def to_dict(self) -> dict:
        return {
            "frame_index": self.frame_index,
            "top": self.top.to_dict(),
            "second": self.second.to_dict() if self.second else None,
            "third": self.third.to_dict() if self.third else None,
            "vote_detail": [v.to_dict() for v in self.vote_detail],
            "source": self.source,
        }


def _tally(pool: list[Candidate]) -> dict[int, tuple[int, float]]:
    counts: dict[int, tuple[int, float]] = {}
    for cand in pool:
        votes, conf = counts.get(cand.step, (0, 0.0))
        counts[cand.step] = (votes + 1, conf + cand.confidence)
    return counts


def _elect(pool: list[Candidate], excluded: set[int]) -> RankedStep | None:
    eligible = _tally([c for c in pool if c.step not in excluded])
    if not eligible:
        return None
    # plurality; ties by larger summed confidence, then smaller step index
    step = max(eligible, key=lambda s: (eligible[s][0], eligible[s][1], -s))
    return RankedStep(step, eligible[step][1] / len(pool))


def aggregate_votes(memory: TrackerMemory, frame_index: int | None = None) -> ConfirmedStep:
    """Majority-vote the memory's predictions into confirmed top/second/third."""
    predictions = memory.predictions()
    if not predictions:
        raise EmptyMemory("no predictions in memory")
    pools: list[list[Candidate]] = [[], [], []]
    for pred in predictions:
        for rank, cand in enumerate(pred.candidates[:3]):
            pools[rank].append(cand)
    detail = tuple(
        VoteDetail(rank + 1, step, votes, conf_sum)
        for rank, pool in enumerate(pools)
        for step, (votes, conf_sum) in sorted(_tally(pool).items())
    )
    confirmed: list[RankedStep] = []
    taken: set[int] = set()
    for rank in range(3):
        winner = None
        for pool in (pools[r] for r in range(rank, -1, -1)):
            winner = _elect(pool, taken)
            if winner is not None:
                break
        if winner is None:
            break
        confirmed.append(winner)
        taken.add(winner.step)
    if frame_index is None:
        frame_index = memory.last_frame().frame_index
    return ConfirmedStep(
        frame_index=frame_index,
        top=confirmed[0],
        second=confirmed[1] if len(confirmed) > 1 else None,
        third=confirmed[2] if len(confirmed) > 2 else None,
        vote_detail=detail,
        source=SOURCE_VOTE,
    )


@dataclass(frozen=True)
class GuardResult:
    accepted: bool
    reason: str | None = None


def guard_transition(prev: int, confirmed: ConfirmedStep, threshold: float) -> GuardResult:
    """Accept only confident, forward-by-at-most-one confirmations."""
    delta = confirmed.top.step - prev
    if delta not in (0, 1):
        return GuardResult(False, REASON_ILLEGAL_TRANSITION)
    if confirmed.top.aggregated_confidence < threshold:
        return GuardResult(False, REASON_LOW_CONFIDENCE)
    return GuardResult(True)


@dataclass(frozen=True)
class HitlQuery:
    frame_index: int
    last_accepted: int
    candidates: tuple[int, ...]
    reason: str
    question: str
    equipment: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "frame_index": self.frame_index,
            "last_accepted": self.last_accepted,
            "candidates": list(self.candidates),
            "reason": self.reason,
            "question": self.question,
            "equipment": list(self.equipment),
        }


@dataclass
class TrackerState:
    plan: StepTrackingPlan
    n_steps: int
    memory: TrackerMemory = field(init=False)
    frames_ingested: int = 0
    previous_step: int = 0  # 0 = not started
    pending_query: HitlQuery | None = None

    def __post_init__(self):
        capacity = math.ceil(
            self.plan.prediction_interval / self.plan.memory_update_interval
        )
        self.memory = TrackerMemory(capacity)


@dataclass(frozen=True)
class TrackerResult:
    confirmed: ConfirmedStep | None = None
    query: HitlQuery | None = None
    update_skipped: str | None = None


def _history_is_consistent(history) -> bool:
    steps = history.step_sequence()
    return all(0 <= b - a <= 1 for a, b in zip(steps, steps[1:]))


def resolve_or_query(
    state: TrackerState, confirmed: ConfirmedStep, reason: str, history
) -> ConfirmedStep | HitlQuery:
    """Either wave a guarded confirmation through or ask the human.

    A low-confidence candidate that still extends a clean, unit-increment
    timeline is sound: the query terminates unasked and the step is
    accepted. Anything else becomes a blocking clarification.
    """
    delta = confirmed.top.step - state.previous_step
    if (
        reason == REASON_LOW_CONFIDENCE
        and delta in (0, 1)
        and _history_is_consistent(history)
    ):
        state.previous_step = confirmed.top.step
        return confirmed
    lo = max(1, min(state.previous_step, confirmed.top.step))
    hi = max(state.previous_step, confirmed.top.step)
    candidates = tuple(range(lo, hi + 1))
    last = state.memory.last_frame()
    equipment = tuple(o.name for o in last.equipment) if last else ()
    observed = ", ".join(n for n in equipment if n != "unknown") or "nothing identified"
    query = HitlQuery(
        frame_index=confirmed.frame_index,
        last_accepted=state.previous_step,
        candidates=candidates,
        reason=reason,
        question=(
            f"Last accepted step was {state.previous_step}; the vote now points at "
            f"step {confirmed.top.step} ({reason}). Observed equipment: {observed}. "
            f"Which step are you on ({lo}..{hi})?"
        ),
        equipment=equipment,
    )
    state.pending_query = query
    return query


def ingest_frame(state: TrackerState, frame: ContextFrame, backend, history) -> TrackerResult:
    """Advance the tracker by one frame.

    Memory updates every memory_update_interval frames; votes run every
    prediction_interval frames. While a clarification is pending, memory
    keeps evolving but no new confirmation is emitted.
    """
    if state.memory.entries and frame.frame_index <= state.memory.entries[-1].frame.frame_index:
        raise ValueError("frame_index must exceed all frames in memory")
    state.frames_ingested += 1
    update_skipped = None
    if state.frames_ingested % state.plan.memory_update_interval == 0:
        try:
            raw = backend.predict(frame, history)
            candidates = sanitize_candidates(raw.get("candidates", ()), state.n_steps)
            if not candidates:
                update_skipped = "backend returned no usable candidates"
            else:
                state.memory.push(
                    frame,
                    FramePrediction(
                        frame_index=frame.frame_index,
                        candidates=candidates,
                        reasoning=str(raw.get("reasoning", "")),
                    ),
                )
        except BackendFailure as e:
            update_skipped = str(e)
    if (
        state.frames_ingested % state.plan.prediction_interval == 0
        and state.pending_query is None
        and state.memory.has_predictions()
    ):
        confirmed = aggregate_votes(state.memory, frame_index=frame.frame_index)
        guard = guard_transition(state.previous_step, confirmed, state.plan.confidence_threshold)
        if guard.accepted:
            state.previous_step = confirmed.top.step
            return TrackerResult(confirmed=confirmed, update_skipped=update_skipped)
        outcome = resolve_or_query(state, confirmed, guard.reason, history)
        if isinstance(outcome, HitlQuery):
            return TrackerResult(query=outcome, update_skipped=update_skipped)
        return TrackerResult(confirmed=outcome, update_skipped=update_skipped)
    return TrackerResult(update_skipped=update_skipped)


def apply_clarification(state: TrackerState, answered_step: int) -> ConfirmedStep:
    """Adopt the human's answer and flush stale votes from memory."""
    if state.pending_query is None:
        raise NoPendingQuery("no clarification is pending")
    if not 1 <= answered_step <= state.n_steps:
        raise StepOutOfRange(answered_step, state.n_steps)
    state.previous_step = answered_step
    frame = state.memory.last_frame()
    frame_index = frame.frame_index if frame else state.pending_query.frame_index
    state.pending_query = None
    state.memory.clear_predictions()
    return ConfirmedStep(
        frame_index=frame_index,
        top=RankedStep(answered_step, 1.0),
        source=SOURCE_HUMAN,
    )


class ScriptedPredictionBackend:
    """Replays candidate rows embedded in frames or provided as a table."""

    def __init__(self, table: dict[int, tuple[dict, ...]] | None = None):
        self.table = table or {}

    def predict(self, frame: ContextFrame, history) -> dict:
        row = self.table.get(frame.frame_index)
        if row is None:
            raise BackendFailure(f"no scripted prediction for frame {frame.frame_index}")
        return {"candidates": list(row), "reasoning": "scripted"}


class RemotePredictionBackend:
    """HTTP adapter: posts frame context, SOP steps, and recent history."""

    def __init__(self, client, steps: list[dict], history_window: int = 3):
        self.client = client
        self.steps = steps
        self.history_window = history_window

    def predict(self, frame: ContextFrame, history) -> dict:
        return self.client.call(
            "predict",
            {
                "frame": frame.to_dict(),
                "steps": self.steps,
                "history": history.tail_dicts(self.history_window),
            },
        )

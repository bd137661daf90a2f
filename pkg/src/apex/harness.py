"""Desk-scale evaluation: deterministic replays, synthetic noise, metrics.

Ground truth is per-frame: the true step index (0 marks frames before the
first step has begun) and the set of equipment names truly in view.
Frame-level step accuracy is measured against the latest *accepted* step,
i.e. the tracker's output after smoothing, not the raw per-frame guess.
"""

from __future__ import annotations

import json
import math
import random
import statistics
from dataclasses import dataclass
from pathlib import Path

from .errors import EmptyScores, LengthMismatch, OutOfRangeScore
from .perception import (
    ContextFrame,
    EquipmentObservation,
    RawFrame,
    Recording,
    RecordingHeader,
    ScriptedPerceptionBackend,
)
from .planner import (
    FallbackReasoningBackend,
    Protocol,
    StepTrackingPlan,
    make_experiment_plan,
)
from .session import (
    EV_CLARIFICATION_REQUESTED,
    MODE_REPLAY,
    Close,
    FrameArrival,
    HumanAnswer,
    SessionConfig,
    SessionEngine,
)
from .sop import SopAtlas, SopDoc, bundled_atlas
from .tracker import ScriptedPredictionBackend

CONFIDENCE_CORRECT = (0.75, 0.95)
CONFIDENCE_FLIPPED = (0.4, 0.7)

POLICY_ORACLE = "oracle"
POLICY_REFUSE = "refuse"


@dataclass(frozen=True)
class GroundTruth:
    steps: tuple[int, ...]
    equipment: tuple[tuple[str, ...], ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    def to_dict(self) -> dict:
        return {"steps": list(self.steps), "equipment": [list(e) for e in self.equipment]}


def load_truth(path: str | Path) -> GroundTruth:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return GroundTruth(
        steps=tuple(int(s) for s in obj["steps"]),
        equipment=tuple(tuple(e) for e in obj.get("equipment", ())),
    )


def save_truth(path: str | Path, truth: GroundTruth) -> None:
    from .wire import canonical_json

    Path(path).write_text(canonical_json(truth.to_dict()) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Metrics:
    frames: int
    step_accuracy: float
    per_step_accuracy: dict[int, float]
    hitl_count: int
    alerts: int
    confirmed_steps: int
    equipment_mean: float | None = None
    equipment_sem: float | None = None

    def to_dict(self) -> dict:
        return {
            "frames": self.frames,
            "step_accuracy": self.step_accuracy,
            "per_step_accuracy": {str(k): v for k, v in sorted(self.per_step_accuracy.items())},
            "hitl_count": self.hitl_count,
            "alerts": self.alerts,
            "confirmed_steps": self.confirmed_steps,
            "equipment_mean": self.equipment_mean,
            "equipment_sem": self.equipment_sem,
        }


def _mean_sem(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0
    return mean, statistics.stdev(values) / math.sqrt(n)


def summarize_scores(scores: list[int]) -> tuple[float, float]:
    """Mean and SEM (sample stdev / sqrt(n)) of 1-5 rubric scores."""
    if not scores:
        raise EmptyScores("scores must be non-empty")
    for s in scores:
        if isinstance(s, bool) or not isinstance(s, int) or not 1 <= s <= 5:
            raise OutOfRangeScore(s)
    return _mean_sem([float(s) for s in scores])


@dataclass(frozen=True)
class RecognitionReport:
    per_class: dict[str, float]
    mean: float | None
    sem: float | None
    excluded: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "per_class": dict(sorted(self.per_class.items())),
            "mean": self.mean,
            "sem": self.sem,
            "excluded": list(self.excluded),
        }


def eval_recognition(frames: list[ContextFrame], truth: GroundTruth) -> RecognitionReport:
    """Per-equipment-class hit rate: was the true item named in the frame?"""
    if len(frames) != len(truth.equipment):
        raise LengthMismatch(
            f"{len(frames)} frames vs {len(truth.equipment)} truth entries"
        )
    classes = sorted({name for entry in truth.equipment for name in entry})
    per_class: dict[str, float] = {}
    excluded: list[str] = []
    for name in classes:
        hits = total = 0
        for frame, entry in zip(frames, truth.equipment):
            if name not in entry:
                continue
            total += 1
            hits += any(obs.name == name for obs in frame.equipment)
        if total == 0:
            excluded.append(name)
        else:
            per_class[name] = hits / total
    if not per_class:
        return RecognitionReport({}, None, None, tuple(excluded))
    mean, sem = _mean_sem(list(per_class.values()))
    return RecognitionReport(per_class, mean, sem, tuple(excluded))


def parse_answer_policy(policy: str):
    """"oracle" | "refuse" | "fixed:K" -> callable(frame_pos, truth) -> step|None."""
    if policy == POLICY_ORACLE:
        return lambda i, truth: truth.steps[i] if truth.steps[i] >= 1 else None
    if policy == POLICY_REFUSE:
        return lambda i, truth: None
    if policy.startswith("fixed:"):
        k = int(policy.split(":", 1)[1])
        return lambda i, truth: k
    raise ValueError(f"unknown answer policy {policy!r}")


def config_for_recording(recording: Recording, backend: str = "scripted") -> SessionConfig:
    header = recording.header
    return SessionConfig(
        protocol=Protocol(intent=f"replay {header.sop_id}", sop_ids=(header.sop_id,)),
        active_sop=header.sop_id,
        experiment_plan=header.experiment_plan,
        tracking_plan=header.tracking_plan,
        backend=backend,
        mode=MODE_REPLAY,
    )


def replay(
    recording: Recording,
    truth: GroundTruth,
    config: SessionConfig | None = None,
    auto_answer: str = POLICY_ORACLE,
    atlas: SopAtlas | None = None,
    session_id: str = "replay",
) -> tuple[Metrics, str]:
    """Run the full engine over a recording; answers queries per policy."""
    if len(recording) != len(truth):
        raise LengthMismatch(f"{len(recording)} frames vs {len(truth)} truth entries")
    config = config or config_for_recording(recording)
    answer = parse_answer_policy(auto_answer)
    engine = SessionEngine(
        config,
        atlas=atlas or bundled_atlas(),
        session_id=session_id,
        perception_backend=ScriptedPerceptionBackend(recording.context_table()),
        prediction_backend=ScriptedPredictionBackend(recording.prediction_table()),
    )
    hits = 0
    per_step_hits: dict[int, list[int]] = {}
    contexts: list[ContextFrame] = []
    for i, frame in enumerate(recording.frames):
        events = engine.handle(FrameArrival(frame))
        if frame.context is not None:
            contexts.append(frame.context)
        if any(e.kind == EV_CLARIFICATION_REQUESTED for e in events):
            step = answer(i, truth)
            if step is not None:
                engine.handle(HumanAnswer(step=step))
        true_step = truth.steps[i]
        hit = int(engine.current_step == true_step)
        hits += hit
        per_step_hits.setdefault(true_step, []).append(hit)
    engine.handle(Close())
    view = engine.derived_view()
    equipment_mean = equipment_sem = None
    if truth.equipment and any(truth.equipment) and len(contexts) == len(truth.equipment):
        report = eval_recognition(contexts, truth)
        equipment_mean, equipment_sem = report.mean, report.sem
    metrics = Metrics(
        frames=len(recording),
        step_accuracy=hits / len(recording) if len(recording) else 0.0,
        per_step_accuracy={
            s: sum(h) / len(h) for s, h in sorted(per_step_hits.items())
        },
        hitl_count=view.hitl_requests,
        alerts=view.alerts,
        confirmed_steps=len(view.accepted),
        equipment_mean=equipment_mean,
        equipment_sem=equipment_sem,
    )
    return metrics, engine.export_log()


def synth_session(
    doc: SopDoc,
    frames_per_step: int,
    flip_prob: float,
    seed: int,
    confidence_correct: tuple[float, float] = CONFIDENCE_CORRECT,
    confidence_flipped: tuple[float, float] = CONFIDENCE_FLIPPED,
    tracking_plan: StepTrackingPlan | None = None,
) -> tuple[Recording, GroundTruth, dict[int, tuple[dict, ...]]]:
    """Uniform step progression with seeded prediction noise.

    Each frame's scripted top-1 equals the true step with probability
    1 - flip_prob, otherwise a uniformly random other step; correct
    guesses draw confidence from the high band, flipped ones from the low
    band. Fully determined by the seed.
    """
    if not 0 <= flip_prob < 1:
        raise ValueError("flip_prob must be in [0,1)")
    rng = random.Random(seed)
    n = doc.n_steps
    plan = tracking_plan or StepTrackingPlan(
        sop_id=doc.id, memory_update_interval=1, prediction_interval=3,
        confidence_threshold=0.8, rationale="synthetic default",
    )
    experiment_plan = make_experiment_plan(doc, FallbackReasoningBackend())
    frames: list[RawFrame] = []
    truth_steps: list[int] = []
    truth_equipment: list[tuple[str, ...]] = []
    table: dict[int, tuple[dict, ...]] = {}
    for j in range(n * frames_per_step):
        true_step = min(n, j // frames_per_step + 1)
        if n > 1 and rng.random() < flip_prob:
            wrong = rng.choice([s for s in range(1, n + 1) if s != true_step])
            top = {"step": wrong, "confidence": rng.uniform(*confidence_flipped)}
        else:
            top = {"step": true_step, "confidence": rng.uniform(*confidence_correct)}
        runner = true_step + 1 if true_step < n else true_step - 1
        predicted = (
            top,
            {"step": runner, "confidence": rng.uniform(0.05, 0.3)},
        )
        step = doc.step(true_step)
        context = ContextFrame(
            frame_index=j,
            timestamp=j * 100,
            equipment=tuple(
                EquipmentObservation(name=name) for name in step.expected_equipment
            ),
            environment="cleanroom bay",
            action=f"performing step {true_step}",
        )
        frames.append(
            RawFrame(
                frame_index=j,
                timestamp=j * 100,
                context=context,
                predicted=predicted,
            )
        )
        table[j] = predicted
        truth_steps.append(true_step)
        truth_equipment.append(step.expected_equipment)
    recording = Recording(
        header=RecordingHeader(
            sop_id=doc.id,
            experiment_plan=experiment_plan,
            tracking_plan=plan,
        ),
        frames=tuple(frames),
    )
    truth = GroundTruth(steps=tuple(truth_steps), equipment=tuple(truth_equipment))
    return recording, truth, table


def raw_accuracy(table: dict[int, tuple[dict, ...]], truth: GroundTruth) -> float:
    """Per-frame scripted top-1 accuracy, before any smoothing."""
    if not truth.steps:
        return 0.0
    hits = sum(
        1
        for i, step in enumerate(truth.steps)
        if table.get(i) and table[i][0]["step"] == step
    )
    return hits / len(truth.steps)

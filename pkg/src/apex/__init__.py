"""Event-sourced procedural tracking engine for guided multi-step lab work."""

from .analysis import (
    Alert,
    AnalysisHistory,
    GroundedAnswer,
    Guidance,
    LogRecord,
    answer_query,
    append_record,
    detect_errors,
    make_guidance,
)
from .harness import (
    GroundTruth,
    Metrics,
    eval_recognition,
    replay,
    summarize_scores,
    synth_session,
)
from .perception import (
    ContextFrame,
    EquipmentObservation,
    RawFrame,
    Reading,
    Recording,
    contextualize,
    load_recording,
    normalize_equipment_name,
)
from .planner import (
    ExperimentPlan,
    FallbackReasoningBackend,
    PlanDefaults,
    Protocol,
    StepTrackingPlan,
    compose_protocol,
    make_experiment_plan,
    make_tracking_plan,
)
from .session import (
    Close,
    FrameArrival,
    HumanAnswer,
    HumanQuestion,
    SessionConfig,
    SessionEngine,
    SessionEvent,
    SessionStore,
    fold_events,
)
from .sop import (
    ParameterSpec,
    SopAtlas,
    SopDoc,
    SopStep,
    bundled_atlas,
    load_atlas_dir,
    parse_sop,
    serialize_sop,
    validate_sop,
)
from .tracker import (
    ConfirmedStep,
    FramePrediction,
    HitlQuery,
    TrackerMemory,
    TrackerState,
    aggregate_votes,
    apply_clarification,
    guard_transition,
    ingest_frame,
    resolve_or_query,
)

__version__ = "0.1.0"

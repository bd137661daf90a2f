"""Protocol composition and per-SOP plan derivation.

Two interchangeable reasoning backends sit behind the planner: a remote
model adapter and a deterministic fallback driven by a config file
(canonical process order, protocol presets keyed by intent keywords,
known tracking plans, and defaults). The fallback keeps the whole
pipeline testable offline.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import BackendFailure, NoMatchingSop
from .sop import SopAtlas, SopDoc, SopStep

MIN_CONFIDENCE_THRESHOLD = 0.01
_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokens(text: str) -> set[str]:
    """Case-folded word tokens of length >= 3 (short noise words drop out)."""
    return {t for t in _TOKEN_RE.findall(text.casefold()) if len(t) >= 3}


@dataclass(frozen=True)
class Protocol:
    intent: str
    sop_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"intent": self.intent, "sop_ids": list(self.sop_ids)}


@dataclass(frozen=True)
class ExperimentPlan:
    sop_id: str
    steps: tuple[SopStep, ...]
    inventory: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "sop_id": self.sop_id,
            "steps": [s.to_dict() for s in self.steps],
            "inventory": list(self.inventory),
        }


@dataclass(frozen=True)
class StepTrackingPlan:
    sop_id: str
    memory_update_interval: int
    prediction_interval: int
    confidence_threshold: float
    rationale: str = ""

    def to_dict(self) -> dict:
        return {
            "sop_id": self.sop_id,
            "memory_update_interval": self.memory_update_interval,
            "prediction_interval": self.prediction_interval,
            "confidence_threshold": self.confidence_threshold,
            "rationale": self.rationale,
        }


@dataclass(frozen=True)
class PlanDefaults:
    memory_update_interval: int = 1
    prediction_interval: int = 3
    confidence_threshold: float = 0.7


@dataclass(frozen=True)
class ProtocolPreset:
    keywords: tuple[str, ...]
    sop_ids: tuple[str, ...]

    def matches(self, intent: str) -> bool:
        intent_tokens = tokens(intent)
        for keyword in self.keywords:
            kw_tokens = tokens(keyword)
            if kw_tokens and kw_tokens <= intent_tokens:
                return True
        return False


@dataclass(frozen=True)
class PlannerConfig:
    canonical_order: tuple[str, ...] = ()
    protocols: tuple[ProtocolPreset, ...] = ()
    defaults: PlanDefaults = PlanDefaults()
    tracking_plans: dict | None = None

    def order_key(self, sop_id: str):
        try:
            return (0, self.canonical_order.index(sop_id))
        except ValueError:
            return (1, sop_id)


def load_planner_config(path: str | Path) -> PlannerConfig:
    return _config_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def default_planner_config() -> PlannerConfig:
    raw = resources.files("apex").joinpath("config/planner.json").read_text("utf-8")
    return _config_from_dict(json.loads(raw))


def _config_from_dict(obj: dict) -> PlannerConfig:
    defaults = obj.get("defaults", {})
    return PlannerConfig(
        canonical_order=tuple(obj.get("canonical_order", ())),
        protocols=tuple(
            ProtocolPreset(tuple(p["keywords"]), tuple(p["sop_ids"]))
            for p in obj.get("protocols", ())
        ),
        defaults=PlanDefaults(
            memory_update_interval=int(defaults.get("memory_update_interval", 1)),
            prediction_interval=int(defaults.get("prediction_interval", 3)),
            confidence_threshold=float(defaults.get("confidence_threshold", 0.7)),
        ),
        tracking_plans=obj.get("tracking_plans", {}),
    )


class FallbackReasoningBackend:
    """Deterministic stand-in for the remote planning model.

    Protocol selection: a preset whose keywords appear in the intent wins
    outright; otherwise SOPs are picked by token overlap between intent
    and title and sequenced in canonical order.
    """

    def __init__(self, config: PlannerConfig | None = None):
        self.config = config or default_planner_config()

    def propose_protocol(self, intent: str, atlas: SopAtlas) -> list[str]:
        for preset in self.config.protocols:
            if preset.matches(intent) and all(sid in atlas for sid in preset.sop_ids):
                return list(preset.sop_ids)
        intent_tokens = tokens(intent)
        hits = [d.id for d in atlas.docs() if intent_tokens & tokens(d.title)]
        hits.sort(key=self.config.order_key)
        return hits

    def propose_inventory(self, doc: SopDoc) -> list[str]:
        return []

    def propose_tracking_plan(self, doc: SopDoc, defaults: PlanDefaults) -> dict:
        known = (self.config.tracking_plans or {}).get(doc.id)
        if known:
            return dict(known)
        return {
            "memory_update_interval": defaults.memory_update_interval,
            "prediction_interval": defaults.prediction_interval,
            "confidence_threshold": defaults.confidence_threshold,
            "rationale": f"configured defaults (no tracking plan on file for {doc.id!r})",
        }

    def answer(self, question: str, records: list[dict]) -> dict:
        raise BackendFailure("fallback reasoning backend does not answer queries")


class RemoteReasoningBackend:
    """HTTP adapter for protocol composition and plan derivation."""

    def __init__(self, client):
        self.client = client

    def propose_protocol(self, intent: str, atlas: SopAtlas) -> list[str]:
        reply = self.client.call(
            "plan_protocol",
            {
                "intent": intent,
                "sops": [{"id": d.id, "title": d.title} for d in atlas.docs()],
            },
        )
        return [str(s) for s in reply.get("sop_ids", ())]

    def propose_inventory(self, doc: SopDoc) -> list[str]:
        reply = self.client.call("plan_inventory", {"sop": doc.to_dict()})
        return [str(s) for s in reply.get("inventory", ())]

    def propose_tracking_plan(self, doc: SopDoc, defaults: PlanDefaults) -> dict:
        return self.client.call(
            "plan_tracking",
            {
                "sop": doc.to_dict(),
                "defaults": {
                    "memory_update_interval": defaults.memory_update_interval,
                    "prediction_interval": defaults.prediction_interval,
                    "confidence_threshold": defaults.confidence_threshold,
                },
            },
        )


def compose_protocol(intent: str, atlas: SopAtlas, backend) -> Protocol:
    """Turn a user intent into an ordered list of atlas SOP ids."""
    proposed = backend.propose_protocol(intent, atlas)
    sop_ids = [sid for sid in proposed if sid in atlas]
    if not sop_ids:
        raise NoMatchingSop(f"no SOP matches intent {intent!r}")
    return Protocol(intent=intent, sop_ids=tuple(sop_ids))


def make_experiment_plan(doc: SopDoc, backend) -> ExperimentPlan:
    """Steps copied verbatim; inventory = equipment plus backend additions.

    Downstream agents may not add or remove steps, so the step list is
    the document's own, untouched.
    """
    inventory = list(doc.equipment)
    seen = {name.strip().casefold() for name in inventory}
    for name in backend.propose_inventory(doc):
        folded = name.strip().casefold()
        if folded and folded not in seen:
            inventory.append(name)
            seen.add(folded)
    return ExperimentPlan(sop_id=doc.id, steps=doc.steps, inventory=tuple(inventory))


def make_tracking_plan(doc: SopDoc, backend, defaults: PlanDefaults) -> StepTrackingPlan:
    """Range-check and clamp backend output into the plan invariants."""
    proposal = backend.propose_tracking_plan(doc, defaults)

    def _int(key: str, fallback: int) -> int:
        try:
            return int(proposal.get(key, fallback))
        except (TypeError, ValueError):
            return fallback

    def _float(key: str, fallback: float) -> float:
        try:
            return float(proposal.get(key, fallback))
        except (TypeError, ValueError):
            return fallback

    memory = max(1, _int("memory_update_interval", defaults.memory_update_interval))
    prediction = max(memory, _int("prediction_interval", defaults.prediction_interval))
    threshold = _float("confidence_threshold", defaults.confidence_threshold)
    threshold = min(1.0, max(MIN_CONFIDENCE_THRESHOLD, threshold))
    return StepTrackingPlan(
        sop_id=doc.id,
        memory_update_interval=memory,
        prediction_interval=prediction,
        confidence_threshold=threshold,
        rationale=str(proposal.get("rationale", "")),
    )

"""SOP documents: parameter setpoints, ordered steps, and the versioned atlas.

An SOP file is a UTF-8 JSON object with fields ``id``, ``title``,
``version``, ``equipment`` (array of strings) and ``steps`` (array of
``{index, instruction, expected_equipment, params}``). Parameter entries
carry ``{name, mode, expected, unit, tolerance}`` where ``mode`` is one of
``numeric``, ``enum`` or ``indicator``. Values are explicit fields, never
regex-extracted from instruction text, so downstream error detection can
compare setpoints mechanically.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import MalformedDocument, SchemaViolation, UnknownSop
from .wire import canonical_json

MODES = ("numeric", "enum", "indicator")


@dataclass(frozen=True)
class ParameterSpec:
    """One machine-checkable setpoint, e.g. rf_power = 50 W (+/- tolerance)."""

    name: str
    mode: str
    expected: float | str
    unit: str = ""
    tolerance: float | None = None

    def to_dict(self) -> dict:
        d = {"name": self.name, "mode": self.mode, "expected": self.expected}
        if self.mode == "numeric":
            d["unit"] = self.unit
            d["tolerance"] = self.tolerance if self.tolerance is not None else 0.0
        return d


@dataclass(frozen=True)
class SopStep:
    index: int
    instruction: str
    expected_equipment: tuple[str, ...] = ()
    params: tuple[ParameterSpec, ...] = ()

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "instruction": self.instruction,
            "expected_equipment": list(self.expected_equipment),
            "params": [p.to_dict() for p in self.params],
        }


@dataclass(frozen=True)
class SopDoc:
    id: str
    title: str
    version: int
    equipment: tuple[str, ...]
    steps: tuple[SopStep, ...]

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def step(self, index: int) -> SopStep:
        return self.steps[index - 1]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "version": self.version,
            "equipment": list(self.equipment),
            "steps": [s.to_dict() for s in self.steps],
        }


@dataclass(frozen=True)
class Violation:
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.location}: {self.message}"


def _require(data: dict, key: str, kind, location: str):
    if key not in data:
        raise SchemaViolation(f"missing required field {key!r}", location)
    value = data[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaViolation(f"field {key!r} must be a number", location)
        return float(value)
    if not isinstance(value, kind):
        raise SchemaViolation(f"field {key!r} must be {kind.__name__}", location)
    return value


def _parse_param(data: dict, location: str) -> ParameterSpec:
    if not isinstance(data, dict):
        raise SchemaViolation("param entry must be an object", location)
    name = _require(data, "name", str, location)
    mode = _require(data, "mode", str, location)
    if mode not in MODES:
        raise SchemaViolation(f"mode must be one of {MODES}", f"{location}.mode")
    if mode == "numeric":
        expected = _require(data, "expected", float, f"{location}.expected")
        unit = _require(data, "unit", str, location)
        tolerance = data.get("tolerance", 0.0)
        if isinstance(tolerance, bool) or not isinstance(tolerance, (int, float)):
            raise SchemaViolation("tolerance must be a number", f"{location}.tolerance")
        return ParameterSpec(name, mode, expected, unit, float(tolerance))
    expected = _require(data, "expected", str, f"{location}.expected")
    if "tolerance" in data and data["tolerance"] is not None:
        raise SchemaViolation(
            "tolerance is only meaningful for numeric params", f"{location}.tolerance"
        )
    return ParameterSpec(name, mode, expected, str(data.get("unit", "")), None)


def _parse_step(data: dict, location: str) -> SopStep:
    if not isinstance(data, dict):
        raise SchemaViolation("step entry must be an object", location)
    index = _require(data, "index", int, location)
    instruction = _require(data, "instruction", str, location)
    equipment = data.get("expected_equipment", [])
    if not isinstance(equipment, list) or any(not isinstance(e, str) for e in equipment):
        raise SchemaViolation(
            "expected_equipment must be an array of strings", location
        )
    params = data.get("params", [])
    if not isinstance(params, list):
        raise SchemaViolation("params must be an array", location)
    return SopStep(
        index=index,
        instruction=instruction,
        expected_equipment=tuple(equipment),
        params=tuple(
            _parse_param(p, f"{location}.params[{i}]") for i, p in enumerate(params)
        ),
    )


def parse_sop(data: bytes | str) -> SopDoc:
    """Parse one SOP file; raises on syntax or schema problems.

    Parsing is lossless for instruction text and round-trips through
    serialize_sop field-exactly.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedDocument(e.msg, line=e.lineno) from e
    if not isinstance(obj, dict):
        raise MalformedDocument("top level must be an object")
    doc = SopDoc(
        id=_require(obj, "id", str, "$"),
        title=_require(obj, "title", str, "$"),
        version=_require(obj, "version", int, "$"),
        equipment=tuple(_require(obj, "equipment", list, "$")),
        steps=tuple(
            _parse_step(s, f"steps[{i}]")
            for i, s in enumerate(_require(obj, "steps", list, "$"))
        ),
    )
    if any(not isinstance(e, str) for e in doc.equipment):
        raise SchemaViolation("equipment must be an array of strings", "$.equipment")
    violations = validate_sop(doc)
    if violations:
        first = violations[0]
        raise SchemaViolation(first.message, first.location)
    return doc


def serialize_sop(doc: SopDoc) -> bytes:
    return (canonical_json(doc.to_dict()) + "\n").encode("utf-8")


def validate_sop(doc: SopDoc) -> list[Violation]:
    """Check every SopDoc/SopStep/ParameterSpec invariant; empty means valid."""
    out: list[Violation] = []
    if not doc.steps:
        out.append(Violation("steps", "steps non-empty"))
    folded = [e.strip().casefold() for e in doc.equipment]
    seen: set[str] = set()
    for i, name in enumerate(folded):
        if name in seen:
            out.append(Violation(f"equipment[{i}]", f"duplicate equipment name {doc.equipment[i]!r}"))
        seen.add(name)
    indices = [s.index for s in doc.steps]
    if indices != list(range(1, len(doc.steps) + 1)):
        out.append(
            Violation("steps", f"step indices must be contiguous 1..{len(doc.steps)}, got {indices}")
        )
    equipment_set = set(folded)
    for s in doc.steps:
        loc = f"steps[{s.index}]"
        for name in s.expected_equipment:
            if name.strip().casefold() not in equipment_set:
                out.append(
                    Violation(loc, f"expected_equipment {name!r} not in document equipment list")
                )
        for j, p in enumerate(s.params):
            ploc = f"{loc}.params[{j}]"
            if p.mode not in MODES:
                out.append(Violation(ploc, f"mode must be one of {MODES}"))
            if p.mode == "numeric":
                if not p.unit.strip():
                    out.append(Violation(ploc, "numeric param requires a unit"))
                if p.tolerance is not None and p.tolerance < 0:
                    out.append(Violation(ploc, "tolerance must be >= 0"))
                if not isinstance(p.expected, (int, float)) or isinstance(p.expected, bool):
                    out.append(Violation(ploc, "numeric param requires a numeric expected value"))
            else:
                if p.tolerance is not None:
                    out.append(Violation(ploc, "tolerance is only meaningful for numeric params"))
                if not isinstance(p.expected, str):
                    out.append(Violation(ploc, f"{p.mode} param requires a token expected value"))
    return out


class SopAtlas:
    """Read-mostly store of SOP documents.

    Concurrent reads are fine; mutations are serialized through one lock
    and each insert/replace bumps the revision by exactly 1.
    """

    def __init__(self):
        self._entries: dict[str, SopDoc] = {}
        self._revision = 0
        self._lock = threading.Lock()

    @property
    def revision(self) -> int:
        return self._revision

    def insert(self, doc: SopDoc) -> None:
        with self._lock:
            self._entries[doc.id] = doc
            self._revision += 1

    def lookup(self, sop_id: str) -> SopDoc:
        try:
            return self._entries[sop_id]
        except KeyError:
            raise UnknownSop(sop_id) from None

    def __contains__(self, sop_id: str) -> bool:
        return sop_id in self._entries

    def ids(self) -> list[str]:
        return list(self._entries)

    def docs(self) -> list[SopDoc]:
        return list(self._entries.values())


def load_atlas_dir(path: str | Path) -> SopAtlas:
    atlas = SopAtlas()
    for file in sorted(Path(path).glob("*.sop")):
        atlas.insert(parse_sop(file.read_bytes()))
    return atlas


def bundled_atlas() -> SopAtlas:
    """Atlas holding the SOP files shipped inside the package."""
    atlas = SopAtlas()
    root = resources.files("apex").joinpath("sops")
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".sop"):
            atlas.insert(parse_sop(entry.read_bytes()))
    return atlas

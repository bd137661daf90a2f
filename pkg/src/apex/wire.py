"""Canonical JSON helpers.

Every file format and wire body in this project is JSON (one object per
line for recordings and logs). Serialization goes through canonical_json
so that repeated exports of the same data are byte-identical.
"""

from __future__ import annotations

import json
from typing import Any


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def pretty_json(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2)


def number_text(value: Any) -> str:
    """Render 30.0 as "30" but 6.2 as "6.2"; tokens pass through."""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)

"""Structured extraction output: articles and the use cases found in them.

Validation lives here so that every ``Article`` constructed from model output
has already been checked; downstream code never re-validates.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Literal

from .errors import SchemaError

Scale = Literal["five", "ten", "auto"]

RATING_MIN = 1.0
RATING_MAX = 5.0

USE_CASE_FIELDS = (
    "name",
    "description",
    "ai_model_used",
    "strengths",
    "challenges",
    "newsroom_impact",
    "link_to_demo",
    "is_original",
    "comparison_to_other_use_cases",
    "newsworthiness_rating",
)
OPTIONAL_TEXT_FIELDS = ("ai_model_used", "link_to_demo", "comparison_to_other_use_cases")
TEXT_FIELDS = ("description", "strengths", "challenges", "newsroom_impact")


@dataclass(frozen=True)
class UseCase:
    name: str
    description: str = ""
    ai_model_used: str | None = None
    strengths: str = ""
    challenges: str = ""
    newsroom_impact: str = ""
    link_to_demo: str | None = None
    is_original: bool = False
    comparison_to_other_use_cases: str | None = None
    newsworthiness_rating: float = 3.0

    def __post_init__(self) -> None:
        if not self.name or not self.name.strip():
            raise SchemaError("use case name must be non-empty")
        _check_range("newsworthiness_rating", self.newsworthiness_rating)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class Article:
    summary: str
    usefulness_rating: float
    use_cases: tuple[UseCase, ...] = ()
    # names of rating fields that were rescaled or clamped while parsing
    adjusted_fields: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        _check_range("usefulness_rating", self.usefulness_rating)
        object.__setattr__(self, "use_cases", tuple(self.use_cases))

    def to_dict(self) -> dict[str, Any]:
        return {
            "summary": self.summary,
            "usefulness_rating": self.usefulness_rating,
            "use_cases": [u.to_dict() for u in self.use_cases],
        }


def _check_range(name: str, value: float) -> None:
    if not RATING_MIN <= value <= RATING_MAX:
        raise SchemaError(f"{name} {value!r} outside [1, 5]")


def normalize_rating(value: float, source_scale: Literal["five", "ten"]) -> float:
    """Map a rating from its source scale onto [1, 5].

    ``five`` clamps; ``ten`` maps 1..10 affinely onto 1..5 and then clamps.
    """
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"rating {value!r} is not a number")
    if not math.isfinite(value):
        raise SchemaError(f"rating {value!r} is not finite")
    value = float(value)
    if source_scale == "ten":
        value = 1.0 + (value - 1.0) * (4.0 / 9.0)
    elif source_scale != "five":
        raise ValueError(f"unknown rating scale {source_scale!r}")
    return min(RATING_MAX, max(RATING_MIN, value))


def _number(obj: dict[str, Any], key: str, where: str) -> float:
    if key not in obj or obj[key] is None:
        raise SchemaError(f"{where}: required field {key!r} missing")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}: {key} must be numeric, got {value!r}")
    if not math.isfinite(value):
        raise SchemaError(f"{where}: {key} is not finite")
    return float(value)


def _text(obj: dict[str, Any], key: str, where: str, *, optional: bool) -> str | None:
    value = obj.get(key)
    if value is None:
        return None if optional else ""
    if not isinstance(value, str):
        raise SchemaError(f"{where}: {key} must be a string, got {type(value).__name__}")
    if optional and not value.strip():
        return None
    return value


def use_case_from_dict(obj: Any, where: str = "use_case") -> UseCase:
    """Strictly validate one use case. Ratings must already be on the 1-5 scale."""
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    name = obj.get("name")
    if not isinstance(name, str) or not name.strip():
        raise SchemaError(f"{where}: required field 'name' missing or empty")
    rating = _number(obj, "newsworthiness_rating", where)
    if not RATING_MIN <= rating <= RATING_MAX:
        raise SchemaError(f"{where}: newsworthiness_rating {rating!r} outside [1, 5]")
    is_original = obj.get("is_original", False)
    if is_original is None:
        is_original = False
    if not isinstance(is_original, bool):
        raise SchemaError(f"{where}: is_original must be boolean")
    kwargs: dict[str, Any] = {}
    for key in TEXT_FIELDS:
        kwargs[key] = _text(obj, key, where, optional=False)
    for key in OPTIONAL_TEXT_FIELDS:
        kwargs[key] = _text(obj, key, where, optional=True)
    return UseCase(name=name, is_original=is_original, newsworthiness_rating=rating, **kwargs)


def article_from_dict(obj: Any, usefulness_scale: Scale = "auto") -> Article:
    """Validate a decoded payload into an ``Article``.

    Newsworthiness is always on 1-5 and out-of-range values are rejected.
    ``usefulness_scale`` selects how the article-level rating is read:
    ``five`` rejects values outside [1, 5], ``ten`` maps 1..10 onto 1..5, and
    ``auto`` reads values in [1, 5] as five-point and values in (5, 10] as
    ten-point (the adjustment is recorded in ``adjusted_fields``).
    """
    if not isinstance(obj, dict):
        raise SchemaError("article payload must be a JSON object")
    summary = obj.get("summary")
    if not isinstance(summary, str):
        raise SchemaError("required field 'summary' missing or not a string")
    raw = _number(obj, "usefulness_rating", "article")
    adjusted: list[str] = []
    if usefulness_scale == "five" or (usefulness_scale == "auto" and raw <= RATING_MAX):
        if not RATING_MIN <= raw <= RATING_MAX:
            raise SchemaError(f"usefulness_rating {raw!r} outside [1, 5]")
        usefulness = raw
    elif usefulness_scale in ("ten", "auto"):
        if not 1.0 <= raw <= 10.0:
            raise SchemaError(f"usefulness_rating {raw!r} outside [1, 10]")
        usefulness = normalize_rating(raw, "ten")
        adjusted.append("usefulness_rating")
    else:
        raise ValueError(f"unknown usefulness scale {usefulness_scale!r}")
    items = obj.get("use_cases", [])
    if items is None:
        items = []
    if not isinstance(items, list):
        raise SchemaError("use_cases must be a list")
    use_cases = tuple(use_case_from_dict(u, f"use_cases[{i}]") for i, u in enumerate(items))
    return Article(summary, usefulness, use_cases, adjusted_fields=tuple(adjusted))


def _nullable(schema: dict[str, Any]) -> dict[str, Any]:
    return {"anyOf": [schema, {"type": "null"}]}


# Strict-mode JSON schema: every property listed as required, optional ones nullable.
USE_CASE_JSON_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "ai_model_used": _nullable({"type": "string"}),
        "strengths": {"type": "string"},
        "challenges": {"type": "string"},
        "newsroom_impact": {"type": "string"},
        "link_to_demo": _nullable({"type": "string"}),
        "is_original": {"type": "boolean"},
        "comparison_to_other_use_cases": _nullable({"type": "string"}),
        "newsworthiness_rating": {"type": "number"},
    },
    "required": list(USE_CASE_FIELDS),
}

ARTICLE_JSON_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "summary": {"type": "string"},
        "usefulness_rating": {"type": "number"},
        "use_cases": {"type": "array", "items": USE_CASE_JSON_SCHEMA},
    },
    "required": ["summary", "usefulness_rating", "use_cases"],
}

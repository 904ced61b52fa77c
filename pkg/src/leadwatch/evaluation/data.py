"""Ground-truth annotations and extracted-article inputs for evaluation."""

from __future__ import annotations

import json
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

from ..models import Article, Scale, article_from_dict


@dataclass(frozen=True)
class GroundTruthUseCase:
    gt_id: str
    name: str
    description: str
    article_id: str
    human_ratings: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.human_ratings:
            raise ValueError(f"ground truth {self.gt_id!r} has no human ratings")
        for annotator, r in self.human_ratings.items():
            if not 1.0 <= r <= 5.0:
                raise ValueError(f"ground truth {self.gt_id!r}: rating {r} by {annotator} outside [1, 5]")


@dataclass(frozen=True)
class AnnotationSet:
    items: tuple[GroundTruthUseCase, ...]
    annotators: tuple[str, ...]

    def __post_init__(self) -> None:
        known = set(self.annotators)
        for item in self.items:
            unknown = set(item.human_ratings) - known
            if unknown:
                raise ValueError(f"ground truth {item.gt_id!r} rated by unknown annotators {sorted(unknown)}")

    @classmethod
    def from_items(cls, items: Iterable[GroundTruthUseCase], annotators: Iterable[str] | None = None) -> AnnotationSet:
        items = tuple(items)
        if annotators is None:
            names: dict[str, None] = {}
            for item in items:
                names.update(dict.fromkeys(item.human_ratings))
            annotators = sorted(names)
        return cls(items, tuple(annotators))


def load_ground_truth(path: str | Path) -> AnnotationSet:
    """JSONL, one object per line: gt_id, name, description, article_id, human_ratings."""
    items = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            items.append(
                GroundTruthUseCase(
                    gt_id=str(d["gt_id"]),
                    name=d["name"],
                    description=d.get("description", ""),
                    article_id=str(d["article_id"]),
                    human_ratings={str(k): float(v) for k, v in d["human_ratings"].items()},
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: bad ground-truth record: {exc}") from exc
    return AnnotationSet.from_items(items)


def load_extracted(path: str | Path, usefulness_scale: Scale = "auto") -> list[tuple[str, Article]]:
    """JSONL of extracted articles: each line an Article object plus ``article_id``."""
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        d = json.loads(line)
        if "article_id" not in d:
            raise ValueError(f"{path}:{lineno}: missing article_id")
        out.append((str(d["article_id"]), article_from_dict(d, usefulness_scale)))
    return out


def load_overrides(path: str | Path) -> list[tuple[int, str]]:
    """Text lines ``extracted_index,gt_id``; blank lines and ``#`` comments ignored."""
    pairs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        idx, sep, gt_id = line.partition(",")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected 'extracted_index,gt_id'")
        pairs.append((int(idx), gt_id.strip()))
    return pairs

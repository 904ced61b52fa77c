"""One-to-one matching of extracted use cases to ground truth."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

from ..models import UseCase
from ..store import jaccard, tokens
from .data import GroundTruthUseCase

DEFAULT_TAU = 0.4


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, str, float], ...]
    tp: int
    fp: int
    fn: int


def _toks(name: str, description: str) -> set[str]:
    return set(tokens(f"{name} {description}"))


def similarity_matrix(extracted: Sequence[UseCase], truth: Sequence[GroundTruthUseCase]) -> list[list[float]]:
    ex = [_toks(u.name, u.description) for u in extracted]
    gt = [_toks(t.name, t.description) for t in truth]
    return [[jaccard(a, b) for b in gt] for a in ex]


def greedy_match(
    sim: Sequence[Sequence[float]],
    gt_ids: Sequence[str],
    tau: float,
    fixed: Sequence[tuple[int, int]] = (),
) -> list[tuple[int, int]]:
    """Greedy assignment over a similarity matrix, after the ``fixed`` pairs.

    Repeatedly takes the highest remaining pair with similarity >= tau;
    ties go to the lower extracted index, then the lexicographically smaller
    gt id.
    """
    used_e = {e for e, _ in fixed}
    used_t = {t for _, t in fixed}
    candidates = [
        (-s, e, gt_ids[t], t)
        for e, row in enumerate(sim)
        if e not in used_e
        for t, s in enumerate(row)
        if t not in used_t and s >= tau
    ]
    candidates.sort()
    chosen = list(fixed)
    for _neg, e, _gid, t in candidates:
        if e in used_e or t in used_t:
            continue
        used_e.add(e)
        used_t.add(t)
        chosen.append((e, t))
    return chosen


def match_use_cases(
    extracted: Sequence[UseCase],
    truth: Sequence[GroundTruthUseCase],
    tau: float = DEFAULT_TAU,
    overrides: Sequence[tuple[int, str]] = (),
) -> MatchResult:
    """Match extracted use cases to ground truth by token Jaccard over name + description.

    ``overrides`` pairs (extracted_index, gt_id) are applied first and bypass
    ``tau``; the rest is matched greedily.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    gt_ids = [t.gt_id for t in truth]
    index = {g: i for i, g in enumerate(gt_ids)}
    if len(index) != len(gt_ids):
        raise ValueError("duplicate gt_id in ground truth")
    fixed: list[tuple[int, int]] = []
    for e, g in overrides:
        if not 0 <= e < len(extracted):
            raise KeyError(f"override references unknown extracted index {e}")
        if g not in index:
            raise KeyError(f"override references unknown gt_id {g!r}")
        if any(e == fe or index[g] == ft for fe, ft in fixed):
            raise ValueError(f"override ({e},{g}) reuses an already matched item")
        fixed.append((e, index[g]))
    sim = similarity_matrix(extracted, truth)
    chosen = greedy_match(sim, gt_ids, tau, fixed)
    pairs = tuple(sorted((e, gt_ids[t], sim[e][t]) for e, t in chosen))
    tp = len(pairs)
    return MatchResult(pairs, tp, len(extracted) - tp, len(truth) - tp)


@dataclass(frozen=True)
class CorpusMatch:
    tp: int
    fp: int
    fn: int
    # (extracted newsworthiness, matched ground-truth item) per matched pair
    rated_pairs: tuple[tuple[float, GroundTruthUseCase], ...]


def match_corpus(
    extracted: Sequence[tuple[str, Sequence[UseCase]]],
    truth: Sequence[GroundTruthUseCase],
    tau: float = DEFAULT_TAU,
    overrides: Sequence[tuple[int, str]] = (),
) -> CorpusMatch:
    """Match article by article and sum the counts.

    ``extracted`` pairs an article_id with its use cases; override indices
    count use cases across the whole sequence in order. Articles absent from
    the ground truth contribute only false positives.
    """
    by_article: dict[str, list[GroundTruthUseCase]] = {}
    for t in truth:
        by_article.setdefault(t.article_id, []).append(t)
    gt_article = {t.gt_id: t.article_id for t in truth}

    flat: list[tuple[str, int]] = []
    ids = [article_id for article_id, _ in extracted]
    if len(set(ids)) != len(ids):
        raise ValueError("extracted input lists an article_id more than once")
    for article_id, ucs in extracted:
        flat += [(article_id, i) for i in range(len(ucs))]
    local_overrides: dict[str, list[tuple[int, str]]] = {}
    for idx, gid in overrides:
        if not 0 <= idx < len(flat):
            raise KeyError(f"override references unknown extracted index {idx}")
        if gid not in gt_article:
            raise KeyError(f"override references unknown gt_id {gid!r}")
        article_id, local = flat[idx]
        if gt_article[gid] != article_id:
            raise ValueError(f"override ({idx},{gid}) pairs items from different articles")
        local_overrides.setdefault(article_id, []).append((local, gid))

    tp = fp = 0
    matched: set[str] = set()
    rated: list[tuple[float, GroundTruthUseCase]] = []
    for article_id, ucs in extracted:
        gts = by_article.get(article_id, [])
        result = match_use_cases(ucs, gts, tau, local_overrides.get(article_id, ()))
        tp += result.tp
        fp += result.fp
        gt_by_id = {g.gt_id: g for g in gts}
        for e, gid, _s in result.pairs:
            matched.add(gid)
            rated.append((ucs[e].newsworthiness_rating, gt_by_id[gid]))
    fn = len(truth) - len(matched)
    return CorpusMatch(tp, fp, fn, tuple(rated))

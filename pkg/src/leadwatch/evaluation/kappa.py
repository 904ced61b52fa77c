from __future__ import annotations

from collections import Counter
from collections.abc import Hashable, Sequence
from dataclasses import dataclass
from itertools import combinations

from .data import AnnotationSet
from .metrics import round_half_up


def cohen_kappa(a: Sequence[Hashable], b: Sequence[Hashable]) -> float | None:
    """Unweighted Cohen's kappa.

    Computed from integer counts with a single final division, so the result
    is exactly symmetric and invariant under relabeling. When chance agreement
    is 1 the value is 1 if observed agreement is also 1, else ``None``.
    """
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    n = len(a)
    if n == 0:
        raise ValueError("kappa needs at least one item")
    agree = sum(x == y for x, y in zip(a, b))
    ca, cb = Counter(a), Counter(b)
    chance = sum(ca[k] * cb[k] for k in ca)
    # kappa = (po - pe) / (1 - pe) with po = agree/n, pe = chance/n^2
    den = n * n - chance
    if den == 0:
        return 1.0 if agree == n else None
    return (agree * n - chance) / den


@dataclass(frozen=True)
class PairwiseKappa:
    pairs: dict[tuple[str, str], float | None]
    overlap: dict[tuple[str, str], int]

    @property
    def defined(self) -> list[float]:
        return [k for k in self.pairs.values() if k is not None]

    @property
    def min(self) -> float | None:
        return min(self.defined, default=None)

    @property
    def max(self) -> float | None:
        return max(self.defined, default=None)


def pairwise_kappa(annotations: AnnotationSet) -> PairwiseKappa:
    """Kappa for each unordered annotator pair over jointly rated items (ratings rounded half up)."""
    if len(annotations.annotators) < 2:
        raise ValueError("pairwise kappa needs at least two annotators")
    pairs: dict[tuple[str, str], float | None] = {}
    overlap: dict[tuple[str, str], int] = {}
    for x, y in combinations(annotations.annotators, 2):
        ra, rb = [], []
        for item in annotations.items:
            if x in item.human_ratings and y in item.human_ratings:
                ra.append(int(round_half_up(item.human_ratings[x])))
                rb.append(int(round_half_up(item.human_ratings[y])))
        overlap[(x, y)] = len(ra)
        pairs[(x, y)] = cohen_kappa(ra, rb) if ra else None
    return PairwiseKappa(pairs, overlap)

"""Coverage, rating-agreement and triage metrics.

Metrics that are 0/0 (or otherwise undefined on degenerate data) are
returned as ``None`` rather than a conventional zero.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal


def round_half_up(x: float, ndigits: int = 0) -> float:
    q = Decimal(1).scaleb(-ndigits)
    return float(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


def _ratio(num: float, den: float) -> float | None:
    return num / den if den else None


@dataclass(frozen=True)
class CoverageReport:
    tp: int
    fp: int
    fn: int
    fp_pct: float | None
    fn_pct: float | None
    precision: float | None
    recall: float | None
    f1: float | None


def coverage_metrics(tp: int, fp: int, fn: int) -> CoverageReport:
    for name, v in (("tp", tp), ("fp", fp), ("fn", fn)):
        if v < 0:
            raise ValueError(f"{name} must be non-negative, got {v}")
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = None
    if precision is not None and recall is not None and tp > 0:
        # equals 2PR/(P+R); with tp == 0 that is 0/0 and stays undefined
        f1 = 2 * tp / (2 * tp + fp + fn)
    fp_pct = _ratio(100 * fp, tp + fp)
    fn_pct = _ratio(100 * fn, tp + fn)
    return CoverageReport(tp, fp, fn, fp_pct, fn_pct, precision, recall, f1)


def aggregate_human(ratings: Mapping[str, float]) -> float:
    if not ratings:
        raise ValueError("no human ratings to aggregate")
    return math.fsum(ratings.values()) / len(ratings)


@dataclass(frozen=True)
class AgreementReport:
    n: int
    mae: float
    rmse: float
    r_squared: float | None
    pearson_r: float | None
    exact_accuracy: float
    within_one_accuracy: float
    mean_pred: float
    mean_human: float


def rating_agreement(pred: Sequence[float], human_mean: Sequence[float]) -> AgreementReport:
    """Agreement of model ratings with (mean) human ratings.

    Exact accuracy compares both values after round-half-up to integers;
    r_squared and pearson_r need n >= 2 and non-zero variance.
    """
    if len(pred) != len(human_mean):
        raise ValueError(f"length mismatch: {len(pred)} predictions vs {len(human_mean)} human ratings")
    n = len(pred)
    if n == 0:
        raise ValueError("no rating pairs")
    p = [float(x) for x in pred]
    h = [float(x) for x in human_mean]
    diffs = [a - b for a, b in zip(p, h)]
    mae = math.fsum(abs(d) for d in diffs) / n
    sse = math.fsum(d * d for d in diffs)
    rmse = math.sqrt(sse / n)
    mp = math.fsum(p) / n
    mh = math.fsum(h) / n
    sst = math.fsum((b - mh) ** 2 for b in h)
    spp = math.fsum((a - mp) ** 2 for a in p)
    sph = math.fsum((a - mp) * (b - mh) for a, b in zip(p, h))
    r_squared = pearson = None
    if n >= 2 and sst > 0:
        r_squared = 1.0 - sse / sst
        if spp > 0:
            pearson = max(-1.0, min(1.0, sph / math.sqrt(spp * sst)))
    exact = sum(round_half_up(a) == round_half_up(b) for a, b in zip(p, h)) / n
    # tolerance: differences like 4 - 3.0000000001 must still count as within one
    within = sum(abs(d) <= 1.0 + 1e-9 for d in diffs) / n
    return AgreementReport(n, mae, rmse, r_squared, pearson, exact, within, mp, mh)


def triage_metrics(pred: Sequence[float], human: Sequence[float], threshold: float = 4.0) -> CoverageReport:
    """Precision/recall/F1 of flagging items at ``>= threshold`` against human flags."""
    if len(pred) != len(human):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(human)}")
    tp = fp = fn = 0
    for p, h in zip(pred, human):
        ph, hh = p >= threshold, h >= threshold
        tp += ph and hh
        fp += ph and not hh
        fn += hh and not ph
    return coverage_metrics(tp, fp, fn)

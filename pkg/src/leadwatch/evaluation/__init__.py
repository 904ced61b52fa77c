from .data import AnnotationSet, GroundTruthUseCase, load_extracted, load_ground_truth, load_overrides
from .kappa import PairwiseKappa, cohen_kappa, pairwise_kappa
from .matching import DEFAULT_TAU, CorpusMatch, MatchResult, match_corpus, match_use_cases
from .metrics import (
    AgreementReport,
    CoverageReport,
    aggregate_human,
    coverage_metrics,
    rating_agreement,
    round_half_up,
    triage_metrics,
)
from .report import kappa_report, table_report

__all__ = [
    "DEFAULT_TAU",
    "AgreementReport",
    "AnnotationSet",
    "CorpusMatch",
    "CoverageReport",
    "GroundTruthUseCase",
    "MatchResult",
    "PairwiseKappa",
    "aggregate_human",
    "cohen_kappa",
    "coverage_metrics",
    "kappa_report",
    "load_extracted",
    "load_ground_truth",
    "load_overrides",
    "match_corpus",
    "match_use_cases",
    "pairwise_kappa",
    "rating_agreement",
    "round_half_up",
    "table_report",
    "triage_metrics",
]

import json
import math
import random

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from leadwatch.evaluation import (
    AnnotationSet,
    GroundTruthUseCase,
    aggregate_human,
    cohen_kappa,
    coverage_metrics,
    kappa_report,
    load_extracted,
    load_ground_truth,
    load_overrides,
    match_corpus,
    match_use_cases,
    pairwise_kappa,
    rating_agreement,
    round_half_up,
    table_report,
    triage_metrics,
)
from leadwatch.evaluation.matching import greedy_match
from leadwatch.evaluation.report import fmt_ratio
from leadwatch.models import UseCase
from oracles import best_assignment, brute_kappa, naive_agreement

# (label, tp, fp, fn, fp%, fn%, precision, recall, f1) as printed in the coverage table
TABLE_ROWS = [
    ("o3", 72, 7, 3, 8.9, 4.0, 0.911, 0.960, 0.935),
    ("o4-mini", 65, 2, 10, 3.0, 13.3, 0.970, 0.867, 0.915),
    ("gpt-4o", 51, 7, 24, 12.1, 32.0, 0.879, 0.680, 0.767),
    ("gpt-4.1", 65, 11, 10, 14.5, 13.3, 0.855, 0.867, 0.861),
    ("gpt-5", 60, 24, 15, 28.6, 20.0, 0.714, 0.800, 0.755),
]


@pytest.mark.parametrize("row", TABLE_ROWS, ids=[r[0] for r in TABLE_ROWS])
def test_coverage_table_rows(row):
    _, tp, fp, fn, fpp, fnp, p, r, f = row
    rep = coverage_metrics(tp, fp, fn)
    assert abs(rep.precision - p) <= 5e-4
    assert abs(rep.recall - r) <= 5e-4
    assert abs(rep.f1 - f) <= 5e-4
    assert round_half_up(rep.fp_pct, 1) == fpp
    assert round_half_up(rep.fn_pct, 1) == fnp


def test_coverage_edge_cases():
    perfect = coverage_metrics(5, 0, 0)
    assert (perfect.precision, perfect.recall, perfect.f1) == (1.0, 1.0, 1.0)
    empty = coverage_metrics(0, 0, 0)
    assert (empty.precision, empty.recall, empty.f1, empty.fp_pct, empty.fn_pct) == (None,) * 5
    none_found = coverage_metrics(0, 3, 4)
    assert (none_found.precision, none_found.recall, none_found.f1) == (0.0, 0.0, None)
    with pytest.raises(ValueError):
        coverage_metrics(-1, 0, 0)


@given(st.integers(0, 200), st.integers(0, 200), st.integers(0, 200))
def test_coverage_bounds(tp, fp, fn):
    rep = coverage_metrics(tp, fp, fn)
    for v in (rep.precision, rep.recall, rep.f1):
        assert v is None or 0.0 <= v <= 1.0
    if rep.f1 is not None:
        p, r = rep.precision, rep.recall
        assert math.isclose(rep.f1, 2 * p * r / (p + r))


def test_aggregate_human():
    assert aggregate_human({"a": 3}) == 3.0
    assert aggregate_human({"a": 2, "b": 4}) == 3.0
    assert round(aggregate_human({"a": 1, "b": 2, "c": 5}), 3) == 2.667
    with pytest.raises(ValueError):
        aggregate_human({})


def test_agreement_identity():
    rep = rating_agreement([1, 2, 3, 4.5], [1, 2, 3, 4.5])
    assert (rep.mae, rep.rmse, rep.exact_accuracy, rep.within_one_accuracy, rep.r_squared) == (0, 0, 1, 1, 1)


def test_agreement_constant_human():
    rep = rating_agreement([4, 3, 5], [3, 3, 3])
    assert rep.mae == 1.0
    assert rep.exact_accuracy == pytest.approx(1 / 3)
    assert rep.within_one_accuracy == pytest.approx(2 / 3)
    assert rep.r_squared is None and rep.pearson_r is None


def test_agreement_anticorrelated():
    rep = rating_agreement([5, 5, 1, 1], [1, 1, 5, 5])
    assert rep.pearson_r == -1.0
    assert rep.r_squared < 0


def test_agreement_rounding_and_tolerance():
    # 2.5 rounds up to 3 and 3.49 rounds to 3
    assert rating_agreement([2.5, 1.0], [3.49, 2.0]).exact_accuracy == 0.5
    assert rating_agreement([4.0, 1.0], [3.0000000001, 2.0]).within_one_accuracy == 1.0
    with pytest.raises(ValueError):
        rating_agreement([1, 2], [1])


pairs = st.integers(2, 40).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(1, 5, allow_nan=False), min_size=n, max_size=n),
        st.lists(st.floats(1, 5, allow_nan=False), min_size=n, max_size=n),
    )
)


@given(pairs)
def test_agreement_properties(pair):
    pred, human = pair
    rep = rating_agreement(pred, human)
    assert rep.mae <= rep.rmse + 1e-12
    assert rep.exact_accuracy <= rep.within_one_accuracy
    if rep.r_squared is not None:
        assert rep.r_squared <= 1.0
    if rep.pearson_r is not None:
        assert -1.0 <= rep.pearson_r <= 1.0
    mae, rmse, pearson = naive_agreement(pred, human)
    assert math.isclose(rep.mae, mae, abs_tol=1e-9)
    assert math.isclose(rep.rmse, rmse, abs_tol=1e-9)


def test_round_half_up():
    assert round_half_up(2.5) == 3.0
    assert round_half_up(0.9114, 3) == 0.911
    assert round_half_up(0.9115, 3) == 0.912
    assert fmt_ratio(0.9114) == "0.911"
    assert fmt_ratio(None) == "n/a"


def test_kappa_examples():
    assert cohen_kappa([1, 1, 2, 2], [1, 2, 2, 2]) == 0.5
    assert cohen_kappa([1, 2, 3, 1], [1, 2, 3, 1]) == 1.0
    assert cohen_kappa([3, 3], [3, 3]) == 1.0
    assert cohen_kappa([3, 3], [4, 4]) == 0.0
    with pytest.raises(ValueError):
        cohen_kappa([], [])
    with pytest.raises(ValueError):
        cohen_kappa([1], [1, 2])


labels = st.lists(st.tuples(st.integers(1, 5), st.integers(1, 5)), min_size=1, max_size=30)


@given(labels, st.permutations([1, 2, 3, 4, 5]))
def test_kappa_oracle_and_invariances(pairs, perm):
    a = [x for x, _ in pairs]
    b = [y for _, y in pairs]
    k = cohen_kappa(a, b)
    ref = brute_kappa(a, b)
    assert (k is None) == (ref is None)
    if k is not None:
        assert abs(k - ref) <= 1e-12
        assert -1.0 <= k <= 1.0
    assert cohen_kappa(b, a) == k
    relabel = dict(zip([1, 2, 3, 4, 5], perm))
    assert cohen_kappa([relabel[x] for x in a], [relabel[y] for y in b]) == k


def gt(gt_id, name, ratings, article="a1", description=""):
    return GroundTruthUseCase(gt_id, name, description, article, ratings)


def test_pairwise_kappa():
    items = [
        gt("g1", "x", {"ann1": 1, "ann2": 1, "ann3": 2}),
        gt("g2", "y", {"ann1": 2, "ann2": 2, "ann3": 2}),
        gt("g3", "z", {"ann1": 2, "ann2": 1, "ann3": 1.5}),
        gt("g4", "w", {"ann1": 4, "ann2": 4}),
    ]
    result = pairwise_kappa(AnnotationSet.from_items(items))
    assert set(result.pairs) == {("ann1", "ann2"), ("ann1", "ann3"), ("ann2", "ann3")}
    assert result.pairs[("ann1", "ann2")] == cohen_kappa([1, 2, 2, 4], [1, 2, 1, 4])
    # ann3's 1.5 rounds half up to 2
    assert result.pairs[("ann1", "ann3")] == cohen_kappa([1, 2, 2], [2, 2, 2])
    assert result.overlap[("ann2", "ann3")] == 3
    assert result.min == min(result.defined) and result.max == max(result.defined)
    assert "min kappa" in kappa_report(result)


def test_pairwise_kappa_identical_and_two():
    same = [gt(f"g{i}", "n", {"a": r, "b": r, "c": r}) for i, r in enumerate([1, 3, 5, 3])]
    result = pairwise_kappa(AnnotationSet.from_items(same))
    assert result.min == result.max == 1.0
    two = pairwise_kappa(AnnotationSet.from_items([gt("g", "n", {"a": 1, "b": 2}), gt("h", "m", {"a": 2, "b": 2})]))
    assert len(two.pairs) == 1 and two.min == two.max


def test_pairwise_kappa_no_overlap():
    items = [gt("g1", "x", {"a": 1}), gt("g2", "y", {"b": 2})]
    result = pairwise_kappa(AnnotationSet.from_items(items))
    assert result.pairs[("a", "b")] is None and result.min is None


def test_ground_truth_validation():
    with pytest.raises(ValueError):
        gt("g", "x", {})
    with pytest.raises(ValueError):
        gt("g", "x", {"a": 6})
    with pytest.raises(ValueError):
        AnnotationSet((gt("g", "x", {"a": 3}),), ("b",))


def uc(name, description="", rating=3.0):
    return UseCase(name=name, description=description, newsworthiness_rating=rating)


def test_match_identity_and_empty():
    truth = [gt("g1", "council summaries", {"a": 3}), gt("g2", "archive chatbot", {"a": 3})]
    res = match_use_cases([uc("archive chatbot"), uc("council summaries")], truth)
    assert (res.tp, res.fp, res.fn) == (2, 0, 0)
    assert {(e, g) for e, g, _ in res.pairs} == {(0, "g2"), (1, "g1")}
    res = match_use_cases([], truth)
    assert (res.tp, res.fp, res.fn) == (0, 0, 2)


def test_match_threshold_and_overrides():
    truth = [gt("g1", "council meeting summaries", {"a": 3}), gt("g2", "archive chatbot", {"a": 3})]
    extracted = [uc("summaries of meetings"), uc("podcast transcripts")]
    res = match_use_cases(extracted, truth, tau=0.4)
    assert res.tp == 0
    res = match_use_cases(extracted, truth, tau=0.4, overrides=[(1, "g2")])
    assert res.pairs == ((1, "g2", 0.0),)
    assert (res.tp, res.fp, res.fn) == (1, 1, 1)
    with pytest.raises(KeyError):
        match_use_cases(extracted, truth, overrides=[(5, "g1")])
    with pytest.raises(KeyError):
        match_use_cases(extracted, truth, overrides=[(0, "nope")])
    with pytest.raises(ValueError):
        match_use_cases(extracted, truth, tau=1.5)


def test_greedy_tie_break():
    # all similarities equal: lower extracted index first, then smaller gt id
    sim = [[0.5, 0.5], [0.5, 0.5]]
    assert greedy_match(sim, ["b", "a"], 0.0) == [(0, 1), (1, 0)]


def test_constructed_four_by_four_matches_optimum():
    sim = [
        [0.9, 0.2, 0.1, 0.0],
        [0.3, 0.8, 0.2, 0.1],
        [0.1, 0.3, 0.7, 0.2],
        [0.0, 0.1, 0.4, 0.6],
    ]
    chosen = greedy_match(sim, ["g1", "g2", "g3", "g4"], 0.4)
    count, total = best_assignment(sim, 0.4)
    assert len(chosen) == count == 4
    assert math.isclose(sum(sim[e][t] for e, t in chosen), total)


def test_random_small_instances_at_zero_tau():
    rng = random.Random(11)
    for _ in range(100):
        m, k = rng.randint(0, 6), rng.randint(0, 6)
        sim = [[rng.random() for _ in range(k)] for _ in range(m)]
        chosen = greedy_match(sim, [f"g{i}" for i in range(k)], 0.0)
        assert len(chosen) == best_assignment(sim, 0.0)[0]


def test_match_corpus():
    truth = [
        gt("g1", "council summaries", {"a": 3}, "art1"),
        gt("g2", "archive chatbot", {"a": 4}, "art1"),
        gt("g3", "sports previews", {"a": 2}, "art2"),
    ]
    extracted = [
        ("art1", [uc("council summaries", rating=4), uc("archive chatbot", rating=5)]),
        ("art2", [uc("weather bot")]),
        ("art9", [uc("sports previews")]),
    ]
    res = match_corpus(extracted, truth)
    # same name in a different article does not match
    assert (res.tp, res.fp, res.fn) == (2, 2, 1)
    assert [(p, g.gt_id) for p, g in res.rated_pairs] == [(4.0, "g1"), (5.0, "g2")]
    res = match_corpus(extracted, truth, overrides=[(2, "g3")])
    assert (res.tp, res.fp, res.fn) == (3, 1, 0)
    with pytest.raises(ValueError):
        match_corpus(extracted, truth, overrides=[(0, "g3")])
    with pytest.raises(ValueError):
        match_corpus(extracted + [("art1", [])], truth)


def test_triage_examples():
    rep = triage_metrics([4, 4, 3, 3], [4, 3, 4, 3], 4)
    assert (rep.tp, rep.fp, rep.fn) == (1, 1, 1)
    assert (rep.precision, rep.recall, rep.f1) == (0.5, 0.5, 0.5)
    same = triage_metrics([5, 2, 4.5], [5, 2, 4.5], 3)
    assert same.precision == same.recall == 1.0
    none = triage_metrics([5, 4], [1, 2], 4)
    assert none.precision == 0.0 and none.recall is None


def test_table_report():
    rep = coverage_metrics(72, 7, 3)
    latex = table_report({"o3": rep}, fmt="latex")
    assert "o3 & 72 & 7 & 3 & 8.9 & 4.0 & 0.911 & 0.960 & 0.935 \\\\" in latex
    assert "0.911 & 0.960 & 0.935" in latex
    empty = table_report({}, fmt="markdown")
    assert empty.count("\n") == 2 and empty.startswith("| Model | TP")
    agreement = rating_agreement([4, 3, 5], [3, 3, 3])
    md = table_report(agreement={"m": agreement})
    assert "| m | 3 | 1.000 | 1.291 | n/a | n/a | 0.333 | 0.667 |" in md
    csv_text = table_report({"o3": rep}, fmt="csv")
    assert csv_text.splitlines()[1] == "o3,72,7,3,8.9,4.0,0.911,0.960,0.935"
    with pytest.raises(ValueError):
        table_report({}, fmt="html")


def test_latex_escaping():
    latex = table_report({"a_b\\c 100%": coverage_metrics(1, 0, 0)}, fmt="latex")
    header, _, row = latex.splitlines()
    assert "FP\\% & FN\\%" in header
    assert row.startswith("a\\_b\\textbackslash{}c 100\\% & 1 &")


def test_loaders(tmp_path):
    gt_path = tmp_path / "truth.jsonl"
    gt_path.write_text(
        json.dumps({"gt_id": "g1", "name": "n", "article_id": "a", "human_ratings": {"x": 3, "y": 4}}) + "\n\n"
    )
    ann = load_ground_truth(gt_path)
    assert ann.annotators == ("x", "y") and ann.items[0].description == ""
    ex_path = tmp_path / "ex.jsonl"
    ex_path.write_text(json.dumps({"article_id": "a", "summary": "s", "usefulness_rating": 3, "use_cases": []}) + "\n")
    assert load_extracted(ex_path)[0][0] == "a"
    ov = tmp_path / "ov.txt"
    ov.write_text("# index,gt\n0, g1\n\n")
    assert load_overrides(ov) == [(0, "g1")]
    ov.write_text("garbage\n")
    with pytest.raises(ValueError):
        load_overrides(ov)
    gt_path.write_text('{"gt_id": "g"}\n')
    with pytest.raises(ValueError):
        load_ground_truth(gt_path)

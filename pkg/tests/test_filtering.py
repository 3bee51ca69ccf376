import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_corpus
from dialfilter.corpus import read_pairs, write_pairs
from dialfilter.filtering import (
    FilterSpec,
    entropy_scores,
    entropy_table,
    filter_report,
    rank_and_select,
    write_filtered,
)


def test_keep_all():
    assert rank_and_select({0: 1.0, 1: 5.0, 2: 3.0}, FilterSpec(keep_ratio=1.0)) == {0, 1, 2}


def test_keep_top_half():
    scores = {10: 1.0, 11: 2.0, 12: 3.0, 13: 4.0}
    assert rank_and_select(scores, FilterSpec(keep_ratio=0.5)) == {12, 13}


def test_ties_go_to_smaller_ids():
    assert rank_and_select({0: 2.0, 1: 2.0, 2: 2.0, 3: 1.0}, FilterSpec(keep_ratio=0.5)) == {0, 1}


def test_keep_size_is_ceiling():
    assert FilterSpec(keep_ratio=0.5).keep_size(5) == 3
    assert FilterSpec(keep_ratio=0.1).keep_size(30) == 3
    assert FilterSpec(keep_count=7).keep_size(5) == 5


def test_entropy_methods_keep_low_entropy():
    spec = FilterSpec("entropy-src", keep_ratio=0.5)
    assert spec.direction == "keep-bottom"
    assert rank_and_select({0: 0.0, 1: 1.1, 2: 0.7, 3: 0.0}, spec) == {0, 3}


def test_spec_validation():
    with pytest.raises(ValueError):
        FilterSpec(keep_ratio=0.0)
    with pytest.raises(ValueError):
        FilterSpec(keep_ratio=1.5)
    with pytest.raises(ValueError):
        FilterSpec("bleu")
    with pytest.raises(ValueError):
        rank_and_select({}, FilterSpec())


def test_entropy_examples():
    table = entropy_table([("hi", "a"), ("how", "x"), ("how", "y"), ("what", "a"), ("what", "a"), ("what", "b")])
    assert table["hi"] == 0.0
    assert table["how"] == pytest.approx(math.log(2))
    assert table["what"] == pytest.approx(-(2 / 3) * math.log(2 / 3) - (1 / 3) * math.log(1 / 3))
    assert table["what"] == pytest.approx(0.6365, abs=5e-5)


def test_entropy_scores_per_pair():
    corp = make_corpus([("a b c", "x y z"), ("a b c", "p q r"), ("d e f", "x y z")])
    assert entropy_scores(corp, "src") == {0: pytest.approx(math.log(2)), 1: pytest.approx(math.log(2)), 2: 0.0}
    assert entropy_scores(corp, "trg") == {0: pytest.approx(math.log(2)), 1: 0.0, 2: pytest.approx(math.log(2))}


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abcd"), st.sampled_from("wxyz")), min_size=1, max_size=40))
def test_entropy_bounds(pairs):
    table = entropy_table(pairs)
    for u, h in table.items():
        distinct = len({y for x, y in pairs if x == u})
        assert 0.0 <= h <= math.log(distinct) + 1e-12
        assert (h == 0.0) == (distinct == 1)


scores_st = st.dictionaries(st.integers(0, 500), st.floats(-100, 100), min_size=1, max_size=60)
ratio_st = st.sampled_from([0.01, 0.1, 0.25, 0.5, 0.9, 1.0])


@settings(max_examples=300, deadline=None)
@given(scores_st, ratio_st, st.sampled_from(["keep-top", "keep-bottom"]))
def test_selection_properties(scores, ratio, direction):
    spec = FilterSpec(keep_ratio=ratio, direction=direction)
    kept = rank_and_select(scores, spec)
    assert len(kept) == math.ceil(round(ratio * 100) * len(scores) / 100)
    # brute-force: sort with the declared tie rule
    sign = -1 if direction == "keep-top" else 1
    ref = sorted(scores, key=lambda i: (sign * scores[i], i))[:len(kept)]
    assert kept == set(ref)
    # strictly increasing transform keeps the selection
    levels = {v: 10.0 * k + 0.5 for k, v in enumerate(sorted(set(scores.values())))}
    assert rank_and_select({i: levels[v] for i, v in scores.items()}, spec) == kept
    survivors = {i: scores[i] for i in kept}
    assert rank_and_select(survivors, FilterSpec(keep_ratio=1.0, direction=direction)) == kept


def test_write_filtered(tmp_path):
    corp = make_corpus([("a b c", "d e f"), ("g h i", "j k l"), ("m n o", "p q r")])
    src = tmp_path / "all.tsv"
    write_pairs(corp, src)
    write_filtered(corp, corp.ids, tmp_path / "same.tsv")
    assert (tmp_path / "same.tsv").read_bytes() == src.read_bytes()
    assert write_filtered(corp, {2}, tmp_path / "one.tsv") == 1
    assert [p.id for p in read_pairs(tmp_path / "one.tsv")] == [2]
    with pytest.raises(ValueError, match="unknown"):
        write_filtered(corp, {9}, tmp_path / "bad.tsv")


def test_filter_report():
    scores = {0: 1.0, 1: 2.0, 2: 3.0}
    spec = FilterSpec(keep_ratio=0.5)
    rep = filter_report(spec, scores, rank_and_select(scores, spec))
    assert rep["kept_pairs"] == 2 and rep["removed_pairs"] == 1 and rep["cutoff_score"] == 2.0

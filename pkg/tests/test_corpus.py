import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialfilter.corpus import (
    RawPair,
    apply_rule_filters,
    build_corpus,
    filter_by_language,
    pair_consecutive_lines,
    read_lines,
    read_pairs,
    tokenize,
    tokenize_pairs,
    write_pairs,
)


def texts(pairs):
    return [(p.x, p.y) for p in pairs]


def test_pairs_within_one_work():
    assert texts(pair_consecutive_lines([("W", "A"), ("W", "B"), ("W", "C")])) == [("A", "B"), ("B", "C")]


def test_single_line_work_has_no_pair():
    assert pair_consecutive_lines([("W", "A")]) == []


def test_pairs_never_cross_works():
    got = texts(pair_consecutive_lines([("W1", "A"), ("W1", "B"), ("W2", "C"), ("W2", "D")]))
    assert got == [("A", "B"), ("C", "D")]


def test_empty_input():
    assert pair_consecutive_lines([]) == []
    assert len(build_corpus([])) == 0


@pytest.mark.parametrize("text, expected", [
    ("Hello, world!", ["Hello", ",", "world", "!"]),
    ("a b", ["a", "b"]),
    ("", []),
    ("  spaced   out  ", ["spaced", "out"]),
    ("\"Why?!\"", ["\"", "Why", "?", "!", "\""]),
    ("don't", ["don't"]),
])
def test_tokenize(text, expected):
    assert tokenize(text) == expected


def _cands(rows):
    return tokenize_pairs([RawPair("w", i, x, y) for i, (x, y) in enumerate(rows)])


def test_length_filter_drops_short_side():
    corp = apply_rule_filters(_cands([("a b", "c d e f g")]))
    assert len(corp) == 0


def test_length_bounds_inclusive():
    ok3 = " ".join("abc")
    ok25 = " ".join(["w"] * 25)
    too_long = " ".join(["w"] * 26)
    corp = apply_rule_filters(_cands([(ok3, ok25), (ok3, too_long)]))
    assert len(corp) == 1


def test_parrot_back_dropped():
    assert len(apply_rule_filters(_cands([("go on now .", "go on now .")]))) == 0


def test_duplicates_kept_once_with_sequential_ids():
    corp = apply_rule_filters(_cands([("a b c", "d e f"), ("g h i", "j k l"), ("a b c", "d e f")]))
    assert [p.id for p in corp] == [0, 1]
    assert (corp[1].x.raw, corp[1].y.raw) == ("g h i", "j k l")


def test_language_hook_drops_mixed_pairs():
    raw = pair_consecutive_lines([("w", 0, "a"), ("w", 1, "b"), ("w", 2, "c")])
    kept = filter_by_language(raw, ["en", "en", "ja"], "en")
    assert texts(kept) == [("a", "b")]


def test_read_lines_blank_separated(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("A\nB\n\nC\nD\n", encoding="utf-8")
    got = texts(pair_consecutive_lines(read_lines(p, blank_separated=True)))
    assert got == [("A", "B"), ("C", "D")]


def test_read_lines_manifest(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("A\nB\nC\nD\n", encoding="utf-8")
    m = tmp_path / "m.tsv"
    m.write_text("w1\t0\t3\nw2\t3\t4\n", encoding="utf-8")
    got = texts(pair_consecutive_lines(read_lines(p, manifest=m)))
    assert got == [("A", "B"), ("B", "C")]


def test_pairs_file_roundtrip(tmp_path):
    corp = build_corpus([("w", "how are you ?"), ("w", "fine , thanks ."), ("w", "good to hear .")])
    path = tmp_path / "pairs.tsv"
    write_pairs(corp, path)
    back = read_pairs(path)
    assert [(p.id, p.x.tokens, p.y.tokens) for p in back] == [(p.id, p.x.tokens, p.y.tokens) for p in corp]


words = st.sampled_from(["a", "b", "c", "hi", "yes", "no", "ok", "."])
line = st.lists(words, min_size=0, max_size=30).map(" ".join)
works = st.lists(st.tuples(st.sampled_from(["w1", "w2", "w3"]), line), max_size=40)


@settings(max_examples=200, deadline=None)
@given(works)
def test_rule_filter_properties(items):
    raw = pair_consecutive_lines(items)
    cands = tokenize_pairs(raw)
    corp = apply_rule_filters(cands)
    for p in corp:
        assert 3 <= p.x.token_count <= 25 and 3 <= p.y.token_count <= 25
        assert p.x.raw != p.y.raw
    assert [p.id for p in corp] == list(range(len(corp)))
    # survivors keep input order
    positions = [cands.index(next(c for c in cands if (c.x, c.y) == (p.x, p.y))) for p in corp]
    assert positions == sorted(positions)
    again = apply_rule_filters(corp)
    assert texts_of(again) == texts_of(corp)


def texts_of(corp):
    return [(p.id, p.x.raw, p.y.raw) for p in corp]


@settings(max_examples=200, deadline=None)
@given(works)
def test_pair_count_per_work(items):
    raw = pair_consecutive_lines(items)
    # runs of the same work id form one work
    expected = 0
    run = 0
    prev = object()
    for w, _ in items:
        if w == prev:
            run += 1
        else:
            expected += max(0, run - 1)
            run = 1
            prev = w
    expected += max(0, run - 1)
    assert len(raw) == expected

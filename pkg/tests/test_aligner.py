import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_corpus
from dialfilter.aligner import (
    AlignConfig,
    AlignmentMatrix,
    AlignmentModel,
    Vocabulary,
    align_and_symmetrize,
    align_corpus,
    alignment_prior,
    corpus_log_likelihood,
    load_model,
    read_alignments,
    save_model,
    symmetrize,
    train_alignment,
    viterbi_align,
    write_alignments,
)
from oracles import em_reference, prior_row


def random_corpus(rng, n_pairs, vocab=6, max_len=5):
    words = [f"w{k}" for k in range(vocab)]
    rows = []
    for _ in range(n_pairs):
        x = [rng.choice(words) for _ in range(rng.randint(1, max_len))]
        y = [rng.choice(words) for _ in range(rng.randint(1, max_len))]
        rows.append((" ".join(x), " ".join(y)))
    return rows


def test_prior_rows_match_reference():
    p = alignment_prior(4, 3, 0.5, 4.0)
    for j in range(3):
        np.testing.assert_allclose(p[j], prior_row(4, 3, j + 1, 0.5, 4.0), rtol=1e-14)
        assert math.isclose(p[j].sum(), 1.0, rel_tol=1e-14)


def test_uniform_prior_option():
    p = alignment_prior(4, 2, 0.2, 4.0, favor_diagonal=False)
    np.testing.assert_allclose(p[:, 1:], 0.2)


def test_repeated_pair_learns_identity():
    corp = make_corpus([("a b", "a b")] * 100)
    m = train_alignment(corp)
    assert m.prob("a", "a") > m.prob("a", "b")
    assert m.prob("b", "b") > m.prob("b", "a")


def test_single_pair_row_is_forced():
    m = train_alignment(make_corpus([("a", "a")]), iterations=5, null_prob=0.5)
    assert m.prob("a", "a") == 1.0


def test_empty_corpus_rejected():
    with pytest.raises(ValueError, match="empty training corpus"):
        train_alignment(make_corpus([]))


@pytest.mark.parametrize("diagonal", [True, False])
def test_em_matches_reference_implementation(diagonal):
    rng = random.Random(3)
    rows = random_corpus(rng, 30)
    corp = make_corpus(rows)
    model = train_alignment(corp, iterations=4, favor_diagonal=diagonal)
    t_ref, ll_ref = em_reference([(x.split(), y.split()) for x, y in rows], iterations=4, diagonal=diagonal)
    for (src, tgt), val in t_ref.items():
        assert model.prob(src, tgt) == pytest.approx(val, rel=1e-9, abs=1e-15)
    np.testing.assert_allclose(model.log_likelihoods, ll_ref, rtol=1e-11)


def test_reverse_direction_swaps_roles():
    rows = [("a b c", "x y"), ("a c", "y z"), ("b", "x")]
    corp = make_corpus(rows)
    rev = train_alignment(corp, "reverse", iterations=3)
    t_ref, _ = em_reference([(y.split(), x.split()) for x, y in rows], iterations=3)
    for (src, tgt), val in t_ref.items():
        assert rev.prob(src, tgt) == pytest.approx(val, rel=1e-9)


def _null_uniform_model():
    src = Vocabulary(["a"])
    tgt = Vocabulary(["a", "b"])
    vt = len(tgt)
    keys = np.array([0 * vt + 1, 0 * vt + 2, 1 * vt + 1])
    probs = np.array([0.5, 0.5, 1.0])
    return AlignmentModel(src, tgt, keys, probs, 0.5, 4.0)


def test_viterbi_link_beats_uniform_null():
    model = _null_uniform_model()
    # link: 0.5 * 1 * 1.0; NULL: 0.5 * 0.5
    mat = viterbi_align(model, make_corpus([("a", "a")])[0])
    assert mat.links == {(0, 0)}


def test_viterbi_unknown_target_goes_to_null():
    model = _null_uniform_model()
    mat = viterbi_align(model, make_corpus([("a", "zzz")])[0])
    assert mat.links == frozenset()


def test_viterbi_tie_with_null_gives_no_link():
    model = train_alignment(make_corpus([("a", "a")]))
    assert viterbi_align(model, make_corpus([("a", "a")])[0]).links == frozenset()


@pytest.mark.parametrize("diagonal", [True, False])
def test_identity_model_aligns_swapped_pair(diagonal):
    words = [f"w{k}" for k in range(20)]
    rng = random.Random(0)
    rows = []
    for _ in range(300):
        s = rng.sample(words, rng.randint(2, 5))
        rows.append((" ".join(s), " ".join(s)))
    rows.append(("w0 w1", "w0 w1"))
    model = train_alignment(make_corpus(rows), favor_diagonal=diagonal)
    mat = viterbi_align(model, make_corpus([("w0 w1", "w1 w0")])[0])
    assert mat.links == {(0, 1), (1, 0)}


def test_viterbi_one_link_per_target_and_orientation():
    rng = random.Random(1)
    corp = make_corpus(random_corpus(rng, 40))
    fwd = train_alignment(corp)
    rev = train_alignment(corp, "reverse")
    for p, a, b in zip(corp, align_corpus(fwd, corp), align_corpus(rev, corp)):
        assert (a.x_len, a.y_len) == (b.x_len, b.y_len) == (p.x.token_count, p.y.token_count)
        ys = [j for _, j in a.links]
        assert len(ys) == len(set(ys))
        xs = [i for i, _ in b.links]
        assert len(xs) == len(set(xs))


def test_symmetrize_examples():
    m1 = AlignmentMatrix(1, 1, frozenset({(0, 0)}))
    empty = AlignmentMatrix(1, 1)
    assert symmetrize(m1, m1).links == {(0, 0)}
    assert symmetrize(m1, empty, "grow-diag-final").links == {(0, 0)}
    # (1,1) is a diagonal neighbour of (0,0) whose row and column are free,
    # so grow-diag already adds it before the final step
    f = AlignmentMatrix(2, 2, frozenset({(0, 0), (1, 1)}))
    r = AlignmentMatrix(2, 2, frozenset({(0, 0)}))
    for h in ("grow-diag", "grow-diag-final", "grow-diag-final-and"):
        assert symmetrize(f, r, h).links == {(0, 0), (1, 1)}


def test_final_and_needs_both_free():
    f = AlignmentMatrix(3, 3, frozenset({(0, 0), (2, 0)}))
    r = AlignmentMatrix(3, 3, frozenset({(0, 0)}))
    # (2,0): row 2 free, column 0 covered; not adjacent to (0,0)
    assert symmetrize(f, r, "grow-diag-final").links == {(0, 0), (2, 0)}
    assert symmetrize(f, r, "grow-diag-final-and").links == {(0, 0)}


def test_symmetrize_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        symmetrize(AlignmentMatrix(1, 2), AlignmentMatrix(2, 1))


@st.composite
def matrix_pair(draw):
    nx = draw(st.integers(1, 6))
    ny = draw(st.integers(1, 6))
    cells = st.tuples(st.integers(0, nx - 1), st.integers(0, ny - 1))
    a = draw(st.frozensets(cells, max_size=nx * ny))
    b = draw(st.frozensets(cells, max_size=nx * ny))
    return AlignmentMatrix(nx, ny, a), AlignmentMatrix(nx, ny, b)


@settings(max_examples=300, deadline=None)
@given(matrix_pair(), st.sampled_from(["grow-diag", "grow-diag-final", "grow-diag-final-and"]))
def test_symmetrize_between_intersection_and_union(pair, heuristic):
    a, b = pair
    out = symmetrize(a, b, heuristic).links
    assert a.links & b.links <= out <= a.links | b.links


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_em_likelihood_monotone_and_rows_normalized(seed):
    rng = random.Random(seed)
    corp = make_corpus(random_corpus(rng, rng.randint(1, 15)))
    model = train_alignment(corp, null_prob=rng.choice([0.0, 0.2, 0.5]))
    lls = model.log_likelihoods
    assert all(b >= a - 1e-9 for a, b in zip(lls, lls[1:]))
    np.testing.assert_allclose(model.row_sums(), 1.0, atol=1e-6)
    assert corpus_log_likelihood(model, corp) == pytest.approx(lls[-1], rel=1e-12)


def test_training_deterministic_across_runs_and_thread_counts():
    rng = random.Random(7)
    corp = make_corpus(random_corpus(rng, 60))
    a = train_alignment(corp, threads=1)
    b = train_alignment(corp, threads=1)
    assert np.array_equal(a.probs, b.probs)
    c = train_alignment(corp, threads=3)
    np.testing.assert_allclose(c.probs, a.probs, rtol=1e-12)


def test_bad_config_rejected():
    corp = make_corpus([("a", "b")])
    with pytest.raises(ValueError, match="null_prob"):
        train_alignment(corp, null_prob=1.0)
    with pytest.raises(ValueError):
        train_alignment(corp, AlignConfig(iterations=0))


def test_model_and_alignment_files_roundtrip(tmp_path):
    rng = random.Random(2)
    corp = make_corpus(random_corpus(rng, 20))
    fwd, rev, mats = align_and_symmetrize(corp)
    save_model(fwd, tmp_path / "m")
    back = load_model(tmp_path / "m")
    assert np.array_equal(back.probs, fwd.probs) and np.array_equal(back.keys, fwd.keys)
    assert back.log_likelihoods == fwd.log_likelihoods
    assert [a.links for a in align_corpus(back, corp)] == [a.links for a in align_corpus(fwd, corp)]
    write_alignments(tmp_path / "a", zip(corp.ids, mats))
    got = read_alignments(tmp_path / "a", corp)
    assert [got[i] for i in corp.ids] == mats

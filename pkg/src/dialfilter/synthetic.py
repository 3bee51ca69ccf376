"""Synthetic dialogue corpora with a planted connectivity/topic signal.

Half of the pairs are *planted*: the utterance carries a cue phrase and words
from one topic, and the response carries the cue's answer phrase plus words
from the same topic.  The other half are built the same way and then have
their responses cross-shuffled, so cue/answer and topic links are broken.
Word vectors cluster by topic and share a common offset direction, and the
frequency table makes filler words frequent.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sentvec import FrequencyTable, WordVectorTable, write_frequencies, write_word_vectors


@dataclass
class SyntheticCorpus:
    pairs: list  # (x_text, y_text)
    planted: list  # bool per pair
    vectors: WordVectorTable
    freqs: FrequencyTable

    def lines(self) -> list[str]:
        """Blank-separated two-line works, one per pair."""
        out = []
        for x, y in self.pairs:
            out.extend([x, y, ""])
        return out


def _words(prefix, n):
    return [f"{prefix}{k}" for k in range(n)]


def planted_corpus(n_pairs: int = 10_000, planted_fraction: float = 0.5, seed: int = 0, dim: int = 50,
                   n_topics: int = 20, topic_size: int = 25, n_cues: int = 40, n_fillers: int = 60,
                   generic_fraction: float = 0.0, n_generic: int = 5) -> SyntheticCorpus:
    """Build the corpus; ``generic_fraction`` of the shuffled pairs get one of
    ``n_generic`` stock filler-only responses (food for the entropy baseline)."""
    rng = np.random.default_rng(seed)
    fillers = _words("fw", n_fillers)
    topics = [_words(f"t{t}w", topic_size) for t in range(n_topics)]
    cues = []
    for k in range(n_cues):
        f = [f"q{k}a"] + ([f"q{k}b"] if rng.random() < 0.5 else [])
        e = [f"r{k}a"] + ([f"r{k}b"] if rng.random() < 0.5 else [])
        cues.append((f, e))

    def pick(words, lo, hi):
        return list(rng.choice(words, size=rng.integers(lo, hi + 1), replace=False))

    def utterance(topic, cue_side, end):
        body = pick(fillers, 1, 3) + cue_side + pick(topics[topic], 2, 4) + pick(fillers, 0, 2)
        return " ".join(body + [end])

    n_planted = int(round(n_pairs * planted_fraction))
    n_shuffled = n_pairs - n_planted
    seen = set()

    def fresh_pair():
        while True:
            t = int(rng.integers(n_topics))
            k = int(rng.integers(n_cues))
            x = utterance(t, cues[k][0], "?")
            y = utterance(t, cues[k][1], ".")
            if (x, y) not in seen:
                seen.add((x, y))
                return x, y, t, k

    planted = [fresh_pair() for _ in range(n_planted)]
    base = [fresh_pair() for _ in range(n_shuffled)]
    # derange responses: a shuffled pair never keeps its own topic or cue
    perm = rng.permutation(n_shuffled)
    for i in range(n_shuffled):
        for _ in range(1000):
            j = perm[i]
            if base[j][2] != base[i][2] and base[j][3] != base[i][3]:
                break
            r = int(rng.integers(n_shuffled))
            perm[i], perm[r] = perm[r], perm[i]
    shuffled = [(base[i][0], base[perm[i]][1]) for i in range(n_shuffled)]
    generic = [" ".join(pick(fillers, 3, 5) + ["."]) for _ in range(n_generic)]
    for i in range(n_shuffled):
        if rng.random() < generic_fraction:
            shuffled[i] = (shuffled[i][0], generic[int(rng.integers(n_generic))])

    rows = [(x, y, True) for x, y, _, _ in planted] + [(x, y, False) for x, y in shuffled]
    order = rng.permutation(len(rows))
    rows = [rows[i] for i in order]

    common = rng.standard_normal(dim)
    common /= np.linalg.norm(common)
    vecs = {}
    for w in fillers:
        vecs[w] = 3.0 * common + 0.5 * rng.standard_normal(dim)
    for words in topics:
        centre = rng.standard_normal(dim)
        for w in words:
            vecs[w] = 3.0 * common + centre + 0.4 * rng.standard_normal(dim)
    for f, e in cues:
        for w in f + e:
            vecs[w] = 3.0 * common + 0.7 * rng.standard_normal(dim)
    for p in ("?", "."):
        vecs[p] = 3.0 * common + 0.5 * rng.standard_normal(dim)

    counts = {w: 0 for w in vecs}
    for x, y, _ in rows:
        for tok in (x + " " + y).split():
            counts[tok] += 1
    # fillers and punctuation behave like very frequent function words
    for w in fillers + ["?", "."]:
        counts[w] *= 50
    return SyntheticCorpus(
        pairs=[(x, y) for x, y, _ in rows],
        planted=[p for _, _, p in rows],
        vectors=WordVectorTable.from_dict(vecs),
        freqs=FrequencyTable.from_counts(counts),
    )


def synthetic_ratings(planted, seed: int = 0, sample: int | None = None) -> dict[int, float]:
    """Mean-of-five style ratings: planted pairs rate high, shuffled low, with noise."""
    rng = np.random.default_rng(seed + 1)
    ids = np.arange(len(planted))
    if sample is not None and sample < len(ids):
        ids = np.sort(rng.choice(ids, size=sample, replace=False))
    out = {}
    for i in ids:
        centre = 4.0 if planted[i] else 2.0
        votes = np.clip(np.rint(rng.normal(centre, 1.0, size=5)), 1, 5)
        out[int(i)] = float(votes.mean())
    return out


TOY_CONFIG = """\
# Toy pipeline: 1,000 synthetic pairs.
paths:
  corpus: corpus.txt
  blank_line_separated: true
  vectors: vectors.vec
  frequencies: freqs.tsv
  ratings: ratings.tsv
  artifacts: artifacts
table:
  min_count: 5
embedder:
  sample_size: 30000
filter:
  method: ours
  keep_ratio: 0.5
"""


def write_dataset(corpus: SyntheticCorpus, directory, ratings: dict | None = None,
                  config_text: str | None = TOY_CONFIG) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "corpus.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(corpus.lines()) + "\n")
    write_word_vectors(corpus.vectors, d / "vectors.vec")
    write_frequencies(corpus.freqs, d / "freqs.tsv")
    with open(d / "labels.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for i, p in enumerate(corpus.planted):
            fh.write(f"{i}\t{int(p)}\n")
    if ratings is not None:
        with open(d / "ratings.tsv", "w", encoding="utf-8", newline="\n") as fh:
            for pid, r in sorted(ratings.items()):
                fh.write(f"{pid}\t{r:.1f}\n")
    if config_text is not None:
        (d / "config.yaml").write_text(config_text, encoding="utf-8")
    return d


def toy_dataset(directory, n_pairs: int = 1000, seed: int = 0) -> Path:
    """Write the bundled 1k-pair toy corpus (text, vectors, freqs, ratings, config)."""
    corpus = planted_corpus(n_pairs=n_pairs, seed=seed, n_topics=10, n_cues=15, generic_fraction=0.3)
    return write_dataset(corpus, directory, synthetic_ratings(corpus.planted, seed, sample=200))


def bundled_toy_dir() -> Path:
    return Path(os.path.dirname(__file__)) / "data" / "toy"

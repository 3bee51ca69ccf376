"""Key phrase pair table.

Phrase pairs are extracted from symmetrized word alignments, counted over
the whole corpus, pruned (rare pairs and pairs whose two sides are the same
phrase), and annotated with normalized PMI.

Spans are ``(f_start, f_end, e_start, e_end)`` with inclusive, 0-based
positions; ``f`` indexes x and ``e`` indexes y.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .aligner import AlignmentMatrix
from .parallel import map_shards

TABLE_MAGIC = "#dialfilter-phrase-table v1"
DEFAULT_MIN_COUNT = 200
DEFAULT_MAX_LEN = 4


def extract_modified(matrix: AlignmentMatrix, max_len: int | None = DEFAULT_MAX_LEN,
                     strict: bool = False) -> set[tuple[int, int, int, int]]:
    """Blocks whose every row and every column carries a link.

    For each x span the y range is the min..max of the y positions linked
    from the span.  The block is kept only when every x position in the span
    is linked and every y position in the range is linked from the span.
    Unaligned y positions are never absorbed.  ``strict`` additionally
    rejects blocks whose y range receives a link from outside the x span.
    """
    nx, ny = matrix.x_len, matrix.y_len
    rows = [[] for _ in range(nx)]
    cols = [[] for _ in range(ny)]
    for i, j in matrix.links:
        rows[i].append(j)
        cols[j].append(i)
    f_limit = max_len if max_len is not None else nx
    e_limit = max_len if max_len is not None else ny
    out = set()
    for fs in range(nx):
        covered = set()
        lo, hi = ny, -1
        for fe in range(fs, min(nx, fs + f_limit)):
            if not rows[fe]:
                # every later span contains this unaligned row too
                break
            for j in rows[fe]:
                covered.add(j)
                lo = min(lo, j)
                hi = max(hi, j)
            if hi - lo + 1 > e_limit:
                break
            if len(covered) != hi - lo + 1:
                continue
            if strict and any(not fs <= i <= fe for j in range(lo, hi + 1) for i in cols[j]):
                continue
            out.add((fs, fe, lo, hi))
    return out


def extract_reference(matrix: AlignmentMatrix, max_len: int | None = None,
                      literal_consistency: bool = False) -> set[tuple[int, int, int, int]]:
    """Classic phrase extraction with expansion over unaligned y boundaries.

    The consistency test rejects a span when a link whose y position falls in
    the span's y range comes from outside the x span.  ``literal_consistency``
    instead applies the test to every link of the pair, as the pseudocode is
    typeset (a link anywhere outside the x span rejects the block).
    """
    nx, ny = matrix.x_len, matrix.y_len
    links = sorted(matrix.links)
    y_aligned = [False] * ny
    for _, j in links:
        y_aligned[j] = True
    out = set()
    for fs in range(nx):
        for fe in range(fs, nx):
            es, ee = ny, -1
            for i, j in links:
                if fs <= i <= fe:
                    es = min(es, j)
                    ee = max(ee, j)
            if ee < 0:
                continue
            bad = False
            for i, j in links:
                if not literal_consistency and not es <= j <= ee:
                    continue
                if i < fs or i > fe:
                    bad = True
                    break
            if bad:
                continue
            s = es
            while True:
                e = ee
                while True:
                    out.add((fs, fe, s, e))
                    e += 1
                    if e >= ny or y_aligned[e]:
                        break
                s -= 1
                if s < 0 or y_aligned[s]:
                    break
    if max_len is not None:
        out = {sp for sp in out if sp[1] - sp[0] < max_len and sp[3] - sp[2] < max_len}
    return out


def _log_ratio(num: int, den: int) -> float:
    """ln(num / den) for positive integers, accurate near 1 and far from it."""
    r = num / den  # correctly rounded for Python ints
    if 0.5 < r < 2.0:
        return math.log1p((num - den) / den)
    return math.log(r)


def npmi(count_fe: int, count_f: int, count_e: int, n: int) -> float:
    """Normalized PMI from instance counts; probabilities are count / n.

    Returns exactly 1.0 when the three counts coincide (including the
    p(f,e) = 1 limit), exactly 0.0 under exact independence, and exactly
    -1.0 when both marginals equal n.
    """
    if not (0 < count_fe <= min(count_f, count_e) and max(count_f, count_e) <= n):
        raise ValueError(f"inconsistent counts: fe={count_fe} f={count_f} e={count_e} N={n}")
    if count_fe == count_f == count_e:
        return 1.0
    if count_f == count_e == n:
        # p(f) = p(e) = 1: pmi = ln p(f,e) = -h exactly
        return -1.0
    pmi = _log_ratio(count_fe * n, count_f * count_e)
    h = _log_ratio(n, count_fe)
    return max(-1.0, min(1.0, pmi / h))


def _trie(ids: dict) -> dict:
    root = {}
    for phrase, k in ids.items():
        node = root
        for pos, tok in enumerate(phrase):
            entry = node.get(tok)
            if entry is None:
                entry = node[tok] = [-1, {}]
            if pos == len(phrase) - 1:
                entry[0] = k
            node = entry[1]
    return root


@dataclass(frozen=True)
class PhraseEntry:
    count: int
    npmi: float


@dataclass(frozen=True, eq=False)
class ScoringIndex:
    """Integer-keyed view of the positive-nPMI entries, for batch scoring.

    ``keys`` holds ``f_id * n_e + e_id`` sorted ascending with matching
    ``values``.  The tries map token -> (phrase id or -1, child trie), so an
    n-gram scan stops as soon as no phrase continues.
    """

    f_ids: dict
    e_ids: dict
    keys: np.ndarray
    values: np.ndarray
    f_trie: dict
    e_trie: dict

    @classmethod
    def build(cls, entries: dict) -> "ScoringIndex":
        pos = [(f, e, ent.npmi) for (f, e), ent in entries.items() if ent.npmi > 0.0]
        f_ids = {f: k for k, f in enumerate(sorted({f for f, _, _ in pos}))}
        e_ids = {e: k for k, e in enumerate(sorted({e for _, e, _ in pos}))}
        n_e = max(len(e_ids), 1)
        keys = np.array([f_ids[f] * n_e + e_ids[e] for f, e, _ in pos], dtype=np.int64)
        values = np.array([v for _, _, v in pos], dtype=np.float64)
        order = np.argsort(keys, kind="stable")
        return cls(f_ids, e_ids, keys[order], values[order], _trie(f_ids), _trie(e_ids))


@dataclass(frozen=True, eq=False)
class PhraseTable:
    """Pruned phrase pairs with counts and nPMI, plus a scoring index."""

    entries: dict
    n: int
    min_count: int = DEFAULT_MIN_COUNT
    max_f_len: int = DEFAULT_MAX_LEN
    max_e_len: int = DEFAULT_MAX_LEN
    lowercase: bool = False
    f_counts: dict = field(default_factory=dict)
    e_counts: dict = field(default_factory=dict)
    index: ScoringIndex = field(default=None, repr=False)

    def __post_init__(self):
        entries = dict(sorted(self.entries.items()))
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "index", ScoringIndex.build(entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key) -> bool:
        return key in self.entries

    def get(self, f, e):
        return self.entries.get((tuple(f), tuple(e)))

    def with_entry(self, f, e, count: int, value: float) -> "PhraseTable":
        entries = dict(self.entries)
        entries[(tuple(f), tuple(e))] = PhraseEntry(count, value)
        return PhraseTable(entries, self.n, self.min_count, self.max_f_len, self.max_e_len,
                           self.lowercase, self.f_counts, self.e_counts)


def span_tokens(pair, span, lowercase: bool = False):
    fs, fe, es, ee = span
    f = pair.x.tokens[fs:fe + 1]
    e = pair.y.tokens[es:ee + 1]
    if lowercase:
        f = tuple(t.lower() for t in f)
        e = tuple(t.lower() for t in e)
    return f, e


def _count_shard(items, max_len, lowercase, strict):
    counts = Counter()
    for pair, mat in items:
        for span in sorted(extract_modified(mat, max_len, strict)):
            counts[span_tokens(pair, span, lowercase)] += 1
    return counts


def count_phrase_pairs(corpus, alignments, max_len: int = DEFAULT_MAX_LEN, lowercase: bool = False,
                       strict: bool = False, threads: int = 1) -> Counter:
    """Instance counts of extracted (f, e) token-sequence pairs, before pruning."""
    items = []
    for pair in corpus:
        mat = alignments[pair.id]
        if (mat.x_len, mat.y_len) != (pair.x.token_count, pair.y.token_count):
            raise ValueError(f"alignment for pair {pair.id} has wrong dimensions")
        items.append((pair, mat))
    total = Counter()
    for shard in map_shards(_count_shard, items, threads, max_len, lowercase, strict):
        total.update(shard)
    return total


def build_table(corpus, alignments, min_count: int = DEFAULT_MIN_COUNT, max_len: int = DEFAULT_MAX_LEN,
                lowercase: bool = False, strict: bool = False, threads: int = 1) -> PhraseTable:
    """Count extracted phrase pairs, prune, and attach nPMI.

    N and the marginals are instance counts over the full extracted stream,
    taken before pruning.  ``alignments`` maps pair id to AlignmentMatrix.
    """
    counts = count_phrase_pairs(corpus, alignments, max_len, lowercase, strict, threads)
    return table_from_counts(counts, min_count, max_len, lowercase)


def table_from_counts(counts, min_count: int = DEFAULT_MIN_COUNT, max_len: int = DEFAULT_MAX_LEN,
                      lowercase: bool = False) -> PhraseTable:
    """Prune an instance-count map ``{(f, e): count}`` and attach nPMI."""
    n = sum(counts.values())
    f_counts, e_counts = Counter(), Counter()
    for (f, e), c in counts.items():
        f_counts[f] += c
        e_counts[e] += c
    entries = {}
    for (f, e), c in counts.items():
        if c < min_count or f == e:
            continue
        entries[(f, e)] = PhraseEntry(c, npmi(c, f_counts[f], e_counts[e], n))
    return PhraseTable(entries, n, min_count, max_len, max_len, lowercase, dict(f_counts), dict(e_counts))


def write_table(table: PhraseTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{TABLE_MAGIC}\tN={table.n}\tmin_count={table.min_count}\tmax_len={table.max_f_len}"
                 f"\tmax_e_len={table.max_e_len}\tlowercase={int(table.lowercase)}\n")
        for (f, e), ent in table.entries.items():
            fh.write(f"{' '.join(f)} ||| {' '.join(e)} ||| {ent.count} ||| {ent.npmi!r}\n")


def read_table(path) -> PhraseTable:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header[0] != TABLE_MAGIC:
            raise ValueError(f"{path}: missing phrase table header")
        meta = dict(h.split("=", 1) for h in header[1:])
        entries = {}
        for n, line in enumerate(fh, 2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ||| ")
            if len(parts) != 4:
                raise ValueError(f"{path}:{n}: expected 'f ||| e ||| count ||| npmi'")
            entries[(tuple(parts[0].split()), tuple(parts[1].split()))] = PhraseEntry(int(parts[2]), float(parts[3]))
    max_len = int(meta["max_len"])
    return PhraseTable(entries, int(meta["N"]), int(meta["min_count"]), max_len,
                       int(meta.get("max_e_len", max_len)), bool(int(meta.get("lowercase", 0))))


def phrase_pairs_from_entries(rows: Iterable[tuple[str, str, int, float]], n: int, **kw) -> PhraseTable:
    """Build a table directly from ``(f, e, count, npmi)`` rows; handy for fixtures."""
    entries = {(tuple(f.split()), tuple(e.split())): PhraseEntry(c, v) for f, e, c, v in rows}
    return PhraseTable(entries, n, **kw)

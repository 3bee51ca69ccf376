"""Connectivity, content relatedness and their calibrated combination.

``s_frame`` sums, over the key phrase pairs found in a pair, the positive
part of their nPMI weighted by how much of each utterance the phrases
cover.  ``s_content`` is the positive part of the cosine between SIF
sentence vectors.  ``s_ours`` adds the two after scaling each by the inverse
of its corpus mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .parallel import map_shards
from .phrase_table import PhraseTable
from .sentvec import SentenceEmbedder, batch_cosine, content_cosine


@dataclass(frozen=True)
class ScoreRecord:
    pair_id: int
    s_frame: float
    s_content: float
    s_ours: float


@dataclass(frozen=True)
class Calibration:
    alpha: float
    beta: float
    n: int

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("calibration weights must be non-negative")


def _ngrams(tokens: Sequence[str], max_n: int) -> list[tuple[str, ...]]:
    """Distinct n-grams (1..max_n) in first-occurrence order."""
    seen = {}
    L = len(tokens)
    for n in range(1, min(max_n, L) + 1):
        for i in range(L - n + 1):
            seen.setdefault(tuple(tokens[i:i + n]), None)
    return list(seen)


def enumerate_phi(x_tokens, y_tokens, max_f_len: int = 4, max_e_len: int = 4) -> set:
    """All (f, e) with f an n-gram of x and e an m-gram of y, as a set."""
    fs = _ngrams(tuple(x_tokens), max_f_len)
    es = _ngrams(tuple(y_tokens), max_e_len)
    return {(f, e) for f in fs for e in es}


def _tokens(u):
    return u.tokens if hasattr(u, "tokens") else tuple(u)


def _table_grams(tokens, max_n: int, trie: dict) -> dict:
    """{phrase id: length} for the distinct n-grams of ``tokens`` in ``trie``."""
    found = {}
    L = len(tokens)
    for i, entry in enumerate(map(trie.get, tokens)):
        if entry is None:
            continue
        k, node = entry
        if k >= 0:
            found[k] = 1
        j = i + 1
        stop = min(i + max_n, L)
        while node and j < stop:
            entry = node.get(tokens[j])
            if entry is None:
                break
            k, node = entry
            j += 1
            if k >= 0:
                found[k] = j - i
    return found


_CHUNK = 4096


def frame_scores(token_pairs: Sequence, table: PhraseTable) -> np.ndarray:
    """s_frame for a batch of ``(x_tokens, y_tokens)``.

    Every (f, e) combination of a pair's table n-grams is looked up in one
    sorted-key search; terms are summed per pair in n-gram order, so a
    pair's score does not depend on the rest of the batch.
    """
    out = np.zeros(len(token_pairs))
    for lo in range(0, len(token_pairs), _CHUNK):
        out[lo:lo + _CHUNK] = _frame_chunk(token_pairs[lo:lo + _CHUNK], table)
    return out


def _frame_chunk(token_pairs, table: PhraseTable) -> np.ndarray:
    idx = table.index
    n_e = max(len(idx.e_ids), 1)
    f_id, f_len, e_id, e_len = [], [], [], []
    nf, ne, lx, ly = [], [], [], []
    for x, y in token_pairs:
        x, y = tuple(x), tuple(y)
        if table.lowercase:
            x = tuple(t.lower() for t in x)
            y = tuple(t.lower() for t in y)
        fg = _table_grams(x, table.max_f_len, idx.f_trie)
        eg = _table_grams(y, table.max_e_len, idx.e_trie) if fg else {}
        if not eg:
            fg = {}
        f_id.extend(fg)
        f_len.extend(fg.values())
        e_id.extend(eg)
        e_len.extend(eg.values())
        nf.append(len(fg))
        ne.append(len(eg))
        lx.append(len(x))
        ly.append(len(y))
    nf = np.asarray(nf, dtype=np.int64)
    ne = np.asarray(ne, dtype=np.int64)
    n_pairs = len(nf)
    combos = nf * ne
    total = int(combos.sum())
    if total == 0 or len(idx.keys) == 0:
        return np.zeros(n_pairs)
    f_start = np.concatenate(([0], np.cumsum(nf)[:-1]))
    e_start = np.concatenate(([0], np.cumsum(ne)[:-1]))
    owner = np.repeat(np.arange(n_pairs), combos)
    local = np.arange(total) - np.repeat(np.cumsum(combos) - combos, combos)
    width = ne[owner]
    fi = f_start[owner] + local // width
    ei = e_start[owner] + local % width
    f_id = np.asarray(f_id, dtype=np.int64)
    e_id = np.asarray(e_id, dtype=np.int64)
    q = f_id[fi] * n_e + e_id[ei]
    pos = np.minimum(np.searchsorted(idx.keys, q), len(idx.keys) - 1)
    hit = idx.keys[pos] == q
    cover = (np.asarray(f_len, dtype=np.float64)[fi] / np.asarray(lx, dtype=np.float64)[owner]
             * (np.asarray(e_len, dtype=np.float64)[ei] / np.asarray(ly, dtype=np.float64)[owner]))
    terms = np.where(hit, idx.values[pos] * cover, 0.0)
    return np.bincount(owner, weights=terms, minlength=n_pairs)


def frame_score(x_tokens, y_tokens, table: PhraseTable) -> float:
    """Connectivity of one token pair (see ``frame_scores``)."""
    return float(frame_scores([(x_tokens, y_tokens)], table)[0])


def s_frame(pair, table: PhraseTable) -> float:
    """Connectivity of ``pair`` (anything with ``.x`` and ``.y`` utterances)."""
    return frame_score(_tokens(pair.x), _tokens(pair.y), table)


def s_content(pair, embedder: SentenceEmbedder) -> float:
    vx = embedder.embed(_tokens(pair.x))
    vy = embedder.embed(_tokens(pair.y))
    return max(content_cosine(vx, vy), 0.0)


def calibrate(records: Iterable) -> Calibration:
    """Inverse-mean weights for the two components.

    ``records`` yields ``(s_frame, s_content)`` tuples or ScoreRecords.
    Means use exactly rounded summation in record order.
    """
    frames, contents = [], []
    for r in records:
        if isinstance(r, ScoreRecord):
            frames.append(r.s_frame)
            contents.append(r.s_content)
        else:
            frames.append(float(r[0]))
            contents.append(float(r[1]))
    if not frames:
        raise ValueError("cannot calibrate on zero records")
    n = len(frames)
    mean_f = math.fsum(frames) / n
    mean_c = math.fsum(contents) / n
    if not mean_f > 0 or not mean_c > 0:
        raise ValueError(
            "degenerate calibration component: mean s_frame=%r, mean s_content=%r "
            "(corpus too small or phrase table empty?)" % (mean_f, mean_c))
    return Calibration(1.0 / mean_f, 1.0 / mean_c, n)


def s_ours(record, calibration: Calibration) -> float:
    if isinstance(record, ScoreRecord):
        f, c = record.s_frame, record.s_content
    else:
        f, c = record
    return calibration.alpha * f + calibration.beta * c


def _frame_shard(pairs, table):
    return frame_scores([(p.x.tokens, p.y.tokens) for p in pairs], table).tolist()


def _content_shard(pairs, embedder):
    xs = embedder.embed_many([p.x.tokens for p in pairs])
    ys = embedder.embed_many([p.y.tokens for p in pairs])
    return np.maximum(batch_cosine(xs, ys), 0.0).tolist()


def component_scores(corpus, table: PhraseTable, embedder: SentenceEmbedder,
                     threads: int = 1) -> list[tuple[int, float, float]]:
    """(pair_id, s_frame, s_content) for every pair, in corpus order."""
    pairs = list(corpus)
    frames = [v for shard in map_shards(_frame_shard, pairs, threads, shared=(table,)) for v in shard]
    contents = [v for shard in map_shards(_content_shard, pairs, threads, shared=(embedder,)) for v in shard]
    return [(p.id, f, c) for p, f, c in zip(pairs, frames, contents)]


def score_corpus(corpus, table: PhraseTable, embedder: SentenceEmbedder,
                 calibration: Calibration | None = None, threads: int = 1):
    """Score every pair; calibrate on this set unless a calibration is supplied.

    Returns ``(records, calibration)``.
    """
    comps = component_scores(corpus, table, embedder, threads)
    if calibration is None:
        calibration = calibrate([(f, c) for _, f, c in comps])
    records = [ScoreRecord(pid, f, c, s_ours((f, c), calibration)) for pid, f, c in comps]
    return records, calibration


def format_breakdown(record: ScoreRecord, calibration: Calibration, digits: int = 2) -> str:
    """``alpha*s_frame + beta*s_content = s_ours`` with normalized components."""
    f = calibration.alpha * record.s_frame
    c = calibration.beta * record.s_content
    return f"{f:.{digits}f} + {c:.{digits}f} = {record.s_ours:.{digits}f}"


# --- file format -----------------------------------------------------------

def write_scores(records: Sequence[ScoreRecord], calibration: Calibration, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# alpha={calibration.alpha!r}\tbeta={calibration.beta!r}\tn={calibration.n}\n")
        for r in records:
            fh.write(f"{r.pair_id}\t{r.s_frame:.6f}\t{r.s_content:.6f}\t{r.s_ours:.6f}\n")


def read_scores(path) -> tuple[list[ScoreRecord], Calibration]:
    records = []
    calibration = None
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                meta = dict(kv.split("=", 1) for kv in line[1:].strip().split("\t"))
                calibration = Calibration(float(meta["alpha"]), float(meta["beta"]), int(meta["n"]))
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{n}: expected pair_id<TAB>s_frame<TAB>s_content<TAB>s_ours")
            records.append(ScoreRecord(int(parts[0]), float(parts[1]), float(parts[2]), float(parts[3])))
    if calibration is None:
        raise ValueError(f"{path}: missing calibration header")
    return records, calibration

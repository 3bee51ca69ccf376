"""Word alignment for utterance pairs.

A lexical translation model with a fixed null-alignment probability and an
optional diagonal-favouring prior (the reparameterization popularised by
fast_align) is trained by EM.  Viterbi alignments from the forward (x->y)
and reverse (y->x) models are combined with grow-diag-final(-and).

All per-cell work is vectorized: a corpus is flattened into one array of
(target position, candidate source) cells, with the NULL candidate first
in every target group.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .parallel import shard_bounds

NULL_TOKEN = "\x00NULL"
FORWARD, REVERSE = "forward", "reverse"
HEURISTICS = ("grow-diag", "grow-diag-final", "grow-diag-final-and")
MODEL_MAGIC = "#dialfilter-alignment-model v1"


class Vocabulary:
    """Dense token <-> id map; id 0 is always the NULL token."""

    def __init__(self, tokens: Iterable[str] = ()):
        self._tokens = [NULL_TOKEN]
        self._index = {NULL_TOKEN: 0}
        for tok in tokens:
            self.add(tok)

    def add(self, tok: str) -> int:
        idx = self._index.get(tok)
        if idx is None:
            idx = len(self._tokens)
            self._index[tok] = idx
            self._tokens.append(tok)
        return idx

    def get(self, tok: str, default: int = -1) -> int:
        return self._index.get(tok, default)

    def token(self, idx: int) -> str:
        return self._tokens[idx]

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        return np.fromiter((self._index.get(t, -1) for t in tokens), dtype=np.int64, count=len(tokens))

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, tok) -> bool:
        return tok in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens


@dataclass(frozen=True)
class AlignmentMatrix:
    x_len: int
    y_len: int
    links: frozenset = frozenset()

    def __post_init__(self):
        links = frozenset((int(i), int(j)) for i, j in self.links)
        object.__setattr__(self, "links", links)
        if self.x_len < 0 or self.y_len < 0:
            raise ValueError("negative matrix dimension")
        for i, j in links:
            if not (0 <= i < self.x_len and 0 <= j < self.y_len):
                raise ValueError(f"link ({i},{j}) outside {self.x_len}x{self.y_len} matrix")

    def transpose(self) -> "AlignmentMatrix":
        return AlignmentMatrix(self.y_len, self.x_len, frozenset((j, i) for i, j in self.links))

    def pharaoh(self) -> str:
        return " ".join(f"{i}-{j}" for i, j in sorted(self.links))


@dataclass(frozen=True)
class AlignConfig:
    iterations: int = 5
    null_prob: float = 0.5
    tension: float = 4.0
    favor_diagonal: bool = True
    lowercase: bool = False


@dataclass(frozen=True, eq=False)
class AlignmentModel:
    """Trained translation table t(target | source) for one direction.

    ``keys`` holds ``src_id * len(tgt_vocab) + tgt_id`` sorted ascending,
    ``probs`` the matching probabilities.  Source id 0 is the NULL row.
    """

    src_vocab: Vocabulary
    tgt_vocab: Vocabulary
    keys: np.ndarray
    probs: np.ndarray
    null_prob: float
    tension: float
    direction: str = FORWARD
    favor_diagonal: bool = True
    lowercase: bool = False
    log_likelihoods: tuple = field(default=())

    def lookup(self, src_ids: np.ndarray, tgt_ids: np.ndarray) -> np.ndarray:
        """Vectorized t(tgt|src); unknown ids or unseen combinations give 0."""
        src_ids = np.asarray(src_ids, dtype=np.int64)
        tgt_ids = np.asarray(tgt_ids, dtype=np.int64)
        out = np.zeros(src_ids.shape, dtype=np.float64)
        ok = (src_ids >= 0) & (tgt_ids >= 0)
        if not ok.any() or len(self.keys) == 0:
            return out
        q = src_ids[ok] * len(self.tgt_vocab) + tgt_ids[ok]
        pos = np.searchsorted(self.keys, q)
        pos_c = np.minimum(pos, len(self.keys) - 1)
        hit = self.keys[pos_c] == q
        vals = np.where(hit, self.probs[pos_c], 0.0)
        out[ok] = vals
        return out

    def prob(self, src_tok: str | None, tgt_tok: str) -> float:
        """t(tgt_tok | src_tok); ``None`` selects the NULL row."""
        s = 0 if src_tok is None else self.src_vocab.get(self._fold(src_tok))
        t = self.tgt_vocab.get(self._fold(tgt_tok))
        return float(self.lookup(np.array([s]), np.array([t]))[0])

    def row(self, src_tok: str | None) -> dict[str, float]:
        s = 0 if src_tok is None else self.src_vocab.get(self._fold(src_tok))
        if s < 0:
            return {}
        v = len(self.tgt_vocab)
        lo, hi = np.searchsorted(self.keys, [s * v, (s + 1) * v])
        return {self.tgt_vocab.token(int(k % v)): float(p)
                for k, p in zip(self.keys[lo:hi], self.probs[lo:hi])}

    def row_sums(self) -> np.ndarray:
        src = self.keys // len(self.tgt_vocab)
        return np.bincount(src, weights=self.probs, minlength=len(self.src_vocab))

    def _fold(self, tok: str) -> str:
        return tok.lower() if self.lowercase else tok


# --- prior -----------------------------------------------------------------

def alignment_prior(n: int, m: int, null_prob: float, tension: float,
                    favor_diagonal: bool = True) -> np.ndarray:
    """(m, n+1) matrix of p(a_j = i); column 0 is NULL.

    Non-null columns follow exp(-tension * |i/n - j/m|) (1-based i, j),
    normalized per target position and scaled by ``1 - null_prob``.
    """
    if n == 0:
        out = np.zeros((m, 1))
        out[:, 0] = 1.0
        return out
    if favor_diagonal and tension > 0:
        i = np.arange(1, n + 1) / n
        j = np.arange(1, m + 1)[:, None] / m
        w = np.exp(-tension * np.abs(i[None, :] - j))
        w /= w.sum(axis=1, keepdims=True)
    else:
        w = np.full((m, n), 1.0 / n)
    out = np.empty((m, n + 1))
    out[:, 0] = null_prob
    out[:, 1:] = (1.0 - null_prob) * w
    return out


class _Cells:
    """Flattened (target position x candidate source) cells for a list of pairs."""

    def __init__(self, src_seqs, tgt_seqs, null_prob, tension, favor_diagonal):
        prior_cache = {}
        src_parts, tgt_parts, prior_parts, sizes = [], [], [], []
        for s, t in zip(src_seqs, tgt_seqs):
            n, m = len(s), len(t)
            if m == 0:
                continue
            key = (n, m)
            pr = prior_cache.get(key)
            if pr is None:
                pr = alignment_prior(n, m, null_prob, tension, favor_diagonal).ravel()
                prior_cache[key] = pr
            cand = np.concatenate(([0], s))
            src_parts.append(np.tile(cand, m))
            tgt_parts.append(np.repeat(t, n + 1))
            prior_parts.append(pr)
            sizes.append(np.full(m, n + 1, dtype=np.int64))
        if src_parts:
            self.src = np.concatenate(src_parts)
            self.tgt = np.concatenate(tgt_parts)
            self.prior = np.concatenate(prior_parts)
            self.group_size = np.concatenate(sizes)
        else:
            self.src = np.zeros(0, dtype=np.int64)
            self.tgt = np.zeros(0, dtype=np.int64)
            self.prior = np.zeros(0)
            self.group_size = np.zeros(0, dtype=np.int64)
        self.group_start = np.concatenate(([0], np.cumsum(self.group_size)[:-1])).astype(np.int64)
        self.group = np.repeat(np.arange(len(self.group_size)), self.group_size)


def _orient(corpus, direction: str, lowercase: bool):
    xs, ys = [], []
    for p in corpus:
        x, y = p.x.tokens, p.y.tokens
        if lowercase:
            x = tuple(t.lower() for t in x)
            y = tuple(t.lower() for t in y)
        xs.append(x)
        ys.append(y)
    if direction == FORWARD:
        return xs, ys
    if direction == REVERSE:
        return ys, xs
    raise ValueError(f"unknown direction {direction!r}")


def train_alignment(corpus, direction: str = FORWARD, config: AlignConfig | None = None,
                    threads: int = 1, **overrides) -> AlignmentModel:
    """EM-train t(target|source) with a fixed null probability.

    Every row of t is initialized uniform over the target vocabulary.  The
    E-step runs per shard (one shard per thread); expected counts are merged
    in shard order, so results are bit-stable for a fixed thread count.
    """
    config = config or AlignConfig()
    if overrides:
        config = AlignConfig(**{**config.__dict__, **overrides})
    if config.iterations < 1:
        raise ValueError("iterations must be >= 1")
    if not 0.0 <= config.null_prob < 1.0:
        raise ValueError("null_prob out of [0,1)")
    if config.tension < 0:
        raise ValueError("tension must be non-negative")
    pairs = list(corpus)
    if not pairs:
        raise ValueError("empty training corpus")

    src_toks, tgt_toks = _orient(pairs, direction, config.lowercase)
    src_vocab, tgt_vocab = Vocabulary(), Vocabulary()
    src_seqs = [np.array([src_vocab.add(t) for t in s], dtype=np.int64) for s in src_toks]
    tgt_seqs = [np.array([tgt_vocab.add(t) for t in s], dtype=np.int64) for s in tgt_toks]
    vt = len(tgt_vocab)

    shards = []
    for lo, hi in shard_bounds(len(pairs), threads):
        shards.append(_Cells(src_seqs[lo:hi], tgt_seqs[lo:hi], config.null_prob,
                             config.tension, config.favor_diagonal))
    all_keys = np.concatenate([c.src * vt + c.tgt for c in shards])
    keys = np.unique(all_keys)
    inverses = [np.searchsorted(keys, c.src * vt + c.tgt) for c in shards]
    key_src = keys // vt
    n_real_targets = max(vt - 1, 1)
    t = np.full(len(keys), 1.0 / n_real_targets)

    def e_step(k):
        c, inv = shards[k], inverses[k]
        w = c.prior * t[inv]
        denom = np.add.reduceat(w, c.group_start) if len(w) else np.zeros(0)
        with np.errstate(divide="ignore"):
            ll = float(np.sum(np.log(denom)))
        safe = np.where(denom > 0, denom, 1.0)
        post = w / safe[c.group]
        return np.bincount(inv, weights=post, minlength=len(keys)), ll

    log_likelihoods = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for it in range(config.iterations + 1):
            results = list(pool.map(e_step, range(len(shards)))) if pool else [e_step(k) for k in range(len(shards))]
            log_likelihoods.append(math.fsum(r[1] for r in results))
            if it == config.iterations:
                break
            counts = results[0][0].copy()
            for r in results[1:]:
                counts += r[0]
            totals = np.bincount(key_src, weights=counts, minlength=len(src_vocab))
            # a row with no expected counts (the NULL row when p0 = 0) keeps its values
            tot = totals[key_src]
            t = np.where(tot > 0, counts / np.where(tot > 0, tot, 1.0), t)
    finally:
        if pool:
            pool.shutdown()

    return AlignmentModel(src_vocab, tgt_vocab, keys, t, config.null_prob, config.tension,
                          direction, config.favor_diagonal, config.lowercase, tuple(log_likelihoods))


def corpus_log_likelihood(model: AlignmentModel, corpus) -> float:
    src_toks, tgt_toks = _orient(list(corpus), model.direction, model.lowercase)
    cells = _Cells([model.src_vocab.encode(s) for s in src_toks],
                   [model.tgt_vocab.encode(s) for s in tgt_toks],
                   model.null_prob, model.tension, model.favor_diagonal)
    if len(cells.prior) == 0:
        return 0.0
    w = cells.prior * model.lookup(cells.src, cells.tgt)
    denom = np.add.reduceat(w, cells.group_start)
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(denom)))


def align_corpus(model: AlignmentModel, corpus) -> list[AlignmentMatrix]:
    """Viterbi alignment of every pair, returned in (x position, y position) orientation.

    Each target position picks the argmax over NULL and the source positions;
    NULL is considered first and ties go to the earliest candidate, so a link
    needs a strictly better score than NULL.
    """
    pairs = list(corpus)
    src_toks, tgt_toks = _orient(pairs, model.direction, model.lowercase)
    src_seqs = [model.src_vocab.encode(s) for s in src_toks]
    tgt_seqs = [model.tgt_vocab.encode(s) for s in tgt_toks]
    cells = _Cells(src_seqs, tgt_seqs,
                   model.null_prob, model.tension, model.favor_diagonal)
    out = []
    if len(cells.prior):
        score = cells.prior * model.lookup(cells.src, cells.tgt)
        best = np.maximum.reduceat(score, cells.group_start)
        local = np.arange(len(score)) - cells.group_start[cells.group]
        is_best = score == best[cells.group]
        choice = np.minimum.reduceat(np.where(is_best, local, np.iinfo(np.int64).max), cells.group_start)
    else:
        choice = np.zeros(0, dtype=np.int64)
    g = 0
    for s, t, p in zip(src_seqs, tgt_seqs, pairs):
        m = len(t)
        picks = choice[g:g + m]
        g += m
        links = [(int(c) - 1, j) for j, c in enumerate(picks) if c > 0]
        if model.direction == FORWARD:
            out.append(AlignmentMatrix(len(s), m, frozenset(links)))
        else:
            out.append(AlignmentMatrix(m, len(s), frozenset((j, i) for i, j in links)))
    return out


def viterbi_align(model: AlignmentModel, pair) -> AlignmentMatrix:
    return align_corpus(model, [pair])[0]


# --- symmetrization ---------------------------------------------------------

_NEIGHBORS = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


def symmetrize(forward: AlignmentMatrix, reverse: AlignmentMatrix,
               heuristic: str = "grow-diag-final-and") -> AlignmentMatrix:
    """Combine two same-orientation alignments with grow-diag[-final[-and]]."""
    if heuristic not in HEURISTICS:
        raise ValueError(f"unknown heuristic {heuristic!r}")
    if (forward.x_len, forward.y_len) != (reverse.x_len, reverse.y_len):
        raise ValueError(
            f"dimension mismatch: {forward.x_len}x{forward.y_len} vs {reverse.x_len}x{reverse.y_len}")
    nx, ny = forward.x_len, forward.y_len
    union = forward.links | reverse.links
    alignment = set(forward.links & reverse.links)
    row = [False] * nx
    col = [False] * ny
    for i, j in alignment:
        row[i] = col[j] = True

    def add(i, j):
        alignment.add((i, j))
        row[i] = col[j] = True

    grown = True
    while grown:
        grown = False
        for i in range(nx):
            for j in range(ny):
                if (i, j) not in alignment:
                    continue
                for di, dj in _NEIGHBORS:
                    p = (i + di, j + dj)
                    if p in union and p not in alignment and (not row[p[0]] or not col[p[1]]):
                        add(*p)
                        grown = True

    if heuristic != "grow-diag":
        both = heuristic == "grow-diag-final-and"
        for source in (forward.links, reverse.links):
            for i, j in sorted(source):
                if (i, j) in alignment:
                    continue
                if (both and not row[i] and not col[j]) or (not both and (not row[i] or not col[j])):
                    add(i, j)
    return AlignmentMatrix(nx, ny, frozenset(alignment))


def align_and_symmetrize(corpus, config: AlignConfig | None = None, heuristic: str = "grow-diag-final-and",
                         threads: int = 1):
    """Train both directions and return (forward model, reverse model, symmetrized matrices)."""
    fwd = train_alignment(corpus, FORWARD, config, threads=threads)
    rev = train_alignment(corpus, REVERSE, config, threads=threads)
    mats = [symmetrize(a, b, heuristic) for a, b in zip(align_corpus(fwd, corpus), align_corpus(rev, corpus))]
    return fwd, rev, mats


# --- file formats -------------------------------------------------------------

def write_alignments(path, items: Iterable[tuple[int, AlignmentMatrix]]) -> None:
    """Pharaoh dump: ``id<TAB>i-j i-j ...`` with links sorted."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pair_id, mat in items:
            fh.write(f"{pair_id}\t{mat.pharaoh()}\n")


def read_alignments(path, corpus) -> dict[int, AlignmentMatrix]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            pid, _, rest = line.partition("\t")
            pair = corpus[int(pid)]
            links = []
            for tok in rest.split():
                i, _, j = tok.partition("-")
                links.append((int(i), int(j)))
            try:
                out[int(pid)] = AlignmentMatrix(pair.x.token_count, pair.y.token_count, frozenset(links))
            except ValueError as exc:
                raise ValueError(f"{path}:{n}: {exc}") from None
    return out


def save_model(model: AlignmentModel, path) -> None:
    vt = len(model.tgt_vocab)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(MODEL_MAGIC + "\n")
        fh.write(f"direction\t{model.direction}\n")
        fh.write(f"null_prob\t{model.null_prob!r}\n")
        fh.write(f"tension\t{model.tension!r}\n")
        fh.write(f"favor_diagonal\t{int(model.favor_diagonal)}\n")
        fh.write(f"lowercase\t{int(model.lowercase)}\n")
        fh.write("log_likelihoods\t" + " ".join(repr(v) for v in model.log_likelihoods) + "\n")
        for name, vocab in (("src_vocab", model.src_vocab), ("tgt_vocab", model.tgt_vocab)):
            fh.write(f"{name}\t{len(vocab) - 1}\n")
            for tok in vocab.tokens[1:]:
                fh.write(tok + "\n")
        fh.write(f"entries\t{len(model.keys)}\n")
        for k, p in zip(model.keys.tolist(), model.probs.tolist()):
            fh.write(f"{k // vt}\t{k % vt}\t{p!r}\n")


def load_model(path) -> AlignmentModel:
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or lines[0] != MODEL_MAGIC:
        raise ValueError(f"{path}: not an alignment model file")
    pos = 1
    meta = {}
    for _ in range(6):
        key, _, val = lines[pos].partition("\t")
        meta[key] = val
        pos += 1
    vocabs = []
    for _ in range(2):
        _, _, size = lines[pos].partition("\t")
        pos += 1
        size = int(size)
        vocabs.append(Vocabulary(lines[pos:pos + size]))
        pos += size
    _, _, count = lines[pos].partition("\t")
    pos += 1
    vt = len(vocabs[1])
    keys, probs = [], []
    for line in lines[pos:pos + int(count)]:
        s, t, p = line.split("\t")
        keys.append(int(s) * vt + int(t))
        probs.append(float(p))
    lls = tuple(float(v) for v in meta["log_likelihoods"].split())
    return AlignmentModel(vocabs[0], vocabs[1], np.array(keys, dtype=np.int64), np.array(probs),
                          float(meta["null_prob"]), float(meta["tension"]), meta["direction"],
                          bool(int(meta["favor_diagonal"])), bool(int(meta["lowercase"])), lls)

"""SIF sentence vectors with first-common-component removal.

A sentence vector is the average, over in-vocabulary words, of
``a / (a + p(w)) * vec(w)``.  After a common direction ``u`` has been fitted
on a sample of sentence vectors, every vector has its projection on ``u``
removed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import sparse

log = logging.getLogger(__name__)

DEFAULT_A = 1e-3


@dataclass(frozen=True, eq=False)
class WordVectorTable:
    words: tuple[str, ...]
    matrix: np.ndarray
    index: dict

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word) -> bool:
        return word in self.index

    def vector(self, word: str) -> np.ndarray:
        return self.matrix[self.index[word]]

    @classmethod
    def from_dict(cls, vectors: dict) -> "WordVectorTable":
        words = tuple(vectors)
        mat = np.array([np.asarray(vectors[w], dtype=np.float64) for w in words], dtype=np.float64)
        if mat.ndim != 2:
            raise ValueError("word vectors must share one dimension")
        return cls(words, mat, {w: i for i, w in enumerate(words)})


def load_word_vectors(path) -> WordVectorTable:
    """Read a fastText-style ``.vec`` file (header ``vocab_size dim``)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}:1: expected header 'vocab_size dim'")
        declared, dim = int(header[0]), int(header[1])
        if dim <= 0:
            raise ValueError(f"{path}:1: dimension must be positive")
        index = {}
        rows = []
        for n, line in enumerate(fh, 2):
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if len(parts) == 1 and not parts[0]:
                continue
            if len(parts) != dim + 1:
                raise ValueError(f"{path}:{n}: expected {dim} values, got {len(parts) - 1}")
            try:
                vec = [float(v) for v in parts[1:]]
            except ValueError:
                raise ValueError(f"{path}:{n}: non-numeric vector component") from None
            word = parts[0]
            if word in index:
                log.warning("%s:%d: duplicate word %r, keeping the last occurrence", path, n, word)
                rows[index[word]] = vec
            else:
                index[word] = len(rows)
                rows.append(vec)
    if declared != len(rows):
        log.warning("%s: header declares %d words, read %d", path, declared, len(rows))
    mat = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return WordVectorTable(tuple(index), mat, index)


def write_word_vectors(table: WordVectorTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(table)} {table.dim}\n")
        for w, row in zip(table.words, table.matrix):
            fh.write(w + " " + " ".join(repr(float(v)) for v in row) + "\n")


@dataclass(frozen=True)
class FrequencyTable:
    counts: dict
    total: int

    def __post_init__(self):
        if self.total <= 0:
            raise ValueError("frequency table needs a positive total count")

    @property
    def floor(self) -> float:
        """Probability assigned to words absent from the table."""
        return 1.0 / (self.total + len(self.counts))

    def prob(self, word: str) -> float:
        c = self.counts.get(word)
        return c / self.total if c else self.floor

    @classmethod
    def from_counts(cls, counts: dict) -> "FrequencyTable":
        counts = {w: int(c) for w, c in counts.items() if int(c) > 0}
        return cls(counts, sum(counts.values()))


def load_frequencies(path) -> FrequencyTable:
    """``word<TAB>count`` lines; probabilities are count / total."""
    counts = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            word, sep, count = line.rpartition("\t")
            if not sep:
                raise ValueError(f"{path}:{n}: expected word<TAB>count")
            c = int(count)
            if c < 0:
                raise ValueError(f"{path}:{n}: negative count")
            counts[word] = counts.get(word, 0) + c
    return FrequencyTable.from_counts(counts)


def write_frequencies(freqs: FrequencyTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for w, c in freqs.counts.items():
            fh.write(f"{w}\t{c}\n")


def _sign_fix(u: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(u)
    if len(nz) and u[nz[0]] < 0:
        u = -u
    return u


def fit_common_component(sample, method: str = "power", seed: int = 0, tol: float = 1e-10,
                         max_iter: int = 100_000) -> np.ndarray:
    """First right singular vector of the sample matrix (rows are sentence vectors).

    The sign is fixed so the first nonzero coordinate is positive.  ``power``
    iterates on the Gram matrix from a seeded start; ``svd`` uses a dense SVD.
    """
    x = np.asarray(sample, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("common component needs a non-empty 2-D sample")
    if not np.any(x):
        raise ValueError("common component undefined for an all-zero sample")
    if method == "svd":
        _, _, vt = np.linalg.svd(x, full_matrices=False)
        return _sign_fix(vt[0] / np.linalg.norm(vt[0]))
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    gram = x.T @ x
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(gram.shape[0])
    u /= np.linalg.norm(u)
    for _ in range(max_iter):
        w = gram @ u
        norm = np.linalg.norm(w)
        if norm == 0.0:
            # start vector orthogonal to the row space
            u = rng.standard_normal(gram.shape[0])
            u /= np.linalg.norm(u)
            continue
        w /= norm
        if np.linalg.norm(w - u) < tol:
            u = w
            break
        u = w
    return _sign_fix(u / np.linalg.norm(u))


def content_cosine(x_vec, y_vec) -> float:
    """Cosine similarity; 0 when either vector is zero."""
    x = np.asarray(x_vec, dtype=np.float64)
    y = np.asarray(y_vec, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        return 0.0
    return float(max(-1.0, min(1.0, np.dot(x, y) / (nx * ny))))


def batch_cosine(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    nx = np.linalg.norm(xs, axis=1)
    ny = np.linalg.norm(ys, axis=1)
    den = nx * ny
    dots = np.einsum("ij,ij->i", xs, ys)
    out = np.divide(dots, den, out=np.zeros_like(dots), where=den > 0)
    return np.clip(out, -1.0, 1.0)


@dataclass(frozen=True, eq=False)
class SentenceEmbedder:
    vectors: WordVectorTable
    freqs: FrequencyTable
    a: float = DEFAULT_A
    component: np.ndarray | None = None
    lowercase: bool = False

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("SIF parameter a must be positive")
        if self.component is not None:
            u = np.asarray(self.component, dtype=np.float64)
            if u.shape != (self.vectors.dim,):
                raise ValueError("common component dimension does not match word vectors")
            if abs(np.linalg.norm(u) - 1.0) > 1e-9:
                raise ValueError("common component must be a unit vector")
            object.__setattr__(self, "component", u)
        probs = np.array([self.freqs.prob(w) for w in self.vectors.words], dtype=np.float64)
        weights = self.a / (self.a + probs)
        object.__setattr__(self, "_weighted", self.vectors.matrix * weights[:, None])

    def _ids(self, tokens: Sequence[str]) -> list[int]:
        index = self.vectors.index
        if self.lowercase:
            tokens = [t.lower() for t in tokens]
        return [index[t] for t in tokens if t in index]

    def embed_raw(self, tokens: Sequence[str]) -> np.ndarray:
        """SIF average without component removal; zero vector when no word is known."""
        ids = self._ids(tokens)
        if not ids:
            return np.zeros(self.vectors.dim)
        return self._weighted[ids].sum(axis=0) / len(ids)

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        return self._remove(self.embed_raw(tokens))

    def embed_many(self, sentences: Sequence[Sequence[str]], remove_component: bool = True) -> np.ndarray:
        """Row-wise ``embed`` for a batch, as one sparse (sentence x word) product."""
        ids, indptr = [], [0]
        for s in sentences:
            ids.extend(self._ids(s))
            indptr.append(len(ids))
        counts = np.diff(indptr)
        scale = np.repeat(1.0 / np.maximum(counts, 1), counts)
        avg = sparse.csr_matrix((scale, np.asarray(ids, dtype=np.int64), indptr),
                                shape=(len(sentences), len(self.vectors)))
        out = np.asarray(avg @ self._weighted)
        if remove_component and self.component is not None:
            out -= np.outer(out @ self.component, self.component)
        return out

    def _remove(self, v: np.ndarray) -> np.ndarray:
        if self.component is None:
            return v
        u = self.component
        return v - np.dot(u, v) * u

    def fit(self, sentences: Sequence[Sequence[str]], sample_size: int | None = 30_000, seed: int = 0,
            method: str = "power") -> "SentenceEmbedder":
        """Return a copy with the common component fitted on a seeded sample.

        ``sample_size=None`` uses every sentence.
        """
        sentences = list(sentences)
        if not sentences:
            raise ValueError("cannot fit a common component on zero sentences")
        if sample_size is not None and len(sentences) > sample_size:
            rng = np.random.default_rng(seed)
            pick = np.sort(rng.choice(len(sentences), size=sample_size, replace=False))
            sentences = [sentences[i] for i in pick]
        raw = self.embed_many(sentences, remove_component=False)
        u = fit_common_component(raw, method=method, seed=seed)
        return replace(self, component=u)


def sif_embed(tokens: Sequence[str], embedder: SentenceEmbedder) -> np.ndarray:
    return embedder.embed(tokens)


def write_component(u, path) -> None:
    u = np.asarray(u, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(u)}\n")
        for v in u.tolist():
            fh.write(f"{v!r}\n")


def read_component(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    d = int(lines[0])
    if len(lines) - 1 != d:
        raise ValueError(f"{path}: declared dimension {d}, found {len(lines) - 1} values")
    u = np.array([float(v) for v in lines[1:]])
    if not math.isclose(float(np.linalg.norm(u)), 1.0, abs_tol=1e-9):
        raise ValueError(f"{path}: component is not a unit vector")
    return u

"""Dialogue corpus ingestion: consecutive-line pairing, tokenization, rule filters.

Raw subtitle-style text is grouped into works; every two consecutive lines
of a work become an utterance/response candidate.  Candidates are then
length-filtered, parrot-back pairs are dropped, and exact duplicates are
removed before sequential ids are assigned.
"""

from __future__ import annotations

import itertools
import os
import unicodedata
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, NamedTuple, Sequence

Tokenizer = Callable[[str], list]

MIN_TOKENS = 3
MAX_TOKENS = 25


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    """Whitespace split, then peel leading/trailing punctuation into single-char tokens.

    >>> tokenize("Hello, world!")
    ['Hello', ',', 'world', '!']
    """
    tokens = []
    for chunk in text.split():
        lead = []
        start, end = 0, len(chunk)
        while start < end and _is_punct(chunk[start]):
            lead.append(chunk[start])
            start += 1
        trail = []
        while end > start and _is_punct(chunk[end - 1]):
            trail.append(chunk[end - 1])
            end -= 1
        tokens.extend(lead)
        if start < end:
            tokens.append(chunk[start:end])
        tokens.extend(reversed(trail))
    return tokens


def normalize_line(text: str) -> str:
    return " ".join(text.split())


@dataclass(frozen=True)
class Utterance:
    raw: str
    tokens: tuple[str, ...]

    @property
    def token_count(self) -> int:
        return len(self.tokens)

    @classmethod
    def from_text(cls, text: str, tokenizer: Tokenizer = tokenize) -> "Utterance":
        raw = normalize_line(text)
        return cls(raw, tuple(tokenizer(raw)))

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class UtterancePair:
    id: int
    x: Utterance
    y: Utterance
    work_id: str = ""
    line_index: int = -1


class RawPair(NamedTuple):
    work_id: str
    line_index: int
    x: str
    y: str


@dataclass(frozen=True)
class CorpusStats:
    pairs: int
    x_tokens: int
    y_tokens: int


@dataclass(frozen=True)
class Corpus:
    pairs: tuple[UtterancePair, ...]
    _by_id: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        object.__setattr__(self, "_by_id", {p.id: p for p in self.pairs})
        if len(self._by_id) != len(self.pairs):
            raise ValueError("duplicate pair ids in corpus")

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[UtterancePair]:
        return iter(self.pairs)

    def __getitem__(self, pair_id: int) -> UtterancePair:
        return self._by_id[pair_id]

    def __contains__(self, pair_id) -> bool:
        return pair_id in self._by_id

    @property
    def ids(self) -> list[int]:
        return [p.id for p in self.pairs]

    @property
    def stats(self) -> CorpusStats:
        return CorpusStats(
            pairs=len(self.pairs),
            x_tokens=sum(p.x.token_count for p in self.pairs),
            y_tokens=sum(p.y.token_count for p in self.pairs),
        )

    def sentences(self) -> list[tuple[str, ...]]:
        """All utterances (x then y per pair) as token tuples, in corpus order."""
        out = []
        for p in self.pairs:
            out.append(p.x.tokens)
            out.append(p.y.tokens)
        return out


def pair_consecutive_lines(lines: Iterable) -> list[RawPair]:
    """Pair each line with the next line of the same work.

    ``lines`` yields ``(work_id, text)`` or ``(work_id, line_index, text)``;
    consecutive items sharing a work_id form one work.  Pairs never cross a
    work boundary.
    """
    indexed = []
    for n, item in enumerate(lines):
        if len(item) == 2:
            indexed.append((item[0], n, item[1]))
        else:
            indexed.append(tuple(item))
    out = []
    for work_id, group in itertools.groupby(indexed, key=lambda t: t[0]):
        group = list(group)
        for (_, idx, a), (_, _, b) in zip(group, group[1:]):
            out.append(RawPair(work_id, idx, a, b))
    return out


def tokenize_pairs(raw_pairs: Iterable[RawPair], tokenizer: Tokenizer = tokenize) -> list[UtterancePair]:
    return [
        UtterancePair(-1, Utterance.from_text(r.x, tokenizer), Utterance.from_text(r.y, tokenizer),
                      r.work_id, r.line_index)
        for r in raw_pairs
    ]


def apply_rule_filters(candidates: Iterable[UtterancePair], min_tokens: int = MIN_TOKENS,
                       max_tokens: int = MAX_TOKENS) -> Corpus:
    """Length bound on both sides, parrot-back removal, first-occurrence dedup.

    Survivors keep input order and receive ids 0..n-1.
    """
    seen = set()
    kept = []
    for c in candidates:
        if not (min_tokens <= c.x.token_count <= max_tokens):
            continue
        if not (min_tokens <= c.y.token_count <= max_tokens):
            continue
        if c.x.raw == c.y.raw:
            continue
        key = (c.x.raw, c.y.raw)
        if key in seen:
            continue
        seen.add(key)
        kept.append(UtterancePair(len(kept), c.x, c.y, c.work_id, c.line_index))
    return Corpus(tuple(kept))


def build_corpus(lines: Iterable, tokenizer: Tokenizer = tokenize, **filter_kw) -> Corpus:
    return apply_rule_filters(tokenize_pairs(pair_consecutive_lines(lines), tokenizer), **filter_kw)


# --- language-label hook -------------------------------------------------

def read_language_labels(path) -> list[str]:
    """One label per input line, aligned with the corpus text file."""
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh]


def filter_by_language(raw_pairs: Iterable[RawPair], labels: Sequence[str], keep: str) -> list[RawPair]:
    """Drop pairs whose x or y line carries a label other than ``keep``.

    Labels are indexed by the global line index of the text file; y is the
    line right after x.
    """
    out = []
    for r in raw_pairs:
        i = r.line_index
        if i + 1 >= len(labels):
            raise ValueError(f"language labels cover {len(labels)} lines, need line {i + 1}")
        if labels[i] == keep and labels[i + 1] == keep:
            out.append(r)
    return out


# --- file formats --------------------------------------------------------

def read_lines(path, manifest=None, blank_separated: bool = False) -> list[tuple[str, int, str]]:
    """Read a one-line-per-utterance text file into ``(work_id, line_index, text)``.

    Work boundaries come from either a manifest (``work_id<TAB>start<TAB>end``,
    0-based line numbers, end exclusive) or blank separator lines.  With
    neither, the file is one work.  Blank lines themselves are never emitted.
    """
    with open(path, encoding="utf-8") as fh:
        text_lines = [line.rstrip("\n").rstrip("\r") for line in fh]
    if manifest is not None and blank_separated:
        raise ValueError("choose either a work manifest or blank-line separation")
    out = []
    if manifest is not None:
        with open(manifest, encoding="utf-8") as fh:
            for n, row in enumerate(fh, 1):
                if not row.strip():
                    continue
                parts = row.rstrip("\n").split("\t")
                if len(parts) != 3:
                    raise ValueError(f"{manifest}:{n}: expected work_id<TAB>start<TAB>end")
                work_id, start, end = parts[0], int(parts[1]), int(parts[2])
                if not 0 <= start <= end <= len(text_lines):
                    raise ValueError(f"{manifest}:{n}: line range {start}..{end} outside file")
                for i in range(start, end):
                    if text_lines[i].strip():
                        out.append((work_id, i, text_lines[i]))
        return out
    work = 0
    prev_blank = False
    for i, line in enumerate(text_lines):
        if not line.strip():
            if blank_separated and not prev_blank:
                work += 1
            prev_blank = True
            continue
        prev_blank = False
        out.append((str(work), i, line))
    return out


def write_pairs(corpus: Iterable[UtterancePair], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in corpus:
            fh.write(f"{p.id}\t{p.x.raw}\t{p.y.raw}\n")


def read_pairs(path, tokenizer: Tokenizer = tokenize) -> Corpus:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{os.fspath(path)}:{n}: expected id<TAB>x<TAB>y")
            pairs.append(UtterancePair(int(parts[0]), Utterance.from_text(parts[1], tokenizer),
                                       Utterance.from_text(parts[2], tokenizer)))
    return Corpus(tuple(pairs))

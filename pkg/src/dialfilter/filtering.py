"""Rank-and-cut filtering and the entropy baseline."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .corpus import write_pairs

METHODS = ("s_ours", "s_frame", "s_content", "entropy_src", "entropy_trg")
KEEP_TOP, KEEP_BOTTOM = "keep-top", "keep-bottom"

# CLI spellings
METHOD_ALIASES = {
    "ours": "s_ours", "frame": "s_frame", "content": "s_content",
    "entropy-src": "entropy_src", "entropy-trg": "entropy_trg",
}


@dataclass(frozen=True)
class FilterSpec:
    method: str = "s_ours"
    keep_ratio: float | None = 0.9
    keep_count: int | None = None
    direction: str | None = None

    def __post_init__(self):
        method = METHOD_ALIASES.get(self.method, self.method)
        if method not in METHODS:
            raise ValueError(f"unknown filter method {self.method!r}")
        object.__setattr__(self, "method", method)
        if self.direction is None:
            # generic (high-entropy) utterances are the ones removed
            object.__setattr__(self, "direction", KEEP_BOTTOM if method.startswith("entropy") else KEEP_TOP)
        if self.direction not in (KEEP_TOP, KEEP_BOTTOM):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.keep_count is not None:
            if self.keep_count < 1:
                raise ValueError("keep_count must be >= 1")
            object.__setattr__(self, "keep_ratio", None)
        elif self.keep_ratio is None or not 0.0 < self.keep_ratio <= 1.0:
            raise ValueError("keep_ratio must be in (0, 1]")

    def keep_size(self, n: int) -> int:
        if self.keep_count is not None:
            return min(self.keep_count, n)
        # decimal reading of the ratio so 0.1 * 30 is 3, not 3.0000000000000004
        return min(n, math.ceil(Fraction(repr(self.keep_ratio)) * n))


def rank_and_select(scores, spec: FilterSpec) -> set[int]:
    """Ids of the ``keep_size`` best pairs; ties at the cutoff go to smaller ids.

    ``scores`` is a mapping id -> score or an iterable of ``(id, score)``.
    """
    items = list(scores.items()) if isinstance(scores, Mapping) else [tuple(s) for s in scores]
    if not items:
        raise ValueError("cannot filter an empty score set")
    if spec.direction == KEEP_TOP:
        items.sort(key=lambda t: (-t[1], t[0]))
    else:
        items.sort(key=lambda t: (t[1], t[0]))
    return {pid for pid, _ in items[:spec.keep_size(len(items))]}


def _pairs_raw(corpus) -> list[tuple[str, str]]:
    out = []
    for p in corpus:
        if hasattr(p, "x"):
            out.append((p.x.raw, p.y.raw))
        else:
            out.append((p[0], p[1]))
    return out


def entropy_table(corpus, side: str = "src") -> dict[str, float]:
    """Entropy (nats) of each utterance's counterpart distribution.

    ``side="src"`` groups by x and measures the spread of its responses;
    ``"trg"`` groups by y.  ``corpus`` holds pairs or ``(x_raw, y_raw)`` tuples.
    """
    if side not in ("src", "trg"):
        raise ValueError("side must be 'src' or 'trg'")
    raw = _pairs_raw(corpus)
    if not raw:
        raise ValueError("entropy needs a non-empty corpus")
    groups = defaultdict(Counter)
    for x, y in raw:
        if side == "src":
            groups[x][y] += 1
        else:
            groups[y][x] += 1
    table = {}
    for u, ctr in groups.items():
        total = sum(ctr.values())
        h = -math.fsum(c / total * math.log(c / total) for c in ctr.values())
        table[u] = max(h, 0.0)
    return table


def entropy_scores(corpus, side: str = "src") -> dict[int, float]:
    """Per-pair score: entropy of the pair's source (or target) utterance."""
    table = entropy_table(corpus, side)
    return {p.id: table[p.x.raw if side == "src" else p.y.raw] for p in corpus}


def scores_for_method(method: str, corpus=None, records=None) -> dict[int, float]:
    method = METHOD_ALIASES.get(method, method)
    if method.startswith("entropy"):
        if corpus is None:
            raise ValueError("entropy methods need the corpus")
        return entropy_scores(corpus, "src" if method == "entropy_src" else "trg")
    if records is None:
        raise ValueError(f"method {method} needs score records")
    return {r.pair_id: getattr(r, method) for r in records}


def write_filtered(corpus, kept_ids: Iterable[int], path) -> int:
    """Write the kept pairs in original corpus order; returns the number written."""
    kept = set(kept_ids)
    unknown = kept.difference(p.id for p in corpus)
    if unknown:
        raise ValueError(f"unknown pair ids: {sorted(unknown)[:10]}")
    pairs = [p for p in corpus if p.id in kept]
    write_pairs(pairs, path)
    return len(pairs)


def filter_report(spec: FilterSpec, scores: Mapping[int, float], kept: set[int]) -> dict:
    kept_scores = [scores[i] for i in kept]
    if spec.direction == KEEP_TOP:
        cutoff = min(kept_scores) if kept_scores else None
    else:
        cutoff = max(kept_scores) if kept_scores else None
    return {
        "method": spec.method,
        "direction": spec.direction,
        "keep_ratio": spec.keep_ratio,
        "keep_count": spec.keep_count,
        "cutoff_score": cutoff,
        "input_pairs": len(scores),
        "kept_pairs": len(kept),
        "removed_pairs": len(scores) - len(kept),
    }

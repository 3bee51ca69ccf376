"""Evaluation: rank correlation with human ratings, diversity, histograms."""

from __future__ import annotations

import builtins
import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .corpus import tokenize


@dataclass(frozen=True)
class CorrelationReport:
    n: int
    spearman_rho: float
    p_value: float


@dataclass(frozen=True)
class DiversityReport:
    mean_length: float
    distinct: dict = field(default_factory=dict)  # n -> (unique, ratio)
    utterances: int = 0

    @property
    def distinct_1(self):
        return self.distinct[1]

    @property
    def distinct_2(self):
        return self.distinct[2]


@dataclass(frozen=True)
class Histogram:
    bins: list  # (low, high, count)
    below: int
    above: int

    @property
    def counts(self) -> list[int]:
        return [c for _, _, c in self.bins]


def read_ratings(path) -> dict[int, float]:
    """``pair_id<TAB>mean_rating`` lines, ratings in [1, 5]."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{n}: expected pair_id<TAB>mean_rating")
            pid, rating = int(parts[0]), float(parts[1])
            if not 1.0 <= rating <= 5.0:
                raise ValueError(f"{path}:{n}: rating {rating} outside [1, 5]")
            if pid in out:
                raise ValueError(f"{path}:{n}: duplicate pair id {pid}")
            out[pid] = rating
    return out


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    return float(np.dot(a, b) / math.sqrt(np.dot(a, a) * np.dot(b, b)))


def spearman(human: Mapping[int, float], auto: Mapping[int, float]) -> CorrelationReport:
    """Spearman rho over the shared ids (midranks for ties), two-sided t-test p-value."""
    ids = sorted(set(human).intersection(auto))
    if len(ids) < 3:
        raise ValueError(f"need at least 3 shared ids, got {len(ids)}")
    h = np.array([human[i] for i in ids], dtype=np.float64)
    a = np.array([auto[i] for i in ids], dtype=np.float64)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(a))):
        raise ValueError("scores must be finite")
    rh = stats.rankdata(h, method="average")
    ra = stats.rankdata(a, method="average")
    if np.all(rh == rh[0]) or np.all(ra == ra[0]):
        raise ValueError("zero rank variance")
    n = len(ids)
    if np.array_equal(rh, ra):
        rho = 1.0
    elif np.array_equal(rh, n + 1 - ra):
        rho = -1.0
    else:
        rho = max(-1.0, min(1.0, _pearson(rh, ra)))
    if abs(rho) == 1.0:
        p = 0.0
    else:
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p = float(min(1.0, 2.0 * stats.t.sf(abs(t), n - 2)))
    return CorrelationReport(n, rho, p)


def _as_tokens(u):
    if isinstance(u, str):
        return tokenize(u)
    if hasattr(u, "tokens"):
        return u.tokens
    return tuple(u)


def diversity_stats(utterances: Sequence, orders: Sequence[int] = (1, 2)) -> DiversityReport:
    """Mean token length and pooled distinct-n (unique n-grams / total n-grams).

    A pool with no n-grams of some order reports ``(0, 0.0)`` for it.
    """
    toks = [tuple(_as_tokens(u)) for u in utterances]
    if not toks:
        raise ValueError("diversity needs at least one utterance")
    mean_len = math.fsum(len(t) for t in toks) / len(toks)
    distinct = {}
    for n in orders:
        grams = set()
        total = 0
        for t in toks:
            for i in range(len(t) - n + 1):
                grams.add(t[i:i + n])
                total += 1
        distinct[n] = (len(grams), len(grams) / total if total else 0.0)
    return DiversityReport(mean_len, distinct, len(toks))


def histogram(scores: Sequence[float], bin_count: int, range: tuple[float, float]) -> Histogram:
    """Equal-width bins, left-closed except the last, which is closed.

    Scores outside the range (and NaN) are counted in ``below``/``above``.
    """
    if bin_count < 1:
        raise ValueError("bin_count must be >= 1")
    lo, hi = float(range[0]), float(range[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise ValueError(f"degenerate histogram range [{lo}, {hi}]")
    edges = [lo + (hi - lo) * k / bin_count for k in builtins.range(bin_count + 1)]
    edges[-1] = hi
    s = np.asarray(scores, dtype=np.float64).ravel()
    below = int(np.sum(s < lo))
    above = int(np.sum((s > hi) | np.isnan(s)))
    inside = s[(s >= lo) & (s <= hi)]
    idx = np.searchsorted(np.array(edges), inside, side="right") - 1
    idx = np.minimum(idx, bin_count - 1)
    counts = np.bincount(idx, minlength=bin_count)
    bins = [(edges[k], edges[k + 1], int(counts[k])) for k in builtins.range(bin_count)]
    return Histogram(bins, below, above)


def roc_auc(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Area under the ROC curve via the Mann-Whitney statistic (ties count half)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if not n_pos or not n_neg:
        raise ValueError("ROC-AUC needs both classes")
    r = stats.rankdata(s, method="average")
    return float((r[y].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


# --- report writers ----------------------------------------------------------

def format_kv(report: Mapping) -> str:
    lines = []
    for k, v in report.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        lines.append(f"{k}={v}")
    return "\n".join(lines) + "\n"


def write_kv(report: Mapping, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_kv(report))


def write_csv(rows: Sequence[Sequence], header: Sequence[str], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def histogram_rows(name: str, hist: Histogram) -> list[list]:
    rows = [[name, f"{lo:.6f}", f"{hi:.6f}", c] for lo, hi, c in hist.bins]
    rows.append([name, "-inf", f"{hist.bins[0][0]:.6f}", hist.below])
    rows.append([name, f"{hist.bins[-1][1]:.6f}", "inf", hist.above])
    return rows


def diversity_row(name: str, rep: DiversityReport) -> list:
    u1, r1 = rep.distinct[1]
    u2, r2 = rep.distinct[2]
    return [name, rep.utterances, f"{rep.mean_length:.2f}", u1, f"{r1:.3f}", u2, f"{r2:.3f}"]


DIVERSITY_HEADER = ["name", "utterances", "len", "distinct1_unique", "distinct1_ratio",
                    "distinct2_unique", "distinct2_ratio"]

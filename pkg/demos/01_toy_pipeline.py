"""Run every pipeline stage on the bundled 1,000-pair toy corpus.

The toy corpus is synthetic: half the pairs are real exchanges that share a
cue/answer phrase and topic words, the rest have shuffled responses, and some
shuffled pairs got a stock filler reply.  We run the stages, then look at the
strongest phrase pairs, a few score breakdowns and the rating correlations.

    python demos/01_toy_pipeline.py
"""

import shutil
import tempfile
from pathlib import Path

from dialfilter.corpus import read_pairs
from dialfilter.phrase_table import read_table
from dialfilter.pipeline import load_config, run_all
from dialfilter.scorer import format_breakdown, read_scores
from dialfilter.synthetic import bundled_toy_dir

work = Path(tempfile.mkdtemp()) / "toy"
shutil.copytree(bundled_toy_dir(), work)
config = load_config(work / "config.yaml")
for rep in run_all(config):
    print(f"{rep['stage']:>7}: {rep['wall_time_s']:.2f} s")

art = config.artifacts
table = read_table(art / "phrase_table.txt")
print(f"\nphrase table: {len(table)} entries; strongest multi-word pairs")
multi = [(k, e) for k, e in table.entries.items() if len(k[0]) + len(k[1]) > 2]
for (f, e), ent in sorted(multi, key=lambda kv: -kv[1].npmi)[:5]:
    print(f"  {' '.join(f):>12} -> {' '.join(e):<12} count={ent.count:<4} npmi={ent.npmi:.3f}")

pairs = read_pairs(art / "pairs.tsv")
records, cal = read_scores(art / "scores.tsv")
ranked = sorted(records, key=lambda r: -r.s_ours)
print(f"\ncalibration alpha={cal.alpha:.3f} beta={cal.beta:.3f}")
for label, rec in (("best", ranked[0]), ("median", ranked[len(ranked) // 2]), ("worst", ranked[-1])):
    p = pairs[rec.pair_id]
    print(f"  {label:>6}: {format_breakdown(rec, cal)}   {p.x.raw!r} -> {p.y.raw!r}")

print("\n" + (art / "correlation.csv").read_text())
shutil.rmtree(work.parent)

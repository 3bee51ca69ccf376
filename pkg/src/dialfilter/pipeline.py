"""Stage orchestration with persisted, write-then-rename artifacts.

Stages: ingest -> align -> table -> embed -> score -> filter -> eval.  Each
stage reads its upstream artifacts from the artifacts directory, writes its
own outputs atomically and leaves a JSON report under ``reports/``.
"""

from __future__ import annotations

import contextlib
import copy
import hashlib
import json
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from . import aligner, corpus as corpus_mod, evalkit, filtering, phrase_table, scorer, sentvec

STAGES = ("ingest", "align", "table", "embed", "score", "filter", "eval")

ARTIFACTS = {
    "pairs": "pairs.tsv",
    "forward_model": "align.forward.model",
    "reverse_model": "align.reverse.model",
    "alignments": "alignments.txt",
    "phrase_table": "phrase_table.txt",
    "component": "component.txt",
    "scores": "scores.tsv",
}
ARTIFACT_NAMES = {
    "pairs": "pairs",
    "alignments": "alignments",
    "phrase_table": "phrase table",
    "component": "common component",
    "scores": "scores",
}
PRODUCED_BY = {"pairs": "ingest", "alignments": "align", "phrase_table": "table",
               "component": "embed", "scores": "score"}

DEFAULTS = {
    "paths": {
        "corpus": None,
        "work_manifest": None,
        "blank_line_separated": False,
        "language_labels": None,
        "language": "en",
        "vectors": None,
        "frequencies": None,
        "ratings": None,
        "artifacts": "artifacts",
    },
    "corpus": {"min_tokens": 3, "max_tokens": 25, "lowercase": False},
    "aligner": {"iterations": 5, "null_prob": 0.5, "tension": 4.0, "favor_diagonal": True,
                "heuristic": "grow-diag-final-and"},
    "table": {"min_count": 200, "max_len": 4, "strict": False},
    "embedder": {"a": 1e-3, "sample_size": 30000, "seed": 0, "method": "power"},
    "filter": {"method": "ours", "keep_ratio": 0.9, "keep_count": None},
    "evaluation": {"histogram_bins": 20},
    "threads": 1,
}

INPUT_PATHS = ("corpus", "work_manifest", "language_labels", "vectors", "frequencies", "ratings")


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class StageError(RuntimeError):
    pass


@dataclass
class PipelineConfig:
    paths: dict
    corpus: dict
    aligner: dict
    table: dict
    embedder: dict
    filter: dict
    evaluation: dict
    threads: int = 1
    base_dir: str = field(default=".", repr=False)

    @property
    def artifacts(self) -> Path:
        return Path(self.paths["artifacts"])

    def artifact(self, key: str) -> Path:
        return self.artifacts / ARTIFACTS[key]

    def filter_spec(self) -> filtering.FilterSpec:
        f = self.filter
        return filtering.FilterSpec(f["method"], f["keep_ratio"], f["keep_count"])

    def align_config(self) -> aligner.AlignConfig:
        a = self.aligner
        return aligner.AlignConfig(a["iterations"], a["null_prob"], a["tension"], a["favor_diagonal"],
                                   self.corpus["lowercase"])

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.as_dict(), sort_keys=True).encode()).hexdigest()


def _merge(defaults: dict, given: dict, errors: list, prefix: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, val in (given or {}).items():
        if key not in defaults:
            errors.append(f"unknown config key {prefix}{key}")
            continue
        if isinstance(defaults[key], dict):
            if not isinstance(val, dict):
                errors.append(f"{prefix}{key} must be a mapping")
                continue
            out[key] = _merge(defaults[key], val, errors, f"{prefix}{key}.")
        else:
            out[key] = val
    return out


def _check_number(errors, value, name, lo=None, hi=None, lo_open=False, hi_open=False, integer=False):
    kind = int if integer else (int, float)
    if isinstance(value, bool) or not isinstance(value, kind):
        errors.append(f"{name} must be {'an integer' if integer else 'a number'}")
        return
    bad = (lo is not None and (value < lo or (lo_open and value == lo))) or \
          (hi is not None and (value > hi or (hi_open and value == hi)))
    if bad:
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        errors.append(f"{name} out of {lb}{lo if lo is not None else '-inf'},{hi if hi is not None else 'inf'}{rb}")


def validate_config(raw: dict | None, base_dir=".", check_paths: bool = True) -> PipelineConfig:
    """Fill defaults, resolve relative paths, and collect every violation.

    Raises ConfigError carrying one message per problem.
    """
    errors: list[str] = []
    merged = _merge(DEFAULTS, raw or {}, errors)
    base = Path(base_dir)
    paths = merged["paths"]
    for key in INPUT_PATHS + ("artifacts",):
        if paths[key] is not None:
            p = Path(os.path.expanduser(str(paths[key])))
            paths[key] = str(p if p.is_absolute() else base / p)
    if check_paths:
        for key in INPUT_PATHS:
            if paths[key] is not None and not Path(paths[key]).exists():
                errors.append(f"paths.{key}: file not found: {paths[key]}")
    if paths["work_manifest"] and paths["blank_line_separated"]:
        errors.append("paths.work_manifest and paths.blank_line_separated are mutually exclusive")

    c = merged["corpus"]
    _check_number(errors, c["min_tokens"], "min_tokens", 1, integer=True)
    _check_number(errors, c["max_tokens"], "max_tokens", 1, integer=True)
    if isinstance(c["min_tokens"], int) and isinstance(c["max_tokens"], int) and c["min_tokens"] > c["max_tokens"]:
        errors.append("min_tokens exceeds max_tokens")

    a = merged["aligner"]
    _check_number(errors, a["iterations"], "iterations", 1, integer=True)
    _check_number(errors, a["null_prob"], "null_prob", 0, 1, hi_open=True)
    _check_number(errors, a["tension"], "tension", 0)
    if a["heuristic"] not in aligner.HEURISTICS:
        errors.append(f"heuristic must be one of {', '.join(aligner.HEURISTICS)}")

    t = merged["table"]
    _check_number(errors, t["min_count"], "min_count", 1, integer=True)
    _check_number(errors, t["max_len"], "max_len", 1, integer=True)

    e = merged["embedder"]
    _check_number(errors, e["a"], "a", 0, lo_open=True)
    if e["sample_size"] is not None:
        _check_number(errors, e["sample_size"], "sample_size", 1, integer=True)
    _check_number(errors, e["seed"], "seed", 0, integer=True)
    if e["method"] not in ("power", "svd"):
        errors.append("embedder.method must be 'power' or 'svd'")

    f = merged["filter"]
    if filtering.METHOD_ALIASES.get(f["method"], f["method"]) not in filtering.METHODS:
        errors.append(f"unknown filter method {f['method']!r}")
    if f["keep_count"] is not None:
        _check_number(errors, f["keep_count"], "keep_count", 1, integer=True)
    else:
        _check_number(errors, f["keep_ratio"], "keep_ratio", 0, 1, lo_open=True)

    _check_number(errors, merged["evaluation"]["histogram_bins"], "histogram_bins", 1, integer=True)
    _check_number(errors, merged["threads"], "threads", 1, integer=True)

    if errors:
        raise ConfigError(errors)
    return PipelineConfig(**merged, base_dir=str(base))


def load_config(path, overrides: dict | None = None, check_paths: bool = True) -> PipelineConfig:
    """Read a YAML config; ``overrides`` (nested dict) wins over file values."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError(["config file must hold a mapping"])
    for section, values in (overrides or {}).items():
        if isinstance(values, dict):
            raw.setdefault(section, {})
            raw[section] = {**(raw[section] or {}), **values}
        else:
            raw[section] = values
    return validate_config(raw, Path(path).resolve().parent, check_paths)


# --- artifact plumbing ---------------------------------------------------------

@contextlib.contextmanager
def atomic_output(path: Path):
    """Yield a temp path in the target directory; rename over ``path`` on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        yield Path(tmp)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def count_rows(path) -> int:
    with open(path, "rb") as fh:
        return sum(1 for line in fh if line.strip() and not line.startswith(b"#"))


def _require(config: PipelineConfig, key: str) -> Path:
    p = config.artifact(key)
    if not p.exists():
        raise StageError(f"missing artifact: {ARTIFACT_NAMES[key]} (run the '{PRODUCED_BY[key]}' stage first)")
    return p


def _require_input(config: PipelineConfig, key: str) -> Path:
    p = config.paths.get(key)
    if p is None:
        raise StageError(f"config paths.{key} is required for this stage")
    if not Path(p).exists():
        raise StageError(f"input not found: {p}")
    return Path(p)


def _tokenizer(config):
    return corpus_mod.tokenize


def _load_pairs(config):
    return corpus_mod.read_pairs(_require(config, "pairs"), _tokenizer(config))


def _load_embedder(config, component=None):
    vecs = sentvec.load_word_vectors(_require_input(config, "vectors"))
    freqs = sentvec.load_frequencies(_require_input(config, "frequencies"))
    return sentvec.SentenceEmbedder(vecs, freqs, config.embedder["a"], component, config.corpus["lowercase"])


def filtered_name(spec: filtering.FilterSpec) -> str:
    amount = f"r{spec.keep_ratio:g}" if spec.keep_count is None else f"n{spec.keep_count}"
    return f"filtered.{spec.method}.{amount}"


# --- stages --------------------------------------------------------------------

def _stage_ingest(config, threads):
    p = config.paths
    src = _require_input(config, "corpus")
    lines = corpus_mod.read_lines(src, p["work_manifest"], p["blank_line_separated"])
    raw = corpus_mod.pair_consecutive_lines(lines)
    inputs = [src] + [Path(p[k]) for k in ("work_manifest", "language_labels") if p[k]]
    n_candidates = len(raw)
    if p["language_labels"]:
        raw = corpus_mod.filter_by_language(raw, corpus_mod.read_language_labels(p["language_labels"]),
                                            p["language"])
    cands = corpus_mod.tokenize_pairs(raw, _tokenizer(config))
    corp = corpus_mod.apply_rule_filters(cands, config.corpus["min_tokens"], config.corpus["max_tokens"])
    out = config.artifact("pairs")
    with atomic_output(out) as tmp:
        corpus_mod.write_pairs(corp, tmp)
    return inputs, [out], {"lines": len(lines), "candidates": n_candidates, "pairs": len(corp)}


def _stage_align(config, threads):
    src = _require(config, "pairs")
    corp = _load_pairs(config)
    if not len(corp):
        raise StageError("empty training corpus")
    fwd, rev, mats = aligner.align_and_symmetrize(corp, config.align_config(), config.aligner["heuristic"],
                                                  threads)
    outs = [config.artifact("forward_model"), config.artifact("reverse_model"), config.artifact("alignments")]
    with atomic_output(outs[0]) as tmp:
        aligner.save_model(fwd, tmp)
    with atomic_output(outs[1]) as tmp:
        aligner.save_model(rev, tmp)
    with atomic_output(outs[2]) as tmp:
        aligner.write_alignments(tmp, zip(corp.ids, mats))
    return [src], outs, {"pairs": len(corp), "links": sum(len(m.links) for m in mats),
                         "forward_log_likelihood": fwd.log_likelihoods[-1],
                         "reverse_log_likelihood": rev.log_likelihoods[-1]}


def _stage_table(config, threads):
    srcs = [_require(config, "pairs"), _require(config, "alignments")]
    corp = _load_pairs(config)
    aligns = aligner.read_alignments(srcs[1], corp)
    missing = [pid for pid in corp.ids if pid not in aligns]
    if missing:
        raise StageError(f"alignments missing for {len(missing)} pairs; rerun 'align'")
    t = config.table
    table = phrase_table.build_table(corp, aligns, t["min_count"], t["max_len"], config.corpus["lowercase"],
                                     t["strict"], threads)
    out = config.artifact("phrase_table")
    with atomic_output(out) as tmp:
        phrase_table.write_table(table, tmp)
    return srcs, [out], {"instances": table.n, "entries": len(table)}


def _stage_embed(config, threads):
    src = _require(config, "pairs")
    corp = _load_pairs(config)
    emb = _load_embedder(config)
    e = config.embedder
    fitted = emb.fit(corp.sentences(), e["sample_size"], e["seed"], e["method"])
    out = config.artifact("component")
    with atomic_output(out) as tmp:
        sentvec.write_component(fitted.component, tmp)
    inputs = [src, Path(config.paths["vectors"]), Path(config.paths["frequencies"])]
    return inputs, [out], {"sentences": len(corp.sentences()), "dim": emb.vectors.dim}


def _stage_score(config, threads):
    srcs = [_require(config, "pairs"), _require(config, "phrase_table"), _require(config, "component")]
    corp = _load_pairs(config)
    table = phrase_table.read_table(srcs[1])
    emb = _load_embedder(config, sentvec.read_component(srcs[2]))
    try:
        records, cal = scorer.score_corpus(corp, table, emb, threads=threads)
    except ValueError as exc:
        raise StageError(str(exc)) from None
    out = config.artifact("scores")
    with atomic_output(out) as tmp:
        scorer.write_scores(records, cal, tmp)
    inputs = srcs + [Path(config.paths["vectors"]), Path(config.paths["frequencies"])]
    return inputs, [out], {"pairs": len(records), "alpha": cal.alpha, "beta": cal.beta}


def _method_scores(config, spec, corp):
    if spec.method.startswith("entropy"):
        return filtering.scores_for_method(spec.method, corpus=corp), []
    src = _require(config, "scores")
    records, _ = scorer.read_scores(src)
    return filtering.scores_for_method(spec.method, records=records), [src]


def _stage_filter(config, threads):
    spec = config.filter_spec()
    src = _require(config, "pairs")
    corp = _load_pairs(config)
    scores, extra = _method_scores(config, spec, corp)
    kept = filtering.rank_and_select(scores, spec)
    stem = filtered_name(spec)
    out = config.artifacts / f"{stem}.tsv"
    rep = config.artifacts / f"{stem}.report.txt"
    with atomic_output(out) as tmp:
        filtering.write_filtered(corp, kept, tmp)
    report = filtering.filter_report(spec, scores, kept)
    with atomic_output(rep) as tmp:
        evalkit.write_kv(report, tmp)
    return [src] + extra, [out, rep], {"kept": len(kept), "removed": len(corp) - len(kept)}


def _stage_eval(config, threads):
    srcs = [_require(config, "pairs"), _require(config, "scores")]
    corp = _load_pairs(config)
    records, cal = scorer.read_scores(srcs[1])
    spec = config.filter_spec()
    filtered = config.artifacts / f"{filtered_name(spec)}.tsv"
    if not filtered.exists():
        raise StageError("missing artifact: filtered corpus (run the 'filter' stage first)")
    srcs.append(filtered)
    bins = config.evaluation["histogram_bins"]

    hist_rows = []
    for name in ("s_frame", "s_content", "s_ours"):
        vals = [getattr(r, name) for r in records]
        hi = 1.0 if name == "s_content" else max(max(vals), 1e-12)
        hist_rows += evalkit.histogram_rows(name, evalkit.histogram(vals, bins, (0.0, hi)))

    kept_ids = {p.id for p in corpus_mod.read_pairs(filtered)}
    div_rows = [
        evalkit.diversity_row("all", evalkit.diversity_stats([p.y for p in corp])),
        evalkit.diversity_row("kept", evalkit.diversity_stats([p.y for p in corp if p.id in kept_ids])),
    ]
    removed = [p.y for p in corp if p.id not in kept_ids]
    if removed:
        div_rows.append(evalkit.diversity_row("removed", evalkit.diversity_stats(removed)))

    report = {"pairs": len(corp), "alpha": cal.alpha, "beta": cal.beta, "kept": len(kept_ids)}
    outs = [config.artifacts / "histogram.csv", config.artifacts / "diversity.csv"]
    with atomic_output(outs[0]) as tmp:
        evalkit.write_csv(hist_rows, ["score", "bin_low", "bin_high", "count"], tmp)
    with atomic_output(outs[1]) as tmp:
        evalkit.write_csv(div_rows, evalkit.DIVERSITY_HEADER, tmp)

    if config.paths["ratings"]:
        ratings_path = _require_input(config, "ratings")
        srcs.append(ratings_path)
        human = evalkit.read_ratings(ratings_path)
        corr_rows = []
        by_method = {
            "s_ours": {r.pair_id: r.s_ours for r in records},
            "s_frame": {r.pair_id: r.s_frame for r in records},
            "s_content": {r.pair_id: r.s_content for r in records},
            "entropy_src": filtering.entropy_scores(corp, "src"),
            "entropy_trg": filtering.entropy_scores(corp, "trg"),
        }
        for name, auto in by_method.items():
            try:
                rep = evalkit.spearman(human, auto)
                corr_rows.append([name, rep.n, f"{rep.spearman_rho:.4f}", f"{rep.p_value:.3g}"])
                report[f"spearman_{name}"] = rep.spearman_rho
                report[f"p_value_{name}"] = rep.p_value
            except ValueError as exc:
                corr_rows.append([name, 0, "nan", str(exc)])
        report["rated_pairs"] = len(human)
        report["rated_pairs_matched"] = len(set(human).intersection(corp.ids))
        outs.append(config.artifacts / "correlation.csv")
        with atomic_output(outs[-1]) as tmp:
            evalkit.write_csv(corr_rows, ["method", "n", "spearman_rho", "p_value"], tmp)
    outs.append(config.artifacts / "eval_report.txt")
    with atomic_output(outs[-1]) as tmp:
        evalkit.write_kv(report, tmp)
    return srcs, outs, {"histogram_rows": len(hist_rows)}


_RUNNERS = {
    "ingest": _stage_ingest, "align": _stage_align, "table": _stage_table, "embed": _stage_embed,
    "score": _stage_score, "filter": _stage_filter, "eval": _stage_eval,
}


def run_stage(stage: str, config: PipelineConfig, threads: int | None = None) -> dict:
    """Run one stage and write its report; returns the report dict."""
    if stage not in _RUNNERS:
        raise ValueError(f"unknown stage {stage!r}")
    threads = threads or config.threads
    config.artifacts.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    inputs, outputs, extra = _RUNNERS[stage](config, threads)
    report = {
        "stage": stage,
        "config_digest": config.digest(),
        "threads": threads,
        "inputs": {str(p): file_digest(p) for p in inputs},
        "outputs": {str(p): {"sha256": file_digest(p), "rows": count_rows(p)} for p in outputs},
        "wall_time_s": round(time.perf_counter() - start, 3),
        **extra,
    }
    rep_path = config.artifacts / "reports" / f"{stage}.json"
    with atomic_output(rep_path) as tmp:
        tmp.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return report


def run_all(config: PipelineConfig, threads: int | None = None) -> list[dict]:
    return [run_stage(s, config, threads) for s in STAGES]

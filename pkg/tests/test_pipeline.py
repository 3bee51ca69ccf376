import json
import subprocess
import sys

import pytest
import yaml

from dialfilter.cli import main
from dialfilter.corpus import read_pairs
from dialfilter.pipeline import (
    ARTIFACTS,
    STAGES,
    ConfigError,
    StageError,
    atomic_output,
    load_config,
    run_stage,
    validate_config,
)
from dialfilter.synthetic import planted_corpus, write_dataset


def test_defaults_filled():
    cfg = validate_config({}, check_paths=False)
    assert cfg.table["min_count"] == 200
    assert cfg.aligner["null_prob"] == 0.5
    assert cfg.aligner["heuristic"] == "grow-diag-final-and"
    assert cfg.embedder["sample_size"] == 30000


def test_every_violation_reported():
    with pytest.raises(ConfigError) as info:
        validate_config({"aligner": {"null_prob": 1.5}, "table": {"min_count": 0}, "bogus": 1},
                        check_paths=False)
    errs = info.value.errors
    assert "null_prob out of [0,1)" in errs
    assert len(errs) == 3


def test_missing_input_path_rejected(tmp_path):
    with pytest.raises(ConfigError, match="file not found"):
        validate_config({"paths": {"corpus": "nope.txt"}}, base_dir=tmp_path)


def test_score_before_table(toy_dir):
    cfg = load_config(toy_dir / "config.yaml")
    run_stage("ingest", cfg)
    with pytest.raises(StageError, match="missing artifact: phrase table"):
        run_stage("score", cfg)


def test_atomic_output_cleans_up(tmp_path):
    target = tmp_path / "out.txt"
    with pytest.raises(RuntimeError):
        with atomic_output(target) as tmp:
            tmp.write_text("partial")
            raise RuntimeError("boom")
    assert list(tmp_path.iterdir()) == []


def test_toy_ingest_keeps_every_pair(toy_dir):
    cfg = load_config(toy_dir / "config.yaml")
    rep = run_stage("ingest", cfg)
    assert rep["pairs"] == 1000


def test_run_all_on_toy_corpus(toy_dir, capsys):
    assert main(["run-all", "--config", str(toy_dir / "config.yaml")]) == 0
    art = toy_dir / "artifacts"
    reports = sorted(p.stem for p in (art / "reports").glob("*.json"))
    assert reports == sorted(STAGES)
    for name in ARTIFACTS.values():
        assert (art / name).exists()
    assert (art / "filtered.s_ours.r0.5.tsv").exists()
    corr = (art / "correlation.csv").read_text().splitlines()
    assert corr[0] == "method,n,spearman_rho,p_value"
    ours = next(r for r in corr if r.startswith("s_ours,")).split(",")
    assert float(ours[2]) > 0.3
    score_rep = json.loads((art / "reports" / "score.json").read_text())
    assert set(score_rep) >= {"config_digest", "inputs", "outputs", "wall_time_s"}


def test_rerun_is_byte_identical(toy_dir):
    cfg = load_config(toy_dir / "config.yaml")
    for stage in STAGES:
        run_stage(stage, cfg)
    art = toy_dir / "artifacts"
    before = {p.name: p.read_bytes() for p in art.iterdir() if p.is_file()}
    for stage in STAGES:
        run_stage(stage, cfg)
    after = {p.name: p.read_bytes() for p in art.iterdir() if p.is_file()}
    assert before == after


def test_cli_filter_overrides(toy_dir, capsys):
    cfg = str(toy_dir / "config.yaml")
    for cmd in ("ingest", "align", "extract-table", "fit-embedder", "score"):
        assert main([cmd, "--config", cfg]) == 0
    assert main(["filter", "--config", cfg, "--keep-ratio", "0.9"]) == 0
    kept = read_pairs(toy_dir / "artifacts" / "filtered.s_ours.r0.9.tsv")
    assert len(kept) == 900
    assert main(["filter", "--config", cfg, "--keep-count", "123", "--method", "entropy-trg"]) == 0
    assert len(read_pairs(toy_dir / "artifacts" / "filtered.entropy_trg.n123.tsv")) == 123
    capsys.readouterr()
    assert main(["stats", "--config", cfg]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("name,utterances,len")
    assert len(out) == 4  # header, pairs, two filtered files


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"aligner": {"null_prob": 1.5}}))
    assert main(["align", "--config", str(cfg)]) == 2
    assert "null_prob out of [0,1)" in capsys.readouterr().err


def test_cli_stage_error_exit_code(toy_dir, capsys):
    assert main(["score", "--config", str(toy_dir / "config.yaml")]) == 1
    assert "missing artifact" in capsys.readouterr().err


def test_cli_flags_reject_both_amounts():
    with pytest.raises(SystemExit):
        main(["filter", "--keep-ratio", "0.5", "--keep-count", "3"])


def test_module_entry_point(toy_dir):
    proc = subprocess.run([sys.executable, "-m", "dialfilter", "ingest", "--config", str(toy_dir / "config.yaml")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["pairs"] == 1000


def test_language_labels_hook(tmp_path):
    corp = planted_corpus(n_pairs=20, seed=1, n_topics=3, n_cues=3)
    d = write_dataset(corp, tmp_path / "ds", config_text=None)
    lines = (d / "corpus.txt").read_text().splitlines()
    labels = ["en" if i >= 3 else "fr" for i in range(len(lines))]
    (d / "labels.txt").write_text("\n".join(labels) + "\n")
    (d / "config.yaml").write_text(yaml.safe_dump({"paths": {
        "corpus": "corpus.txt", "blank_line_separated": True, "language_labels": "labels.txt",
        "language": "en"}}))
    rep = run_stage("ingest", load_config(d / "config.yaml"))
    assert rep["pairs"] == 19

"""Command-line entry point: ``dialfilter <subcommand> --config PATH``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import corpus as corpus_mod, evalkit
from .pipeline import STAGES, ConfigError, StageError, load_config, run_stage

SUBCOMMANDS = {
    "ingest": "ingest",
    "align": "align",
    "extract-table": "table",
    "fit-embedder": "embed",
    "score": "score",
    "filter": "filter",
    "evaluate": "eval",
}

HELP = {
    "ingest": "pair consecutive lines and apply the rule filters",
    "align": "train forward/reverse alignment models and symmetrize",
    "extract-table": "extract phrase pairs and build the key phrase table",
    "fit-embedder": "fit the common component of SIF sentence vectors",
    "score": "compute s_frame, s_content and s_ours for every pair",
    "filter": "keep the best-scoring pairs",
    "evaluate": "correlation with ratings, diversity and score histograms",
    "stats": "print diversity statistics of pairs files",
    "run-all": "run every stage in order",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config (YAML)")
    common.add_argument("--threads", type=int, help="worker count; fixes the shard plan")
    common.add_argument("--seed", type=int, help="seed for the common-component sample")
    amount = common.add_mutually_exclusive_group()
    amount.add_argument("--keep-ratio", type=float, help="fraction of pairs to keep, in (0, 1]")
    amount.add_argument("--keep-count", type=int, help="number of pairs to keep")
    common.add_argument("--method", choices=["ours", "frame", "content", "entropy-src", "entropy-trg"])
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="dialfilter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(SUBCOMMANDS) + ["run-all"]:
        sub.add_parser(name, parents=[common], help=HELP[name])
    stats = sub.add_parser("stats", parents=[common], help=HELP["stats"])
    stats.add_argument("pairs_files", nargs="*", help="pairs files (default: artifacts of --config)")
    stats.add_argument("--side", choices=["x", "y", "both"], default="y")
    return parser


def _overrides(args) -> dict:
    out = {}
    if args.threads is not None:
        out["threads"] = args.threads
    if args.seed is not None:
        out["embedder"] = {"seed": args.seed}
    filt = {}
    if args.keep_ratio is not None:
        filt.update(keep_ratio=args.keep_ratio, keep_count=None)
    if args.keep_count is not None:
        filt["keep_count"] = args.keep_count
    if args.method is not None:
        filt["method"] = args.method
    if filt:
        out["filter"] = filt
    return out


def _stats(args, config) -> int:
    files = args.pairs_files
    if not files:
        if config is None:
            print("error: give pairs files or --config", file=sys.stderr)
            return 2
        files = [str(p) for p in sorted(config.artifacts.glob("*.tsv")) if p.name != "scores.tsv"]
    rows = []
    for path in files:
        corp = corpus_mod.read_pairs(path)
        if not len(corp):
            continue
        utts = []
        for p in corp:
            if args.side in ("x", "both"):
                utts.append(p.x)
            if args.side in ("y", "both"):
                utts.append(p.y)
        rows.append(evalkit.diversity_row(path, evalkit.diversity_stats(utts)))
    print(",".join(evalkit.DIVERSITY_HEADER))
    for r in rows:
        print(",".join(str(v) for v in r))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config = None
    try:
        if args.config:
            config = load_config(args.config, _overrides(args))
        if args.command == "stats":
            return _stats(args, config)
        if config is None:
            print("error: --config is required", file=sys.stderr)
            return 2
        stages = STAGES if args.command == "run-all" else (SUBCOMMANDS[args.command],)
        for stage in stages:
            report = run_stage(stage, config)
            summary = {k: v for k, v in report.items() if k not in ("inputs", "outputs")}
            print(json.dumps(summary, sort_keys=True))
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return 2
    except (StageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: ingest, run, train, predict.

``run`` executes the full LOO/LPO experiment grid and writes results.csv,
report.json, timings.csv and a resolved config snapshot into the output
directory.  results.csv and report.json are byte-identical across reruns
with the same configuration and seed; wall-clock timings live in their
own file for that reason.  The STANCEKIT_SEED environment variable
overrides any configured seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from stancekit import corpus as corpus_io
from stancekit.corpus import CorpusParseError, FieldMap, read_corpus
from stancekit.experiments import (
    ALL_METHODS,
    ExperimentPlan,
    HarnessConfig,
    run_experiment,
    write_report_json,
    write_results_csv,
    write_timings_csv,
)
from stancekit.inference import FitConfig
from stancekit.multiclass import (
    FeatureExtractor,
    OptimizerSettings,
    load_model,
    ModelFormatError,
    predict_stance_batch,
    save_model,
    train_stance_model,
)
from stancekit.stances import STANCE_ORDER
from stancekit.textpipe import (
    BrownClusterTable,
    PreprocessResources,
    default_resources,
    load_emoticons,
    load_stopwords,
)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_SKIPPED = 2


def _add_corpus_args(parser):
    parser.add_argument("--corpus", required=True, help="corpus file (JSONL or CSV)")
    parser.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    parser.add_argument("--text-field", default="text")
    parser.add_argument("--rumour-field", default="rumour_id")
    parser.add_argument("--event-field", default="event_id")
    parser.add_argument("--label-field", default="label")
    parser.add_argument("--id-field", default="tweet_id")
    parser.add_argument("--order-field", default="order_index")
    parser.add_argument("--retweet-field", default="is_retweet")
    parser.add_argument("--lenient", action="store_true",
                        help="report parse errors and continue instead of aborting")


def _add_resource_args(parser):
    parser.add_argument("--features", choices=("bow", "brown"), default="bow")
    parser.add_argument("--brown-paths", help="Brown cluster paths file (tab-separated)")
    parser.add_argument("--stopwords", help="override the packaged stopword list")
    parser.add_argument("--emoticons", help="override the packaged emoticon table")
    parser.add_argument("--keep-urls", action="store_true",
                        help="keep URL tokens instead of dropping them")


def _add_fit_args(parser):
    parser.add_argument("--ep-tolerance", type=float, default=1e-6)
    parser.add_argument("--ep-max-sweeps", type=int, default=100)
    parser.add_argument("--damping", type=float, default=0.8)
    parser.add_argument("--jitter", type=float, default=1e-8)
    parser.add_argument("--opt-iters", type=int, default=25)
    parser.add_argument("--opt-restarts", type=int, default=3)


def _field_map(args) -> FieldMap:
    return FieldMap(
        text=args.text_field,
        rumour_id=args.rumour_field,
        event_id=args.event_field,
        label=args.label_field,
        tweet_id=args.id_field,
        order=args.order_field,
        retweet=args.retweet_field,
    )


def _resources(args) -> PreprocessResources:
    base = default_resources()
    stopwords = load_stopwords(args.stopwords) if args.stopwords else base.stopwords
    emoticons = load_emoticons(args.emoticons) if args.emoticons else base.emoticons
    return PreprocessResources(stopwords, emoticons, base.stemmer, remove_urls=not args.keep_urls)


def _seed(args) -> int:
    env = os.environ.get("STANCEKIT_SEED")
    if env is not None:
        return int(env)
    return args.seed


def _load_corpus(args, require_label=True):
    instances, errors = read_corpus(
        args.corpus,
        file_format=args.format,
        fields=_field_map(args),
        lenient=args.lenient,
        require_label=require_label,
    )
    for err in errors:
        print(f"warning: {err}", file=sys.stderr)
    if not instances:
        raise CorpusParseError(0, "empty corpus")
    return instances


def cmd_ingest(args) -> int:
    try:
        instances = _load_corpus(args)
    except CorpusParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    summary = corpus_io.summarize_corpus(instances)
    headers = ["rumour", "supporting", "denying", "questioning", "total"]
    rows = [
        [rid] + [row[s] for s in STANCE_ORDER] + [row["total"]]
        for rid, row in summary.items()
    ]
    totals = ["Total"] + [sum(r[i] for r in rows) for i in range(1, 5)]
    widths = [max(len(str(x)) for x in [h] + [r[i] for r in rows + [totals]])
              for i, h in enumerate(headers)]
    def fmt(row):
        return "  ".join(str(x).ljust(w) if i == 0 else str(x).rjust(w)
                         for i, (x, w) in enumerate(zip(row, widths)))
    print(fmt(headers))
    for row in rows:
        print(fmt(row))
    print(fmt(totals))
    return EXIT_OK


def _harness_config(args) -> HarnessConfig:
    brown_table = None
    if args.features == "brown":
        if not args.brown_paths:
            raise ValueError("--features brown requires --brown-paths")
        brown_table = BrownClusterTable.from_file(args.brown_paths)
    return HarnessConfig(
        fit=FitConfig(
            ep_tolerance=args.ep_tolerance,
            ep_max_sweeps=args.ep_max_sweeps,
            damping=args.damping,
            jitter=args.jitter,
        ),
        optimizer=OptimizerSettings(max_iters=args.opt_iters, restarts=args.opt_restarts),
        features=args.features,
        brown_table=brown_table,
        resources=_resources(args),
        l2_strength=args.l2_strength,
        nb_alpha=args.nb_alpha,
        jobs=args.jobs,
    )


def _config_snapshot(args, seed) -> dict:
    snapshot = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    snapshot["resolved_seed"] = seed
    from stancekit.backend import active_backend

    snapshot["backend"] = active_backend()
    return snapshot


def cmd_run(args) -> int:
    try:
        instances = _load_corpus(args)
        seed = _seed(args)
        plan = ExperimentPlan(
            protocol=args.protocol,
            target_train_sizes=tuple(int(k) for k in args.train_sizes.split(",")),
            test_offset=args.test_offset,
            fold_unit=args.fold_unit,
            seed=seed,
            methods=tuple(args.methods.split(",")),
        )
        cfg = _harness_config(args)
        result = run_experiment(instances, plan, cfg)
    except (CorpusParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_results_csv(result, out_dir / "results.csv")
    write_report_json(result, out_dir / "report.json")
    write_timings_csv(result, out_dir / "timings.csv")
    with open(out_dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(_config_snapshot(args, seed), fh, indent=2, sort_keys=True, default=str)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"wrote {out_dir / 'results.csv'}")
    if result.skipped_folds:
        return EXIT_SKIPPED
    return EXIT_OK


def cmd_train(args) -> int:
    try:
        instances = _load_corpus(args)
        resources = _resources(args)
        if args.features == "brown":
            if not args.brown_paths:
                raise ValueError("--features brown requires --brown-paths")
            extractor = FeatureExtractor.brown(
                BrownClusterTable.from_file(args.brown_paths), resources=resources
            )
        else:
            extractor = FeatureExtractor("bow", resources=resources).fit(instances)
        model = train_stance_model(
            instances,
            args.variant,
            FitConfig(
                ep_tolerance=args.ep_tolerance,
                ep_max_sweeps=args.ep_max_sweeps,
                damping=args.damping,
                jitter=args.jitter,
            ),
            target_rumour_id=args.target_rumour,
            extractor=extractor,
            optimizer=OptimizerSettings(max_iters=args.opt_iters, restarts=args.opt_restarts),
            seed=_seed(args),
            unit=args.fold_unit,
        )
    except (CorpusParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    save_model(model, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        model = load_model(args.model)
    except (ModelFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    try:
        instances, errors = read_corpus(
            args.input,
            file_format=args.format,
            fields=_field_map(args),
            lenient=args.lenient,
            require_label=False,
        )
    except CorpusParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    for err in errors:
        print(f"warning: {err}", file=sys.stderr)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        out.write("tweet_id,label,p_supporting,p_denying,p_questioning\n")
        for inst, (label, probs) in zip(instances, predict_stance_batch(model, instances)):
            values = ",".join(repr(probs[s]) for s in STANCE_ORDER)
            out.write(f"{inst.tweet_id},{label.value},{values}\n")
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stancekit",
        description="Multi-task GP stance classification for rumourous tweets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse a corpus and print per-rumour label counts")
    _add_corpus_args(p_ingest)
    p_ingest.set_defaults(func=cmd_ingest)

    p_run = sub.add_parser("run", help="run the LOO/LPO experiment grid")
    _add_corpus_args(p_run)
    _add_resource_args(p_run)
    _add_fit_args(p_run)
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--protocol", choices=("LOO", "LPO"), default="LPO")
    p_run.add_argument("--train-sizes", default="0,10,20,30,40,50",
                       help="comma-separated target training sizes (k sweep)")
    p_run.add_argument("--test-offset", type=int, default=None,
                       help="first test index within the target unit (default: max k)")
    p_run.add_argument("--fold-unit", choices=("rumour", "event"), default="rumour")
    p_run.add_argument("--methods", default=",".join(ALL_METHODS))
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p_run.add_argument("--l2-strength", type=float, default=1.0)
    p_run.add_argument("--nb-alpha", type=float, default=1.0)
    p_run.set_defaults(func=cmd_run)

    p_train = sub.add_parser("train", help="train a stance model and save it")
    _add_corpus_args(p_train)
    _add_resource_args(p_train)
    _add_fit_args(p_train)
    p_train.add_argument("--out", required=True, help="model file to write")
    p_train.add_argument("--variant", choices=("GP", "GPPooled", "GPICM"), default="GPICM")
    p_train.add_argument("--target-rumour", default=None,
                         help="target unit id (required for GP; reserves the target task for GPICM)")
    p_train.add_argument("--fold-unit", choices=("rumour", "event"), default="rumour")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.set_defaults(func=cmd_train)

    p_predict = sub.add_parser("predict", help="predict stances with a saved model")
    p_predict.add_argument("--model", required=True)
    p_predict.add_argument("--input", required=True, help="JSONL/CSV file of tweets")
    p_predict.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p_predict.add_argument("--out", default=None, help="write CSV here instead of stdout")
    p_predict.add_argument("--text-field", default="text")
    p_predict.add_argument("--rumour-field", default="rumour_id")
    p_predict.add_argument("--event-field", default="event_id")
    p_predict.add_argument("--label-field", default="label")
    p_predict.add_argument("--id-field", default="tweet_id")
    p_predict.add_argument("--order-field", default="order_index")
    p_predict.add_argument("--retweet-field", default="is_retweet")
    p_predict.add_argument("--lenient", action="store_true")
    p_predict.set_defaults(func=cmd_predict)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

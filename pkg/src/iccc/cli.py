"""Command-line interface.

Subcommands cover the pipeline stages: ingest caption sources, inspect
extraction, build the replacement pool, construct the training file, recount
statistics, and validate parses or emitted files. ICCC_WORK_DIR sets the
default directory for outputs when --out is omitted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import conceptbase, corpus, emitter, pipeline, udtree
from .extractor import ALL_CONCEPT_TYPES, extract_all, parse_concept_types
from .perturb import load_preset


def work_dir() -> Path:
    return Path(os.environ.get("ICCC_WORK_DIR", "."))


def _default_out(name: str, value: str | None) -> Path:
    return Path(value) if value else work_dir() / name


def _emit(obj: dict) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def cmd_ingest(args: argparse.Namespace) -> int:
    report = corpus.IngestReport()

    def records():
        for path in args.coco or []:
            yield from corpus.ingest_coco(path, report)
        for path in args.jsonl or []:
            yield from corpus.ingest_jsonl(path, report)

    out = _default_out("records.jsonl", args.out)
    written = corpus.write_records(corpus.validate_records(records()), out)
    _emit({"out": str(out), "written": written, **report.as_dict()})
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    enabled = parse_concept_types(args.types) if args.types else ALL_CONCEPT_TYPES
    report = udtree.ReadReport()
    out_fp = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for tree in udtree.read_conllu_file(args.conllu, report):
            annotation = extract_all(tree, enabled)
            for unit in annotation.units:
                out_fp.write(
                    json.dumps(
                        {
                            "dataset": tree.caption_ref[0],
                            "caption_id": tree.caption_ref[1],
                            "type": unit.concept_type.value,
                            "span": list(unit.span),
                            "surface": unit.surface,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    finally:
        if args.out:
            out_fp.close()
    print(json.dumps(report.as_dict(), sort_keys=True), file=sys.stderr)
    return 0


def cmd_build_base(args: argparse.Namespace) -> int:
    report = udtree.ReadReport()
    trees = udtree.read_conllu_file(args.conllu, report)
    base = pipeline.base_from_trees(trees, args.min_count, args.top_drop, dataset=args.dataset)
    out = _default_out("concept_base.jsonl", args.out)
    conceptbase.save_base(base, out)
    sizes = {bt.value: base.size(bt) for bt in conceptbase.BaseType}
    disabled = [bt.value for bt in conceptbase.BaseType if not base.enabled(bt)]
    for name in disabled:
        print(f"warning: base type {name} has < 2 entries; replacement disabled", file=sys.stderr)
    _emit({"out": str(out), "sizes": sizes, "replacement_disabled": disabled, "read": report.as_dict()})
    return 0


def cmd_construct(args: argparse.Namespace) -> int:
    config = emitter.MixConfig(
        p_c=args.p_c,
        p_s=args.p_s,
        batch_size=args.batch_size,
        seed=args.seed,
        enabled_types=parse_concept_types(args.types) if args.types else ALL_CONCEPT_TYPES,
        samples_per_caption=args.samples_per_caption,
        preset=args.preset,
        random_baseline=args.random_baseline,
    )
    out = _default_out("training.jsonl", args.out)
    result = pipeline.run_construct(
        records_path=args.records,
        conllu_path=args.conllu,
        out_path=out,
        config=config,
        base_path=args.base,
        min_count=args.min_count,
        top_quantile_drop=args.top_drop,
        workers=args.workers,
        template_file=args.templates,
    )
    summary = {"out": str(out), "stats": result.stats.as_dict(), "read": result.read_report.as_dict()}
    if args.stats_out:
        Path(args.stats_out).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _emit(summary)
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    _emit(emitter.compute_stats(args.path).as_dict())
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    if bool(args.conllu) == bool(args.training):
        print("validate: pass exactly one of --conllu or --training", file=sys.stderr)
        return 2
    if args.conllu:
        report = udtree.ReadReport()
        round_trip_ok = 0
        with_text = 0
        for tree in udtree.read_conllu_file(args.conllu, report):
            has_text = any(c.startswith("# text") for c in tree.comments)
            if has_text:
                with_text += 1
                if udtree.detokenize(tree) == tree.original_text:
                    round_trip_ok += 1
        out = {
            **report.as_dict(),
            "round_trip_checked": with_text,
            "round_trip_exact": round_trip_ok,
            "ok": report.rejected == 0,
        }
        _emit(out)
        return 0 if out["ok"] else 1
    templates = load_preset(args.preset, args.templates)
    report = emitter.verify_training_file(args.training, templates)
    _emit(report)
    return 0 if report["ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iccc",
        description="Construct caption-correction training data from image-caption corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="read caption sources into the record JSONL")
    p.add_argument("--coco", action="append", help="COCO caption annotation file (repeatable)")
    p.add_argument("--jsonl", action="append", help="generic caption JSONL file (repeatable)")
    p.add_argument("--out", help="output records JSONL")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="debug-print concept annotations as JSONL")
    p.add_argument("--conllu", required=True)
    p.add_argument("--types", help="comma list: noun,verb,ent,pred,attr")
    p.add_argument("--out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("build-base", help="build the frequency-filtered concept pool")
    p.add_argument("--conllu", required=True)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--top-drop", type=float, default=0.001)
    p.add_argument("--dataset", help="restrict the pool to one dataset tag")
    p.add_argument("--out")
    p.set_defaults(func=cmd_build_base)

    p = sub.add_parser("construct", help="emit the mixed training JSONL")
    p.add_argument("--records", required=True, help="record JSONL from ingest")
    p.add_argument("--conllu", required=True, help="CoNLL-U parses of the records")
    p.add_argument("--out")
    p.add_argument("--base", help="prebuilt concept-base file (else built in-process)")
    p.add_argument("--p-c", dest="p_c", type=float, default=0.3)
    p.add_argument("--p-s", dest="p_s", type=float, default=0.15)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--top-drop", type=float, default=0.001)
    p.add_argument("--types", help="comma list: noun,verb,ent,pred,attr")
    p.add_argument("--preset", default="instructblip", help="template preset (blip2|instructblip)")
    p.add_argument("--templates", help="JSON template-preset file overriding built-ins")
    p.add_argument("--random-baseline", action="store_true",
                   help="structure-blind word corruption instead of concept edits")
    p.add_argument("--samples-per-caption", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--stats-out", help="also write the summary JSON here")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("stats", help="recount statistics from an emitted training file")
    p.add_argument("path")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("validate", help="validate CoNLL-U or replay-check a training file")
    p.add_argument("--conllu")
    p.add_argument("--training")
    p.add_argument("--preset", default="instructblip")
    p.add_argument("--templates")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

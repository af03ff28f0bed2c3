"""CLI: annotate a caption records file with dependency parses."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .runner import AdapterConfig, parse_corpus


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="caption-parse",
        description="Parse a caption records JSONL into CoNLL-U for the construction pipeline.",
    )
    parser.add_argument("--input", required=True, help="records JSONL (dataset, image_id, caption_id, text)")
    parser.add_argument("--out", required=True, help="output CoNLL-U path")
    parser.add_argument("--model", default="builtin-en", help="'builtin-en' or 'spacy:<model>'")
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--failures", help="failure log path (default: <out>.failures.log)")
    args = parser.parse_args(argv)

    out = Path(args.out)
    config = AdapterConfig(
        input_path=Path(args.input),
        output_path=out,
        model=args.model,
        batch_size=args.batch_size,
        workers=args.workers,
        failures_path=Path(args.failures) if args.failures else out.with_suffix(".failures.log"),
    )
    report = parse_corpus(config)
    json.dump({"out": str(out), **report.as_dict()}, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())

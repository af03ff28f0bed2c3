"""Batch annotation: caption records JSONL in, CoNLL-U out.

Caption order is preserved (output is append-ordered by input line number),
so a fixed model version yields byte-identical output regardless of worker
count. Captions the engine rejects are logged to the failure log and not
emitted.
"""

from __future__ import annotations

import json
import multiprocessing
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .engine import ParsedToken, get_engine


@dataclass(frozen=True)
class AdapterConfig:
    input_path: Path
    output_path: Path
    model: str = "builtin-en"
    batch_size: int = 64
    workers: int = 1
    failures_path: Path | None = None

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def _read_captions(path: Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            yield line_no, obj


def to_conllu_block(record: dict, tokens: list[ParsedToken], extra_comments: list[str] | None = None) -> str:
    lines = list(extra_comments or [])
    lines.append(f"# dataset = {record.get('dataset', '')}")
    lines.append(f"# caption_id = {record['caption_id']}")
    lines.append(f"# text = {record['text']}")
    for i, tok in enumerate(tokens, start=1):
        misc = "_" if tok.space_after else "SpaceAfter=No"
        lines.append(
            "\t".join(
                (str(i), tok.form, tok.lemma, tok.upos, "_", "_", str(tok.head), tok.deprel, "_", misc)
            )
        )
    return "\n".join(lines) + "\n\n"


_ENGINE = None
_MODEL = ""


def _worker_init(model: str) -> None:
    global _ENGINE, _MODEL
    _MODEL = model
    _ENGINE = get_engine(model)


def _parse_chunk(chunk: list[tuple[int, dict]]) -> list[tuple[int, dict, list | None, str | None]]:
    out = []
    for line_no, record in chunk:
        try:
            tokens = _ENGINE.parse(record["text"])
            out.append((line_no, record, tokens, None))
        except Exception as err:  # noqa: BLE001 - per-caption failures are logged, not fatal
            out.append((line_no, record, None, f"{type(err).__name__}: {err}"))
    return out


def _chunks(items: Iterator[tuple[int, dict]], size: int) -> Iterator[list[tuple[int, dict]]]:
    chunk: list[tuple[int, dict]] = []
    for item in items:
        chunk.append(item)
        if len(chunk) == size:
            yield chunk
            chunk = []
    if chunk:
        yield chunk


@dataclass
class ParseReport:
    emitted: int = 0
    failed: int = 0

    def as_dict(self) -> dict:
        return {"emitted": self.emitted, "failed": self.failed}


def parse_corpus(config: AdapterConfig) -> ParseReport:
    """Annotate every caption in the input records file; returns the tally."""
    engine = get_engine(config.model)  # fail fast on a bad model before forking
    header = [f"# parser = {engine.name} {engine.version}"]
    report = ParseReport()
    captions = _read_captions(config.input_path)
    failures: list[str] = []

    def results() -> Iterator[list[tuple[int, dict, list | None, str | None]]]:
        if config.workers == 1:
            _worker_init(config.model)
            for chunk in _chunks(captions, config.batch_size):
                yield _parse_chunk(chunk)
        else:
            with multiprocessing.Pool(
                config.workers, initializer=_worker_init, initargs=(config.model,)
            ) as pool:
                yield from pool.imap(_parse_chunk, _chunks(captions, config.batch_size))

    tmp = config.output_path.with_suffix(config.output_path.suffix + ".tmp")
    try:
        with open(tmp, "w", encoding="utf-8") as out:
            first = True
            for chunk_result in results():
                for line_no, record, tokens, error in chunk_result:
                    if error is not None:
                        failures.append(f"line {line_no}\t{record.get('caption_id', '?')}\t{error}")
                        report.failed += 1
                        continue
                    out.write(to_conllu_block(record, tokens, header if first else None))
                    first = False
                    report.emitted += 1
        tmp.replace(config.output_path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    if config.failures_path is not None:
        config.failures_path.write_text(
            "".join(line + "\n" for line in failures), encoding="utf-8"
        )
    return report

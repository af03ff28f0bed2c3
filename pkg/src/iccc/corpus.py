"""Caption corpus ingestion.

Readers turn source annotation files (COCO captions, generic caption JSONL)
into a normalized stream of CaptionRecord. Per-entry defects are skipped and
counted; structural defects are fatal. Text is NFC-normalized, trimmed, and
internal whitespace runs are collapsed — no case folding.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

_WS_RUN = re.compile(r"\s+")


class CorpusFormatError(Exception):
    """Structurally malformed input file (fatal)."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DuplicateCaptionError(Exception):
    """Two records share the same (dataset_tag, caption_id)."""


@dataclass(frozen=True)
class CaptionRecord:
    """One image-caption pair; image_id is an opaque reference, never opened."""

    dataset_tag: str
    image_id: str
    caption_id: str
    text: str

    @property
    def key(self) -> tuple[str, str]:
        return (self.dataset_tag, self.caption_id)


@dataclass
class IngestReport:
    yielded: int = 0
    skipped: dict[str, int] = field(default_factory=dict)

    def skip(self, reason: str) -> None:
        self.skipped[reason] = self.skipped.get(reason, 0) + 1

    def as_dict(self) -> dict:
        return {"yielded": self.yielded, "skipped": dict(sorted(self.skipped.items()))}


def normalize_text(raw: str) -> str:
    """NFC + outer trim + collapse internal whitespace runs to single spaces."""
    return _WS_RUN.sub(" ", unicodedata.normalize("NFC", raw).strip())


def ingest_coco(path: str | Path, report: IngestReport | None = None) -> Iterator[CaptionRecord]:
    """Yield records from a COCO caption annotation file, in file order.

    Entries missing a required key are skipped and counted; a file that is
    not valid JSON or lacks the "annotations" array is fatal.
    """
    report = report if report is not None else IngestReport()
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise CorpusFormatError(f"{path}: {err.msg}", offset=err.pos) from err
    annotations = payload.get("annotations")
    if not isinstance(annotations, list):
        raise CorpusFormatError(f"{path}: missing top-level 'annotations' array")
    for entry in annotations:
        if not isinstance(entry, dict):
            report.skip("bad_entry")
            continue
        try:
            image_id, caption_id, caption = entry["image_id"], entry["id"], entry["caption"]
        except (KeyError, TypeError):
            report.skip("missing_key")
            continue
        text = normalize_text(str(caption))
        if not text:
            report.skip("empty_text")
            continue
        report.yielded += 1
        yield CaptionRecord("coco", str(image_id), str(caption_id), text)


def ingest_jsonl(path: str | Path, report: IngestReport | None = None) -> Iterator[CaptionRecord]:
    """Yield records from caption JSONL, one object per line.

    Required keys: image_id, caption_id, caption; optional: dataset
    (default "jsonl"). Unparseable lines are skipped and counted; a duplicate
    (dataset, caption_id) is fatal.
    """
    report = report if report is not None else IngestReport()
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                image_id, caption_id = str(obj["image_id"]), str(obj["caption_id"])
                caption = str(obj["caption"])
            except (json.JSONDecodeError, KeyError, TypeError):
                report.skip("bad_line")
                continue
            dataset = str(obj.get("dataset", "jsonl"))
            text = normalize_text(caption)
            if not text:
                report.skip("empty_text")
                continue
            key = (dataset, caption_id)
            if key in seen:
                raise DuplicateCaptionError(f"duplicate caption key {key} in {path}")
            seen.add(key)
            report.yielded += 1
            yield CaptionRecord(dataset, image_id, caption_id, text)


def validate_records(records: Iterable[CaptionRecord]) -> Iterator[CaptionRecord]:
    """Pass-through validator enforcing CaptionRecord invariants corpus-wide."""
    seen: set[tuple[str, str]] = set()
    for rec in records:
        if not rec.text.strip():
            raise ValueError(f"empty caption text for {rec.key}")
        if rec.key in seen:
            raise DuplicateCaptionError(f"duplicate caption key {rec.key}")
        seen.add(rec.key)
        yield rec


def write_records(records: Iterable[CaptionRecord], path: str | Path) -> int:
    """Persist records as the intermediate JSONL (dataset, image_id, caption_id, text)."""
    count = 0
    with open(path, "w", encoding="utf-8") as fp:
        for rec in records:
            fp.write(
                json.dumps(
                    {
                        "dataset": rec.dataset_tag,
                        "image_id": rec.image_id,
                        "caption_id": rec.caption_id,
                        "text": rec.text,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
            count += 1
    return count


def read_records(path: str | Path) -> Iterator[CaptionRecord]:
    """Read back the intermediate record JSONL written by write_records."""
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            if not line.strip():
                continue
            obj = json.loads(line)
            yield CaptionRecord(obj["dataset"], obj["image_id"], obj["caption_id"], obj["text"])

"""Batch mixing and training-file emission.

Correction samples are mixed with original captioning pairs so that every
full batch holds exactly round(p_c x B) correction records; within-batch
order is a seeded shuffle. The originals stream paces the output; the
correction stream is consumed lazily, so its surplus stays untouched. Output
is JSONL, byte-reproducible for a fixed seed, and every correction record is
self-verifying via recorded character spans.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from itertools import islice
from pathlib import Path
from typing import Iterable, Iterator

from .extractor import ConceptType
from .perturb import (
    IcccSample,
    PerturbOp,
    PerturbationRecord,
    TemplateSet,
    template_pattern,
)
from .seeding import derive_rng


def round_half_up(value: float) -> int:
    return math.floor(value + 0.5)


@dataclass(frozen=True)
class MixConfig:
    p_c: float = 0.3
    p_s: float = 0.15
    batch_size: int = 64
    seed: int = 0
    enabled_types: frozenset[ConceptType] = frozenset(ConceptType)
    samples_per_caption: int = 1
    preset: str = "instructblip"
    random_baseline: bool = False

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_c <= 1.0 and 0.0 <= self.p_s <= 1.0):
            raise ValueError("p_c and p_s must lie in [0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.samples_per_caption < 1:
            raise ValueError("samples_per_caption must be >= 1")
        if not self.enabled_types and not self.random_baseline:
            raise ValueError("enabled_types must be non-empty")

    @property
    def iccc_per_batch(self) -> int:
        return round_half_up(self.p_c * self.batch_size)


@dataclass(frozen=True)
class TrainingRecord:
    kind: str  # "original" | "iccc"
    dataset: str
    image_id: str
    caption_id: str
    input_text: str  # instruction; empty for originals
    target_text: str  # caption for originals, correcting answer otherwise
    sample: IcccSample | None = None

    @classmethod
    def from_original(cls, dataset: str, image_id: str, caption_id: str, caption: str) -> "TrainingRecord":
        return cls("original", dataset, image_id, caption_id, "", caption)

    @classmethod
    def from_sample(cls, sample: IcccSample) -> "TrainingRecord":
        return cls(
            "iccc",
            sample.image_ref[0],
            sample.image_ref[1],
            sample.caption_ref[1],
            sample.instruction,
            sample.answer,
            sample=sample,
        )

    def to_json(self, batch_index: int) -> dict:
        obj = {
            "kind": self.kind,
            "dataset": self.dataset,
            "image": self.image_id,
            "caption_id": self.caption_id,
            "instruction": self.input_text,
            "target": self.target_text,
            "batch": batch_index,
        }
        if self.sample is not None:
            rec = self.sample.perturbation
            obj.update(
                {
                    "op": rec.op.value,
                    "concept_type": rec.concept_type.value if rec.concept_type else "random",
                    "original": self.sample.original_text,
                    "mismatched": self.sample.mismatched_caption,
                    "original_surfaces": list(rec.original_surfaces),
                    "injected": rec.injected_surface,
                    "spans": [list(s) for s in rec.spans],
                    "char_spans": [list(s) for s in rec.char_spans],
                    "template_ids": list(self.sample.template_ids),
                    "seed_path": {
                        "seed": self.sample.seed_path[0],
                        "caption_id": self.sample.seed_path[1],
                        "k": self.sample.seed_path[2],
                    },
                    "swap_feasible": self.sample.swap_feasible,
                }
            )
        return obj


def record_from_json(obj: dict) -> PerturbationRecord:
    """Rebuild the perturbation from an emitted training-file record."""
    concept = obj["concept_type"]
    return PerturbationRecord(
        op=PerturbOp(obj["op"]),
        concept_type=None if concept == "random" else ConceptType(concept),
        original_surfaces=tuple(obj["original_surfaces"]),
        injected_surface=obj.get("injected"),
        spans=tuple((int(a), int(b)) for a, b in obj["spans"]),
        char_spans=tuple((int(a), int(b)) for a, b in obj["char_spans"]),
    )


@dataclass
class MixReport:
    batches: int = 0
    deviations: int = 0

    def as_dict(self) -> dict:
        return {"batches": self.batches, "deviations": self.deviations}


def _tail_iccc_count(remaining_originals: int, p_c: float, batch_size: int) -> int:
    """Correction count n for the final partial batch: the smallest fixpoint of
    n == round(p_c x (remaining + n)), capped at batch_size - remaining."""
    cap = batch_size - remaining_originals
    best, best_gap = 0, float("inf")
    for n in range(cap + 1):
        target = round_half_up(p_c * (remaining_originals + n))
        if target == n:
            return n
        gap = abs(target - n)
        if gap < best_gap:
            best, best_gap = n, gap
    return best


def mix_stream(
    originals: Iterable[TrainingRecord],
    iccc: Iterable[TrainingRecord],
    config: MixConfig,
    report: MixReport | None = None,
) -> Iterator[list[TrainingRecord]]:
    """Yield seeded-shuffled batches at the configured proportion.

    The correction stream is pulled on demand: exactly iccc_per_batch records
    per full batch, a proportional count for the final partial batch. When it
    underruns a pull, the shortfall is filled from originals and counted as a
    deviation. With p_c = 1 the roles flip and originals are never touched.
    """
    report = report if report is not None else MixReport()
    n_i = config.iccc_per_batch
    n_o = config.batch_size - n_i
    orig_it, iccc_it = iter(originals), iter(iccc)

    def shuffled(batch: list[TrainingRecord], index: int) -> list[TrainingRecord]:
        rng = derive_rng(config.seed, "mix", index)
        out = list(batch)
        rng.shuffle(out)
        return out

    index = 0
    if n_o == 0:
        while True:
            batch = list(islice(iccc_it, config.batch_size))
            if not batch:
                return
            yield shuffled(batch, index)
            report.batches += 1
            index += 1
    while True:
        take_o = list(islice(orig_it, n_o))
        if not take_o:
            return
        if len(take_o) == n_o:
            take_i = list(islice(iccc_it, n_i))
            if len(take_i) < n_i:
                fill = list(islice(orig_it, n_i - len(take_i)))
                report.deviations += 1
                batch = take_o + take_i + fill
            else:
                batch = take_o + take_i
        else:
            n_tail = _tail_iccc_count(len(take_o), config.p_c, config.batch_size)
            take_i = list(islice(iccc_it, n_tail))
            if len(take_i) < n_tail:
                report.deviations += 1
            batch = take_o + take_i
        yield shuffled(batch, index)
        report.batches += 1
        index += 1


@dataclass
class StatsReport:
    total: int = 0
    by_kind: dict[str, int] = field(default_factory=dict)
    by_op: dict[str, int] = field(default_factory=dict)
    by_concept_type: dict[str, int] = field(default_factory=dict)
    by_instruction_template: dict[str, int] = field(default_factory=dict)
    by_answer_template: dict[str, int] = field(default_factory=dict)
    swap_feasible_count: int = 0
    swap_fraction: float = 0.0
    swap_fraction_feasible: float = 0.0
    # (batch size, correction count) -> number of batches
    batch_shapes: dict[tuple[int, int], int] = field(default_factory=dict)
    # Pipeline-side fields; not recoverable from the emitted file alone.
    parse_failures: int | None = None
    skips: dict[str, int] | None = None
    mix_deviations: int | None = None

    def batch_fractions(self) -> list[float]:
        fractions = []
        for (size, iccc_count), n in sorted(self.batch_shapes.items()):
            fractions.extend([iccc_count / size] * n)
        return fractions

    def file_projection(self) -> dict:
        """The fields recountable from the emitted file alone."""
        return {
            "total": self.total,
            "by_kind": dict(sorted(self.by_kind.items())),
            "by_op": dict(sorted(self.by_op.items())),
            "by_concept_type": dict(sorted(self.by_concept_type.items())),
            "by_instruction_template": dict(sorted(self.by_instruction_template.items())),
            "by_answer_template": dict(sorted(self.by_answer_template.items())),
            "swap_feasible_count": self.swap_feasible_count,
            "swap_fraction": round(self.swap_fraction, 10),
            "swap_fraction_feasible": round(self.swap_fraction_feasible, 10),
            "batch_shapes": [[size, icc, n] for (size, icc), n in sorted(self.batch_shapes.items())],
        }

    def as_dict(self) -> dict:
        out = self.file_projection()
        out["parse_failures"] = self.parse_failures
        out["skips"] = dict(sorted(self.skips.items())) if self.skips else self.skips
        out["mix_deviations"] = self.mix_deviations
        return out

    def tally(self, obj: dict) -> None:
        self.total += 1
        self.by_kind[obj["kind"]] = self.by_kind.get(obj["kind"], 0) + 1
        if obj["kind"] != "iccc":
            return
        self.by_op[obj["op"]] = self.by_op.get(obj["op"], 0) + 1
        ct = obj["concept_type"]
        self.by_concept_type[ct] = self.by_concept_type.get(ct, 0) + 1
        instr, answer = obj["template_ids"]
        self.by_instruction_template[str(instr)] = self.by_instruction_template.get(str(instr), 0) + 1
        self.by_answer_template[str(answer)] = self.by_answer_template.get(str(answer), 0) + 1
        if obj.get("swap_feasible"):
            self.swap_feasible_count += 1

    def finalize(self) -> None:
        iccc_total = self.by_kind.get("iccc", 0)
        swaps = self.by_op.get(PerturbOp.SWAP.value, 0)
        self.swap_fraction = swaps / iccc_total if iccc_total else 0.0
        self.swap_fraction_feasible = (
            swaps / self.swap_feasible_count if self.swap_feasible_count else 0.0
        )


def write_jsonl(
    batches: Iterable[list[TrainingRecord]],
    path: str | Path,
) -> StatsReport:
    """Write batches as JSONL (one record per line, batch order); returns the
    emission summary. The output appears atomically or not at all."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    stats = StatsReport()
    batch_counts: dict[int, list[int]] = {}
    try:
        with open(tmp, "w", encoding="utf-8") as fp:
            for batch_index, batch in enumerate(batches):
                size_iccc = [0, 0]
                for record in batch:
                    obj = record.to_json(batch_index)
                    fp.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")
                    stats.tally(obj)
                    size_iccc[0] += 1
                    size_iccc[1] += int(record.kind == "iccc")
                batch_counts[batch_index] = size_iccc
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    for size, iccc_count in batch_counts.values():
        key = (size, iccc_count)
        stats.batch_shapes[key] = stats.batch_shapes.get(key, 0) + 1
    stats.finalize()
    return stats


def read_training_file(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if obj["kind"] not in ("original", "iccc") or "batch" not in obj:
                    raise KeyError("kind/batch")
            except (json.JSONDecodeError, KeyError, TypeError) as err:
                raise ValueError(f"{path}:{line_no}: not a training record ({err})") from err
            yield obj


def compute_stats(path: str | Path) -> StatsReport:
    """Exact recount of every file-derivable report field."""
    stats = StatsReport()
    batch_counts: dict[int, list[int]] = {}
    for obj in read_training_file(path):
        stats.tally(obj)
        entry = batch_counts.setdefault(int(obj["batch"]), [0, 0])
        entry[0] += 1
        entry[1] += int(obj["kind"] == "iccc")
    for size, iccc_count in batch_counts.values():
        key = (size, iccc_count)
        stats.batch_shapes[key] = stats.batch_shapes.get(key, 0) + 1
    stats.finalize()
    return stats


def verify_training_file(path: str | Path, templates: TemplateSet) -> dict:
    """Replay and template-conformance check over an emitted file.

    Every correction record must re-derive its mismatched caption from the
    recorded perturbation, embed it verbatim in the instruction, and match one
    active template with exactly the recorded surfaces.
    """
    instr_patterns = [template_pattern(t) for t in templates.instructions]
    replace_patterns = [template_pattern(t) for t in templates.replace_answers]
    swap_patterns = [template_pattern(t) for t in templates.swap_answers]
    report = {
        "records": 0,
        "iccc": 0,
        "replay_failures": 0,
        "instruction_failures": 0,
        "answer_failures": 0,
    }
    for obj in read_training_file(path):
        report["records"] += 1
        if obj["kind"] != "iccc":
            continue
        report["iccc"] += 1
        record = record_from_json(obj)
        if record.replay(obj["original"]) != obj["mismatched"]:
            report["replay_failures"] += 1
        instruction_ok = obj["mismatched"] in obj["instruction"] and any(
            (m := p.fullmatch(obj["instruction"])) and m.group(1) == obj["mismatched"]
            for p in instr_patterns
        )
        if not instruction_ok:
            report["instruction_failures"] += 1
        if record.op is PerturbOp.REPLACE:
            expected = (record.injected_surface, record.original_surfaces[0])
            patterns = replace_patterns
        else:
            first, second = record.original_surfaces
            expected = (second, first)
            patterns = swap_patterns
        answer_ok = any(
            (m := p.fullmatch(obj["target"])) and m.groups() == expected for p in patterns
        )
        if not answer_ok:
            report["answer_failures"] += 1
    report["ok"] = (
        report["replay_failures"] == 0
        and report["instruction_failures"] == 0
        and report["answer_failures"] == 0
    )
    return report

"""End-to-end construction pipeline.

Wires corpus records and their CoNLL-U parses through extraction, the concept
base, perturbation, and the batch mixer. Construction is parallel over
captions; every caption's RNG substream is derived from (seed, dataset,
caption_id, sample index), so output bytes are independent of worker count.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .conceptbase import ConceptBase, build_base, filter_base, load_base
from .corpus import read_records
from .emitter import MixConfig, MixReport, StatsReport, TrainingRecord, mix_stream, write_jsonl
from .extractor import ALL_CONCEPT_TYPES, extract_all
from .perturb import CaptionSkipped, TemplateSet, construct_sample, load_preset
from .seeding import derive_rng
from .udtree import DepTree, ReadReport, read_conllu_file


def build_vocabulary(trees: Iterable[DepTree]) -> list[str]:
    """Distinct case-folded non-punctuation token forms, sorted."""
    vocab = {tok.form.casefold() for tree in trees for tok in tree.tokens if tok.upos != "PUNCT"}
    return sorted(vocab)


def base_from_trees(
    trees: Iterable[DepTree],
    min_count: int = 5,
    top_quantile_drop: float = 0.001,
    dataset: str | None = None,
) -> ConceptBase:
    """Build and frequency-filter the replacement pool from parsed captions."""
    annotations = (
        extract_all(tree)
        for tree in trees
        if dataset is None or tree.caption_ref[0] == dataset
    )
    return filter_base(build_base(annotations), min_count, top_quantile_drop)


# Worker-process state, installed once per worker by _worker_init.
_WORKER: dict = {}


def _worker_init(base: ConceptBase, templates: TemplateSet, config: MixConfig,
                 vocabulary: Sequence[str], images: dict[tuple[str, str], str]) -> None:
    _WORKER.update(
        base=base, templates=templates, config=config, vocabulary=vocabulary, images=images
    )


def _construct_for_tree(tree: DepTree) -> list:
    """Build the k samples for one caption; returns TrainingRecords or skip reasons."""
    base: ConceptBase = _WORKER["base"]
    templates: TemplateSet = _WORKER["templates"]
    config: MixConfig = _WORKER["config"]
    vocabulary: Sequence[str] = _WORKER["vocabulary"]
    dataset, caption_id = tree.caption_ref
    image_id = _WORKER["images"].get(tree.caption_ref, "")
    annotation = extract_all(tree, ALL_CONCEPT_TYPES)
    out: list = []
    for k in range(config.samples_per_caption):
        rng = derive_rng(config.seed, dataset, caption_id, k)
        try:
            sample = construct_sample(
                tree,
                annotation,
                base,
                config.enabled_types,
                config.p_s,
                templates,
                rng,
                image_ref=(dataset, image_id),
                seed_path=(config.seed, caption_id, k),
                random_baseline=config.random_baseline,
                vocabulary=vocabulary,
            )
            out.append(TrainingRecord.from_sample(sample))
        except CaptionSkipped as skip:
            out.append(str(skip.args[0]))
    return out


@dataclass
class ConstructResult:
    stats: StatsReport
    mix: MixReport
    read_report: ReadReport
    skips: dict[str, int]


def _iccc_stream(
    trees: Sequence[DepTree],
    workers: int,
    skips: dict[str, int],
    pool_args: tuple,
) -> Iterator[TrainingRecord]:
    def sift(results: Iterable[list]) -> Iterator[TrainingRecord]:
        for result in results:
            for item in result:
                if isinstance(item, TrainingRecord):
                    yield item
                else:
                    skips[item] = skips.get(item, 0) + 1

    if workers <= 1:
        _worker_init(*pool_args)
        yield from sift(map(_construct_for_tree, trees))
        return
    with multiprocessing.Pool(workers, initializer=_worker_init, initargs=pool_args) as pool:
        yield from sift(pool.imap(_construct_for_tree, trees, chunksize=16))


def run_construct(
    records_path: str | Path,
    conllu_path: str | Path,
    out_path: str | Path,
    config: MixConfig,
    base: ConceptBase | None = None,
    base_path: str | Path | None = None,
    min_count: int = 5,
    top_quantile_drop: float = 0.001,
    workers: int = 1,
    template_file: str | Path | None = None,
) -> ConstructResult:
    """Run the full construction: records + parses in, training JSONL out."""
    records = sorted(read_records(records_path), key=lambda r: r.key)
    images = {rec.key: rec.image_id for rec in records}

    read_report = ReadReport()
    trees = []
    skips: dict[str, int] = {}
    for tree in read_conllu_file(conllu_path, read_report):
        if tree.caption_ref in images:
            trees.append(tree)
        else:
            skips["unknown_caption"] = skips.get("unknown_caption", 0) + 1
    trees.sort(key=lambda t: t.caption_ref)

    if base is None:
        base = load_base(base_path) if base_path else base_from_trees(trees, min_count, top_quantile_drop)
    templates = load_preset(config.preset, template_file)
    vocabulary = build_vocabulary(trees) if config.random_baseline else []

    originals = (
        TrainingRecord.from_original(rec.dataset_tag, rec.image_id, rec.caption_id, rec.text)
        for rec in records
    )
    iccc = _iccc_stream(trees, workers, skips, (base, templates, config, vocabulary, images))

    mix_report = MixReport()
    stats = write_jsonl(mix_stream(originals, iccc, config, mix_report), out_path)
    stats.parse_failures = read_report.rejected
    stats.skips = skips
    stats.mix_deviations = mix_report.deviations
    return ConstructResult(stats=stats, mix=mix_report, read_report=read_report, skips=skips)

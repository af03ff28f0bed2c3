"""Acceptance suite: every release criterion at its stated tolerance.

Each test prints one [PASS]/[FAIL] line (visible under pytest -s). All
criteria run from the checked-in fixtures only; no parser component is
required.
"""

from __future__ import annotations

import hashlib
import time
from pathlib import Path

import pytest

from iccc.conceptbase import ConceptBase
from iccc.emitter import MixConfig, compute_stats, verify_training_file
from iccc.extractor import ALL_CONCEPT_TYPES, ConceptType, extract_all, parse_concept_types
from iccc.perturb import CaptionSkipped, IcccSample, PerturbOp, construct_sample, load_preset
from iccc.pipeline import base_from_trees, build_vocabulary, run_construct
from iccc.seeding import derive_rng
from iccc.udtree import DepTree

def _report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def mini_base(mini_trees) -> ConceptBase:
    return base_from_trees(mini_trees, min_count=5, top_quantile_drop=0.001)


def _construct_many(
    trees: list[DepTree],
    base: ConceptBase,
    p_s: float,
    seed: int,
    per_caption: int,
    enabled=ALL_CONCEPT_TYPES,
    random_baseline: bool = False,
) -> tuple[list[IcccSample], dict[str, int]]:
    templates = load_preset("instructblip")
    vocabulary = build_vocabulary(trees) if random_baseline else []
    samples: list[IcccSample] = []
    skips: dict[str, int] = {}
    for tree in trees:
        annotation = extract_all(tree)
        dataset, caption_id = tree.caption_ref
        for k in range(per_caption):
            rng = derive_rng(seed, dataset, caption_id, k)
            try:
                samples.append(
                    construct_sample(
                        tree, annotation, base, enabled, p_s, templates, rng,
                        image_ref=(dataset, f"img-{caption_id}"),
                        seed_path=(seed, caption_id, k),
                        random_baseline=random_baseline,
                        vocabulary=vocabulary,
                    )
                )
            except CaptionSkipped as skip:
                skips[skip.args[0]] = skips.get(skip.args[0], 0) + 1
    return samples, skips


def test_golden_extraction_suite(golden_trees, golden_units) -> None:
    started = time.perf_counter()
    mismatches = 0
    for caption_id, expected in golden_units.items():
        annotation = extract_all(golden_trees[caption_id])
        got: dict = {ct.value: [] for ct in ConceptType}
        for unit in annotation.units:
            got[unit.concept_type.value].append({"span": list(unit.span), "surface": unit.surface})
        for units in got.values():
            units.sort(key=lambda u: u["span"])
        if got != expected:
            mismatches += 1
    elapsed = time.perf_counter() - started
    _report(
        "golden extraction suite",
        mismatches == 0 and elapsed < 1.0,
        f"{mismatches} mismatches over {len(golden_units)} sentences in {elapsed:.3f}s (< 1s)",
    )


def test_replace_exclusion_10k(mini_trees, mini_base) -> None:
    started = time.perf_counter()
    samples, _ = _construct_many(mini_trees, mini_base, p_s=0.0, seed=101, per_caption=11)
    texts = {tree.caption_ref: tree.original_text.casefold() for tree in mini_trees}
    pool = samples[:10_000]
    violations = sum(
        1
        for s in pool
        if s.perturbation.op is PerturbOp.REPLACE
        and s.perturbation.injected_surface.casefold() in texts[s.caption_ref]
    )
    elapsed = time.perf_counter() - started
    _report(
        "replace exclusion",
        len(pool) == 10_000 and violations == 0 and elapsed < 30.0,
        f"{violations} caption-occurrence violations over {len(pool)} samples in {elapsed:.1f}s (< 30s)",
    )


def test_swap_fallback_exhaustive(mini_trees, mini_base) -> None:
    samples, _ = _construct_many(mini_trees, mini_base, p_s=1.0, seed=102, per_caption=1)
    infeasible = [s for s in samples if not s.swap_feasible]
    bad = [s for s in infeasible if s.perturbation.op is not PerturbOp.REPLACE]
    _report(
        "swap fallback",
        len(infeasible) > 0 and not bad,
        f"{len(infeasible)} infeasible-swap samples, {len(bad)} not replace",
    )


def test_p_s_calibration(mini_trees, mini_base) -> None:
    results = []
    ok = True
    for p_s in (0.0, 0.15, 0.3):
        samples, _ = _construct_many(mini_trees, mini_base, p_s=p_s, seed=103, per_caption=11)
        pool = samples[:10_000]
        feasible = [s for s in pool if s.swap_feasible]
        swaps = sum(s.perturbation.op is PerturbOp.SWAP for s in feasible)
        fraction = swaps / len(feasible)
        results.append(f"p_s={p_s}: {fraction:.4f} over {len(feasible)} feasible")
        ok = ok and len(pool) == 10_000 and abs(fraction - p_s) <= 0.02
    _report("p_s calibration (+/- 0.02)", ok, "; ".join(results))


PAPER_PRESETS = [(0.3, 0.15), (0.3, 0.0), (0.01, 0.2), (0.3, 0.3)]


def test_p_c_mixing_paper_presets(mini_paths, tmp_path: Path) -> None:
    details = []
    ok = True
    for p_c, p_s in PAPER_PRESETS:
        out = tmp_path / f"train_{p_c}_{p_s}.jsonl"
        config = MixConfig(p_c=p_c, p_s=p_s, batch_size=64, seed=104)
        run_construct(mini_paths["records"], mini_paths["conllu"], out, config)
        stats = compute_stats(out)
        expected = config.iccc_per_batch
        full = {shape: n for shape, n in stats.batch_shapes.items() if shape[0] == 64}
        bad = {shape: n for shape, n in full.items() if shape[1] != expected}
        details.append(f"(p_c={p_c}, p_s={p_s}): {sum(full.values())} full batches @ {expected}")
        ok = ok and sum(full.values()) > 0 and not bad
    _report("p_c mixing", ok, "; ".join(details))


def test_replay_self_verification(mini_paths, tmp_path: Path) -> None:
    out = tmp_path / "train.jsonl"
    config = MixConfig(p_c=0.3, p_s=0.15, batch_size=64, seed=105)
    run_construct(mini_paths["records"], mini_paths["conllu"], out, config)
    report = verify_training_file(out, load_preset("instructblip"))
    _report(
        "replay self-verification",
        report["iccc"] > 0 and report["replay_failures"] == 0,
        f"{report['replay_failures']} replay failures over {report['iccc']} correction records",
    )


def test_template_conformance(mini_paths, tmp_path: Path) -> None:
    details = []
    ok = True
    for preset in ("blip2", "instructblip"):
        out = tmp_path / f"train_{preset}.jsonl"
        config = MixConfig(p_c=0.3, p_s=0.2, batch_size=64, seed=106, preset=preset)
        run_construct(mini_paths["records"], mini_paths["conllu"], out, config)
        report = verify_training_file(out, load_preset(preset))
        failures = report["instruction_failures"] + report["answer_failures"]
        details.append(f"{preset}: {failures} nonconforming of {report['iccc']}")
        ok = ok and report["iccc"] > 0 and failures == 0
    _report("template conformance", ok, "; ".join(details))


def test_determinism_across_runs_and_workers(mini_paths, tmp_path: Path) -> None:
    config = MixConfig(p_c=0.3, p_s=0.15, batch_size=64, seed=107)
    digests = {}
    for label, workers in (("w1-a", 1), ("w1-b", 1), ("w2", 2), ("w8", 8)):
        out = tmp_path / f"train_{label}.jsonl"
        run_construct(mini_paths["records"], mini_paths["conllu"], out, config, workers=workers)
        digests[label] = hashlib.sha256(out.read_bytes()).hexdigest()
    unique = set(digests.values())
    _report(
        "determinism",
        len(unique) == 1,
        f"sha256 over runs {sorted(digests)} -> {len(unique)} distinct digest(s)",
    )


ABLATION_SUBSETS = ["noun,verb", "ent,pred,attr", "noun,ent", "verb,pred,attr"]


def test_ablation_configurations(mini_paths, tmp_path: Path) -> None:
    from iccc.cli import main as cli_main

    details = []
    ok = True
    for spec in ABLATION_SUBSETS:
        out = tmp_path / f"train_{spec.replace(',', '_')}.jsonl"
        code = cli_main(
            [
                "construct",
                "--records", str(mini_paths["records"]),
                "--conllu", str(mini_paths["conllu"]),
                "--out", str(out),
                "--types", spec,
                "--p-c", "0.3",
                "--p-s", "0.15",
                "--seed", "108",
            ]
        )
        stats = compute_stats(out)
        enabled_values = {ct.value for ct in parse_concept_types(spec)}
        seen = set(stats.by_concept_type)
        iccc_count = stats.by_kind.get("iccc", 0)
        subset_ok = code == 0 and iccc_count > 0 and seen == enabled_values
        details.append(f"--types {spec}: {iccc_count} samples, types {sorted(seen)}")
        ok = ok and subset_ok
    out = tmp_path / "train_random.jsonl"
    code = cli_main(
        [
            "construct",
            "--records", str(mini_paths["records"]),
            "--conllu", str(mini_paths["conllu"]),
            "--out", str(out),
            "--random-baseline",
            "--seed", "108",
        ]
    )
    stats = compute_stats(out)
    iccc_count = stats.by_kind.get("iccc", 0)
    random_ok = code == 0 and iccc_count > 0 and set(stats.by_concept_type) == {"random"}
    details.append(f"--random-baseline: {iccc_count} samples")
    ok = ok and random_ok
    _report("ablation configurations", ok, "; ".join(details))

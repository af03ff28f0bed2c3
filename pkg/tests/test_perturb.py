from __future__ import annotations

import math
import random

import pytest

from iccc.conceptbase import BaseType, ConceptBase
from iccc.extractor import ConceptType, extract_all
from iccc.perturb import (
    BUILTIN_PRESETS,
    CaptionSkipped,
    PerturbOp,
    SwapDegenerate,
    TemplateSet,
    apply_replace,
    apply_swap,
    choose_operation,
    construct_sample,
    corrupt_random,
    load_preset,
    render_sample,
    select_target,
    template_pattern,
)
from iccc.seeding import derive_rng
from iccc.udtree import DepTree, Token, detokenize


def _tree(text_tokens: list[tuple[str, str, int, str]], ref=("t", "t1")) -> DepTree:
    tokens = []
    n = len(text_tokens)
    for i, (form, upos, head, deprel) in enumerate(text_tokens, start=1):
        tokens.append(Token.make(i, form, upos, head, deprel, space_after=i < n))
    toks = tuple(tokens)
    return DepTree(ref, toks, detokenize(toks))


RIDING = _tree(
    [
        ("a", "DET", 3, "det"),
        ("young", "ADJ", 3, "amod"),
        ("man", "NOUN", 0, "root"),
        ("riding", "VERB", 3, "acl"),
        ("a", "DET", 7, "det"),
        ("red", "ADJ", 7, "amod"),
        ("bike", "NOUN", 4, "obj"),
    ]
)


def _base(**tables: list[str]) -> ConceptBase:
    base = ConceptBase()
    for name, surfaces in tables.items():
        for surface in surfaces:
            base.tables[BaseType(name)].add(surface)
    return base


def test_choose_operation_degenerate_bernoulli() -> None:
    annotation = extract_all(RIDING)
    rng = random.Random(0)
    assert all(
        choose_operation(annotation, ConceptType.NOUN_WORD, 0.0, rng) is PerturbOp.REPLACE
        for _ in range(50)
    )
    assert all(
        choose_operation(annotation, ConceptType.NOUN_WORD, 1.0, rng) is PerturbOp.SWAP
        for _ in range(50)
    )


def test_choose_operation_fallback_single_unit() -> None:
    annotation = extract_all(RIDING)
    rng = random.Random(0)
    # Exactly one verb word: swap intent must fall back to replace.
    assert all(
        choose_operation(annotation, ConceptType.VERB_WORD, 1.0, rng) is PerturbOp.REPLACE
        for _ in range(50)
    )


def test_select_target_forced_choice() -> None:
    annotation = extract_all(RIDING)
    unit = select_target(annotation, {ConceptType.VERB_WORD}, random.Random(0))
    assert unit.surface == "riding"


def test_select_target_no_units_skips() -> None:
    annotation = extract_all(_tree([("running", "VERB", 0, "root")]))
    with pytest.raises(CaptionSkipped):
        select_target(annotation, {ConceptType.NOUN_WORD}, random.Random(0))


def test_select_target_uniform_over_units() -> None:
    annotation = extract_all(RIDING, {ConceptType.NOUN_WORD, ConceptType.VERB_WORD})
    rng = random.Random(123)
    draws = 30_000
    counts: dict[str, int] = {}
    for _ in range(draws):
        unit = select_target(annotation, {ConceptType.NOUN_WORD, ConceptType.VERB_WORD}, rng)
        counts[unit.surface] = counts.get(unit.surface, 0) + 1
    assert set(counts) == {"man", "bike", "riding"}
    expected = draws / 3
    sigma = math.sqrt(draws * (1 / 3) * (2 / 3))
    for surface, count in counts.items():
        assert abs(count - expected) <= 3 * sigma, (surface, count)


def test_apply_replace_entity_phrase() -> None:
    annotation = extract_all(RIDING)
    unit = next(u for u in annotation.units if u.surface == "a red bike")
    base = _base(entity=["a wooden bench", "a tall tree"])
    rng = random.Random(5)
    mismatched, record = apply_replace(RIDING, annotation, unit, base, rng)
    assert mismatched in ("a young man riding a wooden bench", "a young man riding a tall tree")
    assert record.injected_surface != record.original_surfaces[0]
    assert record.replay(RIDING.original_text) == mismatched


def test_apply_replace_predicate_cross_granularity() -> None:
    annotation = extract_all(RIDING)
    unit = next(u for u in annotation.units if u.concept_type is ConceptType.PREDICATE_PHRASE)
    base = _base(predicate=["sitting on", "standing near"])
    mismatched, record = apply_replace(RIDING, annotation, unit, base, random.Random(1))
    assert mismatched.startswith("a young man ")
    assert mismatched.endswith(" a red bike")
    assert record.op is PerturbOp.REPLACE


def test_apply_replace_excludes_caption_substrings() -> None:
    annotation = extract_all(RIDING)
    unit = next(u for u in annotation.units if u.surface == "man")
    # "riding" occurs in the caption; "bike" too. Only "horse" is eligible.
    base = _base(entity=["riding", "bike", "horse"])
    for seed in range(100):
        _, record = apply_replace(RIDING, annotation, unit, base, random.Random(seed))
        assert record.injected_surface == "horse"


def test_apply_replace_lowercases_mid_sentence() -> None:
    annotation = extract_all(RIDING)
    unit = next(u for u in annotation.units if u.surface == "a red bike")
    base = _base(entity=["A Wooden Bench", "A Tall Tree"])
    mismatched, record = apply_replace(RIDING, annotation, unit, base, random.Random(0))
    assert record.injected_surface in ("a wooden bench", "a tall tree")
    assert mismatched == f"a young man riding {record.injected_surface}"


def test_apply_replace_keeps_exemplar_case_sentence_initial() -> None:
    tree = _tree([("Mary", "PROPN", 2, "nsubj"), ("runs", "VERB", 0, "root")])
    annotation = extract_all(tree)
    unit = next(u for u in annotation.units if u.surface == "Mary")
    base = _base(entity=["John", "Paris"])
    mismatched, record = apply_replace(tree, annotation, unit, base, random.Random(3))
    assert record.injected_surface in ("John", "Paris")
    assert mismatched == f"{record.injected_surface} runs"


def test_apply_swap_noun_words() -> None:
    tree = _tree(
        [
            ("a", "DET", 2, "det"),
            ("dog", "NOUN", 3, "nsubj"),
            ("chasing", "VERB", 0, "root"),
            ("a", "DET", 5, "det"),
            ("cat", "NOUN", 3, "obj"),
        ]
    )
    annotation = extract_all(tree, {ConceptType.NOUN_WORD})
    dog, cat = annotation.units
    mismatched, record = apply_swap(tree, dog, cat)
    assert mismatched == "a cat chasing a dog"
    assert record.original_surfaces == ("dog", "cat")
    assert record.replay(tree.original_text) == mismatched
    # Character multiset of the two surfaces is preserved.
    assert sorted(mismatched) == sorted(tree.original_text)


def test_apply_swap_entity_phrases() -> None:
    tree = _tree(
        [
            ("a", "DET", 3, "det"),
            ("small", "ADJ", 3, "amod"),
            ("dog", "NOUN", 0, "root"),
            ("beside", "ADP", 7, "case"),
            ("a", "DET", 7, "det"),
            ("tall", "ADJ", 7, "amod"),
            ("man", "NOUN", 3, "nmod"),
        ]
    )
    annotation = extract_all(tree, {ConceptType.ENTITY_PHRASE})
    first, second = annotation.units
    mismatched, _ = apply_swap(tree, first, second)
    assert mismatched == "a tall man beside a small dog"


def test_apply_swap_degenerate_identical_surfaces() -> None:
    tree = _tree(
        [
            ("a", "DET", 2, "det"),
            ("dog", "NOUN", 3, "nsubj"),
            ("meets", "VERB", 0, "root"),
            ("a", "DET", 5, "det"),
            ("dog", "NOUN", 3, "obj"),
        ]
    )
    annotation = extract_all(tree, {ConceptType.NOUN_WORD})
    with pytest.raises(SwapDegenerate):
        apply_swap(tree, *annotation.units)


def test_corrupt_random_forced_choice() -> None:
    tree = _tree([("dog", "NOUN", 0, "root")])
    mismatched, record = corrupt_random(tree, ["cat", "dog"], random.Random(0))
    assert mismatched == "cat"
    assert record.concept_type is None


def test_corrupt_random_skips_punct_only() -> None:
    tree = _tree([(".", "PUNCT", 0, "root")])
    with pytest.raises(CaptionSkipped):
        corrupt_random(tree, ["cat"], random.Random(0))


def test_corrupt_random_uniform_position() -> None:
    tree = RIDING
    rng = random.Random(9)
    draws = 10_000
    counts = [0] * len(tree)
    vocab = ["zebra", "sofa", "lamp"]
    for _ in range(draws):
        _, record = corrupt_random(tree, vocab, rng)
        counts[record.spans[0][0] - 1] += 1
    eligible = [tok.index for tok in tree.tokens if tok.upos != "PUNCT"]
    expected = draws / len(eligible)
    sigma = math.sqrt(draws * (1 / len(eligible)) * (1 - 1 / len(eligible)))
    for index in eligible:
        assert abs(counts[index - 1] - expected) <= 3 * sigma


def test_render_replace_answer_slot_order() -> None:
    templates = TemplateSet(
        preset="single",
        instructions=('Check the caption: "{}"',),
        replace_answers=('"{}" should be "{}"',),
        swap_answers=('"{}" and "{}" are swapped',),
    )
    annotation = extract_all(RIDING)
    unit = next(u for u in annotation.units if u.surface == "a red bike")
    # "a red bike" is in the caption, so the draw is forced.
    base = _base(entity=["a wooden bench", "a red bike"])
    mismatched, record = apply_replace(RIDING, annotation, unit, base, random.Random(0))
    sample = render_sample(
        ("t", "i1"), RIDING.caption_ref, RIDING.original_text, mismatched, record,
        templates, random.Random(0), seed_path=(0, "t1", 0), swap_feasible=True,
    )
    assert sample.answer == '"a wooden bench" should be "a red bike"'
    assert sample.instruction == f'Check the caption: "{mismatched}"'
    assert mismatched in sample.instruction


def test_render_swap_answer_post_swap_order() -> None:
    templates = TemplateSet(
        preset="single",
        instructions=('Check the caption: "{}"',),
        replace_answers=('"{}" should be "{}"',),
        swap_answers=('"{}" and "{}" are swapped',),
    )
    tree = _tree(
        [
            ("a", "DET", 2, "det"),
            ("dog", "NOUN", 3, "nsubj"),
            ("chasing", "VERB", 0, "root"),
            ("a", "DET", 5, "det"),
            ("cat", "NOUN", 3, "obj"),
        ]
    )
    annotation = extract_all(tree, {ConceptType.NOUN_WORD})
    mismatched, record = apply_swap(tree, *annotation.units)
    sample = render_sample(
        ("t", "i1"), tree.caption_ref, tree.original_text, mismatched, record,
        templates, random.Random(0), seed_path=(0, "t1", 0), swap_feasible=True,
    )
    assert sample.answer == '"cat" and "dog" are swapped'


def test_builtin_presets_shapes() -> None:
    blip2 = load_preset("blip2")
    assert blip2.instructions == ('Check the caption: "{}"',)
    instructblip = load_preset("instructblip")
    assert len(instructblip.instructions) == 3
    assert len(instructblip.replace_answers) == 4
    assert len(instructblip.swap_answers) == 4


def test_preset_file_loading(tmp_path) -> None:
    import json

    path = tmp_path / "presets.json"
    path.write_text(
        json.dumps(
            {
                "mini": {
                    "instructions": ["Fix: {}"],
                    "replace_answers": ["{} -> {}"],
                    "swap_answers": ["{} <> {}"],
                }
            }
        ),
        encoding="utf-8",
    )
    preset = load_preset("mini", path)
    assert preset.instructions == ("Fix: {}",)
    with pytest.raises(KeyError):
        load_preset("absent", path)


def test_template_placeholder_validation() -> None:
    with pytest.raises(ValueError):
        TemplateSet("bad", ("no slot",), ('"{}" x "{}"',), ('"{}" y "{}"',))
    with pytest.raises(ValueError):
        TemplateSet("bad", ("ok {}",), ('only one "{}"',), ('"{}" y "{}"',))


def test_template_pattern_roundtrip() -> None:
    for preset in BUILTIN_PRESETS.values():
        for template in preset.replace_answers + preset.swap_answers:
            rendered = template.format("first thing", "second thing")
            match = template_pattern(template).fullmatch(rendered)
            assert match and match.groups() == ("first thing", "second thing")


def test_construct_skips_types_with_disabled_base() -> None:
    annotation = extract_all(RIDING)
    # Attribute pool has one entry (replacement-disabled); entity pool works.
    base = _base(entity=["a tall tree", "horse"], attribute=["blue"])
    templates = load_preset("blip2")
    rng = random.Random(1)
    sample = construct_sample(
        RIDING, annotation, base,
        {ConceptType.ATTRIBUTE_PHRASE, ConceptType.NOUN_WORD}, 0.0, templates, rng,
        image_ref=("t", "i1"), seed_path=(0, "t1", 0),
    )
    assert sample.perturbation.concept_type is ConceptType.NOUN_WORD
    with pytest.raises(CaptionSkipped) as skip:
        construct_sample(
            RIDING, annotation, base, {ConceptType.ATTRIBUTE_PHRASE}, 0.0, templates,
            random.Random(2), image_ref=("t", "i1"), seed_path=(0, "t1", 0),
        )
    assert skip.value.args[0] == "types_disabled"


def test_construct_sample_deterministic_per_seed_path() -> None:
    annotation = extract_all(RIDING)
    base = _base(
        entity=["a wooden bench", "a tall tree", "horse"],
        predicate=["sitting on", "standing near"],
        attribute=["blue", "shiny"],
    )
    templates = load_preset("instructblip")

    def build():
        rng = derive_rng(99, "t", "t1", 0)
        return construct_sample(
            RIDING, annotation, base, set(ConceptType), 0.3, templates, rng,
            image_ref=("t", "i1"), seed_path=(99, "t1", 0),
        )

    assert build() == build()

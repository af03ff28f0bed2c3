"""Caption perturbation and sample rendering.

Replace swaps in an external same-type concept; swap exchanges two same-type
units inside the caption. The operation is drawn per sample from a Bernoulli
with parameter p_s, falling back to replace when fewer than two units of the
selected type exist. Rendered samples pair an instruction containing the
mismatched caption with a correcting answer, both drawn from template presets.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .conceptbase import (
    CONCEPT_TO_BASE,
    ConceptBase,
    NoReplacementAvailable,
    caption_exclusions,
    sample_replacement,
)
from .extractor import ConceptAnnotation, ConceptType, LinguisticUnit
from .udtree import DepTree, Span, detokenize, token_span_to_char_span


class PerturbOp(str, Enum):
    REPLACE = "replace"
    SWAP = "swap"


class CaptionSkipped(Exception):
    """This caption cannot yield a correction sample; reason in args[0]."""


class SwapDegenerate(Exception):
    """Both swap candidates share one case-folded surface."""


@dataclass(frozen=True)
class PerturbationRecord:
    op: PerturbOp
    concept_type: ConceptType | None  # None for the structure-blind baseline
    original_surfaces: tuple[str, ...]  # 1 for replace, 2 for swap (surface order)
    injected_surface: str | None  # replace only, as spliced
    spans: tuple[Span, ...]
    char_spans: tuple[tuple[int, int], ...]  # into the original caption text

    def replay(self, original_text: str) -> str:
        """Re-apply the recorded splice(s) to the original text."""
        if self.op is PerturbOp.REPLACE:
            (start, end), = self.char_spans
            return original_text[:start] + (self.injected_surface or "") + original_text[end:]
        (a_start, a_end), (b_start, b_end) = self.char_spans
        first, second = self.original_surfaces
        return (
            original_text[:a_start]
            + second
            + original_text[a_end:b_start]
            + first
            + original_text[b_end:]
        )


@dataclass(frozen=True)
class TemplateSet:
    preset: str
    instructions: tuple[str, ...]
    replace_answers: tuple[str, ...]
    swap_answers: tuple[str, ...]

    def __post_init__(self) -> None:
        for template in self.instructions:
            if template.count("{}") != 1:
                raise ValueError(f"instruction template needs exactly one slot: {template!r}")
        for template in self.replace_answers + self.swap_answers:
            if template.count("{}") != 2:
                raise ValueError(f"answer template needs exactly two slots: {template!r}")


BUILTIN_PRESETS = {
    # The short-instruction preset keeps only "Check the caption".
    "blip2": TemplateSet(
        preset="blip2",
        instructions=('Check the caption: "{}"',),
        replace_answers=(
            '"{}" should be "{}"',
            '"{}" could be "{}"',
            '"{}" is "{}"',
            '"{}" actually is "{}"',
        ),
        swap_answers=(
            '"{}" and "{}" are swapped',
            '"{}" and "{}" need to switch',
            '"{}" and "{}" should exchange positions',
            '"{}" and "{}" need to be swapped',
        ),
    ),
    "instructblip": TemplateSet(
        preset="instructblip",
        instructions=(
            'Check the caption: "{}"',
            'Check the caption according to the image: "{}"',
            'Based on the image, please correct the caption: "{}"',
        ),
        replace_answers=(
            '"{}" should be "{}"',
            '"{}" could be "{}"',
            '"{}" is "{}"',
            '"{}" actually is "{}"',
        ),
        swap_answers=(
            '"{}" and "{}" are swapped',
            '"{}" and "{}" need to switch',
            '"{}" and "{}" should exchange positions',
            '"{}" and "{}" need to be swapped',
        ),
    ),
}


def load_preset(name: str, path: str | Path | None = None) -> TemplateSet:
    """Load a named preset, from a JSON config file if given, else built-ins."""
    if path is not None:
        presets = json.loads(Path(path).read_text(encoding="utf-8"))
        if name not in presets:
            raise KeyError(f"preset {name!r} not found in {path}")
        entry = presets[name]
        return TemplateSet(
            preset=name,
            instructions=tuple(entry["instructions"]),
            replace_answers=tuple(entry["replace_answers"]),
            swap_answers=tuple(entry["swap_answers"]),
        )
    if name not in BUILTIN_PRESETS:
        raise KeyError(f"unknown preset {name!r}; built-ins: {sorted(BUILTIN_PRESETS)}")
    return BUILTIN_PRESETS[name]


def template_pattern(template: str) -> re.Pattern[str]:
    """Regex matching the template with each slot captured."""
    return re.compile("(.+)".join(re.escape(part) for part in template.split("{}")), re.DOTALL)


@dataclass(frozen=True)
class IcccSample:
    image_ref: tuple[str, str]  # (dataset_tag, image_id)
    caption_ref: tuple[str, str]
    original_text: str
    instruction: str
    mismatched_caption: str
    answer: str
    perturbation: PerturbationRecord
    template_ids: tuple[int, int]
    seed_path: tuple[int, str, int]  # (global seed, caption_id, sample index)
    swap_feasible: bool


_TYPE_ORDER = {ct: i for i, ct in enumerate(ConceptType)}


def _ordered(units: Iterable[LinguisticUnit]) -> list[LinguisticUnit]:
    return sorted(units, key=lambda u: (_TYPE_ORDER[u.concept_type], u.span))


def select_target(
    annotation: ConceptAnnotation,
    enabled: Iterable[ConceptType],
    rng: random.Random,
) -> LinguisticUnit:
    """Uniform draw over all units of the enabled types."""
    pool = _ordered(u for u in annotation.units if u.concept_type in frozenset(enabled))
    if not pool:
        raise CaptionSkipped("no_units")
    return rng.choice(pool)


def choose_operation(
    annotation: ConceptAnnotation,
    concept_type: ConceptType,
    p_s: float,
    rng: random.Random,
) -> PerturbOp:
    """Draw swap with probability p_s; fall back to replace when the caption
    lacks a second unit of the type."""
    op = PerturbOp.SWAP if rng.random() < p_s else PerturbOp.REPLACE
    if op is PerturbOp.SWAP and len(annotation.of_type(concept_type)) < 2:
        return PerturbOp.REPLACE
    return op


def _adjust_case(surface: str, sentence_initial: bool) -> str:
    return surface if sentence_initial else surface.lower()


def apply_replace(
    tree: DepTree,
    annotation: ConceptAnnotation,
    unit: LinguisticUnit,
    base: ConceptBase,
    rng: random.Random,
) -> tuple[str, PerturbationRecord]:
    """Splice in an external same-base-type concept absent from this caption."""
    base_type = CONCEPT_TO_BASE[unit.concept_type]
    entry = sample_replacement(
        base, base_type, caption_exclusions(annotation, base_type, tree.original_text), rng
    )
    injected = _adjust_case(entry.exemplar, sentence_initial=unit.span[0] == 1)
    mismatched = detokenize(tree, {unit.span: injected})
    record = PerturbationRecord(
        op=PerturbOp.REPLACE,
        concept_type=unit.concept_type,
        original_surfaces=(unit.surface,),
        injected_surface=injected,
        spans=(unit.span,),
        char_spans=(token_span_to_char_span(tree, unit.span),),
    )
    return mismatched, record


def apply_swap(
    tree: DepTree,
    unit_a: LinguisticUnit,
    unit_b: LinguisticUnit,
) -> tuple[str, PerturbationRecord]:
    """Exchange two same-type units verbatim (character multiset preserved)."""
    if unit_a.concept_type != unit_b.concept_type:
        raise ValueError("swap requires units of one concept type")
    first, second = sorted((unit_a, unit_b), key=lambda u: u.span)
    if first.span[1] >= second.span[0]:
        raise ValueError("swap spans must be disjoint")
    if first.surface.casefold() == second.surface.casefold():
        raise SwapDegenerate(first.surface)
    mismatched = detokenize(tree, {first.span: second.surface, second.span: first.surface})
    record = PerturbationRecord(
        op=PerturbOp.SWAP,
        concept_type=first.concept_type,
        original_surfaces=(first.surface, second.surface),
        injected_surface=None,
        spans=(first.span, second.span),
        char_spans=(
            token_span_to_char_span(tree, first.span),
            token_span_to_char_span(tree, second.span),
        ),
    )
    return mismatched, record


def corrupt_random(
    tree: DepTree,
    vocabulary: Sequence[str],
    rng: random.Random,
) -> tuple[str, PerturbationRecord]:
    """Structure-blind baseline: swap one non-punctuation token for a random
    vocabulary word."""
    positions = [tok.index for tok in tree.tokens if tok.upos != "PUNCT"]
    if not positions:
        raise CaptionSkipped("punct_only")
    index = rng.choice(positions)
    original = tree.token(index).form
    candidates = [w for w in vocabulary if w != original.casefold()]
    if not candidates:
        raise CaptionSkipped("vocab_exhausted")
    injected = _adjust_case(rng.choice(candidates), sentence_initial=index == 1)
    span: Span = (index, index)
    mismatched = detokenize(tree, {span: injected})
    record = PerturbationRecord(
        op=PerturbOp.REPLACE,
        concept_type=None,
        original_surfaces=(original,),
        injected_surface=injected,
        spans=(span,),
        char_spans=(token_span_to_char_span(tree, span),),
    )
    return mismatched, record


def render_sample(
    image_ref: tuple[str, str],
    caption_ref: tuple[str, str],
    original_text: str,
    mismatched_text: str,
    record: PerturbationRecord,
    templates: TemplateSet,
    rng: random.Random,
    seed_path: tuple[int, str, int],
    swap_feasible: bool,
) -> IcccSample:
    """Fill one instruction and one answer template.

    Replace answers take (wrong text now in the caption, its correction);
    swap answers take the two surfaces in post-swap surface order.
    """
    instr_id = rng.randrange(len(templates.instructions))
    instruction = templates.instructions[instr_id].format(mismatched_text)
    if record.op is PerturbOp.REPLACE:
        answer_id = rng.randrange(len(templates.replace_answers))
        answer = templates.replace_answers[answer_id].format(
            record.injected_surface, record.original_surfaces[0]
        )
    else:
        answer_id = rng.randrange(len(templates.swap_answers))
        first, second = record.original_surfaces
        answer = templates.swap_answers[answer_id].format(second, first)
    return IcccSample(
        image_ref=image_ref,
        caption_ref=caption_ref,
        original_text=original_text,
        instruction=instruction,
        mismatched_caption=mismatched_text,
        answer=answer,
        perturbation=record,
        template_ids=(instr_id, answer_id),
        seed_path=seed_path,
        swap_feasible=swap_feasible,
    )


def construct_sample(
    tree: DepTree,
    annotation: ConceptAnnotation,
    base: ConceptBase,
    enabled: Iterable[ConceptType],
    p_s: float,
    templates: TemplateSet,
    rng: random.Random,
    image_ref: tuple[str, str],
    seed_path: tuple[int, str, int],
    random_baseline: bool = False,
    vocabulary: Sequence[str] = (),
) -> IcccSample:
    """Build one correction sample for a caption; raises CaptionSkipped when
    no sample can be produced."""
    if random_baseline:
        mismatched, record = corrupt_random(tree, vocabulary, rng)
        return render_sample(
            image_ref, tree.caption_ref, tree.original_text, mismatched, record,
            templates, rng, seed_path, swap_feasible=False,
        )
    # A base type with fewer than two pooled surfaces cannot replace, so its
    # concept types are excluded from construction outright.
    effective = frozenset(t for t in enabled if base.enabled(CONCEPT_TO_BASE[t]))
    if not effective:
        raise CaptionSkipped("types_disabled")
    unit = select_target(annotation, effective, rng)
    swap_feasible = len(annotation.of_type(unit.concept_type)) >= 2
    op = choose_operation(annotation, unit.concept_type, p_s, rng)
    record = None
    if op is PerturbOp.SWAP:
        partners = [u for u in _ordered(annotation.of_type(unit.concept_type)) if u != unit]
        partner = rng.choice(partners)
        try:
            mismatched, record = apply_swap(tree, unit, partner)
        except SwapDegenerate:
            record = None  # retry below as replace
    if record is None:
        try:
            mismatched, record = apply_replace(tree, annotation, unit, base, rng)
        except NoReplacementAvailable as err:
            raise CaptionSkipped("no_replacement") from err
    return render_sample(
        image_ref, tree.caption_ref, tree.original_text, mismatched, record,
        templates, rng, seed_path, swap_feasible=swap_feasible,
    )

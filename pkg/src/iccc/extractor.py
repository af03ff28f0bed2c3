"""Concept extraction from dependency trees.

Five concept types are pulled out of each parse: single-token noun and verb
words by UPOS, and three phrase types grouped around them — entity phrases
(noun plus its contiguous left DET/ADJ/NUM modifiers), predicate phrases
(material between consecutive noun heads), and attribute phrases (amod
tokens with their adverbial intensifiers). All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .udtree import DepTree, Span

NOUN_TAGS = frozenset({"NOUN", "PROPN"})  # PROPN counts; captions name entities
ENTITY_MODIFIER_TAGS = frozenset({"DET", "ADJ", "NUM"})
PREDICATE_CONTENT_TAGS = frozenset({"VERB", "ADP", "AUX"})


class ConceptType(str, Enum):
    ENTITY_PHRASE = "entity_phrase"
    PREDICATE_PHRASE = "predicate_phrase"
    ATTRIBUTE_PHRASE = "attribute_phrase"
    NOUN_WORD = "noun_word"
    VERB_WORD = "verb_word"


# CLI / config shorthand per type.
CONCEPT_ALIASES = {
    "ent": ConceptType.ENTITY_PHRASE,
    "pred": ConceptType.PREDICATE_PHRASE,
    "attr": ConceptType.ATTRIBUTE_PHRASE,
    "noun": ConceptType.NOUN_WORD,
    "verb": ConceptType.VERB_WORD,
}

ALL_CONCEPT_TYPES = frozenset(ConceptType)


def parse_concept_types(value: str) -> frozenset[ConceptType]:
    """Parse a comma list like "noun,verb,ent" into a concept-type set."""
    names = [part.strip() for part in value.split(",") if part.strip()]
    if not names:
        raise ValueError("at least one concept type must be enabled")
    try:
        return frozenset(CONCEPT_ALIASES[name] for name in names)
    except KeyError as err:
        raise ValueError(f"unknown concept type {err.args[0]!r}; expected one of "
                         f"{', '.join(sorted(CONCEPT_ALIASES))}") from err


@dataclass(frozen=True)
class LinguisticUnit:
    concept_type: ConceptType
    span: Span  # inclusive, contiguous, 1-based
    head_index: int
    surface: str


@dataclass(frozen=True)
class ConceptAnnotation:
    caption_ref: tuple[str, str]
    units: tuple[LinguisticUnit, ...]

    def of_type(self, concept_type: ConceptType) -> tuple[LinguisticUnit, ...]:
        return tuple(u for u in self.units if u.concept_type == concept_type)


def _surface(tree: DepTree, span: Span) -> str:
    start, end = span
    toks = tree.tokens[start - 1 : end]
    # Span surface excludes the trailing separator of its last token.
    parts = []
    for tok in toks:
        parts.append(tok.form)
        if tok.index < end and tok.space_after:
            parts.append(" ")
    return "".join(parts)


def _unit(tree: DepTree, concept_type: ConceptType, span: Span, head_index: int) -> LinguisticUnit:
    return LinguisticUnit(concept_type, span, head_index, _surface(tree, span))


def _noun_head_indices(tree: DepTree) -> list[int]:
    return [tok.index for tok in tree.tokens if tok.upos in NOUN_TAGS]


def extract_noun_words(tree: DepTree) -> list[LinguisticUnit]:
    """One single-token unit per NOUN/PROPN token."""
    return [_unit(tree, ConceptType.NOUN_WORD, (i, i), i) for i in _noun_head_indices(tree)]


def extract_verb_words(tree: DepTree) -> list[LinguisticUnit]:
    """One single-token unit per VERB token; auxiliaries carry no visual concept."""
    return [
        _unit(tree, ConceptType.VERB_WORD, (tok.index, tok.index), tok.index)
        for tok in tree.tokens
        if tok.upos == "VERB"
    ]


def _entity_span(tree: DepTree, head: int) -> Span:
    # Maximal contiguous run immediately left of the noun: DET/ADJ/NUM headed by it.
    start = head
    for i in range(head - 1, 0, -1):
        tok = tree.token(i)
        if tok.upos in ENTITY_MODIFIER_TAGS and tok.head == head:
            start = i
        else:
            break
    return (start, head)


def extract_entity_phrases(tree: DepTree) -> list[LinguisticUnit]:
    """Noun plus its contiguous left modifier run; a bare noun is its own phrase."""
    return [
        _unit(tree, ConceptType.ENTITY_PHRASE, _entity_span(tree, head), head)
        for head in _noun_head_indices(tree)
    ]


def extract_predicate_phrases(tree: DepTree) -> list[LinguisticUnit]:
    """Material strictly between consecutive noun heads, minus the right noun's
    entity phrase; units with no VERB/ADP/AUX content are dropped."""
    heads = _noun_head_indices(tree)
    units = []
    for left, right in zip(heads, heads[1:]):
        entity_start = _entity_span(tree, right)[0]
        # The right entity phrase occupies a suffix of the between-range, so
        # subtracting it always leaves a contiguous prefix.
        end = min(right - 1, entity_start - 1)
        if left + 1 > end:
            continue
        span = (left + 1, end)
        spanned = tree.tokens[span[0] - 1 : span[1]]
        content = [tok.index for tok in spanned if tok.upos in PREDICATE_CONTENT_TAGS]
        if not content:
            continue
        head_index = next(
            (tok.index for tok in spanned if tok.upos == "VERB"), content[0]
        )
        units.append(_unit(tree, ConceptType.PREDICATE_PHRASE, span, head_index))
    return units


def extract_attribute_phrases(tree: DepTree) -> list[LinguisticUnit]:
    """One unit per amod on a noun, absorbing contiguous advmod intensifiers."""
    units = []
    for tok in tree.tokens:
        if tok.deprel.split(":", 1)[0] != "amod":
            continue
        if not (1 <= tok.head <= len(tree)) or tree.token(tok.head).upos not in NOUN_TAGS:
            continue
        start = tok.index
        for i in range(tok.index - 1, 0, -1):
            mod = tree.token(i)
            if mod.deprel.split(":", 1)[0] == "advmod" and mod.head == tok.index:
                start = i
            else:
                break
        units.append(_unit(tree, ConceptType.ATTRIBUTE_PHRASE, (start, tok.index), tok.index))
    return units


_EXTRACTORS = {
    ConceptType.NOUN_WORD: extract_noun_words,
    ConceptType.VERB_WORD: extract_verb_words,
    ConceptType.ENTITY_PHRASE: extract_entity_phrases,
    ConceptType.PREDICATE_PHRASE: extract_predicate_phrases,
    ConceptType.ATTRIBUTE_PHRASE: extract_attribute_phrases,
}

# Stable unit ordering: enum declaration order, then span.
_TYPE_ORDER = {ct: i for i, ct in enumerate(ConceptType)}


def extract_all(tree: DepTree, enabled: Iterable[ConceptType] = ALL_CONCEPT_TYPES) -> ConceptAnnotation:
    """Run the enabled extractors and assemble one annotation."""
    enabled_set = frozenset(enabled)
    if not enabled_set:
        raise ValueError("enabled concept-type set must be non-empty")
    units: list[LinguisticUnit] = []
    for concept_type in sorted(enabled_set, key=_TYPE_ORDER.__getitem__):
        units.extend(_EXTRACTORS[concept_type](tree))
    return ConceptAnnotation(caption_ref=tree.caption_ref, units=tuple(units))

"""Global replacement-concept pool.

Concept surfaces are counted per merged base type (entity = noun words +
entity phrases, predicate = verb words + predicate phrases, attribute =
attribute phrases), frequency-filtered at both tails, and sampled uniformly
over distinct surfaces as replacement material. Keys are case-folded; the
first-seen casing is kept as the rendering exemplar.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

from .extractor import ConceptAnnotation, ConceptType


class BaseType(str, Enum):
    ENTITY = "entity"
    PREDICATE = "predicate"
    ATTRIBUTE = "attribute"


CONCEPT_TO_BASE = {
    ConceptType.NOUN_WORD: BaseType.ENTITY,
    ConceptType.ENTITY_PHRASE: BaseType.ENTITY,
    ConceptType.VERB_WORD: BaseType.PREDICATE,
    ConceptType.PREDICATE_PHRASE: BaseType.PREDICATE,
    ConceptType.ATTRIBUTE_PHRASE: BaseType.ATTRIBUTE,
}


class NoReplacementAvailable(Exception):
    """Every candidate surface is excluded for this caption."""


@dataclass(frozen=True)
class ConceptEntry:
    base_type: BaseType
    surface: str  # case-folded key
    exemplar: str  # original casing of the first occurrence
    count: int


@dataclass
class _TypeTable:
    # surface -> (exemplar, count)
    entries: dict[str, tuple[str, int]] = field(default_factory=dict)

    def add(self, surface: str, count: int = 1) -> None:
        key = surface.casefold()
        exemplar, old = self.entries.get(key, (surface, 0))
        self.entries[key] = (exemplar, old + count)


@dataclass
class ConceptBase:
    tables: dict[BaseType, _TypeTable] = field(
        default_factory=lambda: {bt: _TypeTable() for bt in BaseType}
    )
    min_count: int = 1
    top_quantile_drop: float = 0.0

    def entries(self, base_type: BaseType) -> list[ConceptEntry]:
        """Entries sorted by (descending count, surface) — the persisted order."""
        table = self.tables[base_type]
        return sorted(
            (
                ConceptEntry(base_type, surface, exemplar, count)
                for surface, (exemplar, count) in table.entries.items()
            ),
            key=lambda e: (-e.count, e.surface),
        )

    def enabled(self, base_type: BaseType) -> bool:
        """Replacement needs at least two distinct surfaces to choose between."""
        return len(self.tables[base_type].entries) >= 2

    def size(self, base_type: BaseType) -> int:
        return len(self.tables[base_type].entries)


def build_base(annotations: Iterable[ConceptAnnotation]) -> ConceptBase:
    """Exact surface counting over an annotation stream (unfiltered)."""
    base = ConceptBase()
    for annotation in annotations:
        for unit in annotation.units:
            base.tables[CONCEPT_TO_BASE[unit.concept_type]].add(unit.surface)
    return base


def merge_bases(first: ConceptBase, second: ConceptBase) -> ConceptBase:
    """Merge shard counts; the earlier shard's exemplar wins, keeping the merge
    associative for stream-ordered shards."""
    merged = ConceptBase()
    for bt in BaseType:
        for surface, (exemplar, count) in first.tables[bt].entries.items():
            merged.tables[bt].entries[surface] = (exemplar, count)
        for surface, (exemplar, count) in second.tables[bt].entries.items():
            prev_exemplar, prev = merged.tables[bt].entries.get(surface, (exemplar, 0))
            merged.tables[bt].entries[surface] = (prev_exemplar, prev + count)
    return merged


def filter_base(base: ConceptBase, min_count: int = 5, top_quantile_drop: float = 0.001) -> ConceptBase:
    """Drop entries below min_count, then the ceil(q x remaining) most frequent
    per base type; ties broken by reverse-lexicographic surface."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if not (0.0 <= top_quantile_drop < 1.0):
        raise ValueError("top_quantile_drop must be in [0, 1)")
    filtered = ConceptBase(min_count=min_count, top_quantile_drop=top_quantile_drop)
    if (base.min_count, base.top_quantile_drop) == (min_count, top_quantile_drop):
        # Already filtered at these parameters; re-applying the top drop would
        # shave the head again, so idempotence requires a straight copy.
        for bt in BaseType:
            filtered.tables[bt].entries.update(base.tables[bt].entries)
        return filtered
    for bt in BaseType:
        surviving = [
            (surface, exemplar, count)
            for surface, (exemplar, count) in base.tables[bt].entries.items()
            if count >= min_count
        ]
        n_drop = math.ceil(top_quantile_drop * len(surviving))
        if n_drop:
            # Most frequent first; among ties the reverse-lexicographically
            # larger surface is dropped first.
            surviving.sort(key=lambda item: (-item[2], [-ord(c) for c in item[0]]))
            surviving = surviving[n_drop:]
        for surface, exemplar, count in surviving:
            filtered.tables[bt].entries[surface] = (exemplar, count)
    return filtered


def sample_replacement(
    base: ConceptBase,
    base_type: BaseType,
    exclude: Iterable[str],
    rng: random.Random,
) -> ConceptEntry:
    """Uniform draw over distinct surfaces, excluding any candidate that equals,
    contains, or is contained in an excluded surface (case-folded)."""
    if not base.enabled(base_type):
        raise NoReplacementAvailable(f"base type {base_type.value} is replacement-disabled")
    excluded = [e.casefold() for e in exclude]
    table = base.tables[base_type].entries
    eligible = [
        surface
        for surface in sorted(table)  # sorted for draw-order determinism
        if not any(surface in e or e in surface for e in excluded)
    ]
    if not eligible:
        raise NoReplacementAvailable(f"no eligible {base_type.value} surface after exclusion")
    surface = rng.choice(eligible)
    exemplar, count = table[surface]
    return ConceptEntry(base_type, surface, exemplar, count)


def save_base(base: ConceptBase, path: str | Path) -> None:
    """Persist one JSONL record per entry, sorted by (base_type, -count, surface)."""
    with open(path, "w", encoding="utf-8") as fp:
        header = {
            "kind": "concept_base",
            "min_count": base.min_count,
            "top_quantile_drop": base.top_quantile_drop,
        }
        fp.write(json.dumps(header, ensure_ascii=False) + "\n")
        for bt in BaseType:
            for entry in base.entries(bt):
                fp.write(
                    json.dumps(
                        {
                            "base_type": entry.base_type.value,
                            "surface": entry.surface,
                            "exemplar": entry.exemplar,
                            "count": entry.count,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )


def load_base(path: str | Path) -> ConceptBase:
    base = ConceptBase()
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            if not line.strip():
                continue
            obj = json.loads(line)
            if obj.get("kind") == "concept_base":
                base.min_count = int(obj.get("min_count", 1))
                base.top_quantile_drop = float(obj.get("top_quantile_drop", 0.0))
                continue
            bt = BaseType(obj["base_type"])
            base.tables[bt].entries[obj["surface"]] = (obj["exemplar"], int(obj["count"]))
    return base


def caption_exclusions(annotation: ConceptAnnotation, base_type: BaseType, caption_text: str) -> list[str]:
    """Exclusion context for replace: every same-base-type surface in the caption
    plus the whole caption text, so injected text never occurs in the source."""
    surfaces = {
        unit.surface
        for unit in annotation.units
        if CONCEPT_TO_BASE[unit.concept_type] == base_type
    }
    return sorted(surfaces) + [caption_text]

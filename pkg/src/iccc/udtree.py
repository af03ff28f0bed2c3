"""Universal Dependencies trees in CoNLL-U form.

Models validated dependency parses, reads/re-serializes CoNLL-U, and
detokenizes token sequences back to text with optional span overrides
(the splice primitive used for caption perturbation). No parsing model
lives here; CoNLL-U is produced upstream.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Mapping

UPOS_TAGS = frozenset(
    "NOUN VERB ADJ DET ADP AUX PRON PROPN NUM ADV PART CCONJ SCONJ PUNCT SYM INTJ X".split()
)

# UD v2 universal relation base labels; subtyped labels (nmod:poss) validate by base.
DEPREL_BASE = frozenset(
    (
        "acl advcl advmod amod appos aux case cc ccomp clf compound conj cop csubj dep det "
        "discourse dislocated expl fixed flat goeswith iobj list mark nmod nsubj nummod obj "
        "obl orphan parataxis punct reparandum root vocative xcomp"
    ).split()
)

_MWT_ID = re.compile(r"^\d+-\d+$")
_EMPTY_ID = re.compile(r"^\d+\.\d+$")
_COMMENT_KV = re.compile(r"^#\s*([^=\s][^=]*?)\s*=\s*(.*)$")


class TreeValidationError(Exception):
    """A sentence block violates a DepTree invariant; .reason is a stable key."""

    def __init__(self, message: str, reason: str = "invalid"):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True)
class Token:
    """One basic token line. xpos/feats/deps/misc are kept verbatim for re-serialization."""

    index: int
    form: str
    upos: str
    head: int
    deprel: str
    lemma: str | None = None
    xpos: str = "_"
    feats: str = "_"
    deps: str = "_"
    misc: str = "_"

    @property
    def space_after(self) -> bool:
        return "SpaceAfter=No" not in self.misc.split("|")

    @classmethod
    def make(
        cls,
        index: int,
        form: str,
        upos: str,
        head: int,
        deprel: str,
        space_after: bool = True,
        lemma: str | None = None,
    ) -> "Token":
        """Convenience constructor for synthetic trees (tests, generators)."""
        return cls(
            index=index,
            form=form,
            upos=upos,
            head=head,
            deprel=deprel,
            lemma=lemma,
            misc="_" if space_after else "SpaceAfter=No",
        )

    def to_conllu(self) -> str:
        cols = (
            str(self.index),
            self.form,
            self.lemma if self.lemma is not None else "_",
            self.upos,
            self.xpos,
            self.feats,
            str(self.head),
            self.deprel,
            self.deps,
            self.misc,
        )
        return "\t".join(cols)


@dataclass(frozen=True)
class DepTree:
    """A validated dependency parse of one caption."""

    caption_ref: tuple[str, str]  # (dataset_tag, caption_id)
    tokens: tuple[Token, ...]
    original_text: str
    comments: tuple[str, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.tokens)

    def token(self, index: int) -> Token:
        return self.tokens[index - 1]

    def to_conllu(self) -> str:
        lines = list(self.comments)
        lines.extend(tok.to_conllu() for tok in self.tokens)
        return "\n".join(lines) + "\n"


def validate_tree(tokens: Iterable[Token]) -> None:
    """Raise TreeValidationError unless tokens form a single-rooted acyclic tree."""
    toks = list(tokens)
    if not toks:
        raise TreeValidationError("empty sentence", "empty")
    n = len(toks)
    for pos, tok in enumerate(toks, start=1):
        if tok.index != pos:
            raise TreeValidationError(
                f"non-contiguous token index {tok.index} at position {pos}", "non_contiguous"
            )
        if tok.head == tok.index:
            raise TreeValidationError(f"token {tok.index} is its own head", "self_head")
        if not (0 <= tok.head <= n):
            raise TreeValidationError(f"token {tok.index} head {tok.head} out of range", "bad_head")
        if tok.upos not in UPOS_TAGS:
            raise TreeValidationError(f"token {tok.index} has unknown UPOS {tok.upos!r}", "bad_upos")
        if tok.deprel.split(":", 1)[0] not in DEPREL_BASE:
            raise TreeValidationError(
                f"token {tok.index} has unknown deprel {tok.deprel!r}", "bad_deprel"
            )
    roots = [tok.index for tok in toks if tok.head == 0]
    if len(roots) != 1:
        raise TreeValidationError(f"expected exactly one root, found {len(roots)}", "root_count")
    # Walk head chains; any chain that revisits a node before reaching 0 is a cycle.
    for tok in toks:
        seen = set()
        cursor = tok.index
        while cursor != 0:
            if cursor in seen:
                raise TreeValidationError(f"cycle through token {tok.index}", "cycle")
            seen.add(cursor)
            cursor = toks[cursor - 1].head


@dataclass
class ReadReport:
    accepted: int = 0
    rejected: int = 0
    reasons: dict[str, int] = field(default_factory=dict)

    def reject(self, reason: str) -> None:
        self.rejected += 1
        self.reasons[reason] = self.reasons.get(reason, 0) + 1

    def as_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "reasons": dict(sorted(self.reasons.items())),
        }


def _parse_block(lines: list[str]) -> DepTree:
    comments: list[str] = []
    tokens: list[Token] = []
    meta: dict[str, str] = {}
    for line in lines:
        if line.startswith("#"):
            comments.append(line)
            kv = _COMMENT_KV.match(line)
            if kv:
                meta[kv.group(1)] = kv.group(2)
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise TreeValidationError(f"expected 10 columns, got {len(cols)}", "columns")
        tok_id = cols[0]
        if _MWT_ID.match(tok_id) or _EMPTY_ID.match(tok_id):
            continue  # multiword ranges and empty nodes are not modeled
        try:
            index, head = int(tok_id), int(cols[6])
        except ValueError as err:
            raise TreeValidationError(f"non-integer ID/HEAD in line {line!r}", "bad_id") from err
        tokens.append(
            Token(
                index=index,
                form=cols[1],
                lemma=None if cols[2] == "_" else cols[2],
                upos=cols[3],
                xpos=cols[4],
                feats=cols[5],
                head=head,
                deprel=cols[7],
                deps=cols[8],
                misc=cols[9],
            )
        )
    # Multiword ranges and empty nodes never occupy integer index space, so
    # dropping their lines must leave 1..n contiguous; validate_tree checks it.
    validate_tree(tokens)
    toks = tuple(tokens)
    caption_ref = (meta.get("dataset", ""), meta.get("caption_id", ""))
    text = meta.get("text") or detokenize(toks)
    return DepTree(caption_ref=caption_ref, tokens=toks, original_text=text, comments=tuple(comments))


def read_conllu(reader: IO[str] | Iterable[str], report: ReadReport | None = None) -> Iterator[DepTree]:
    """Yield one validated DepTree per CoNLL-U sentence block.

    Blocks failing column-count or tree validation are rejected and counted
    in the report; reading continues with the next block.
    """
    report = report if report is not None else ReadReport()
    block: list[str] = []

    def flush() -> DepTree | None:
        if not block:
            return None
        try:
            tree = _parse_block(block)
        except TreeValidationError as err:
            report.reject(err.reason)
            return None
        report.accepted += 1
        return tree

    for raw in reader:
        line = raw.rstrip("\n")
        if not line.strip():
            tree = flush()
            block = []
            if tree is not None:
                yield tree
            continue
        block.append(line)
    tree = flush()
    if tree is not None:
        yield tree


def read_conllu_file(path, report: ReadReport | None = None) -> Iterator[DepTree]:
    with open(path, encoding="utf-8") as fp:
        yield from read_conllu(fp, report)


def write_conllu(trees: Iterable[DepTree], fp: IO[str]) -> None:
    for tree in trees:
        fp.write(tree.to_conllu())
        fp.write("\n")


Span = tuple[int, int]  # inclusive 1-based (start, end)


def _check_span(span: Span, n: int) -> None:
    start, end = span
    if not (1 <= start <= end <= n):
        raise ValueError(f"span {span} outside 1..{n}")


def detokenize(
    tokens: Iterable[Token] | DepTree,
    overrides: Mapping[Span, str] | None = None,
) -> str:
    """Rebuild text from token forms; a space follows a token iff space_after.

    Each override span is emitted as its replacement text verbatim; the span's
    last token's space_after governs the following separator. Spans must be
    disjoint.
    """
    toks = tokens.tokens if isinstance(tokens, DepTree) else tuple(tokens)
    n = len(toks)
    spans = sorted(overrides.items()) if overrides else []
    prev_end = 0
    for (start, end), _ in spans:
        _check_span((start, end), n)
        if start <= prev_end:
            raise ValueError(f"overlapping override span ({start}, {end})")
        prev_end = end
    parts: list[str] = []
    i = 1
    span_iter = iter(spans)
    current = next(span_iter, None)
    while i <= n:
        if current and current[0][0] == i:
            (start, end), replacement = current
            parts.append(replacement)
            if toks[end - 1].space_after:
                parts.append(" ")
            i = end + 1
            current = next(span_iter, None)
        else:
            tok = toks[i - 1]
            parts.append(tok.form)
            if tok.space_after:
                parts.append(" ")
            i += 1
    return "".join(parts)


def token_span_to_char_span(tree: DepTree, span: Span) -> tuple[int, int]:
    """Character range of a token span within detokenize(tree) with no overrides."""
    _check_span(span, len(tree))
    start, end = span
    cursor = 0
    for tok in tree.tokens[: start - 1]:
        cursor += len(tok.form) + (1 if tok.space_after else 0)
    length = 0
    for tok in tree.tokens[start - 1 : end]:
        length += len(tok.form)
        if tok.index < end and tok.space_after:
            length += 1
    return (cursor, cursor + length)

#!/usr/bin/env python3
"""Generate the checked-in 1,000-caption mini corpus and its CoNLL-U parses.

Captions come from a small caption grammar whose dependency structure is
known by construction, so the fixture parses are correct without any parser.
Regenerating with the same seed is byte-identical. Run from the repo root:

    python3 tools/make_mini_corpus.py
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from iccc.udtree import DepTree, Token, detokenize, validate_tree  # noqa: E402

SEED = 20240801
N_CAPTIONS = 1000

NOUNS = [
    "man", "woman", "dog", "cat", "bike", "bench", "car", "truck", "tree", "house",
    "bird", "horse", "table", "chair", "ball", "kite", "boat", "river", "park",
    "street", "field", "hat", "umbrella", "sandwich", "lake", "beach", "fence",
    "flower", "window", "child",
]
PLURALS = {
    "dog": "dogs", "cat": "cats", "horse": "horses", "table": "tables",
    "chair": "chairs", "flower": "flowers", "bird": "birds", "boat": "boats",
    "apple": "apples", "pear": "pears",
}
VERBS_ING = {
    "riding": "ride", "holding": "hold", "chasing": "chase", "watching": "watch",
    "carrying": "carry", "pushing": "push", "pulling": "pull", "wearing": "wear",
    "eating": "eat", "touching": "touch",
}
VERBS_FIN = {
    "walks": "walk", "runs": "run", "sits": "sit", "stands": "stand",
    "sleeps": "sleep", "jumps": "jump", "plays": "play", "waits": "wait",
}
ADJS = [
    "red", "blue", "green", "small", "large", "young", "old", "tall", "short",
    "wooden", "shiny", "happy", "quiet", "brown",
]
ADVS = ["very", "quite"]
PREPS = ["on", "in", "near", "beside", "under", "over", "behind", "above", "with", "by"]
PROPNS = ["Mary", "John", "Paris", "London"]
NUMS = {"two": "two", "three": "three", "four": "four"}


class Sentence:
    """Token accumulator resolving symbolic head marks to indices."""

    def __init__(self) -> None:
        self.rows: list[tuple[str, str, str, object, str]] = []
        self.marks: dict[str, int] = {}

    def add(self, form: str, lemma: str, upos: str, head: object, deprel: str, mark: str | None = None) -> None:
        self.rows.append((form, lemma, upos, head, deprel))
        if mark:
            self.marks[mark] = len(self.rows)

    def root_index(self) -> int:
        for i, row in enumerate(self.rows, start=1):
            if row[3] == 0:
                return i
        raise ValueError("no root")

    def tokens(self) -> tuple[Token, ...]:
        toks = []
        n = len(self.rows)
        for i, (form, lemma, upos, head, deprel) in enumerate(self.rows, start=1):
            head_index = head if isinstance(head, int) else self.marks[head]
            space_after = i < n and not (i + 1 <= n and self.rows[i][0] == ".")
            toks.append(Token.make(i, form, upos, head_index, deprel, space_after=space_after, lemma=lemma))
        return tuple(toks)


def np(sent: Sentence, rng: random.Random, noun: str, mark: str, attach: object, deprel: str,
       adj: str | None, det: str = "a", adv_p: float = 0.0) -> None:
    """DET (ADV? ADJ)? NOUN with all modifiers headed by the noun."""
    first_word = adj if adj is not None else noun
    det_form = "an" if det == "a" and first_word[0] in "aeiou" else det
    sent.add(det_form, "a" if det_form == "an" else det_form, "DET", mark, "det")
    if adj is not None:
        if rng.random() < adv_p:
            adv = rng.choice(ADVS)
            sent.add(adv, adv, "ADV", f"{mark}_adj", "advmod")
        sent.add(adj, adj, "ADJ", mark, "amod", mark=f"{mark}_adj")
    sent.add(noun, noun, "NOUN", attach, deprel, mark=mark)


def frame_ing(sent: Sentence, rng: random.Random) -> None:
    nouns = rng.sample(NOUNS, 3)
    adjs = rng.sample(ADJS, 3)
    ving = rng.choice(sorted(VERBS_ING))
    np(sent, rng, nouns[0], "n1", 0, "root", adjs[0] if rng.random() < 0.8 else None, adv_p=0.2)
    sent.add(ving, VERBS_ING[ving], "VERB", "n1", "acl", mark="v")
    np(sent, rng, nouns[1], "n2", "v", "obj", adjs[1] if rng.random() < 0.8 else None)
    if rng.random() < 0.5:
        prep = rng.choice(PREPS)
        sent.add(prep, prep, "ADP", "n3", "case")
        np(sent, rng, nouns[2], "n3", "v", "obl", adjs[2] if rng.random() < 0.4 else None)


def frame_fin(sent: Sentence, rng: random.Random) -> None:
    nouns = rng.sample(NOUNS, 2)
    adjs = rng.sample(ADJS, 2)
    vfin = rng.choice(sorted(VERBS_FIN))
    prep = rng.choice(PREPS)
    np(sent, rng, nouns[0], "n1", "v", "nsubj", adjs[0] if rng.random() < 0.7 else None, det="the", adv_p=0.2)
    sent.add(vfin, VERBS_FIN[vfin], "VERB", 0, "root", mark="v")
    sent.add(prep, prep, "ADP", "n2", "case")
    np(sent, rng, nouns[1], "n2", "v", "obl", adjs[1] if rng.random() < 0.7 else None)


def frame_nmod(sent: Sentence, rng: random.Random) -> None:
    nouns = rng.sample(NOUNS, 2)
    adj = rng.choice(ADJS)
    prep = rng.choice(PREPS)
    np(sent, rng, nouns[0], "n1", 0, "root", None)
    sent.add(prep, prep, "ADP", "n2", "case")
    np(sent, rng, nouns[1], "n2", "n1", "nmod", adj if rng.random() < 0.6 else None)


def frame_conj(sent: Sentence, rng: random.Random) -> None:
    plurals = rng.sample(sorted(PLURALS), 2)
    adjs = rng.sample(ADJS, 2)
    sent.add(adjs[0], adjs[0], "ADJ", "n1", "amod")
    sent.add(PLURALS[plurals[0]], plurals[0], "NOUN", 0, "root", mark="n1")
    sent.add("and", "and", "CCONJ", "n2", "cc")
    sent.add(adjs[1], adjs[1], "ADJ", "n2", "amod")
    sent.add(PLURALS[plurals[1]], plurals[1], "NOUN", "n1", "conj", mark="n2")


def frame_aux(sent: Sentence, rng: random.Random) -> None:
    nouns = rng.sample(NOUNS, 2)
    ving = rng.choice(sorted(VERBS_ING))
    prep = rng.choice(PREPS)
    np(sent, rng, nouns[0], "n1", "v", "nsubj", None)
    sent.add("is", "be", "AUX", "v", "aux")
    sent.add(ving, VERBS_ING[ving], "VERB", 0, "root", mark="v")
    sent.add(prep, prep, "ADP", "n2", "case")
    np(sent, rng, nouns[1], "n2", "v", "obl", rng.choice(ADJS) if rng.random() < 0.5 else None, det="the")


def frame_twoverb(sent: Sentence, rng: random.Random) -> None:
    nouns = rng.sample(NOUNS, 2)
    verbs = rng.sample(sorted(VERBS_FIN), 2)
    np(sent, rng, nouns[0], "n1", "v1", "nsubj", None)
    sent.add(verbs[0], VERBS_FIN[verbs[0]], "VERB", 0, "root", mark="v1")
    sent.add("and", "and", "CCONJ", "v2", "cc")
    np(sent, rng, nouns[1], "n2", "v2", "nsubj", None)
    sent.add(verbs[1], VERBS_FIN[verbs[1]], "VERB", "v1", "conj", mark="v2")


def frame_num(sent: Sentence, rng: random.Random) -> None:
    plural = rng.choice(sorted(PLURALS))
    noun2 = rng.choice([n for n in NOUNS if n != plural])
    num = rng.choice(sorted(NUMS))
    adj = rng.choice(ADJS)
    ving = rng.choice(sorted(VERBS_ING))
    prep = rng.choice(PREPS)
    sent.add(num, num, "NUM", "n1", "nummod")
    if rng.random() < 0.6:
        sent.add(adj, adj, "ADJ", "n1", "amod")
    sent.add(PLURALS[plural], plural, "NOUN", 0, "root", mark="n1")
    sent.add(ving, VERBS_ING[ving], "VERB", "n1", "acl", mark="v")
    sent.add(prep, prep, "ADP", "n2", "case")
    np(sent, rng, noun2, "n2", "v", "obl", None, det="the")


def frame_propn(sent: Sentence, rng: random.Random) -> None:
    propn = rng.choice(PROPNS)
    noun = rng.choice(NOUNS)
    vfin = rng.choice(sorted(VERBS_FIN))
    prep = rng.choice(PREPS)
    sent.add(propn, propn, "PROPN", "v", "nsubj", mark="p1")
    sent.add(vfin, VERBS_FIN[vfin], "VERB", 0, "root", mark="v")
    sent.add(prep, prep, "ADP", "n2", "case")
    np(sent, rng, noun, "n2", "v", "obl", rng.choice(ADJS) if rng.random() < 0.6 else None)


def frame_three(sent: Sentence, rng: random.Random) -> None:
    nouns = rng.sample(NOUNS, 3)
    adj = rng.choice(ADJS)
    ving = rng.choice(sorted(VERBS_ING))
    prep = rng.choice(PREPS)
    np(sent, rng, nouns[0], "n1", 0, "root", None)
    sent.add(ving, VERBS_ING[ving], "VERB", "n1", "acl", mark="v")
    np(sent, rng, nouns[1], "n2", "v", "obj", None)
    sent.add(prep, prep, "ADP", "n3", "case")
    np(sent, rng, nouns[2], "n3", "v", "obl", adj if rng.random() < 0.6 else None, det="the")


FRAMES = [
    (frame_ing, 0.25),
    (frame_fin, 0.2),
    (frame_nmod, 0.1),
    (frame_conj, 0.07),
    (frame_aux, 0.1),
    (frame_twoverb, 0.08),
    (frame_num, 0.07),
    (frame_propn, 0.05),
    (frame_three, 0.08),
]


def build_caption(rng: random.Random, caption_id: str) -> DepTree:
    sent = Sentence()
    frame = rng.choices([f for f, _ in FRAMES], weights=[w for _, w in FRAMES], k=1)[0]
    frame(sent, rng)
    if rng.random() < 0.6:
        sent.add(".", ".", "PUNCT", sent.root_index(), "punct")
    tokens = sent.tokens()
    validate_tree(tokens)
    text = detokenize(tokens)
    comments = (
        "# dataset = mini",
        f"# caption_id = {caption_id}",
        f"# text = {text}",
    )
    return DepTree(("mini", caption_id), tokens, text, comments)


def main() -> None:
    root = Path(__file__).resolve().parents[1]
    data_dir = root / "tests" / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)
    trees = []
    records = []
    image_id = -1
    for i in range(N_CAPTIONS):
        caption_id = f"c{i:04d}"
        if i % 7 != 6:  # every 7th caption re-captions the previous image
            image_id += 1
        tree = build_caption(rng, caption_id)
        trees.append(tree)
        records.append(
            {
                "dataset": "mini",
                "image_id": f"i{image_id:04d}",
                "caption_id": caption_id,
                "text": tree.original_text,
            }
        )
    with open(data_dir / "mini_corpus.jsonl", "w", encoding="utf-8") as fp:
        for rec in records:
            fp.write(json.dumps(rec, ensure_ascii=False) + "\n")
    with open(data_dir / "mini_corpus.conllu", "w", encoding="utf-8") as fp:
        for tree in trees:
            fp.write(tree.to_conllu())
            fp.write("\n")
    print(f"wrote {len(records)} captions to {data_dir}")


if __name__ == "__main__":
    main()

"""Parsing engines.

The built-in engine is a deterministic lexicon-and-heuristics English parser
good enough for caption text: closed-class lookup, suffix fallbacks, a
projective head attacher, and a structural repair pass that guarantees a
single-rooted acyclic tree with legal UD labels. A spaCy backend is available
when the library and a model are installed (model names "spacy:<model>").
"""

from __future__ import annotations

from dataclasses import dataclass

from .tokenizer import RawToken, tokenize

DETS = {"a", "an", "the", "this", "that", "these", "those", "some", "each", "every", "no"}
ADPS = {
    "on", "in", "at", "with", "near", "under", "over", "behind", "beside", "above",
    "by", "of", "for", "from", "to", "along", "across", "around", "through",
    "between", "against", "inside", "outside", "onto", "upon", "below", "beneath",
    "during", "without", "toward", "towards", "off", "into", "down", "up",
}
AUXES = {"is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "do", "does", "did"}
PRONS = {
    "he", "she", "it", "they", "him", "them", "who", "which", "that", "i", "you", "we",
    "his", "her", "its", "their", "my", "your", "our", "something", "someone",
}
POSSESSIVE_PRONS = {"his", "her", "its", "their", "my", "your", "our"}
CCONJS = {"and", "or", "but", "nor"}
SCONJS = {"while", "when", "as", "because", "if", "since", "after", "before", "although"}
ADVS = {"very", "quite", "really", "extremely", "too", "so", "also", "just", "not", "here", "there"}
NUM_WORDS = {
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "several", "many", "few",
}

NOUN_STEMS = {
    "man", "woman", "dog", "cat", "bike", "bicycle", "bench", "car", "truck", "tree",
    "house", "bird", "horse", "table", "chair", "ball", "kite", "boat", "river",
    "park", "street", "field", "hat", "umbrella", "sandwich", "lake", "beach",
    "fence", "flower", "window", "child", "children", "person", "people", "boy",
    "girl", "baby", "group", "crowd", "plate", "food", "pizza", "cake", "bowl",
    "cup", "glass", "bottle", "phone", "laptop", "computer", "book", "bag", "road",
    "sidewalk", "building", "sign", "light", "train", "bus", "plane", "airplane",
    "motorcycle", "skateboard", "surfboard", "snow", "grass", "sky", "water",
    "ocean", "mountain", "hill", "room", "kitchen", "bathroom", "bed", "couch",
    "sofa", "television", "tv", "clock", "vase", "scissors", "teddy", "bear",
    "zebra", "giraffe", "elephant", "sheep", "cow", "apple", "pear", "orange",
    "banana", "broccoli", "carrot", "donut", "court", "player", "game", "racket",
    "bat", "glove", "helmet", "jacket", "shirt", "dress", "wall", "floor", "door",
    "mirror", "picture", "photo", "camera", "station", "market", "shop", "store",
    "track", "windowsill", "lamp", "sofa", "basket", "box", "wave", "sand", "leaf",
    "branch", "garden", "yard", "pool", "bridge", "tower", "city", "town",
}
VERB_STEMS = {
    "ride", "hold", "chase", "watch", "carry", "push", "pull", "wear", "eat",
    "touch", "walk", "run", "sit", "stand", "sleep", "jump", "play", "wait",
    "look", "fly", "graze", "park", "drive", "throw", "catch", "hit", "kick",
    "swim", "surf", "ski", "skate", "cook", "cut", "pour", "drink", "read",
    "write", "talk", "smile", "laugh", "point", "reach", "lean", "lie", "lay",
    "hang", "rest", "move", "cross", "climb", "feed", "pet", "bark", "meet",
    "pass", "serve", "swing", "slide", "race", "travel", "sail", "land",
}
ADJ_STEMS = {
    "red", "blue", "green", "yellow", "orange", "purple", "pink", "black",
    "white", "gray", "grey", "brown", "small", "large", "big", "little", "young",
    "old", "tall", "short", "long", "wooden", "metal", "plastic", "shiny",
    "happy", "sad", "quiet", "busy", "empty", "full", "open", "closed", "bright",
    "dark", "clean", "dirty", "warm", "cold", "hot", "wet", "dry", "fresh",
    "beautiful", "pretty", "colorful", "striped", "furry", "fluffy", "round",
    "square", "narrow", "wide", "high", "low", "new", "modern", "vintage",
}

IRREGULAR_PLURALS = {"children": "child", "people": "person", "men": "man", "women": "woman", "feet": "foot"}
ING_IRREGULAR = {"sitting": "sit", "running": "run", "swimming": "swim", "lying": "lie", "cutting": "cut", "hitting": "hit"}


@dataclass(frozen=True)
class ParsedToken:
    form: str
    lemma: str
    upos: str
    head: int
    deprel: str
    space_after: bool


def _verb_stem(word: str) -> str | None:
    """Stem of an inflected verb if it maps into the verb lexicon."""
    if word in VERB_STEMS:
        return word
    if word in ING_IRREGULAR:
        return ING_IRREGULAR[word]
    for suffix, cuts in (("ing", (3,)), ("ed", (2, 1)), ("s", (1,)), ("es", (2,))):
        if word.endswith(suffix) and len(word) > len(suffix) + 1:
            for cut in cuts:
                stem = word[: len(word) - cut]
                if stem in VERB_STEMS:
                    return stem
                if (stem + "e") in VERB_STEMS:
                    return stem + "e"
    return None


def _noun_stem(word: str) -> str | None:
    if word in NOUN_STEMS:
        return word
    if word in IRREGULAR_PLURALS:
        return IRREGULAR_PLURALS[word]
    if word.endswith("es") and word[:-2] in NOUN_STEMS:
        return word[:-2]
    if word.endswith("s") and word[:-1] in NOUN_STEMS:
        return word[:-1]
    return None


def _tag(tokens: list[RawToken]) -> list[str]:
    tags: list[str] = []
    for i, tok in enumerate(tokens):
        word = tok.form
        lower = word.lower()
        if not any(ch.isalnum() for ch in word):
            tags.append("PUNCT")
            continue
        if word.isdigit():
            tags.append("NUM")
            continue
        if lower in DETS:
            tags.append("DET")
            continue
        if lower in AUXES:
            tags.append("AUX")
            continue
        if lower in CCONJS:
            tags.append("CCONJ")
            continue
        if lower in SCONJS:
            tags.append("SCONJ")
            continue
        if lower in ADPS:
            tags.append("ADP")
            continue
        if lower in NUM_WORDS:
            tags.append("NUM")
            continue
        if lower in PRONS:
            tags.append("PRON")
            continue
        if lower in ADVS or (lower.endswith("ly") and len(lower) > 3):
            tags.append("ADV")
            continue
        verb_stem = _verb_stem(lower)
        noun_stem = _noun_stem(lower)
        if verb_stem and noun_stem:
            # "plays", "waves": verb after a subject-ish word, noun after a modifier.
            prev = tags[-1] if tags else None
            tags.append("NOUN" if prev in ("DET", "ADJ", "NUM") else "VERB")
            continue
        if verb_stem:
            tags.append("VERB")
            continue
        if lower in ADJ_STEMS:
            tags.append("ADJ")
            continue
        if noun_stem:
            tags.append("NOUN")
            continue
        if word[0].isupper() and i > 0:
            tags.append("PROPN")
            continue
        if lower.endswith("ing") or lower.endswith("ed"):
            tags.append("VERB")
            continue
        tags.append("NOUN")
    return tags


def _lemma(word: str, upos: str) -> str:
    lower = word.lower()
    if upos == "VERB":
        return _verb_stem(lower) or lower
    if upos == "NOUN":
        return _noun_stem(lower) or lower
    if upos == "PROPN":
        return word
    if upos == "DET" and lower == "an":
        return "a"
    if upos == "AUX" and lower in {"is", "are", "was", "were", "been", "being", "am"}:
        return "be"
    return lower


def _find_root(tags: list[str], tokens: list[RawToken]) -> int:
    n = len(tags)
    # Finite verb: any VERB not in -ing form, or an -ing VERB with an AUX before it.
    for i in range(n):
        if tags[i] != "VERB":
            continue
        ing = tokens[i].form.lower().endswith("ing")
        has_aux = any(tags[j] == "AUX" for j in range(max(0, i - 2), i))
        if not ing or has_aux:
            return i + 1
    for i in range(n):
        if tags[i] in ("NOUN", "PROPN"):
            return i + 1
    for i in range(n):
        if tags[i] != "PUNCT":
            return i + 1
    return 1


def _nearest(tags: list[str], start: int, step: int, wanted: set[str]) -> int | None:
    """1-based index of the nearest token with a wanted tag, scanning from
    0-based start (exclusive) in direction step."""
    i = start + step
    while 0 <= i < len(tags):
        if tags[i] in wanted:
            return i + 1
        i += step
    return None


def _attach(tokens: list[RawToken], tags: list[str]) -> tuple[list[int], list[str]]:
    n = len(tokens)
    root = _find_root(tags, tokens)
    heads = [0] * n
    rels = ["dep"] * n
    root_is_verb = tags[root - 1] == "VERB"

    for i in range(n):
        index = i + 1
        tag = tags[i]
        if index == root:
            heads[i], rels[i] = 0, "root"
            continue
        if tag == "PUNCT":
            heads[i], rels[i] = root, "punct"
        elif tag == "DET":
            noun = _nearest(tags, i, 1, {"NOUN", "PROPN"})
            heads[i], rels[i] = (noun, "det") if noun else (root, "det")
        elif tag == "NUM":
            noun = _nearest(tags, i, 1, {"NOUN", "PROPN"})
            heads[i], rels[i] = (noun, "nummod") if noun else (root, "nummod")
        elif tag == "ADJ":
            noun = _nearest(tags, i, 1, {"NOUN", "PROPN"})
            if noun:
                heads[i], rels[i] = noun, "amod"
            else:
                heads[i], rels[i] = root, "xcomp" if root_is_verb else "amod"
        elif tag == "ADV":
            if i + 1 < n and tags[i + 1] == "ADJ":
                heads[i], rels[i] = index + 1, "advmod"
            else:
                verb = _nearest(tags, i, 1, {"VERB"}) or _nearest(tags, i, -1, {"VERB"})
                heads[i], rels[i] = (verb or root), "advmod"
        elif tag == "ADP":
            noun = _nearest(tags, i, 1, {"NOUN", "PROPN", "PRON"})
            heads[i], rels[i] = (noun, "case") if noun else (root, "case")
        elif tag == "AUX":
            verb = _nearest(tags, i, 1, {"VERB"})
            if verb:
                heads[i], rels[i] = verb, "aux"
            else:
                heads[i], rels[i] = root, "cop" if not root_is_verb else "aux"
        elif tag == "SCONJ":
            verb = _nearest(tags, i, 1, {"VERB"})
            heads[i], rels[i] = (verb, "mark") if verb else (root, "mark")
        elif tag == "CCONJ":
            nxt = _nearest(tags, i, 1, {"NOUN", "PROPN", "VERB", "ADJ"})
            heads[i], rels[i] = (nxt, "cc") if nxt else (root, "cc")
        elif tag == "PRON":
            lower = tokens[i].form.lower()
            if lower in POSSESSIVE_PRONS:
                noun = _nearest(tags, i, 1, {"NOUN", "PROPN"})
                heads[i], rels[i] = (noun, "nmod:poss") if noun else (root, "nmod:poss")
            elif index < root and root_is_verb:
                heads[i], rels[i] = root, "nsubj"
            else:
                heads[i], rels[i] = root, "obl" if root_is_verb else "nmod"
        elif tag == "VERB":
            prev_noun = _nearest(tags, i, -1, {"NOUN", "PROPN"})
            coordinated = i > 0 and any(
                tags[j] == "CCONJ" for j in range(max(0, i - 4), i)
            ) and root_is_verb
            if coordinated and index > root:
                heads[i], rels[i] = root, "conj"
            elif prev_noun and tokens[i].form.lower().endswith("ing") and not root_is_verb:
                heads[i], rels[i] = prev_noun, "acl"
            elif prev_noun and index > root and root_is_verb:
                heads[i], rels[i] = root, "xcomp"
            elif prev_noun:
                heads[i], rels[i] = prev_noun, "acl"
            else:
                heads[i], rels[i] = root, "conj" if root_is_verb else "acl"
        else:  # NOUN / PROPN
            if i + 1 < n and tags[i + 1] in ("NOUN", "PROPN"):
                heads[i], rels[i] = index + 1, "compound"
                continue
            preceding_adp = None
            j = i - 1
            while j >= 0 and tags[j] not in ("NOUN", "PROPN", "VERB", "PUNCT"):
                if tags[j] == "ADP":
                    preceding_adp = j + 1
                j -= 1
            preceding_cc = None
            j = i - 1
            while j >= 0 and tags[j] not in ("NOUN", "PROPN", "VERB", "PUNCT"):
                if tags[j] == "CCONJ":
                    preceding_cc = j + 1
                j -= 1
            prev_noun = _nearest(tags, i, -1, {"NOUN", "PROPN"})
            prev_verb = _nearest(tags, i, -1, {"VERB"})
            if preceding_adp is not None:
                if prev_verb:
                    heads[i], rels[i] = prev_verb, "obl"
                elif prev_noun:
                    heads[i], rels[i] = prev_noun, "nmod"
                else:
                    heads[i], rels[i] = root, "obl"
            elif preceding_cc is not None and prev_noun:
                heads[i], rels[i] = prev_noun, "conj"
            elif index < root:
                heads[i], rels[i] = root, "nsubj" if root_is_verb else "nmod"
            elif root_is_verb:
                heads[i], rels[i] = root, "obj"
            else:
                heads[i], rels[i] = root, "nmod"
    return heads, rels


def _repair(heads: list[int], rels: list[str]) -> None:
    """Force a single-rooted acyclic tree; strays attach to the root as dep."""
    n = len(heads)
    roots = [i for i in range(n) if heads[i] == 0]
    if not roots:
        heads[0], rels[0] = 0, "root"
        roots = [0]
    root = roots[0] + 1
    for extra in roots[1:]:
        heads[extra], rels[extra] = root, "parataxis"
    for i in range(n):
        if heads[i] < 0 or heads[i] > n or heads[i] == i + 1:
            heads[i], rels[i] = root, "dep"
    for i in range(n):
        seen = set()
        cursor = i + 1
        while cursor != 0:
            if cursor in seen:
                heads[i], rels[i] = root, "dep"
                break
            seen.add(cursor)
            cursor = heads[cursor - 1]


class BuiltinEngine:
    """Deterministic rule-based English UD parser for caption text."""

    name = "builtin-en"
    version = "0.1.0"

    def parse(self, text: str) -> list[ParsedToken]:
        tokens = tokenize(text)
        if not tokens:
            raise ValueError("empty caption")
        tags = _tag(tokens)
        heads, rels = _attach(tokens, tags)
        _repair(heads, rels)
        return [
            ParsedToken(
                form=tok.form,
                lemma=_lemma(tok.form, tag),
                upos=tag,
                head=head,
                deprel=rel,
                space_after=tok.space_after,
            )
            for tok, tag, head, rel in zip(tokens, tags, heads, rels)
        ]

    def parse_batch(self, texts: list[str]) -> list[list[ParsedToken]]:
        return [self.parse(text) for text in texts]


class SpacyEngine:
    """spaCy-backed parser; requires the library and a downloaded model."""

    def __init__(self, model: str):
        import spacy  # deferred: optional dependency

        self.name = f"spacy:{model}"
        self._nlp = spacy.load(model)
        self.version = self._nlp.meta.get("version", "?")

    def parse(self, text: str) -> list[ParsedToken]:
        return self.parse_batch([text])[0]

    def parse_batch(self, texts: list[str]) -> list[list[ParsedToken]]:
        out = []
        for doc in self._nlp.pipe(texts):
            parsed: list[ParsedToken] = []
            sent_roots = [t for t in doc if t.head is t]
            primary_root = sent_roots[0].i if sent_roots else 0
            for token in doc:
                if token.head is token:
                    head, deprel = (0, "root") if token.i == primary_root else (primary_root + 1, "parataxis")
                else:
                    head, deprel = token.head.i + 1, token.dep_.lower()
                parsed.append(
                    ParsedToken(
                        form=token.text,
                        lemma=token.lemma_ or token.text.lower(),
                        upos=token.pos_,
                        head=head,
                        deprel=deprel if deprel != "root" or head == 0 else "parataxis",
                        space_after=token.whitespace_ == " ",
                    )
                )
            out.append(parsed)
        return out


def get_engine(model: str):
    if model == BuiltinEngine.name:
        return BuiltinEngine()
    if model.startswith("spacy:"):
        return SpacyEngine(model.split(":", 1)[1])
    raise ValueError(f"unknown parser model {model!r}; use 'builtin-en' or 'spacy:<model>'")

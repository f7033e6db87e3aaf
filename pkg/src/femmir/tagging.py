"""Tagged-sentence I/O and a small offline part-of-speech tagger.

The tagger is a closed-class lexicon plus suffix rules. It exists so the
attribute extractor runs without an external model; real deployments feed
tags from a proper tagger through the CoNLL reader.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .lexicon import Taxonomy, bundled_taxonomy

_TOKEN = re.compile(r"\d+'\d+\"?|[A-Za-z]+(?:[-'][A-Za-z]+)*|\d+(?:\.\d+)?|[^\sA-Za-z\d]")
_SENT_END = re.compile(r"(?<=[.!?])\s+(?=[A-Z\"“])")


@dataclass(frozen=True)
class TaggedSentence:
    tokens: tuple[tuple[str, str], ...]
    raw: str

    @property
    def words(self) -> list[str]:
        return [w for w, _ in self.tokens]

    @property
    def tags(self) -> list[str]:
        return [t for _, t in self.tokens]


_CLOSED = {
    "DT": "a an the this that these those some any each every no another",
    "CC": "and or but nor plus",
    "IN": "with in on at of for from by across near under over into about around through "
          "without like as than behind along during while",
    "TO": "to",
    "PRP": "he she it they i we you him her them who",
    "PRP$": "his hers its their our my your",
    "RB": "last very also not recently approximately possibly then still just later allegedly",
    "RP": "up down out off",
    "VBD": "was were had did ran wore left fled got said",
    "VBN": "seen been described known worn",
    "VBZ": "is has",
    "VBP": "are have",
    "MD": "may might could would should will",
    "JJ": "dark light medium tall short slim thin heavy long big small large old young bright "
          "pale baggy loose tight skinny asian hispanic caucasian latino latina male female "
          "non-binary striped plaid checkered",
    "NN": "clothing something nothing building evening morning clothes person build",
}
LEXICON = {w: tag for tag, words in _CLOSED.items() for w in words.split()}
PUNCT = {",": ",", ".": ".", ";": ":", ":": ":", "!": ".", "?": ".", "(": "(", ")": ")"}


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text)


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENT_END.split(text.strip()) if s.strip()]


def tag_token(word: str, first: bool, t: Taxonomy) -> str:
    low = word.lower()
    if word in PUNCT:
        return PUNCT[word]
    if not word[0].isalnum():
        return "``"
    if low in LEXICON:
        return LEXICON[low]
    if t.is_a(low, "color"):
        return "JJ"
    if low[0].isdigit():
        return "CD"
    if t.is_a(low, "artifact") or t.is_a(low, "person"):
        return "NNS" if low.endswith("s") and not low.endswith("ss") else "NN"
    if word[0].isupper() and not first:
        return "NNP"
    if low.endswith("ing") and len(low) > 4:
        return "VBG"
    if low.endswith("ed") and len(low) > 3:
        return "VBD"
    if low.endswith("ly") and len(low) > 3:
        return "RB"
    if low.endswith("s") and not low.endswith("ss") and len(low) > 3:
        return "NNS"
    return "NN"


def tag_sentence(text: str, t: Taxonomy | None = None) -> TaggedSentence:
    t = t or bundled_taxonomy()
    words = tokenize(text)
    return TaggedSentence(tuple((w, tag_token(w, i == 0, t)) for i, w in enumerate(words)), text)


def detokenize(words) -> str:
    out = " ".join(words)
    return re.sub(r" ([,.;:!?)])", r"\1", out)


def read_conll(path) -> list[TaggedSentence]:
    """``token<TAB>tag`` lines with a blank line between sentences."""
    sentences, cur = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                if cur:
                    sentences.append(TaggedSentence(tuple(cur), detokenize(w for w, _ in cur)))
                    cur = []
                continue
            parts = line.split("\t")
            if len(parts) == 1:
                parts.append("")  # untagged token
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected token<TAB>tag")
            cur.append((parts[0], parts[1].strip()))
    if cur:
        sentences.append(TaggedSentence(tuple(cur), detokenize(w for w, _ in cur)))
    return sentences


def write_conll(sentences, fh) -> None:
    for s in sentences:
        for w, tag in s.tokens:
            fh.write(f"{w}\t{tag}\n")
        fh.write("\n")

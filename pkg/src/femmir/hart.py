"""Human attribute recognition from text.

Two stages: pick candidate sentences that talk about clothing (regex,
token similarity, or an external scorer, optionally stacked), then run a
part-of-speech driven scan over each candidate to pull out gender, race,
height and a list of garments with their descriptions.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .lexicon import EmbeddingStore, Taxonomy, UnknownConcept, bundled_taxonomy, concept_key, cosine_sim, wpdist
from .records import Entity, PropertyRecord, PropertyValue, Relation
from .tagging import TaggedSentence, tag_sentence, tokenize

DEFAULT_KEY_PHRASES = ("clothes", "wear", "shirts", "pants")
MODELS = ("re", "embedding", "taxonomy", "external",
          "stacked-re-embedding", "stacked-re-taxonomy", "stacked-re-external")
# thresholds from the reported settings table: Word2Vec 0.5, WordNet 0.9, SBERT 0.85
DEFAULT_THETA = {"embedding": 0.5, "taxonomy": 0.9, "external": 0.85}


def soft_model(model: str) -> str | None:
    if model == "re":
        return None
    return model.removeprefix("stacked-re-")


@dataclass
class CandidateConfig:
    key_phrases: tuple[str, ...] = DEFAULT_KEY_PHRASES
    model: str = "re"
    theta: float | None = None
    soft_key_phrases: tuple[str, ...] | None = None  # phrases for the soft stage; defaults to key_phrases

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        soft = soft_model(self.model)
        if soft is not None and self.theta is None:
            self.theta = DEFAULT_THETA[soft]
        self.key_phrases = tuple(self.key_phrases)


@dataclass
class CandidateSet:
    indices: list[int]
    source: str  # "re", the soft model name, or "none"

    def __bool__(self) -> bool:
        return bool(self.indices)


def re_matches(sentence: str, phrase: str) -> bool:
    return re.search(re.escape(phrase) + r"[^.]+", sentence, re.IGNORECASE) is not None


def extract_candidates_re(sentences: Sequence[str], key_phrases: Sequence[str]) -> list[int]:
    return [i for i, s in enumerate(sentences) if any(re_matches(s, q) for q in key_phrases)]


class EmbeddingScorer:
    def __init__(self, store: EmbeddingStore):
        self.store = store

    def __call__(self, phrase: str, token: str) -> float:
        u, w = self.store.phrase(phrase), self.store.get(token)
        if u is None or w is None:
            return 0.0
        try:
            return cosine_sim(u, w)
        except ValueError:
            return 0.0


class TaxonomyScorer:
    def __init__(self, taxonomy: Taxonomy | None = None):
        self.taxonomy = taxonomy or bundled_taxonomy()

    def __call__(self, phrase: str, token: str) -> float:
        try:
            return wpdist(concept_key(phrase), token, self.taxonomy)
        except UnknownConcept:
            return 0.0


class ExternalScores:
    """Per-sentence scores computed elsewhere (e.g. a zero-shot NLI classifier).

    Keys are ``(sentence text, key phrase)``; missing pairs score 0.
    """

    def __init__(self, scores: Mapping[tuple[str, str], float]):
        self.scores = {(s.strip(), q): float(v) for (s, q), v in scores.items()}

    @classmethod
    def load(cls, path) -> "ExternalScores":
        scores = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    scores[(row["sentence"], row["key_phrase"])] = float(row["score"])
                except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                    raise ValueError(f"line {lineno}: expected {{sentence, key_phrase, score}}") from None
        return cls(scores)

    def sentence_score(self, sentence: str, phrase: str) -> float:
        return self.scores.get((sentence.strip(), phrase), 0.0)


def sentence_similarity(sentence: str, phrase: str, scorer: Callable[[str, str], float]) -> float:
    """Best token similarity to the phrase; tokens without a vector or concept score 0."""
    return max((scorer(phrase, w.lower()) for w in tokenize(sentence) if w[0].isalpha()), default=0.0)


def extract_candidates_sim(sentences: Sequence[str], key_phrases: Sequence[str],
                           scorer, theta: float) -> list[int]:
    out = []
    for i, s in enumerate(sentences):
        if isinstance(scorer, ExternalScores):
            best = max((scorer.sentence_score(s, q) for q in key_phrases), default=0.0)
        else:
            best = max((sentence_similarity(s, q, scorer) for q in key_phrases), default=0.0)
        if best > theta:
            out.append(i)
    return out


def extract_candidates(sentences: Sequence[str], cfg: CandidateConfig, scorer=None) -> CandidateSet:
    """Run the configured model; stacked models fall back only when the regex finds nothing."""
    soft = soft_model(cfg.model)
    if cfg.model == "re" or cfg.model.startswith("stacked-"):
        hits = extract_candidates_re(sentences, cfg.key_phrases)
        if hits or soft is None:
            return CandidateSet(hits, "re" if hits else "none")
    if scorer is None:
        raise ValueError(f"model {cfg.model!r} needs a {soft} scorer")
    phrases = cfg.soft_key_phrases or cfg.key_phrases
    hits = extract_candidates_sim(sentences, phrases, scorer, cfg.theta)
    return CandidateSet(hits, soft if hits else "none")


def extract_candidates_stacked(sentences: Sequence[str], cfg: CandidateConfig, scorer) -> CandidateSet:
    if not cfg.model.startswith("stacked-"):
        raise ValueError("stacked extraction needs a stacked-re-* model")
    return extract_candidates(sentences, cfg, scorer)


# -- property values -------------------------------------------------------------

@dataclass
class Vocabulary:
    gender: dict[str, str] = field(default_factory=lambda: {
        "male": "male", "man": "male", "boy": "male", "guy": "male", "gentleman": "male",
        "female": "female", "woman": "female", "girl": "female", "lady": "female",
        "non-binary": "non-binary", "nonbinary": "non-binary",
    })
    race: tuple[str, ...] = ("white", "black", "asian", "hispanic", "caucasian", "latino", "latina",
                             "african american", "african-american", "native american", "middle eastern")
    person_nouns: tuple[str, ...] = ("person", "suspect", "individual", "subject")

    def gender_re(self):
        words = sorted(self.gender, key=len, reverse=True)
        return re.compile(r"\b(" + "|".join(map(re.escape, words)) + r")\b", re.IGNORECASE)

    def race_re(self):
        # a race word must qualify a gender or person noun ("White male") to avoid clothing colors
        races = "|".join(map(re.escape, sorted(self.race, key=len, reverse=True)))
        nouns = "|".join(map(re.escape, sorted(list(self.gender) + list(self.person_nouns), key=len, reverse=True)))
        return re.compile(rf"\b({races})\b(?=\s+(?:{nouns})\b)", re.IGNORECASE)


_NUM = r"(?:\d|one|two|three|four|five|six|seven)"
_INCHES = r"(?:\d{1,2}|one|two|three|four|five|six|seven|eight|nine|ten|eleven)"
_HEIGHT_RE = re.compile(
    rf"\b\d\s*'\s*\d{{1,2}}\s*(?:\"|'')?"
    rf"|\b{_NUM}[- ](?:foot|feet|ft)(?:[- ]{_INCHES}\b(?:\s*(?:inches|inch|in)\b)?)?(?:\s+tall)?",
    re.IGNORECASE,
)
_WEARING_RE = re.compile(r"\bwearing\b.*", re.IGNORECASE | re.DOTALL)

FINITE_PROPS = ("gender", "race", "height")


def re_prop_values(sentence: str, prop: str, vocab: Vocabulary | None = None) -> str:
    """Matched value for gender/race/height, or the clause from "wearing" for clothes.

    Returns ``""`` when nothing matches.
    """
    vocab = vocab or Vocabulary()
    if prop == "gender":
        m = vocab.gender_re().search(sentence)
        return vocab.gender[m.group(1).lower()] if m else ""
    if prop == "race":
        m = vocab.race_re().search(sentence)
        return m.group(1) if m else ""
    if prop == "height":
        m = _HEIGHT_RE.search(sentence)
        return m.group(0).strip() if m else ""
    if prop == "clothes":
        m = _WEARING_RE.search(sentence)
        return m.group(0).strip().rstrip(".!?;").strip() if m else ""
    raise ValueError(f"unknown property {prop!r}")


def _finite_surface(sentence: str, vocab: Vocabulary) -> set[str]:
    found = set()
    for m in vocab.gender_re().finditer(sentence):
        found.add(m.group(1).lower())
    for m in vocab.race_re().finditer(sentence):
        found.add(m.group(1).lower())
    m = _HEIGHT_RE.search(sentence)
    if m:
        found.update(w.lower() for w in tokenize(m.group(0)))
    return found


# -- POS scan --------------------------------------------------------------------

_CLASS = {}
for _cls, _tags in {
    "DET": "DT PDT WDT", "CONJ": "CC ,", "PREP": "IN TO", "PTCP": "RP",
    "ADV": "RB RBR RBS", "VERB": "VB VBD VBG VBN VBP VBZ MD", "ADJ": "JJ JJR JJS",
    "NOUN": "NN NNS NNP NNPS", "PRP": "PRP PRP$ WP WP$",
}.items():
    for _t in _tags.split():
        _CLASS[_t] = _cls

P_DCP = {"DET", "CONJ", "PREP", "PTCP", "ADV"}
P_PAV = {"PTCP", "ADV", "VERB"}
P_PE = {"PRP", "NONE"}
NAME_STOP = {"DET", "CONJ", "PREP"}  # cannot open a garment name


def tag_class(tag: str | None) -> str:
    if not tag:
        return "NONE"
    return _CLASS.get(tag, "OTHER")


def match_color(token: str, t: Taxonomy | None = None) -> bool:
    t = t or bundled_taxonomy()
    return t.is_a(token.lower(), "color")


@dataclass
class ClothesItem:
    name: str
    descriptions: list[str] = field(default_factory=list)

    def as_tuple(self):
        return (self.name, list(self.descriptions))


@dataclass
class AttributeResult:
    gender: str | None = None
    race: str | None = None
    height: str | None = None
    clothes: list[ClothesItem] = field(default_factory=list)

    def clothes_tuples(self):
        return [c.as_tuple() for c in self.clothes]

    def is_empty(self) -> bool:
        return not (self.gender or self.race or self.height or self.clothes)


def _prop_name(name_idx: list[int], i: int, words, classes) -> str:
    run = []
    for j in reversed(name_idx):
        if j != (run[0] if run else i) - 1:
            break
        run.insert(0, j)
    while run and classes[run[0]] in NAME_STOP:
        run.pop(0)
    return " ".join([words[j] for j in run] + [words[i]])


def scan_clothes(tokens: Sequence[tuple[str, str]], t: Taxonomy | None = None) -> list[ClothesItem]:
    """Walk tagged tokens collecting (garment name, descriptions) pairs."""
    t = t or bundled_taxonomy()
    words = [w for w, _ in tokens]
    classes = [tag_class(tag) for _, tag in tokens]
    out: list[ClothesItem] = []
    name_idx: list[int] = []
    desc: list[str] = []
    start = 0
    while start < len(words) and classes[start] == "VERB":  # relation verbs such as "was wearing"
        start += 1
    for i in range(start, len(words)):
        c, w = classes[i], words[i]
        prev = classes[i - 1] if i > start else None
        if c in P_DCP or c in P_PAV:
            if c in P_PAV and prev in P_PE:
                break
            name_idx.append(i)
        elif c == "ADJ":
            name_idx = []
            desc.append(w)
        elif c == "NOUN":
            if match_color(w, t):
                desc.append(w)
                name_idx = []
                continue
            if prev == "NOUN" and out and out[-1].name.split()[-1] == words[i - 1]:
                out[-1].name += " " + w
                out[-1].descriptions.extend(desc)
            else:
                out.append(ClothesItem(_prop_name(name_idx, i, words, classes), desc))
            name_idx, desc = [], []
        else:
            break
    return out


def clothes_span(sentence: TaggedSentence, vocab: Vocabulary | None = None) -> list[tuple[str, str]]:
    """Tokens to scan: from "wearing" on, else the sentence minus extracted values.

    Without "wearing", a leading subject clause ending in the first verb run
    ("She had ...") is dropped unless an adjective precedes that verb.
    """
    vocab = vocab or Vocabulary()
    toks = list(sentence.tokens)
    for i, (w, _) in enumerate(toks):
        if w.lower() == "wearing":
            return toks[i:]
    found = _finite_surface(sentence.raw, vocab)
    toks = [(w, tag) for w, tag in toks if w.lower() not in found]
    classes = [tag_class(tag) for _, tag in toks]
    if "VERB" in classes:
        first = classes.index("VERB")
        if "ADJ" not in classes[:first]:
            end = first
            while end < len(toks) and classes[end] == "VERB":
                end += 1
            toks = toks[end:]
    return toks


def posi_har_sentence(sentence: TaggedSentence, vocab: Vocabulary | None = None,
                      t: Taxonomy | None = None) -> AttributeResult:
    vocab = vocab or Vocabulary()
    res = AttributeResult()
    for prop in FINITE_PROPS:
        value = re_prop_values(sentence.raw, prop, vocab)
        if value:
            setattr(res, prop, value)
    res.clothes = scan_clothes(clothes_span(sentence, vocab), t)
    return res


def posi_har(tagged: Sequence[TaggedSentence], vocab: Vocabulary | None = None,
             t: Taxonomy | None = None) -> AttributeResult:
    """Merge per-sentence results: first value wins for finite props, clothes concatenate."""
    merged = AttributeResult()
    for s in tagged:
        r = posi_har_sentence(s, vocab, t)
        for prop in FINITE_PROPS:
            if getattr(merged, prop) is None and getattr(r, prop):
                setattr(merged, prop, getattr(r, prop))
        merged.clothes.extend(r.clothes)
    return merged


def person_entities(result: AttributeResult, pid: str, t: Taxonomy | None = None):
    t = t or bundled_taxonomy()
    attrs = {p: PropertyValue.of(getattr(result, p)) for p in FINITE_PROPS if getattr(result, p)}
    ents = [Entity(pid, "Person", True, attrs)]
    rels = []
    for k, item in enumerate(result.clothes, 1):
        cid = f"{pid}-c{k}"
        colors = [d for d in item.descriptions if match_color(d, t)]
        other = [d for d in item.descriptions if not match_color(d, t)]
        cattrs = {"type": PropertyValue.of(item.name)}
        if colors:
            cattrs["color"] = PropertyValue.of(colors)
        if other:
            cattrs["description"] = PropertyValue.of(other)
        ents.append(Entity(cid, "Clothes", False, cattrs))
        rels.append(Relation("wearing", pid, cid))
    return ents, rels


@dataclass
class HartOutput:
    record: PropertyRecord
    candidates: CandidateSet
    per_sentence: dict[int, AttributeResult]


def run_hart(doc_id: str, sentences: Sequence[TaggedSentence], cfg: CandidateConfig | None = None,
             scorer=None, vocab: Vocabulary | None = None, t: Taxonomy | None = None) -> HartOutput:
    """Full pipeline for one document: one Person per candidate sentence with any finding."""
    cfg = cfg or CandidateConfig()
    t = t or bundled_taxonomy()
    cands = extract_candidates([s.raw for s in sentences], cfg, scorer)
    entities, relations, per = [], [], {}
    for i in cands.indices:
        r = posi_har_sentence(sentences[i], vocab, t)
        per[i] = r
        if r.is_empty():
            continue
        persons = sum(e.entity_type == "Person" for e in entities)
        ents, rels = person_entities(r, f"p{persons + 1}", t)
        entities.extend(ents)
        relations.extend(rels)
    record = PropertyRecord(doc_id, "text", {}, tuple(entities), tuple(relations))
    return HartOutput(record, cands, per)


def tag_text(text: str, t: Taxonomy | None = None) -> list[TaggedSentence]:
    from .tagging import split_sentences
    return [tag_sentence(s, t) for s in split_sentences(text)]

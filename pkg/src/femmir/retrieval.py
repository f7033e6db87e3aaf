"""Corpus indexing, weak-label generation, ranking, and the synthetic corpus."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import ced as ced_mod
from .harg import EplGraph, HARG, construct_harg, discover_eplv
from .lexicon import Taxonomy, bundled_taxonomy
from .records import (MODALITIES, CostConfig, Entity, PropertyRecord, PropertyValue, Relation,
                      RecordError, norm_prop, read_jsonl)
from .scorer import EmbeddingCache, ScorerModel, predict_pairs


class QueryError(ValueError):
    pass


@dataclass
class CorpusIndex:
    records: dict[str, PropertyRecord] = field(default_factory=dict)
    hargs: dict[str, HARG] = field(default_factory=dict)
    epl: dict[str, EplGraph] = field(default_factory=dict)
    by_modality: dict[str, list[str]] = field(default_factory=dict)

    def add(self, record: PropertyRecord) -> None:
        if record.id in self.records:
            raise RecordError(f"duplicate record id {record.id!r}")
        g = construct_harg(record)
        self.records[record.id] = record
        self.hargs[record.id] = g
        self.epl[record.id] = discover_eplv(g)
        self.by_modality.setdefault(record.modality, []).append(record.id)

    def ids(self, target: str | Iterable[str] = "all") -> list[str]:
        if target == "all":
            return list(self.records)
        wanted = {target} if isinstance(target, str) else set(target)
        unknown = wanted - set(MODALITIES)
        if unknown:
            raise QueryError(f"unknown target modality {sorted(unknown)}")
        return [rid for rid, r in self.records.items() if r.modality in wanted]

    def __len__(self) -> int:
        return len(self.records)


def build_index(records: Iterable[PropertyRecord]) -> CorpusIndex:
    idx = CorpusIndex()
    for r in records:
        idx.add(r)
    return idx


def index_corpus(path) -> CorpusIndex:
    return build_index(read_jsonl(path))


def record_from_properties(props: Mapping[str, object], entity_type: str = "Person",
                           qid: str = "query", modality: str = "text") -> PropertyRecord:
    """Wrap a plain property map into a one-entity query record."""
    attrs = {norm_prop(k): PropertyValue.of(v) for k, v in props.items()}
    if not attrs:
        raise QueryError("empty query: no properties given")
    return PropertyRecord(qid, modality, {}, (Entity("q1", entity_type, True, attrs),), ())


@dataclass
class RankedEntry:
    id: str
    modality: str
    sim: float
    ced: float | None = None


@dataclass
class RankedResult:
    query_id: str
    entries: list[RankedEntry]

    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def restrict(self, modality: str) -> "RankedResult":
        if modality == "all":
            return self
        return RankedResult(self.query_id, [e for e in self.entries if e.modality == modality])

    def to_csv(self) -> str:
        exact = any(e.ced is not None for e in self.entries)
        lines = ["rank,id,modality,sim" + (",ced" if exact else "")]
        for rank, e in enumerate(self.entries, 1):
            row = f"{rank},{e.id},{e.modality},{e.sim:.6f}"
            if exact:
                row += "," + ("inf" if e.ced is None or math.isinf(e.ced) else f"{e.ced:.6f}")
            lines.append(row)
        return "\n".join(lines) + "\n"


def rank_entries(entries: list[RankedEntry], self_id: str | None = None) -> list[RankedEntry]:
    """Descending sim, ties by ascending id; the query's own record wins its tie."""
    return sorted(entries, key=lambda e: (-e.sim, e.id != self_id, e.id))


def query(idx: CorpusIndex, q: PropertyRecord | Mapping, mode: str = "exact", target="all",
          cfg: CostConfig | None = None, model: ScorerModel | None = None,
          taxonomy: Taxonomy | None = None, top: int | None = None) -> RankedResult:
    cfg = cfg or CostConfig()
    if not isinstance(q, PropertyRecord):
        q = record_from_properties(q)
    if not q.entities and not q.metadata:
        raise QueryError(f"empty query {q.id!r}: no entities and no metadata")
    ids = idx.ids(target)
    entries = []
    if mode == "exact":
        t = bundled_taxonomy() if taxonomy is None else taxonomy
        gq = discover_eplv(construct_harg(q))
        for rid in ids:
            lab = ced_mod.ced(gq, idx.epl[rid], cfg, t)
            entries.append(RankedEntry(rid, idx.records[rid].modality, lab.sim, lab.ced))
    elif mode == "learned":
        if model is None:
            raise QueryError("learned mode needs a scorer model")
        hq = construct_harg(q)
        sims = predict_pairs([(hq, idx.hargs[rid]) for rid in ids], model, EmbeddingCache(model))
        entries = [RankedEntry(rid, idx.records[rid].modality, float(s)) for rid, s in zip(ids, sims)]
    else:
        raise QueryError(f"unknown mode {mode!r}")
    ranked = rank_entries(entries, q.id)
    return RankedResult(q.id, ranked[:top] if top else ranked)


def relevant(label, cfg: CostConfig | None = None) -> bool:
    """A candidate is relevant when its CED to the query is under the threshold."""
    threshold = (cfg or CostConfig()).relevance_ced_threshold
    value = label.ced if hasattr(label, "ced") else label
    return value is not None and value < threshold


def _label_rows(args):
    qid, cids, epl, cfg, t = args
    gq = epl[qid]
    return [ced_mod.ced(gq, epl[cid], cfg, t) for cid in cids]


def candidate_plan(idx: CorpusIndex, sample: int | None = None, seed: int = 0) -> list[tuple[str, list[str]]]:
    """Query id -> candidate ids, sorted; a sample caps candidates per query."""
    ids = sorted(idx.records)
    rng = np.random.default_rng(seed)
    plan = []
    for qid in ids:
        cands = ids
        if sample is not None and sample < len(ids):
            picked = rng.choice(len(ids), size=sample, replace=False)
            cands = [ids[i] for i in sorted(picked)]
        plan.append((qid, cands))
    return plan


def generate_weak_labels(idx: CorpusIndex, cfg: CostConfig | None = None,
                         taxonomy: Taxonomy | None = None, sample: int | None = None,
                         seed: int = 0, threads: int = 1) -> list[ced_mod.CedLabel]:
    """CED labels for every ordered (query, candidate) pair, ordered by ids."""
    cfg = cfg or CostConfig()
    t = bundled_taxonomy() if taxonomy is None else taxonomy
    plan = candidate_plan(idx, sample, seed)
    jobs = [(qid, cids, idx.epl, cfg, t) for qid, cids in plan]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_label_rows, jobs, chunksize=max(1, len(jobs) // (threads * 4))))
    else:
        chunks = [_label_rows(j) for j in jobs]
    return [lab for chunk in chunks for lab in chunk]


# -- synthetic corpus ----------------------------------------------------------

GENDERS = ("male", "female")
RACES = ("white", "black", "asian", "hispanic")
TOP_COLORS = ("red", "blue", "green", "black", "white", "grey", "yellow", "purple", "pink", "brown")
BOTTOM_COLORS = ("black", "blue", "grey", "white", "brown", "green", "khaki", "navy", "red")
CLOTHES = ("shirt", "jacket", "coat", "hoodie", "sweater")


def modality_quota(n: int, mix: Mapping[str, float]) -> dict[str, int]:
    """Largest-remainder rounding of ``n * share`` per modality."""
    total = sum(mix.values())
    if total <= 0:
        raise ValueError("modality mix must have positive total weight")
    exact = {m: n * w / total for m, w in mix.items()}
    counts = {m: int(math.floor(x)) for m, x in exact.items()}
    left = n - sum(counts.values())
    order = sorted(mix, key=lambda m: (-(exact[m] - counts[m]), list(mix).index(m)))
    for m in order[:left]:
        counts[m] += 1
    return counts


def synth_corpus(seed: int = 0, n: int = 100, mix: Mapping[str, float] | None = None,
                 clusters: int = 0, cluster_size: int = 3, with_clothes: bool = False) -> list[PropertyRecord]:
    """Deterministic person records drawn from small vocabularies.

    ``clusters`` plants groups of ``cluster_size`` records with identical
    properties. ``with_clothes`` adds a Clothes entity linked by ``wearing``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    mix = dict(mix or {"text": 1 / 3, "image": 1 / 3, "video": 1 / 3})
    for m in mix:
        if m not in MODALITIES:
            raise ValueError(f"unknown modality {m!r}")
    rng = np.random.default_rng(seed)
    quota = modality_quota(n, mix)
    modalities = [m for m in mix for _ in range(quota[m])]
    modalities = [modalities[i] for i in rng.permutation(n)]

    def draw():
        return {
            "gender": GENDERS[rng.integers(len(GENDERS))],
            "race": RACES[rng.integers(len(RACES))],
            "top-color": TOP_COLORS[rng.integers(len(TOP_COLORS))],
            "bottom-color": BOTTOM_COLORS[rng.integers(len(BOTTOM_COLORS))],
        }, (CLOTHES[rng.integers(len(CLOTHES))], TOP_COLORS[rng.integers(len(TOP_COLORS))])

    profiles = [draw() for _ in range(n)]
    slot = 0
    for _ in range(clusters):
        if slot + cluster_size > n:
            break
        for k in range(1, cluster_size):
            profiles[slot + k] = profiles[slot]
        slot += cluster_size

    width = len(str(n - 1))
    out = []
    for i, (attrs, (garment, color)) in enumerate(profiles):
        ents = [Entity("p1", "Person", True, {k: PropertyValue.of(v) for k, v in attrs.items()})]
        rels = []
        if with_clothes:
            ents.append(Entity("c1", "Clothes", False,
                               {"type": PropertyValue.of(garment), "color": PropertyValue.of(color)}))
            rels.append(Relation("wearing", "p1", "c1"))
        out.append(PropertyRecord(f"s{seed}-{i:0{width}d}", modalities[i], {}, tuple(ents), tuple(rels)))
    return out


def cluster_members(n: int, clusters: int, cluster_size: int = 3) -> list[list[int]]:
    groups = []
    for c in range(clusters):
        start = c * cluster_size
        if start + cluster_size > n:
            break
        groups.append(list(range(start, start + cluster_size)))
    return groups

"""Ranking metrics: average precision, PR curves, and per-modality mAP tables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

RECALL_LEVELS = np.linspace(0.0, 1.0, 11)


def _ids(ranked) -> list[str]:
    return ranked.ids() if hasattr(ranked, "ids") else list(ranked)


def average_precision(ranked, rel: Iterable[str], strict: bool = False) -> float | None:
    """AP over the full returned ranking; ``None`` when nothing is relevant.

    By default the sum of precision@k at relevant hits is divided by the
    number of relevant items retrieved; ``strict`` divides by ``len(rel)``.
    """
    rel = set(rel)
    if not rel:
        return None
    hits, total = 0, 0.0
    for k, rid in enumerate(_ids(ranked), 1):
        if rid in rel:
            hits += 1
            total += hits / k
    if hits == 0:
        return 0.0
    return total / (len(rel) if strict else hits)


def pr_curve(ranked, rel: Iterable[str]) -> list[tuple[float, float]]:
    rel = set(rel)
    points, hits = [], 0
    for k, rid in enumerate(_ids(ranked), 1):
        hits += rid in rel
        points.append((hits / len(rel) if rel else 0.0, hits / k))
    return points


def interpolated_pr(points: Sequence[tuple[float, float]]) -> np.ndarray:
    """Max precision at recall >= r for the 11 standard recall levels."""
    if not points:
        return np.zeros_like(RECALL_LEVELS)
    rec = np.array([p[0] for p in points])
    prec = np.array([p[1] for p in points])
    out = np.zeros_like(RECALL_LEVELS)
    for i, r in enumerate(RECALL_LEVELS):
        mask = rec >= r - 1e-12
        out[i] = prec[mask].max() if mask.any() else 0.0
    return out


def mean_average_precision(aps: Iterable[float | None]) -> float | None:
    vals = [a for a in aps if a is not None]
    return float(np.mean(vals)) if vals else None


@dataclass
class MapCell:
    query_modality: str
    target_modality: str
    map: float | None
    n_queries: int
    skipped: int

    def to_dict(self) -> dict:
        return {
            "query_modality": self.query_modality,
            "target_modality": self.target_modality,
            "map": None if self.map is None else round(self.map, 6),
            "n_queries": self.n_queries,
            "skipped": self.skipped,
        }


def map_table(per_query: dict[str, dict[str, float | None]], query_modality: dict[str, str]) -> list[MapCell]:
    """Group per-query APs (query id -> target -> AP) into modality cells.

    Adds an ``all`` query row and averages every cell over its queries.
    """
    cells: dict[tuple[str, str], list[float | None]] = {}
    for qid, by_target in sorted(per_query.items()):
        for target, ap in by_target.items():
            for qmod in (query_modality.get(qid, "unknown"), "all"):
                cells.setdefault((qmod, target), []).append(ap)
    order = {"text": 0, "image": 1, "video": 2, "all": 3}
    out = []
    for (qmod, target) in sorted(cells, key=lambda k: (order.get(k[0], 9), k[0], order.get(k[1], 9))):
        aps = cells[(qmod, target)]
        kept = [a for a in aps if a is not None]
        out.append(MapCell(qmod, target, mean_average_precision(kept), len(kept), len(aps) - len(kept)))
    return out

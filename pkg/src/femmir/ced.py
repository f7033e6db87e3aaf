"""Content Edit Distance between two EPL graphs.

The query graph's EPL vertices are assigned to the candidate's with a
rectangular Hungarian solver. Each cell prices one vertex assignment from
property comparisons plus a soft edge-label term; the cumulative variant
adds the parent pair's cost before solving. Surplus candidate content is
never charged: the question asked is whether the query is contained in the
candidate.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .harg import EplGraph, EplVertex
from .lexicon import Taxonomy, UnknownConcept, concept_key, wpdist
from .records import CostConfig, PropertyValue

INF = math.inf


def list_edit_distance(q, c, rcost: float = 1.0, icost: float = 1.0) -> float:
    """Token Levenshtein where dropping candidate tokens is free."""
    q, c = list(q), list(c)
    prev = [0.0] * (len(c) + 1)
    for i in range(1, len(q) + 1):
        cur = [i * icost] + [0.0] * len(c)
        for j in range(1, len(c) + 1):
            sub = prev[j - 1] + (0.0 if q[i - 1] == c[j - 1] else rcost)
            cur[j] = min(sub, prev[j] + icost, cur[j - 1])
        prev = cur
    return prev[-1]


def hash_compare(q, c, rcost: float = 1.0) -> float:
    """rcost per query token missing from the candidate (multiset)."""
    missing = Counter(q) - Counter(c)
    return rcost * sum(missing.values())


def munkres_assign(cells) -> tuple[list[tuple[int, int]], float]:
    """Minimum-cost assignment of every row to a distinct column.

    ``cells`` is n x m with n <= m; ``inf`` marks forbidden pairs. Returns
    the (row, col) pairs in row order and the total, which is ``inf`` when no
    finite full assignment exists.
    """
    a = np.asarray(cells, dtype=float)
    if a.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    n, m = a.shape
    if n == 0:
        return [], 0.0
    if n > m:
        raise ValueError(f"need rows <= cols, got {n}x{m}")
    if np.isnan(a).any() or (a < 0).any():
        raise ValueError("costs must be non-negative numbers")
    finite = np.isfinite(a)
    big = float(a[finite].sum()) + 1.0
    w = np.where(finite, a, big)

    # shortest augmenting path with row/column potentials, 1-based internally
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=int)  # p[j]: row matched to column j
    way = np.zeros(m + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            cur = w[i0 - 1] - u[i0] - v[1:]
            free = ~used[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1  # first minimum -> lowest column index
            delta = cand[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    row_to_col = [0] * n
    for j in range(1, m + 1):
        if p[j]:
            row_to_col[p[j] - 1] = j - 1
    pairs = [(i, row_to_col[i]) for i in range(n)]
    if any(not finite[i, j] for i, j in pairs):
        return pairs, INF
    return pairs, float(sum(a[i, j] for i, j in pairs))


def _edge_pair_cost(a: str, b: str, cfg: CostConfig, t: Taxonomy | None) -> float:
    same = concept_key(a) == concept_key(b)
    if same and cfg.exact_edge_match_zero:
        return 0.0
    if t is not None:
        try:
            return 1.0 / wpdist(a, b, t)
        except UnknownConcept:
            pass
    return 0.0 if same else cfg.edge_icost


def edge_assignment_cost(q_labels, c_labels, cfg: CostConfig, t: Taxonomy | None) -> float:
    """Cheapest matching of query edge labels onto candidate ones."""
    q_labels, c_labels = list(q_labels), list(c_labels)
    if not q_labels:
        return 0.0
    k, l = len(q_labels), len(c_labels)
    cells = np.empty((k, max(k, l)))
    for i, a in enumerate(q_labels):
        for j, b in enumerate(c_labels):
            cells[i, j] = _edge_pair_cost(a, b, cfg, t)
        cells[i, l:] = cfg.edge_icost
    return munkres_assign(cells)[1]


def _props(v: EplVertex, cfg: CostConfig) -> dict[str, PropertyValue]:
    if v.parent is None and not cfg.include_metadata:
        return {}
    return v.props


def _fold(tokens) -> list[str]:
    return [tok.casefold() for tok in tokens]


def property_cost(prop: str, zq: PropertyValue, zc: PropertyValue | None, cfg: CostConfig) -> float:
    if zq.is_null:
        return 0.0  # the query asks for nothing here
    if zc is None or zc.is_null:
        return cfg.insert_cost(prop)
    rcost = cfg.replace_cost(prop)
    if zq.kind == "scalar" and zc.kind == "scalar":
        return 0.0 if zq.scalar.casefold() == zc.scalar.casefold() else rcost
    q, c = _fold(zq.tokens()), _fold(zc.tokens())
    ordcmp = cfg.ordered(prop)
    return (ordcmp * list_edit_distance(q, c, rcost, cfg.insert_cost(prop))
            + (1 - ordcmp) * hash_compare(q, c, rcost))


def eplv_cost(u: EplVertex, v: EplVertex, cfg: CostConfig, t: Taxonomy | None = None) -> float:
    if u.entity_type != v.entity_type:
        return INF
    vprops = _props(v, cfg)
    total = 0.0
    for prop, zq in _props(u, cfg).items():
        total += property_cost(prop, zq, vprops.get(prop), cfg)
    return total + edge_assignment_cost(u.adjacent_edge_labels, v.adjacent_edge_labels, cfg, t)


def insertion_cost(u: EplVertex, cfg: CostConfig) -> float:
    """Price of a query vertex with no counterpart in the candidate."""
    props = sum(cfg.insert_cost(p) for p, z in _props(u, cfg).items() if not z.is_null)
    return props + cfg.edge_icost * len(u.adjacent_edge_labels)


@dataclass
class CostMatrix:
    cells: np.ndarray
    row_map: list[int]
    col_map: list[int | None]  # None marks a synthetic insertion column

    @property
    def shape(self):
        return self.cells.shape


def build_cost_matrix(gq: EplGraph, gc: EplGraph, cfg: CostConfig, t: Taxonomy | None = None) -> CostMatrix:
    if len(gq) == 0:
        raise ValueError("query graph has no vertices")
    n, m = len(gq), len(gc)
    width = max(n, m)
    cells = np.zeros((n, width))
    for i, u in enumerate(gq.vertices):
        for j, v in enumerate(gc.vertices):
            cells[i, j] = eplv_cost(u, v, cfg, t)
        if width > m:
            cells[i, m:] = insertion_cost(u, cfg)
    return CostMatrix(cells, [u.id for u in gq.vertices],
                      [v.id for v in gc.vertices] + [None] * (width - m))


def apply_cumulative(cmat: CostMatrix, gq: EplGraph, gc: EplGraph) -> CostMatrix:
    """Add each parent pair's (already cumulative) cost to its children's cell.

    A root parent on either side contributes nothing.
    """
    cells = cmat.cells.copy()
    qv = gq.by_id()
    cv = gc.by_id()
    row_of = {vid: i for i, vid in enumerate(cmat.row_map)}
    col_of = {vid: j for j, vid in enumerate(cmat.col_map) if vid is not None}
    first_ins = next((j for j, vid in enumerate(cmat.col_map) if vid is None), None)

    def real_parent(vertex):
        return None if vertex.parent is None or vertex.parent == 0 else vertex.parent

    rows = sorted(range(len(cmat.row_map)), key=lambda i: (qv[cmat.row_map[i]].level, i))
    for i in rows:
        pq = real_parent(qv[cmat.row_map[i]])
        if pq is None:
            continue
        pi = row_of[pq]
        for j, vid in enumerate(cmat.col_map):
            if vid is None:
                cells[i, j] += cells[pi, first_ins]
                continue
            pc = real_parent(cv[vid])
            if pc is not None:
                cells[i, j] += cells[pi, col_of[pc]]
    return CostMatrix(cells, list(cmat.row_map), list(cmat.col_map))


@dataclass
class CedLabel:
    query_id: str
    cand_id: str
    ced: float
    nced: float
    sim: float
    assignment: list[tuple[int, int]] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.ced)

    def csv_row(self) -> str:
        return f"{self.query_id},{self.cand_id},{self.ced:.6f},{self.nced:.6f},{self.sim:.6f}"


CSV_HEADER = "query_id,cand_id,ced,nced,sim"


def ced(gq: EplGraph, gc: EplGraph, cfg: CostConfig, t: Taxonomy | None = None) -> CedLabel:
    cmat = build_cost_matrix(gq, gc, cfg, t)
    if cfg.munkres_variant == "cumulative":
        cmat = apply_cumulative(cmat, gq, gc)
    pairs, total = munkres_assign(cmat.cells)
    if not math.isfinite(total):
        return CedLabel(gq.sample_id, gc.sample_id, INF, INF, 0.0, pairs)
    nced = total / ((len(gq) + len(gc)) / 2.0)
    return CedLabel(gq.sample_id, gc.sample_id, total, nced, math.exp(-nced), pairs)

"""Hierarchical attributed relational graphs and their EPL-vertex condensation.

A record becomes a tree rooted at ``ROOT``: metadata values hang off the
root, primary entities sit at level 1 behind ``hasEntity`` edges, and a
secondary entity is placed one level below the first entity that relates
to it. Property values are leaves; an empty value becomes a ``NULL`` leaf.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .records import PropertyRecord, PropertyValue

ROOT = "ROOT"
NULL = "<NULL>"
HAS_ENTITY = "hasEntity"


@dataclass(frozen=True)
class HargNode:
    id: int
    level: int
    label: str
    is_leaf: bool
    kind: str | None = None  # value kind for leaves: "scalar" | "list"


@dataclass(frozen=True)
class HargEdge:
    src: int
    dst: int
    label: str
    relation: bool = False  # entity-to-entity relation edge
    tree: bool = True  # False for relation edges that do not place their target


@dataclass
class HARG:
    sample_id: str
    nodes: list[HargNode] = field(default_factory=list)
    edges: list[HargEdge] = field(default_factory=list)
    # tree parent of each entity node (root for primaries)
    tree_parent: dict[int, int] = field(default_factory=dict)

    def entity_nodes(self) -> list[HargNode]:
        return [n for n in self.nodes if not n.is_leaf and n.id != 0]

    def neighbors(self) -> list[list[int]]:
        """Undirected adjacency lists."""
        adj: list[list[int]] = [[] for _ in self.nodes]
        for e in self.edges:
            adj[e.src].append(e.dst)
            adj[e.dst].append(e.src)
        return adj

    def incoming_label(self) -> dict[int, str]:
        """Label of the tree edge entering each node."""
        return {e.dst: e.label for e in self.edges if e.tree}

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "nodes": [
                {"id": n.id, "level": n.level, "label": n.label, "is_leaf": n.is_leaf,
                 **({"kind": n.kind} if n.kind else {})}
                for n in self.nodes
            ],
            "edges": [
                {"from": e.src, "to": e.dst, "label": e.label,
                 **({"relation": True} if e.relation else {}),
                 **({} if e.tree else {"tree": False})}
                for e in self.edges
            ],
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    def to_dot(self) -> str:
        lines = [f'digraph "{self.sample_id}" {{']
        for n in self.nodes:
            shape = "box" if n.is_leaf else "ellipse"
            lines.append(f'  n{n.id} [label="{_dot_escape(n.label)}" shape={shape}];')
        for e in self.edges:
            style = " style=dashed" if not e.tree else ""
            lines.append(f'  n{e.src} -> n{e.dst} [label="{_dot_escape(e.label)}"{style}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def _value_leaves(value: PropertyValue) -> list[str]:
    toks = list(value.tokens())
    return toks if toks else [NULL]


def construct_harg(record: PropertyRecord) -> HARG:
    g = HARG(record.id)
    g.nodes.append(HargNode(0, 0, ROOT, False))

    def add_leaves(parent: HargNode, prop: str, value: PropertyValue, edge_label: str):
        for tok in _value_leaves(value):
            node = HargNode(len(g.nodes), parent.level + 1, tok, True, value.kind)
            g.nodes.append(node)
            g.edges.append(HargEdge(parent.id, node.id, edge_label))

    root = g.nodes[0]
    for prop in sorted(record.metadata):
        add_leaves(root, prop, record.metadata[prop], f"metadata:{prop}")

    # place entities: primaries at level 1, then secondaries breadth-first along relations
    level: dict[str, int] = {}
    placed_by: dict[str, tuple[str | None, str]] = {}
    for e in record.entities:
        if e.primary:
            level[e.id] = 1
            placed_by[e.id] = (None, HAS_ENTITY)
    targets = {r.object for r in record.relations}
    while True:
        changed = True
        while changed:
            changed = False
            for r in record.relations:
                if r.subject in level and r.object not in level:
                    level[r.object] = level[r.subject] + 1
                    placed_by[r.object] = (r.subject, r.label)
                    changed = True
        unplaced = [e.id for e in record.entities if e.id not in level]
        if not unplaced:
            break
        # a secondary nobody reaches hangs off the root, then places its own targets
        eid = next((u for u in unplaced if u not in targets), unplaced[0])
        level[eid] = 1
        placed_by[eid] = (None, HAS_ENTITY)

    node_of: dict[str, HargNode] = {}
    for e in record.entities:
        node = HargNode(len(g.nodes), level[e.id], e.entity_type, False)
        g.nodes.append(node)
        node_of[e.id] = node

    tree_edges: set[tuple[str, str, str]] = set()
    for e in record.entities:
        parent_id, label = placed_by[e.id]
        node = node_of[e.id]
        if parent_id is None:
            g.edges.append(HargEdge(0, node.id, HAS_ENTITY))
            g.tree_parent[node.id] = 0
        else:
            g.edges.append(HargEdge(node_of[parent_id].id, node.id, label, relation=True))
            g.tree_parent[node.id] = node_of[parent_id].id
            tree_edges.add((parent_id, e.id, label))
    for r in record.relations:
        key = (r.subject, r.object, r.label)
        if key in tree_edges:
            tree_edges.discard(key)  # consumed once; a duplicate relation still gets its own edge
            continue
        g.edges.append(HargEdge(node_of[r.subject].id, node_of[r.object].id, r.label,
                                relation=True, tree=False))

    for e in record.entities:
        for prop in sorted(e.attrs):
            add_leaves(node_of[e.id], prop, e.attrs[prop], prop)
    return g


@dataclass(frozen=True)
class EplVertex:
    id: int
    entity_type: str
    level: int
    props: dict[str, PropertyValue]
    parent: int | None
    adjacent_edge_labels: tuple[str, ...] = ()


@dataclass
class EplGraph:
    sample_id: str
    vertices: list[EplVertex]
    root: int = 0

    def __len__(self) -> int:
        return len(self.vertices)

    def by_id(self) -> dict[int, EplVertex]:
        return {v.id: v for v in self.vertices}


def discover_eplv(g: HARG) -> EplGraph:
    """Condense a HARG into one EPL vertex per entity node plus the root.

    Vertex ids are the positions in ``vertices``; the root vertex is 0.
    """
    holders = [n for n in g.nodes if not n.is_leaf]  # root first, then entities
    index = {n.id: i for i, n in enumerate(holders)}
    by_id = {n.id: n for n in g.nodes}

    props: dict[int, dict[str, list[str]]] = {n.id: {} for n in holders}
    kinds: dict[tuple[int, str], str] = {}
    labels: dict[int, list[str]] = {n.id: [] for n in holders}
    incoming = g.incoming_label()
    for n in holders:
        if n.id in incoming:
            labels[n.id].append(incoming[n.id])

    for e in g.edges:
        dst = by_id[e.dst]
        if dst.is_leaf:
            prop = e.label.split(":", 1)[1] if e.label.startswith("metadata:") else e.label
            vals = props[e.src].setdefault(prop, [])
            if dst.label != NULL:
                vals.append(dst.label)
            kinds[(e.src, prop)] = dst.kind or "scalar"
        elif e.relation:
            # a placing edge is already the target's incoming label
            labels[e.src].append(e.label)
            if not e.tree:
                labels[e.dst].append(e.label)

    vertices = []
    for n in holders:
        vprops = {}
        for prop, vals in props[n.id].items():
            if kinds[(n.id, prop)] == "list":
                vprops[prop] = PropertyValue("list", items=tuple(vals))
            else:
                vprops[prop] = PropertyValue("scalar", vals[0] if vals else "")
        parent = g.tree_parent.get(n.id)
        vertices.append(EplVertex(
            id=index[n.id],
            entity_type=n.label,
            level=n.level,
            props=vprops,
            parent=None if n.id == 0 else index[parent],
            adjacent_edge_labels=tuple(labels[n.id]),
        ))
    return EplGraph(g.sample_id, vertices, 0)


def epl_graph(record: PropertyRecord) -> EplGraph:
    return discover_eplv(construct_harg(record))

"""Hypernym taxonomy with Wu-Palmer similarity, plus a small word-vector store."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np


class LexiconError(ValueError):
    pass


class UnknownConcept(KeyError):
    pass


def concept_key(term: str) -> str:
    return "-".join(term.strip().lower().replace("_", " ").split())


@dataclass
class Taxonomy:
    parent: dict[str, str]
    root: str
    depth: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.depth:
            self.depth = _depths(self.parent, self.root)

    def __contains__(self, concept: str) -> bool:
        return concept in self.depth or concept_key(concept) in self.depth

    def __len__(self) -> int:
        return len(self.depth)

    @property
    def concepts(self) -> list[str]:
        return sorted(self.depth)

    def _key(self, concept: str) -> str:
        if concept in self.depth:  # already canonical
            return concept
        key = concept_key(concept)
        if key not in self.depth:
            raise UnknownConcept(concept)
        return key

    def ancestors(self, concept: str) -> list[str]:
        """Path from ``concept`` (inclusive) up to the root."""
        node = self._key(concept)
        path = [node]
        while node != self.root:
            node = self.parent[node]
            path.append(node)
        return path

    def lcs(self, a: str, b: str) -> str:
        a, b = self._key(a), self._key(b)
        # walk the deeper node up until both sit at the same depth
        while self.depth[a] > self.depth[b]:
            a = self.parent[a]
        while self.depth[b] > self.depth[a]:
            b = self.parent[b]
        while a != b:
            a, b = self.parent[a], self.parent[b]
        return a

    def wpdist(self, a: str, b: str) -> float:
        return wpdist(a, b, self)

    def is_a(self, concept: str, ancestor: str) -> bool:
        """True if ``ancestor`` is ``concept`` or one of its hypernyms; unknown -> False."""
        if concept not in self or ancestor not in self:
            return False
        return concept_key(ancestor) in self.ancestors(concept)


def _depths(parent: dict[str, str], root: str) -> dict[str, int]:
    children: dict[str, list[str]] = {}
    for child, par in parent.items():
        children.setdefault(par, []).append(child)
    depth = {root: 1}
    stack = [root]
    while stack:
        node = stack.pop()
        for child in children.get(node, ()):
            depth[child] = depth[node] + 1
            stack.append(child)
    unreachable = set(parent) - set(depth)
    if unreachable:
        raise LexiconError(f"cycle detected among {sorted(unreachable)[:5]}")
    return depth


def taxonomy_from_pairs(pairs) -> Taxonomy:
    parent: dict[str, str] = {}
    for child, par in pairs:
        child, par = concept_key(child), concept_key(par)
        if child == par:
            raise LexiconError(f"cycle: {child!r} is its own parent")
        if child in parent:
            raise LexiconError(f"duplicate child {child!r}")
        parent[child] = par
    roots = sorted({p for p in parent.values() if p not in parent})
    if len(roots) != 1:
        if not roots and not parent:
            raise LexiconError("multiple roots (none)")
        if not roots:
            raise LexiconError("cycle detected: no root")
        raise LexiconError(f"multiple roots {roots}")
    return Taxonomy(parent, roots[0])


def load_taxonomy(path=None) -> Taxonomy:
    """Read ``child<TAB>parent`` lines. ``None`` loads the bundled taxonomy."""
    if path is None:
        text = resources.files("femmir.data").joinpath("taxonomy.tsv").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise LexiconError(f"line {lineno}: expected child<TAB>parent")
        pairs.append(parts)
    return taxonomy_from_pairs(pairs)


_BUNDLED: Taxonomy | None = None


def bundled_taxonomy() -> Taxonomy:
    global _BUNDLED
    if _BUNDLED is None:
        _BUNDLED = load_taxonomy()
    return _BUNDLED


def wpdist(a: str, b: str, t: Taxonomy) -> float:
    """Wu-Palmer similarity: 2 * depth(lcs) / (depth(a) + depth(b))."""
    a, b = t._key(a), t._key(b)
    return 2.0 * t.depth[t.lcs(a, b)] / (t.depth[a] + t.depth[b])


@dataclass
class EmbeddingStore:
    dim: int
    vectors: dict[str, np.ndarray]

    def get(self, token: str):
        """Vector for ``token`` or ``None`` when absent."""
        return self.vectors.get(token.strip().lower())

    def __contains__(self, token: str) -> bool:
        return token.strip().lower() in self.vectors

    def phrase(self, phrase: str):
        """Mean vector of the phrase's tokens; ``None`` if no token is known."""
        vecs = [v for v in (self.get(t) for t in phrase.split()) if v is not None]
        if not vecs:
            return None
        return np.mean(vecs, axis=0)


def load_embeddings(path) -> EmbeddingStore:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise LexiconError("first line must be '<count> <dim>'")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise LexiconError("header counts must be integers") from None
        if dim <= 0:
            raise LexiconError("dim must be positive")
        vectors: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            token, comps = parts[0], [p for p in parts[1:] if p]
            if len(comps) != dim:
                raise LexiconError(f"line {lineno}: ragged row ({len(comps)} components, expected {dim})")
            try:
                vectors[token.lower()] = np.array([float(c) for c in comps])
            except ValueError:
                raise LexiconError(f"line {lineno}: non-numeric component") from None
    if len(vectors) != count:
        raise LexiconError(f"header declares {count} vectors, file has {len(vectors)}")
    return EmbeddingStore(dim, vectors)


def cosine_sim(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise LexiconError(f"dimension mismatch {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise LexiconError("zero-norm vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))

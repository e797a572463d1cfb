"""Hypernym-graph path similarity between single terms."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence


class TaxonomyError(ValueError):
    pass


@dataclass(frozen=True)
class Taxonomy:
    """Undirected hypernym/hyponym graph over lowercase terms.

    Multiword lemmas use underscores. The graph may be disconnected;
    queries for unknown terms simply score 0.
    """

    index: Mapping[str, int]
    adjacency: Sequence[tuple[int, ...]]

    def node(self, term: str) -> Optional[int]:
        return self.index.get(_normalize_term(term))

    @property
    def term_count(self) -> int:
        return len(self.index)

    @property
    def edge_count(self) -> int:
        return sum(len(n) for n in self.adjacency) // 2


def _normalize_term(term: str) -> str:
    return term.strip().lower().replace(" ", "_")


def build_taxonomy(edges: Sequence[tuple[str, str]]) -> Taxonomy:
    """Build from (child, parent) term pairs; self-loops and duplicates collapse."""
    index: dict[str, int] = {}
    adj: list[set[int]] = []

    def node_id(term: str) -> int:
        t = _normalize_term(term)
        if t not in index:
            index[t] = len(adj)
            adj.append(set())
        return index[t]

    for child, parent in edges:
        a, b = node_id(child), node_id(parent)
        if a == b:
            continue
        adj[a].add(b)
        adj[b].add(a)
    return Taxonomy(index=index, adjacency=tuple(tuple(sorted(n)) for n in adj))


def load_taxonomy(path: str | Path) -> Taxonomy:
    """Parse a `child<TAB>parent` file; `#` comments and blank lines ignored."""
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2 or not fields[0].strip() or not fields[1].strip():
                raise TaxonomyError(
                    f"{path}:{lineno}: expected 'child<TAB>parent', got {raw.rstrip()!r}"
                )
            edges.append((fields[0], fields[1]))
    return build_taxonomy(edges)


def path_similarity(t1: str, t2: str, tax: Taxonomy) -> float:
    """1 for equal strings, 1/(1+d) for shortest path length d, 0 otherwise."""
    a = _normalize_term(t1)
    b = _normalize_term(t2)
    if a == b:
        return 1.0
    na = tax.index.get(a)
    nb = tax.index.get(b)
    if na is None or nb is None:
        return 0.0
    d = _bfs_distance(tax.adjacency, na, nb)
    if d is None:
        return 0.0
    return 1.0 / (1.0 + d)


def _bfs_distance(adj: Sequence[Sequence[int]], start: int, goal: int) -> Optional[int]:
    seen = {start: 0}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        dist = seen[cur]
        for nxt in adj[cur]:
            if nxt == goal:
                return dist + 1
            if nxt not in seen:
                seen[nxt] = dist + 1
                queue.append(nxt)
    return None


def default_taxonomy_path() -> Path:
    """The trimmed taxonomy file shipped with the package."""
    return Path(__file__).parent / "resources" / "taxonomy.tsv"


def load_default_taxonomy() -> Taxonomy:
    return load_taxonomy(default_taxonomy_path())

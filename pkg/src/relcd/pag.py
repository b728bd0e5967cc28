"""Partially oriented output graphs with per-endpoint marks, the
possible-ancestor and possible-cycle queries, and recall scoring against a
ground-truth sigma-abstract ground graph."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable

from .agg import AggNode, SigmaAgg, node_key, node_label
from .digraph import scc_of

TAIL = "tail"
ARROW = "arrow"
CIRCLE = "circle"
_MARKS = (TAIL, ARROW, CIRCLE)


@dataclass
class Dpag:
    """Graph over agg-node labels with one edge per unordered pair; each edge
    carries a mark at either endpoint (tail, arrow, or circle)."""

    nodes: list[AggNode]
    edges: dict[frozenset, tuple] = field(default_factory=dict)
    # edges maps frozenset({u, v}) -> ((u, mark_at_u), (v, mark_at_v))

    def __post_init__(self) -> None:
        self._node_set = set(self.nodes)

    def add_edge(self, u: AggNode, v: AggNode, mark_u: str, mark_v: str) -> None:
        if u == v:
            raise ValueError("no self edges")
        if mark_u not in _MARKS or mark_v not in _MARKS:
            raise ValueError("marks must be tail, arrow, or circle")
        for n in (u, v):
            if n not in self._node_set:
                self.nodes.append(n)
                self._node_set.add(n)
        self.edges[frozenset((u, v))] = ((u, mark_u), (v, mark_v))

    def add_directed(self, u: AggNode, v: AggNode) -> None:
        self.add_edge(u, v, TAIL, ARROW)

    def add_undirected(self, u: AggNode, v: AggNode) -> None:
        self.add_edge(u, v, CIRCLE, CIRCLE)

    def has_edge(self, u: AggNode, v: AggNode) -> bool:
        return frozenset((u, v)) in self.edges

    def mark_at(self, u: AggNode, v: AggNode) -> str:
        """Mark of the (u, v) edge at the u endpoint."""
        rec = self.edges[frozenset((u, v))]
        for node, mark in rec:
            if node == u:
                return mark
        raise KeyError((u, v))

    def neighbors(self, u: AggNode) -> list[AggNode]:
        out = []
        for pair in self.edges:
            if u in pair:
                (other,) = pair - {u}
                out.append(other)
        return sorted(out, key=node_key)

    def is_directed(self, u: AggNode, v: AggNode) -> bool:
        """True when the edge is exactly u (tail) -> v (arrow)."""
        return (
            self.has_edge(u, v)
            and self.mark_at(u, v) == TAIL
            and self.mark_at(v, u) == ARROW
        )

    def to_json(self) -> dict:
        rows = []
        for pair in sorted(self.edges, key=lambda p: sorted(map(node_key, p))):
            (u, mu), (v, mv) = self.edges[pair]
            if node_key(v) < node_key(u):
                u, mu, v, mv = v, mv, u, mu
            rows.append({"u": node_label(u), "v": node_label(v), "mark_at_u": mu, "mark_at_v": mv})
        return {"nodes": [node_label(n) for n in sorted(self.nodes, key=node_key)], "edges": rows}

    def to_dot(self, name: str = "dpag") -> str:
        """Graphviz rendering; circle marks use odot arrow styles."""
        style = {TAIL: "none", ARROW: "normal", CIRCLE: "odot"}
        lines = [f"digraph {name} {{", "  edge [dir=both];"]
        for n in sorted(self.nodes, key=node_key):
            lines.append(f'  "{node_label(n)}";')
        for pair in sorted(self.edges, key=lambda p: sorted(map(node_key, p))):
            (u, mu), (v, mv) = self.edges[pair]
            if node_key(v) < node_key(u):
                u, mu, v, mv = v, mv, u, mu
            lines.append(
                f'  "{node_label(u)}" -> "{node_label(v)}" '
                f"[arrowtail={style[mu]}, arrowhead={style[mv]}];"
            )
        lines.append("}")
        return "\n".join(lines) + "\n"


def is_possible_ancestor(p: Dpag, i: AggNode, j: AggNode) -> bool:
    """Whether some graph in the equivalence class can have i as an ancestor
    of j: a path from i to j with no arrowhead at the endpoint nearer i on
    any edge. Every node is its own possible ancestor."""
    for n in (i, j):
        if n not in p._node_set:
            raise ValueError(f"unknown node: {node_label(n)}")
    if i == j:
        return True
    seen = {i}
    queue = deque([i])
    while queue:
        u = queue.popleft()
        for v in p.neighbors(u):
            if v in seen:
                continue
            if p.mark_at(u, v) == ARROW:
                continue  # arrowhead at the near end forbids ancestry this way
            if v == j:
                return True
            seen.add(v)
            queue.append(v)
    return False


def is_possible_cycle(p: Dpag, i: AggNode, j: AggNode) -> bool:
    """Candidate-cycle test: the pair must be joined circle-to-circle and every
    arrowhead neighbor of one endpoint must hit the other with the same edge
    type (equal marks at both ends), checked in both directions."""
    if i == j:
        raise ValueError("i and j must differ")
    for n in (i, j):
        if n not in p._node_set:
            raise ValueError(f"unknown node: {node_label(n)}")
    if not p.has_edge(i, j):
        return False
    if p.mark_at(i, j) != CIRCLE or p.mark_at(j, i) != CIRCLE:
        return False
    for a, b in ((i, j), (j, i)):
        for k in p.neighbors(a):
            if k == b:
                continue
            if p.mark_at(a, k) != ARROW:
                continue  # not an edge into a
            if not p.has_edge(k, b):
                return False
            if p.mark_at(b, k) != ARROW or p.mark_at(k, b) != p.mark_at(k, a):
                return False
    return True


def compute_recall(p: Dpag, truth: SigmaAgg, kind: str) -> float:
    """Fraction of ground-truth relations the output still allows.

    ancestor: ordered pairs (i, j), i != j, with i an ancestor of j in the
    true graph, scored by is_possible_ancestor.

    cycle: unordered pairs that are adjacent in the true graph and lie in one
    strongly connected component (edges on directed cycles), scored by
    is_possible_cycle. An empty denominator counts as recall 1.
    """
    if kind not in ("ancestor", "cycle"):
        raise ValueError("kind must be 'ancestor' or 'cycle'")
    truth_nodes = set(truth.graph.nodes)
    if not truth_nodes <= p._node_set:
        missing = sorted(truth_nodes - p._node_set, key=node_key)[:3]
        raise ValueError(f"node sets not aligned; missing {[node_label(n) for n in missing]}")
    hits = 0
    total = 0
    if kind == "ancestor":
        from .digraph import descendants

        for i in sorted(truth_nodes, key=node_key):
            for j in sorted(descendants(truth.graph, i), key=node_key):
                if i == j:
                    continue
                total += 1
                if is_possible_ancestor(p, i, j):
                    hits += 1
    else:
        comp = scc_of(truth.graph)
        for i, j in combinations(sorted(truth_nodes, key=node_key), 2):
            if comp[i] is not comp[j] and comp[i] != comp[j]:
                continue
            if not (truth.graph.has_edge(i, j) or truth.graph.has_edge(j, i)):
                continue
            total += 1
            if is_possible_cycle(p, i, j):
                hits += 1
    if total == 0:
        return 1.0
    return hits / total

"""Directed-graph core: strongly connected components, ancestor closures,
d-separation, sigma-separation, acyclification, and exhaustive independence
model enumeration.

Graphs may contain directed cycles; anti-parallel edge pairs (u -> v and
v -> u) are allowed, self-loops and parallel duplicates are not.
"""

from __future__ import annotations

import re
from collections import deque
from itertools import combinations
from typing import Hashable, Iterable, Sequence

Node = Hashable


class DiGraph:
    """A small directed graph over hashable, orderable node labels.

    Node iteration order is insertion order, so graphs built from sorted
    inputs behave deterministically everywhere downstream.
    """

    def __init__(self, nodes: Iterable[Node] = (), edges: Iterable[tuple[Node, Node]] = ()):
        self._succ: dict[Node, set[Node]] = {}
        self._pred: dict[Node, set[Node]] = {}
        for n in nodes:
            self.add_node(n)
        for u, v in edges:
            self.add_edge(u, v)

    # -- construction ------------------------------------------------------

    def add_node(self, n: Node) -> None:
        if n not in self._succ:
            self._succ[n] = set()
            self._pred[n] = set()

    def add_edge(self, u: Node, v: Node) -> None:
        if u == v:
            raise ValueError(f"self-loop not allowed: {u!r}")
        self.add_node(u)
        self.add_node(v)
        self._succ[u].add(v)
        self._pred[v].add(u)

    # -- queries -----------------------------------------------------------

    @property
    def nodes(self) -> list[Node]:
        return list(self._succ)

    @property
    def edges(self) -> list[tuple[Node, Node]]:
        return [(u, v) for u in self._succ for v in sorted(self._succ[u], key=repr)]

    def __contains__(self, n: Node) -> bool:
        return n in self._succ

    def __len__(self) -> int:
        return len(self._succ)

    def has_edge(self, u: Node, v: Node) -> bool:
        return u in self._succ and v in self._succ[u]

    def successors(self, n: Node) -> set[Node]:
        return self._succ[n]

    def predecessors(self, n: Node) -> set[Node]:
        return self._pred[n]

    def copy(self) -> "DiGraph":
        g = DiGraph(self.nodes)
        for u, v in self.edges:
            g.add_edge(u, v)
        return g

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiGraph):
            return NotImplemented
        return set(self.nodes) == set(other.nodes) and set(self.edges) == set(other.edges)

    def is_acyclic(self) -> bool:
        indeg = {n: len(self._pred[n]) for n in self._succ}
        queue = deque(n for n, d in indeg.items() if d == 0)
        seen = 0
        while queue:
            n = queue.popleft()
            seen += 1
            for m in self._succ[n]:
                indeg[m] -= 1
                if indeg[m] == 0:
                    queue.append(m)
        return seen == len(self._succ)


def _check_nodes(g: DiGraph, *sets: Iterable[Node]) -> None:
    for s in sets:
        for n in s:
            if n not in g:
                raise ValueError(f"unknown node: {n!r}")


def scc(g: DiGraph) -> list[frozenset[Node]]:
    """Strongly connected components via iterative Tarjan.

    Singleton components for acyclic nodes; for every node i the component
    equals ancestors(i) & descendants(i).
    """
    index: dict[Node, int] = {}
    lowlink: dict[Node, int] = {}
    on_stack: set[Node] = set()
    stack: list[Node] = []
    counter = 0
    out: list[frozenset[Node]] = []

    for root in g.nodes:
        if root in index:
            continue
        work: list[tuple[Node, list[Node], int]] = [(root, sorted(g.successors(root), key=repr), 0)]
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, succs, i = work.pop()
            advanced = False
            while i < len(succs):
                w = succs[i]
                i += 1
                if w not in index:
                    work.append((v, succs, i))
                    index[w] = lowlink[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, sorted(g.successors(w), key=repr), 0))
                    advanced = True
                    break
                if w in on_stack:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            if lowlink[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                out.append(frozenset(comp))
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
    return out


def scc_of(g: DiGraph) -> dict[Node, frozenset[Node]]:
    return {n: comp for comp in scc(g) for n in comp}


def _closure(g: DiGraph, start: Node, forward: bool) -> set[Node]:
    if start not in g:
        raise ValueError(f"unknown node: {start!r}")
    step = g.successors if forward else g.predecessors
    seen = {start}
    stack = [start]
    while stack:
        n = stack.pop()
        for m in step(n):
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return seen


def ancestors(g: DiGraph, n: Node) -> set[Node]:
    """Reflexive-transitive closure along reversed edges."""
    return _closure(g, n, forward=False)


def descendants(g: DiGraph, n: Node) -> set[Node]:
    """Reflexive-transitive closure along forward edges."""
    return _closure(g, n, forward=True)


def ancestors_of_set(g: DiGraph, nodes: Iterable[Node]) -> set[Node]:
    out: set[Node] = set()
    for n in nodes:
        out |= ancestors(g, n)
    return out


def d_separated(
    g: DiGraph, x: Iterable[Node], y: Iterable[Node], z: Iterable[Node]
) -> bool:
    """Classical d-separation decided by reachability over (node, direction)
    states, which also works on cyclic graphs.

    A path is blocked when it has a non-collider in Z or a collider with no
    descendant in Z; active walks and active paths coincide, so Bayes-ball
    style reachability is exact.
    """
    xs, ys, zs = set(x), set(y), set(z)
    if xs & ys or xs & zs or ys & zs:
        raise ValueError("X, Y, Z must be pairwise disjoint")
    _check_nodes(g, xs, ys, zs)
    if not xs or not ys:
        return True

    # nodes with a descendant in Z, i.e. the ancestor closure of Z
    an_z = ancestors_of_set(g, zs)

    queue: deque[tuple[Node, bool]] = deque()
    visited: set[tuple[Node, bool]] = set()
    # direction True: arrived from a child (moving up); False: from a parent
    for s in xs:
        queue.append((s, True))
        queue.append((s, False))
    while queue:
        n, up = queue.popleft()
        if (n, up) in visited:
            continue
        visited.add((n, up))
        if n in ys:
            return False
        if n in zs:
            # observed: only the collider case continues, i.e. arriving from a
            # parent and bouncing back up to the other parents
            if not up:
                for p in g.predecessors(n):
                    queue.append((p, True))
            continue
        if up:
            for p in g.predecessors(n):
                queue.append((p, True))
            for c in g.successors(n):
                queue.append((c, False))
        else:
            for c in g.successors(n):
                queue.append((c, False))
            if n in an_z:
                for p in g.predecessors(n):
                    queue.append((p, True))
    return True


def acyclify(g: DiGraph, scc_order: dict[Node, int] | None = None) -> DiGraph:
    """Build an acyclic graph with the same sigma-independence model.

    Cross-component edges: u -> v is present iff u has an edge into v's
    strongly connected component. Within a component every pair is connected,
    oriented by ``scc_order`` (ascending); the default order is ascending node
    repr. The result is always a DAG.
    """
    comp_of = scc_of(g)
    if scc_order is None:
        scc_order = {n: i for i, n in enumerate(sorted(g.nodes, key=repr))}
    else:
        for comp in set(comp_of.values()):
            if len(comp) > 1:
                ranks = [scc_order.get(n) for n in comp]
                if any(r is None for r in ranks) or len(set(ranks)) != len(ranks):
                    raise ValueError("scc_order must totally order every non-singleton component")
    out = DiGraph(g.nodes)
    for v in g.nodes:
        comp_v = comp_of[v]
        # incoming cross-component edges spread to every member of the component
        for u in g.nodes:
            if u == v or u in comp_v:
                continue
            if any(u in g.predecessors(k) for k in comp_v):
                out.add_edge(u, v)
        for u in comp_v:
            if u != v and scc_order[u] < scc_order[v]:
                out.add_edge(u, v)
    return out


def sigma_separated(
    g: DiGraph, x: Iterable[Node], y: Iterable[Node], z: Iterable[Node]
) -> bool:
    """Sigma-separation, decided as d-separation on an acyclification.

    The independence model of any acyclification equals the sigma-independence
    model of the original graph, so one fixed acyclification suffices.
    """
    return d_separated(acyclify(g), x, y, z)


def _simple_paths_with_orientations(
    g: DiGraph, start: Node, targets: set[Node]
) -> Iterable[tuple[tuple[Node, ...], tuple[bool, ...]]]:
    """Yield (nodes, forward_flags) for every simple path from start into targets.

    forward_flags[i] is True when the i-th step traverses an edge pointing
    toward the target end. Anti-parallel edge pairs yield both orientations.
    """
    path: list[Node] = [start]
    flags: list[bool] = []

    def steps(n: Node) -> list[tuple[Node, bool]]:
        out = [(m, True) for m in g.successors(n)] + [(m, False) for m in g.predecessors(n)]
        return sorted(out, key=lambda t: (repr(t[0]), t[1]))

    def rec():
        n = path[-1]
        if n in targets and len(path) > 1:
            yield tuple(path), tuple(flags)
            return
        for m, fwd in steps(n):
            if m in path:
                continue
            path.append(m)
            flags.append(fwd)
            yield from rec()
            path.pop()
            flags.pop()

    yield from rec()


def _path_blocked(
    g: DiGraph,
    nodes: Sequence[Node],
    flags: Sequence[bool],
    z: set[Node],
    an_z: set[Node],
    comp_of: dict[Node, frozenset[Node]],
    sigma: bool,
) -> bool:
    """Apply the blocking conditions to one oriented simple path.

    With ``sigma`` False this is the classical d-criterion. With ``sigma``
    True a conditioned non-collider blocks only when it points to a neighbor
    on the path outside its own strongly connected component.
    """
    for k in range(1, len(nodes) - 1):
        v = nodes[k]
        into_prev = not flags[k - 1]  # edge between v_{k-1} and v points to v_{k-1}?
        into_v_left = flags[k - 1]  # left edge points into v
        into_v_right = not flags[k]  # right edge points into v
        is_collider = into_v_left and into_v_right
        if is_collider:
            if v not in an_z:
                return True
            continue
        if v not in z:
            continue
        if not sigma:
            return True
        left, right = nodes[k - 1], nodes[k + 1]
        comp = comp_of[v]
        if into_v_left and not into_v_right:
            # chain left -> v -> right
            if right not in comp:
                return True
        elif not into_v_left and into_v_right:
            # chain left <- v <- right
            if left not in comp:
                return True
        else:
            # fork left <- v -> right
            if left not in comp or right not in comp:
                return True
    return False


def _separated_by_paths(
    g: DiGraph, x: Iterable[Node], y: Iterable[Node], z: Iterable[Node], sigma: bool
) -> bool:
    xs, ys, zs = set(x), set(y), set(z)
    if xs & ys or xs & zs or ys & zs:
        raise ValueError("X, Y, Z must be pairwise disjoint")
    _check_nodes(g, xs, ys, zs)
    an_z = ancestors_of_set(g, zs)
    comp_of = scc_of(g)
    for s in sorted(xs, key=repr):
        for nodes, flags in _simple_paths_with_orientations(g, s, ys):
            if not _path_blocked(g, nodes, flags, zs, an_z, comp_of, sigma):
                return False
    return True


def sigma_separated_by_paths(
    g: DiGraph, x: Iterable[Node], y: Iterable[Node], z: Iterable[Node]
) -> bool:
    """Exhaustive reference: enumerate simple paths and apply the three
    sigma-blocking conditions directly. Exponential; for cross-checks only."""
    return _separated_by_paths(g, x, y, z, sigma=True)


def d_separated_by_paths(
    g: DiGraph, x: Iterable[Node], y: Iterable[Node], z: Iterable[Node]
) -> bool:
    """Exhaustive reference for the d-criterion over simple paths."""
    return _separated_by_paths(g, x, y, z, sigma=False)


def enumerate_independence_model(
    g: DiGraph, kind: str = "sigma", max_nodes: int = 10
) -> set[tuple[Node, Node, frozenset[Node]]]:
    """All separations (x, y, Z) with singleton x < y and Z over the rest.

    The triple ordering is canonical (x sorted before y) so independence
    models compare with plain set equality.
    """
    if kind not in ("d", "sigma"):
        raise ValueError("kind must be 'd' or 'sigma'")
    if len(g) > max_nodes:
        raise ValueError(f"graph has {len(g)} nodes; enumeration capped at {max_nodes}")
    sep = d_separated if kind == "d" else sigma_separated
    if kind == "sigma":
        # one acyclification serves every query
        acyc = acyclify(g)
        sep = lambda gg, a, b, c: d_separated(acyc, a, b, c)  # noqa: E731
    nodes = sorted(g.nodes, key=repr)
    out: set[tuple[Node, Node, frozenset[Node]]] = set()
    for i, xn in enumerate(nodes):
        for yn in nodes[i + 1 :]:
            rest = [n for n in nodes if n not in (xn, yn)]
            for r in range(len(rest) + 1):
                for zset in combinations(rest, r):
                    if sep(g, {xn}, {yn}, set(zset)):
                        out.add((xn, yn, frozenset(zset)))
    return out


# -- DOT import/export -----------------------------------------------------


def to_dot(g: DiGraph, name: str = "G", label_of=str) -> str:
    lines = [f"digraph {name} {{"]
    for n in sorted(g.nodes, key=repr):
        lines.append(f'  "{label_of(n)}";')
    for u, v in sorted(g.edges, key=lambda e: (repr(e[0]), repr(e[1]))):
        lines.append(f'  "{label_of(u)}" -> "{label_of(v)}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


_DOT_EDGE = re.compile(r'^\s*"([^"]+)"\s*->\s*"([^"]+)"\s*(\[[^\]]*\])?\s*;\s*$')
_DOT_NODE = re.compile(r'^\s*"([^"]+)"\s*(\[[^\]]*\])?\s*;\s*$')


def from_dot(text: str) -> DiGraph:
    """Parse the subset of DOT emitted by :func:`to_dot` (quoted labels only)."""
    g = DiGraph()
    for line in text.splitlines():
        m = _DOT_EDGE.match(line)
        if m:
            g.add_edge(m.group(1), m.group(2))
            continue
        m = _DOT_NODE.match(line)
        if m:
            g.add_node(m.group(1))
    return g

"""Sigma-abstract ground graphs: perspective-specific directed graphs over
relational variables and intersection variables, relational acyclification,
and the feasibility check behind the hop-bounded acyclification assumption."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

from .digraph import DiGraph, scc_of
from .model import RelationalModel
from .paths import (
    RelationalDependency,
    RelationalVariable,
    all_paths,
    extend_path,
    hop,
)
from .schema import Schema


@dataclass(frozen=True, order=True)
class IntersectionVar:
    """A pair of same-attribute relational variables whose traversals can
    land on overlapping instances; inherits the edges of both members."""

    members: tuple[RelationalVariable, RelationalVariable]

    def __post_init__(self) -> None:
        if len(self.members) != 2 or self.members[0] >= self.members[1]:
            raise ValueError("members must be two distinct variables in sorted order")

    @staticmethod
    def of(a: RelationalVariable, b: RelationalVariable) -> "IntersectionVar":
        return IntersectionVar(tuple(sorted((a, b))))

    @property
    def attr(self) -> str:
        return self.members[0].attr

    @property
    def perspective(self) -> str:
        return self.members[0].perspective

    @property
    def terminal(self) -> str:
        return self.members[0].terminal

    @property
    def label(self) -> str:
        return f"<{self.members[0].label} & {self.members[1].label}>"

    def __str__(self) -> str:  # pragma: no cover
        return self.label


AggNode = Union[RelationalVariable, IntersectionVar]


def node_key(n):
    """Deterministic sort key; tolerates plain string labels for graphs that
    were round-tripped through JSON."""
    if isinstance(n, RelationalVariable):
        return (0, n.path, n.attr)
    if isinstance(n, IntersectionVar):
        return (1, n.members[0].path, n.members[0].attr, n.members[1].path, n.members[1].attr)
    return (2, str(n))


def node_label(n) -> str:
    return n.label if hasattr(n, "label") else str(n)


def _dependency_edges(
    schema: Schema, dep: RelationalDependency, perspective: str, h_agg: int
) -> list[tuple[RelationalVariable, RelationalVariable]]:
    """Ordered cause-variable -> effect-variable instantiations of one
    dependency within one perspective."""
    cause = dep.cause
    effect_class = cause.perspective
    edges: list[tuple[RelationalVariable, RelationalVariable]] = []
    for q in all_paths(schema, perspective, h_agg):
        if q[-1] != effect_class:
            continue
        effect_var = RelationalVariable(q, dep.effect_attr)
        for p in sorted(extend_path(schema, q, cause.path)):
            if hop(p) > h_agg:
                continue
            cause_var = RelationalVariable(p, cause.attr)
            if cause_var != effect_var:
                edges.append((cause_var, effect_var))
    return edges


def paths_can_intersect(
    schema: Schema,
    p1: tuple[str, ...],
    p2: tuple[str, ...],
    trial_skeletons=None,
    trials: int = 20,
    n_per_entity: int = 4,
) -> bool:
    """Whether two same-perspective, same-terminal paths can land on a shared
    instance.

    Decided constructively under the traversal semantics themselves: sample
    cardinality-respecting skeletons and look for a base whose two terminal
    sets overlap. Bridge burning makes many syntactically tempting pairs
    (every fold-back of a path against its own reverse) provably disjoint;
    those must not become intersection nodes.
    """
    if p1[0] != p2[0] or p1[-1] != p2[-1] or p1 == p2:
        return False
    from .model import random_skeleton
    from .paths import terminal_set

    if trial_skeletons is None:
        trial_skeletons = [
            random_skeleton(seed, schema, n_per_entity, link_prob=0.6)
            for seed in range(trials)
        ]
    for skel in trial_skeletons:
        for base in skel.instances_of(p1[0]):
            if terminal_set(skel, base, p1) & terminal_set(skel, base, p2):
                return True
    return False


def intersection_universe(
    schema: Schema, perspective: str, h_agg: int, trials: int = 20
) -> set[IntersectionVar]:
    """Intersection nodes for every pair of same-terminal variables whose
    paths can genuinely overlap; a schema-level property, so ground-truth
    graphs and learned graphs share one node universe."""
    from .model import random_skeleton

    paths = all_paths(schema, perspective, h_agg)
    by_terminal: dict[str, list[tuple[str, ...]]] = {}
    for p in paths:
        by_terminal.setdefault(p[-1], []).append(p)
    if all(len(group) < 2 for group in by_terminal.values()):
        return set()
    trial_skeletons = [
        random_skeleton(seed, schema, 4, link_prob=0.6) for seed in range(trials)
    ]
    out: set[IntersectionVar] = set()
    for terminal, group in sorted(by_terminal.items()):
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                if paths_can_intersect(schema, group[i], group[j], trial_skeletons):
                    for attr in sorted(schema.attrs(terminal)):
                        out.add(
                            IntersectionVar.of(
                                RelationalVariable(group[i], attr),
                                RelationalVariable(group[j], attr),
                            )
                        )
    return out


@dataclass
class SigmaAgg:
    perspective: str
    h_agg: int
    graph: DiGraph
    model: RelationalModel
    provenance: dict[tuple[AggNode, AggNode], set[RelationalDependency]]

    @property
    def nodes(self) -> list[AggNode]:
        return self.graph.nodes

    def relational_variables(self) -> list[RelationalVariable]:
        return [n for n in self.graph.nodes if isinstance(n, RelationalVariable)]


def build_sigma_agg(
    model: RelationalModel,
    perspective: str,
    h_agg: int,
) -> SigmaAgg:
    """Construct the sigma-abstract ground graph for one perspective.

    Nodes are every relational variable within ``h_agg`` hops plus the
    intersection variables for path pairs that can land on shared instances.
    Edges instantiate the model's dependencies; intersection nodes inherit
    every edge incident to either member.
    """
    if h_agg < model.hop_threshold:
        raise ValueError("h_agg must be at least the model hop threshold")
    schema = model.schema
    relvars = sorted(
        RelationalVariable(p, attr)
        for p in all_paths(schema, perspective, h_agg)
        for attr in sorted(schema.attrs(p[-1]))
    )
    int_nodes = sorted(intersection_universe(schema, perspective, h_agg), key=node_key)

    g = DiGraph(relvars + int_nodes)
    prov: dict[tuple[AggNode, AggNode], set[RelationalDependency]] = {}

    member_index: dict[RelationalVariable, list[IntersectionVar]] = {}
    for n in int_nodes:
        for m in n.members:
            member_index.setdefault(m, []).append(n)

    def add(u: AggNode, v: AggNode, dep: RelationalDependency) -> None:
        if u == v:
            return
        g.add_edge(u, v)
        prov.setdefault((u, v), set()).add(dep)

    for dep in model.sorted_dependencies:
        for u, v in _dependency_edges(schema, dep, perspective, h_agg):
            add(u, v, dep)
            for n in member_index.get(u, ()):
                add(n, v, dep)
            for n in member_index.get(v, ()):
                add(u, n, dep)
    return SigmaAgg(perspective, h_agg, g, model, prov)


def max_acyclification_hop(h: int, l_c: int) -> int:
    """Upper bound on the hop threshold any relational acyclification needs:
    floor((2 + l_c) / 2) * h for longest class-level cycle length l_c."""
    if h < 1 or l_c < 0:
        raise ValueError("h must be >= 1 and l_c >= 0")
    return ((2 + l_c) // 2) * h


def realizable_cause_paths(
    schema: Schema, effect_path: tuple[str, ...], cause_path: tuple[str, ...], h_prime: int
) -> list[tuple[str, ...]]:
    """Cause paths C with hop <= h_prime whose composition with ``effect_path``
    yields ``cause_path``; the witnesses that an edge between the two
    variables is an instantiation of a hop-bounded dependency."""
    out = []
    for c in all_paths(schema, effect_path[-1], h_prime):
        if c[-1] != cause_path[-1]:
            continue
        if cause_path in extend_path(schema, effect_path, c):
            out.append(c)
    return out


def _edge_realizable(
    schema: Schema, u: AggNode, v: AggNode, h_prime: int
) -> bool:
    """Whether u -> v can be an instantiation of some valid dependency with
    hop threshold h_prime. Intersection nodes defer to their members."""
    if isinstance(u, IntersectionVar):
        return any(_edge_realizable(schema, m, v, h_prime) for m in u.members)
    if isinstance(v, IntersectionVar):
        return any(_edge_realizable(schema, u, m, h_prime) for m in v.members)
    for c in realizable_cause_paths(schema, v.path, u.path, h_prime):
        if len(c) == 1 and u.attr == v.attr:
            continue  # would be a self-dependency, not a valid dependency
        return True
    return False


@dataclass
class AcyclifyOutcome:
    feasible: bool
    graph: DiGraph | None = None
    blocking_edge: tuple[AggNode, AggNode] | None = None
    witness_order: dict[AggNode, int] | None = None

    def report(self, perspective: str, h_prime: int) -> dict:
        rec = {"perspective": perspective, "h_prime": h_prime, "feasible": self.feasible}
        if self.feasible:
            rec["witness_order"] = {node_label(n): i for n, i in (self.witness_order or {}).items()}
        else:
            u, v = self.blocking_edge
            rec["blocking_edge"] = [node_label(u), node_label(v)]
        return rec


def relational_acyclify(
    agg: SigmaAgg,
    h_prime: int,
    scc_order: dict[AggNode, int] | None = None,
    validate_intra: bool = False,
) -> AcyclifyOutcome:
    """Acyclify a sigma-AGG subject to hop-bounded dependency validity.

    Cross-component edges are added exactly when the plain acyclification
    demands them and they correspond to a valid dependency within ``h_prime``;
    a demanded cross edge with no valid realization makes the whole operation
    infeasible. Intra-component pairs are oriented by ``scc_order``; with
    ``validate_intra`` they too must be realizable (pairs touching
    intersection nodes are exempt, being derived nodes).
    """
    if h_prime < agg.model.hop_threshold:
        raise ValueError("h_prime must be at least the model hop threshold")
    g = agg.graph
    schema = agg.model.schema
    comp_of = scc_of(g)
    if scc_order is None:
        scc_order = {n: i for i, n in enumerate(sorted(g.nodes, key=node_key))}
    out = DiGraph(g.nodes)
    for v in g.nodes:
        comp_v = comp_of[v]
        for u in g.nodes:
            if u == v or u in comp_v:
                continue
            if any(u in g.predecessors(k) for k in comp_v):
                if not _edge_realizable(schema, u, v, h_prime):
                    return AcyclifyOutcome(False, blocking_edge=(u, v))
                out.add_edge(u, v)
        for u in comp_v:
            if u == v:
                continue
            if validate_intra and not (
                isinstance(u, IntersectionVar) or isinstance(v, IntersectionVar)
            ):
                if not (
                    _edge_realizable(schema, u, v, h_prime)
                    or _edge_realizable(schema, v, u, h_prime)
                ):
                    return AcyclifyOutcome(False, blocking_edge=(u, v))
            if scc_order[u] < scc_order[v]:
                out.add_edge(u, v)
    return AcyclifyOutcome(True, graph=out, witness_order=dict(scc_order))


def check_relational_acyclification_assumption(
    model: RelationalModel, h_agg: int | None = None
) -> dict[str, bool]:
    """Per-perspective feasibility of a relational acyclification at the
    model's own hop threshold, with intra-component pairs validated too.

    A perspective passing means every edge the acyclification must add,
    including the orientations inside strongly connected components, can be
    read as a valid dependency no longer than the model allows.
    """
    if h_agg is None:
        h_agg = 2 * model.hop_threshold
    result: dict[str, bool] = {}
    for persp in sorted(model.schema.entities):
        agg = build_sigma_agg(model, persp, h_agg)
        outcome = relational_acyclify(
            agg, h_prime=model.hop_threshold, validate_intra=True
        )
        result[persp] = outcome.feasible
    return result

"""Relational causal models, their class-level cycle statistics, random model
and skeleton generation, and ground-graph construction."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .digraph import DiGraph
from .paths import (
    RelationalDependency,
    RelationalVariable,
    all_paths,
    hop,
    is_valid_path,
    terminal_set,
)
from .schema import Cardinality, Schema, random_schema, validate_schema


@dataclass(frozen=True)
class RelationalModel:
    schema: Schema
    dependencies: frozenset[RelationalDependency]
    hop_threshold: int

    def __post_init__(self) -> None:
        problems = validate_schema(self.schema)
        if problems:
            raise ValueError("invalid schema: " + "; ".join(problems))
        for dep in self.dependencies:
            dep.validate(self.schema, self.hop_threshold)

    @property
    def sorted_dependencies(self) -> list[RelationalDependency]:
        return sorted(self.dependencies)

    def class_graph(self) -> DiGraph:
        """Class-level dependency digraph: one node per attribute class."""
        nodes = sorted(a for ent in sorted(self.schema.entities) for a in self.schema.attrs(ent))
        g = DiGraph(nodes)
        for dep in self.sorted_dependencies:
            # same-attribute dependencies would be class-level self-loops;
            # cycle_stats accounts for them separately
            if dep.cause.attr != dep.effect_attr:
                g.add_edge(dep.cause.attr, dep.effect_attr)
        return g

    def to_json(self) -> dict:
        return {
            "schema": self.schema.to_json(),
            "hop_threshold": self.hop_threshold,
            "dependencies": [d.to_json() for d in self.sorted_dependencies],
        }

    @staticmethod
    def from_json(obj: dict) -> "RelationalModel":
        return RelationalModel(
            schema=Schema.from_json(obj["schema"]),
            dependencies=frozenset(
                RelationalDependency.from_json(d) for d in obj["dependencies"]
            ),
            hop_threshold=obj["hop_threshold"],
        )

    def dump(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)

    @staticmethod
    def load(path: str) -> "RelationalModel":
        with open(path) as fh:
            return RelationalModel.from_json(json.load(fh))


def cycle_stats(model: RelationalModel) -> tuple[bool, int]:
    """Whether the class-level dependency digraph has a directed cycle, and the
    edge count of its longest simple cycle (0 when acyclic).

    Same-attribute dependencies over non-trivial paths count as length-1
    self-cycles at the class level. The search is an exhaustive DFS; class
    graphs here have at most a few dozen edges.
    """
    edges: set[tuple[str, str]] = set()
    self_cyclic = False
    for dep in model.sorted_dependencies:
        if dep.cause.attr == dep.effect_attr:
            self_cyclic = True
        else:
            edges.add((dep.cause.attr, dep.effect_attr))
    succ: dict[str, list[str]] = {}
    for u, v in sorted(edges):
        succ.setdefault(u, []).append(v)

    longest = 1 if self_cyclic else 0

    def dfs(start: str, node: str, seen: frozenset[str], length: int) -> None:
        nonlocal longest
        for nxt in succ.get(node, ()):
            if nxt == start:
                longest = max(longest, length + 1)
            elif nxt not in seen and nxt > start:
                # only walk nodes ordered after the start to visit each cycle once
                dfs(start, nxt, seen | {nxt}, length + 1)

    for start in sorted(succ):
        dfs(start, start, frozenset([start]), 0)
    return longest > 0, longest


def candidate_dependencies(schema: Schema, h: int) -> list[RelationalDependency]:
    """Every valid dependency with cause-path hop count at most h."""
    out: list[RelationalDependency] = []
    for persp in sorted(schema.entities):
        for path in all_paths(schema, persp, h):
            for cause_attr in sorted(schema.attrs(path[-1])):
                for effect_attr in sorted(schema.attrs(persp)):
                    if len(path) == 1 and cause_attr == effect_attr:
                        continue
                    out.append(
                        RelationalDependency(RelationalVariable(path, cause_attr), effect_attr)
                    )
    return out


def random_model(
    rng_seed: int,
    schema: Schema,
    num_deps: int,
    h: int = 2,
    max_parents: int = 3,
    require_cycle: bool = True,
    max_tries: int = 200,
) -> RelationalModel:
    """Sample ``num_deps`` distinct dependencies subject to the parent bound.

    When ``require_cycle`` is set and the draw comes out acyclic, one sampled
    dependency is paired with its reverse to force a class-level feedback
    loop. Raises when no admissible draw is found within ``max_tries``.
    """
    pool = candidate_dependencies(schema, h)
    if len(pool) < num_deps:
        raise ValueError(
            f"schema admits only {len(pool)} candidate dependencies; {num_deps} requested"
        )
    rng = random.Random(rng_seed)
    for _ in range(max_tries):
        chosen = rng.sample(pool, num_deps)
        counts: dict[RelationalVariable, int] = {}
        ok = True
        for dep in chosen:
            counts[dep.effect] = counts.get(dep.effect, 0) + 1
            if counts[dep.effect] > max_parents:
                ok = False
                break
        if not ok:
            continue
        deps = set(chosen)
        model = RelationalModel(schema, frozenset(deps), h)
        if require_cycle and not cycle_stats(model)[0]:
            # repair: force a reciprocal pair for one randomly chosen dependency
            anchor = rng.choice(sorted(deps))
            reciprocal = anchor.reverse()
            if reciprocal in deps:
                continue
            droppable = sorted(d for d in deps if d != anchor)
            rng.shuffle(droppable)
            repaired = None
            for drop in droppable:
                trial = (deps - {drop}) | {reciprocal}
                counts2: dict[RelationalVariable, int] = {}
                fine = True
                for dep in trial:
                    counts2[dep.effect] = counts2.get(dep.effect, 0) + 1
                    if counts2[dep.effect] > max_parents:
                        fine = False
                        break
                if fine:
                    repaired = trial
                    break
            if repaired is None:
                continue
            model = RelationalModel(schema, frozenset(repaired), h)
            if not cycle_stats(model)[0]:
                continue
        return model
    raise ValueError("could not sample an admissible model; try another seed")


@dataclass(frozen=True)
class Link:
    rel: str
    a: str
    b: str


@dataclass
class Skeleton:
    """An instantiation of a schema: entity instances plus relationship links.

    Relationship instances get ids of their own so traversals can burn them
    like any other visited item.
    """

    schema: Schema
    instances: dict[str, list[str]]
    links: list[Link] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._class_of: dict[str, str] = {}
        for ent, ids in self.instances.items():
            for i in ids:
                self._class_of[i] = ent
        self._adj: dict[str, set[str]] = {i: set() for i in self._class_of}
        self._link_ids: dict[str, Link] = {}
        for idx, link in enumerate(self.links):
            lid = f"{link.rel}#{idx}"
            self._class_of[lid] = link.rel
            self._link_ids[lid] = link
            self._adj[lid] = {link.a, link.b}
            self._adj[link.a].add(lid)
            self._adj[link.b].add(lid)

    def instances_of(self, klass: str) -> list[str]:
        if self.schema.is_entity(klass):
            return list(self.instances.get(klass, []))
        return sorted(lid for lid, link in self._link_ids.items() if link.rel == klass)

    def neighbors(self, item: str, klass: str) -> set[str]:
        return {j for j in self._adj.get(item, ()) if self._class_of[j] == klass}

    def degree(self, instance: str) -> int:
        return len(self._adj.get(instance, ()))

    def validate(self) -> list[str]:
        """Cardinality violations, one message per offending instance."""
        problems: list[str] = []
        seen_pairs: set[tuple[str, str, str]] = set()
        use_count: dict[tuple[str, str], int] = {}
        for link in self.links:
            rel = self.schema.relationship(link.rel)
            if self._class_of.get(link.a) != rel.a.entity or self._class_of.get(link.b) != rel.b.entity:
                problems.append(f"link {link} does not match participant classes")
                continue
            key = (link.rel, link.a, link.b)
            if key in seen_pairs:
                problems.append(f"duplicate link {link}")
            seen_pairs.add(key)
            for inst, card in ((link.a, rel.a.card), (link.b, rel.b.card)):
                use_count[(link.rel, inst)] = use_count.get((link.rel, inst), 0) + 1
                if card is Cardinality.ONE and use_count[(link.rel, inst)] > 1:
                    problems.append(f"cardinality ONE violated by {inst} in {link.rel}")
        return problems

    def to_json(self) -> dict:
        return {
            "instances": {e: list(v) for e, v in sorted(self.instances.items())},
            "links": [{"rel": l.rel, "a": l.a, "b": l.b} for l in self.links],
        }


def random_skeleton(
    rng_seed: int,
    schema: Schema,
    n_per_entity: int,
    enforce_min_degree: bool = False,
    link_prob: float = 0.5,
    max_tries: int = 200,
) -> Skeleton:
    """Uniformly sampled links subject to cardinality constraints.

    With ``enforce_min_degree`` the draw is rejected until every entity
    instance has total degree >= 2; an explicit error is raised when the
    cardinalities make that impossible.
    """
    if enforce_min_degree and n_per_entity < 2:
        raise ValueError("n_per_entity must be >= 2 when enforcing minimum degree")
    if enforce_min_degree:
        for ent in sorted(schema.entities):
            cap = sum(
                (n_per_entity if schema.card(r.name, ent) is Cardinality.MANY else 1)
                for r in schema.relationships_of(ent)
            )
            if cap < 2:
                raise ValueError(f"cardinalities cap degree of {ent} below 2")
    rng = random.Random(rng_seed)
    instances = {
        ent: [f"{ent.lower()}{i}" for i in range(1, n_per_entity + 1)]
        for ent in sorted(schema.entities)
    }
    for _ in range(max_tries):
        links: list[Link] = []
        for rel in schema.relationships:
            a_ids = list(instances[rel.a.entity])
            b_ids = list(instances[rel.b.entity])
            if rel.a.card is Cardinality.MANY and rel.b.card is Cardinality.MANY:
                for a in a_ids:
                    for b in b_ids:
                        if rng.random() < link_prob:
                            links.append(Link(rel.name, a, b))
            elif rel.a.card is Cardinality.ONE and rel.b.card is Cardinality.MANY:
                # each a-instance joins at most one link
                for a in a_ids:
                    if rng.random() < 0.9:
                        links.append(Link(rel.name, a, rng.choice(b_ids)))
            elif rel.a.card is Cardinality.MANY and rel.b.card is Cardinality.ONE:
                for b in b_ids:
                    if rng.random() < 0.9:
                        links.append(Link(rel.name, rng.choice(a_ids), b))
            else:
                shuffled = list(b_ids)
                rng.shuffle(shuffled)
                for a, b in zip(a_ids, shuffled):
                    if rng.random() < 0.9:
                        links.append(Link(rel.name, a, b))
        dedup: list[Link] = []
        seen: set[tuple[str, str, str]] = set()
        for link in links:
            key = (link.rel, link.a, link.b)
            if key not in seen:
                seen.add(key)
                dedup.append(link)
        skel = Skeleton(schema, instances, dedup)
        if skel.validate():
            continue
        if enforce_min_degree and any(
            skel.degree(i) < 2 for ids in instances.values() for i in ids
        ):
            continue
        return skel
    raise ValueError("could not sample a skeleton satisfying the constraints")


@dataclass(frozen=True)
class AttrNode:
    instance: str
    attr: str

    @property
    def label(self) -> str:
        return f"({self.instance}, {self.attr})"


@dataclass
class GroundGraph:
    graph: DiGraph
    provenance: dict[tuple[AttrNode, AttrNode], RelationalDependency]


def ground_graph(model: RelationalModel, skeleton: Skeleton) -> GroundGraph:
    """Apply every dependency to every effect instance of the skeleton.

    For dependency P.X -> [B].Y and instance b of B, each t in the terminal
    set of P at b contributes the edge (t, X) -> (b, Y). Cyclic models yield
    cyclic ground graphs; no acyclicity check is made.
    """
    nodes = [
        AttrNode(inst, attr)
        for ent in sorted(model.schema.entities)
        for inst in skeleton.instances_of(ent)
        for attr in sorted(model.schema.attrs(ent))
    ]
    g = DiGraph(sorted(nodes, key=lambda n: (n.instance, n.attr)))
    prov: dict[tuple[AttrNode, AttrNode], RelationalDependency] = {}
    for dep in model.sorted_dependencies:
        effect_class = dep.cause.perspective
        for b in skeleton.instances_of(effect_class):
            targets = terminal_set(skeleton, b, dep.cause.path)
            for t in sorted(targets):
                u = AttrNode(t, dep.cause.attr)
                v = AttrNode(b, dep.effect_attr)
                if u != v:
                    g.add_edge(u, v)
                    prov[(u, v)] = dep
    return GroundGraph(g, prov)

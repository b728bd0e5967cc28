"""Oracle-driven relational causal discovery.

Phase I learns a model-level skeleton: every hop-bounded candidate dependency
is kept until some conditioning set of current neighbors of its effect
variable separates the pair. Phase II orients edges with collider detection
(CD), relational bivariate orientation (RBO), known non-collider (KNC), cycle
avoidance (CA), and Meek rule 3 (MR3); every orientation applies to the
underlying dependency and therefore to all of its instantiations in every
perspective at once.

Separation queries go to the true abstract ground graph of the query's
perspective, under either the d- or the sigma-criterion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional

from sklearn.base import BaseEstimator

from .agg import (
    AggNode,
    IntersectionVar,
    SigmaAgg,
    build_sigma_agg,
    intersection_universe,
    node_key,
    node_label,
)
from .digraph import DiGraph, acyclify, d_separated
from .model import RelationalModel, candidate_dependencies
from .pag import Dpag
from .paths import RelationalDependency, RelationalVariable, all_paths
from .schema import Schema

RULES = ("cd", "rbo", "knc", "ca", "mr3")


class OrientationConflict(RuntimeError):
    """Both directions of one dependency were demanded; carries the rule trace."""

    def __init__(self, message: str, trace: list[str]):
        super().__init__(message + "\n" + "\n".join(trace))
        self.trace = trace


class SeparationOracle:
    """Answers independence queries on the true per-perspective graphs.

    Deterministic and symmetric in the first two arguments; results are
    cached. With the sigma criterion each graph is acyclified once and
    queried with plain d-separation.
    """

    def __init__(self, truth: dict[str, SigmaAgg], kind: str = "sigma"):
        if kind not in ("d", "sigma"):
            raise ValueError("oracle kind must be 'd' or 'sigma'")
        self.kind = kind
        self.truth = truth
        self._graphs: dict[str, DiGraph] = {}
        for persp, agg in truth.items():
            g = agg.graph
            self._graphs[persp] = acyclify(g) if kind == "sigma" else g
        self._cache: dict = {}
        self.n_queries = 0

    def query(self, perspective: str, x: AggNode, y: AggNode, z: frozenset) -> bool:
        """True when x and y are separated given z in the true graph."""
        key = (perspective, frozenset((x, y)), z)
        if key not in self._cache:
            self.n_queries += 1
            self._cache[key] = d_separated(self._graphs[perspective], {x}, {y}, z)
        return self._cache[key]


@dataclass
class SepsetRecord:
    perspective: str
    conditioning: frozenset
    pair: tuple[AggNode, AggNode]


# maps candidate key -> the separating set that removed it
SepsetTable = dict


@dataclass
class Candidate:
    """One undirected model-level adjacency: a dependency and its reverse."""

    key: tuple
    canonical: RelationalDependency
    other: Optional[RelationalDependency]  # None when the dependency is self-reverse
    state: str = "present"  # present | removed | oriented
    orientation: Optional[str] = None  # canonical | reverse

    @property
    def poles(self) -> list[RelationalDependency]:
        return [self.canonical] if self.other is None else [self.canonical, self.other]

    @property
    def oriented_dependency(self) -> Optional[RelationalDependency]:
        if self.state != "oriented":
            return None
        if self.orientation == "canonical" or self.other is None:
            return self.canonical
        return self.other


def candidate_key(dep: RelationalDependency) -> tuple:
    canon = min(dep, dep.reverse())
    return (canon.cause.path, canon.cause.attr, canon.effect_attr)


def _dependency_edge_list(schema, dep, perspective, h_agg, paths):
    """Ordered cause-variable -> effect-variable instantiations of one
    dependency restricted to paths of one perspective."""
    from .paths import extend_path, hop

    cause = dep.cause
    out = []
    for q in paths:
        if q[-1] != cause.perspective:
            continue
        effect_var = RelationalVariable(q, dep.effect_attr)
        for p in sorted(extend_path(schema, q, cause.path)):
            if hop(p) > h_agg:
                continue
            cause_var = RelationalVariable(p, cause.attr)
            if cause_var != effect_var:
                out.append((cause_var, effect_var))
    return out


class LearnedGraph:
    """Per-perspective graphs over the agg-node universe whose edges are the
    instantiations of the surviving candidate dependencies.

    Edge state is derived from candidate state, so orienting a dependency
    orients every one of its instantiations everywhere (the propagation
    invariant holds by construction).
    """

    def __init__(self, schema: Schema, h: int, h_agg: int):
        self.schema = schema
        self.h = h
        self.h_agg = h_agg
        self.perspectives = sorted(schema.entities)
        pool = candidate_dependencies(schema, h)

        self.candidates: dict[tuple, Candidate] = {}
        for dep in pool:
            key = candidate_key(dep)
            if key in self.candidates:
                continue
            rev = dep.reverse()
            canon, other = (dep, rev) if dep <= rev else (rev, dep)
            self.candidates[key] = Candidate(key, canon, None if canon == other else other)

        self.universe: dict[str, list[AggNode]] = {}
        # pair -> canonical-direction tuples per candidate
        self._dirs: dict[str, dict[frozenset, dict[tuple, set]]] = {}
        self._adj: dict[str, dict[AggNode, dict[AggNode, set]]] = {}
        self.rule_counts: dict[str, int] = {r: 0 for r in RULES}
        self.trace: list[str] = []
        self.conflicts: list[dict] = []

        for persp in self.perspectives:
            paths = all_paths(schema, persp, h_agg)
            relvars = sorted(
                RelationalVariable(p, attr)
                for p in paths
                for attr in sorted(schema.attrs(p[-1]))
            )
            ints = sorted(intersection_universe(schema, persp, h_agg), key=node_key)
            self.universe[persp] = relvars + ints
            member_index: dict[RelationalVariable, list[IntersectionVar]] = {}
            for n in ints:
                for m in n.members:
                    member_index.setdefault(m, []).append(n)
            dirs: dict[frozenset, dict[tuple, set]] = {}
            adj: dict[AggNode, dict[AggNode, set]] = {n: {} for n in self.universe[persp]}

            def record(u: AggNode, v: AggNode, key: tuple) -> None:
                if u == v:
                    return
                pair = frozenset((u, v))
                dirs.setdefault(pair, {}).setdefault(key, set()).add((u, v))
                adj[u].setdefault(v, set()).add(key)
                adj[v].setdefault(u, set()).add(key)

            for key, cand in sorted(self.candidates.items()):
                for pole in cand.poles:
                    forward = pole == cand.canonical
                    for cause_var, effect_var in _dependency_edge_list(
                        schema, pole, persp, h_agg, paths
                    ):
                        u, v = (cause_var, effect_var) if forward else (effect_var, cause_var)
                        record(u, v, key)
                        for n in member_index.get(cause_var, ()):
                            if effect_var not in n.members:
                                a, b = (n, effect_var) if forward else (effect_var, n)
                                record(a, b, key)
                        for n in member_index.get(effect_var, ()):
                            if cause_var not in n.members:
                                a, b = (cause_var, n) if forward else (n, cause_var)
                                record(a, b, key)
            self._dirs[persp] = dirs
            self._adj[persp] = adj

    # -- queries -------------------------------------------------------

    def surviving(self, keys: Iterable[tuple]) -> list[tuple]:
        return [k for k in keys if self.candidates[k].state != "removed"]

    def adjacent(self, persp: str, u: AggNode, v: AggNode) -> bool:
        tags = self._adj[persp].get(u, {}).get(v, ())
        return any(self.candidates[k].state != "removed" for k in tags)

    def neighbors(self, persp: str, u: AggNode) -> list[AggNode]:
        out = [
            v
            for v, tags in self._adj[persp].get(u, {}).items()
            if any(self.candidates[k].state != "removed" for k in tags)
        ]
        return sorted(out, key=node_key)

    def surviving_tags(self, persp: str, u: AggNode, v: AggNode) -> list[tuple]:
        tags = self._adj[persp].get(u, {}).get(v, ())
        return sorted(k for k in tags if self.candidates[k].state != "removed")

    def edge_state(self, persp: str, u: AggNode, v: AggNode):
        """'absent', 'undirected', or ('directed', head_node)."""
        pair = frozenset((u, v))
        tags = self.surviving_tags(persp, u, v)
        if not tags:
            return "absent"
        heads: set[AggNode] = set()
        undecided = False
        for key in tags:
            cand = self.candidates[key]
            dirset = self._dirs[persp][pair][key]
            if len(dirset) > 1:
                undecided = True
                continue
            if cand.state != "oriented":
                undecided = True
                continue
            (a, b) = next(iter(dirset))
            heads.add(b if cand.orientation == "canonical" else a)
        if undecided or not heads or len(heads) > 1:
            # disagreeing tags (possible only through intersection-node
            # inheritance of separately oriented dependencies) render as
            # undirected: the conservative, fewest-claims state
            return "undirected"
        return ("directed", next(iter(heads)))

    def is_directed_into(self, persp: str, tail: AggNode, head: AggNode) -> bool:
        state = self.edge_state(persp, tail, head)
        return state != "absent" and state != "undirected" and state[1] == head

    # -- mutation --------------------------------------------------------

    def remove_candidate(self, key: tuple) -> None:
        cand = self.candidates[key]
        if cand.state == "oriented":
            raise RuntimeError("cannot remove an oriented candidate")
        cand.state = "removed"

    def orient_toward(
        self,
        persp: str,
        key: tuple,
        pair: frozenset,
        head: AggNode,
        rule: str,
        evidence: bool = True,
    ) -> bool:
        """Orient one candidate so its instantiation at ``pair`` points into
        ``head``. Returns True when the orientation is new.

        A demand against an existing orientation never overwrites it: with
        ``evidence`` it is recorded as an explicit conflict, without evidence
        (the fallback branch of RBO) it is silently dropped.
        """
        cand = self.candidates[key]
        if cand.state == "removed":
            raise RuntimeError("cannot orient a removed candidate")
        dirset = self._dirs[persp][pair][key]
        if len(dirset) > 1:
            return False  # symmetric instantiation cannot fix a direction
        (a, b) = next(iter(dirset))
        if head == b:
            wanted = "canonical"
        elif head == a:
            wanted = "reverse"
        else:
            raise ValueError("head must be an endpoint of pair")
        if cand.state == "oriented":
            if cand.orientation != wanted and evidence:
                self.conflicts.append(
                    {
                        "rule": rule,
                        "perspective": persp,
                        "pair": [node_label(a), node_label(b)],
                        "demanded_head": node_label(head),
                        "kept": cand.orientation,
                        "trace": list(self.trace),
                    }
                )
                self.trace.append(
                    f"conflict: {rule}@{persp} demanded {node_label(a)} ~ {node_label(b)} "
                    f"into {node_label(head)}, kept earlier orientation"
                )
            return False
        cand.state = "oriented"
        cand.orientation = wanted
        self.trace.append(
            f"{rule}@{persp}: {node_label(a)} ~ {node_label(b)} oriented into {node_label(head)}"
            f" [{cand.canonical.label}]"
        )
        return True

    # -- export ----------------------------------------------------------

    def undirected_pairs(self, persp: str) -> list[frozenset]:
        out = []
        for pair in self._dirs[persp]:
            u, v = sorted(pair, key=node_key)
            if self.edge_state(persp, u, v) == "undirected":
                out.append(pair)
        return sorted(out, key=lambda p: sorted(map(node_key, p)))

    def to_dpag(self, persp: str) -> Dpag:
        dpag = Dpag(list(self.universe[persp]))
        for pair in sorted(self._dirs[persp], key=lambda p: sorted(map(node_key, p))):
            u, v = sorted(pair, key=node_key)
            state = self.edge_state(persp, u, v)
            if state == "absent":
                continue
            if state == "undirected":
                dpag.add_undirected(u, v)
            else:
                head = state[1]
                tail = v if head == u else u
                dpag.add_directed(tail, head)
        return dpag

    def directed_graph(self, persp: str) -> DiGraph:
        g = DiGraph(self.universe[persp])
        for pair in self._dirs[persp]:
            u, v = sorted(pair, key=node_key)
            state = self.edge_state(persp, u, v)
            if state not in ("absent", "undirected"):
                head = state[1]
                tail = v if head == u else u
                g.add_edge(tail, head)
        return g


def learn_skeleton(
    schema: Schema,
    h: int,
    oracle: SeparationOracle,
    max_depth: int | None = None,
    h_agg: int | None = None,
) -> tuple[LearnedGraph, SepsetTable]:
    """Phase I: remove every candidate dependency whose endpoints some subset
    of the effect variable's current neighbors separates.

    Conditioning sets of size ``depth`` are drawn from the neighbors of the
    effect variable only; both poles of a candidate are queried, which covers
    the two adjacency sides of the underlying pair. Removal propagates to all
    instantiations immediately (they share the candidate's state).
    """
    if h_agg is None:
        h_agg = 2 * h
    lg = LearnedGraph(schema, h, h_agg)
    sepsets: SepsetTable = {}
    depth = 0
    while True:
        if max_depth is not None and depth > max_depth:
            break
        any_pool_big_enough = False
        for key in sorted(lg.candidates):
            cand = lg.candidates[key]
            if cand.state == "removed":
                continue
            removed = False
            for pole in cand.poles:
                persp = pole.cause.perspective
                xnode = pole.cause
                ynode = pole.effect
                pool = [n for n in lg.neighbors(persp, ynode) if n != xnode]
                if len(pool) >= depth:
                    any_pool_big_enough = True
                for z in combinations(pool, depth):
                    if oracle.query(persp, xnode, ynode, frozenset(z)):
                        lg.remove_candidate(key)
                        sepsets[key] = SepsetRecord(persp, frozenset(z), (xnode, ynode))
                        removed = True
                        break
                if removed:
                    break
        if not any_pool_big_enough:
            break
        depth += 1
    return lg, sepsets


def _attr_and_terminal(n: AggNode) -> tuple[str, str]:
    return (n.attr, n.terminal)


class _SepsetFinder:
    """Separating-set search for arbitrary node pairs of one perspective,
    over subsets of the current neighbors of either endpoint; memoized."""

    def __init__(self, lg: LearnedGraph, oracle: SeparationOracle, max_depth: int | None):
        self.lg = lg
        self.oracle = oracle
        self.max_depth = max_depth
        self.cache: dict[tuple, Optional[frozenset]] = {}

    def seed(self, sepsets: SepsetTable) -> None:
        for rec in sepsets.values():
            self.cache[(rec.perspective, frozenset(rec.pair))] = rec.conditioning

    def find(self, persp: str, u: AggNode, w: AggNode) -> Optional[frozenset]:
        key = (persp, frozenset((u, w)))
        if key in self.cache:
            return self.cache[key]
        pools = [
            [n for n in self.lg.neighbors(persp, u) if n != w],
            [n for n in self.lg.neighbors(persp, w) if n != u],
        ]
        cap = max(len(pools[0]), len(pools[1]))
        if self.max_depth is not None:
            cap = min(cap, self.max_depth)
        found: Optional[frozenset] = None
        for size in range(cap + 1):
            for pool in pools:
                if len(pool) < size:
                    continue
                for z in combinations(pool, size):
                    if self.oracle.query(persp, u, w, frozenset(z)):
                        found = frozenset(z)
                        break
                if found is not None:
                    break
            if found is not None:
                break
        self.cache[key] = found
        return found


def _unshielded_triples(lg: LearnedGraph, persp: str):
    for m in lg.universe[persp]:
        nbrs = lg.neighbors(persp, m)
        for u, w in combinations(nbrs, 2):
            if not lg.adjacent(persp, u, w):
                yield u, m, w


def orient_edges(
    lg: LearnedGraph,
    sepsets: SepsetTable,
    oracle: SeparationOracle,
    max_depth: int | None = None,
) -> LearnedGraph:
    """Phase II: collider-style rules first, then Meek-style rules to fixpoint.

    CD fires on an unshielded triple whose endpoints have a separating set
    excluding the middle. RBO fires instead when the endpoints share attribute
    and terminal class and both edges instantiate one dependency: a separating
    set containing the middle (or no separating set at all) makes the middle
    the common cause, one excluding it makes the triple a collider. KNC and
    MR3 require an explicit separating set before they touch anything, and CA
    orients an undirected edge whose reverse would close a directed cycle in
    the perspective graph.
    """
    finder = _SepsetFinder(lg, oracle, max_depth)
    finder.seed(sepsets)
    fired: set = set()

    def count(rule: str) -> None:
        lg.rule_counts[rule] += 1

    # stage one: CD and RBO over all unshielded triples
    for persp in lg.perspectives:
        for u, m, w in _unshielded_triples(lg, persp):
            mark = ("s1", persp, node_key(u), node_key(m), node_key(w))
            if mark in fired:
                continue
            fired.add(mark)
            pair_um = frozenset((u, m))
            pair_wm = frozenset((w, m))
            shared = set(lg.surviving_tags(persp, u, m)) & set(lg.surviving_tags(persp, w, m))
            canonical = any(
                isinstance(n, RelationalVariable) and len(n.path) == 1 for n in (u, w)
            )
            rbo_shaped = (
                _attr_and_terminal(u) == _attr_and_terminal(w) and bool(shared) and canonical
            )
            sep = finder.find(persp, u, w)
            changed = False
            if rbo_shaped:
                fork = sep is None or m in sep
                evidence = sep is not None
                for key in sorted(shared):
                    if fork:
                        changed |= lg.orient_toward(persp, key, pair_um, u, "rbo", evidence)
                        changed |= lg.orient_toward(persp, key, pair_wm, w, "rbo", evidence)
                    else:
                        changed |= lg.orient_toward(persp, key, pair_um, m, "rbo")
                        changed |= lg.orient_toward(persp, key, pair_wm, m, "rbo")
                if changed:
                    count("rbo")
            else:
                # an inseparable endpoint pair carries no sepset at all; the
                # middle is then not in any recorded set and the triple reads
                # as a collider, mirroring table-lookup behavior
                if sep is None or m not in sep:
                    evidence = sep is not None
                    for key in lg.surviving_tags(persp, u, m):
                        changed |= lg.orient_toward(persp, key, pair_um, m, "cd", evidence)
                    for key in lg.surviving_tags(persp, w, m):
                        changed |= lg.orient_toward(persp, key, pair_wm, m, "cd", evidence)
                    if changed:
                        count("cd")

    # stage two: KNC, CA, MR3 until nothing changes
    while True:
        progress = False
        for persp in lg.perspectives:
            # known non-collider
            for u, m, w in _unshielded_triples(lg, persp):
                for x, znode in ((u, w), (w, u)):
                    if not lg.is_directed_into(persp, x, m):
                        continue
                    if lg.edge_state(persp, m, znode) != "undirected":
                        continue
                    mark = ("knc", persp, node_key(x), node_key(m), node_key(znode))
                    if mark in fired:
                        continue
                    sep = finder.find(persp, x, znode)
                    if sep is None or m not in sep:
                        continue
                    fired.add(mark)
                    changed = False
                    for key in lg.surviving_tags(persp, m, znode):
                        changed |= lg.orient_toward(
                            persp, key, frozenset((m, znode)), znode, "knc"
                        )
                    if changed:
                        count("knc")
                        progress = True
            # cycle avoidance: directed path plus an undirected closing edge
            dg = lg.directed_graph(persp)
            from .digraph import descendants

            for pair in lg.undirected_pairs(persp):
                u, v = sorted(pair, key=node_key)
                u_to_v = v in descendants(dg, u)
                v_to_u = u in descendants(dg, v)
                if u_to_v == v_to_u:
                    continue  # nothing to avoid, or both ways already cycle
                head = v if u_to_v else u
                mark = ("ca", persp, node_key(u), node_key(v))
                if mark in fired:
                    continue
                fired.add(mark)
                changed = False
                for key in lg.surviving_tags(persp, u, v):
                    changed |= lg.orient_toward(persp, key, pair, head, "ca")
                if changed:
                    count("ca")
                    progress = True
                    dg = lg.directed_graph(persp)
            # Meek rule 3
            for b in lg.universe[persp]:
                arrow_sources = [
                    c for c in lg.neighbors(persp, b) if lg.is_directed_into(persp, c, b)
                ]
                if len(arrow_sources) < 2:
                    continue
                for a in lg.neighbors(persp, b):
                    if lg.edge_state(persp, a, b) != "undirected":
                        continue
                    for c, d in combinations(arrow_sources, 2):
                        if lg.adjacent(persp, c, d):
                            continue
                        if (
                            lg.edge_state(persp, a, c) != "undirected"
                            or lg.edge_state(persp, a, d) != "undirected"
                        ):
                            continue
                        if finder.find(persp, c, d) is None:
                            continue
                        mark = ("mr3", persp, node_key(a), node_key(b))
                        if mark in fired:
                            continue
                        fired.add(mark)
                        changed = False
                        for key in lg.surviving_tags(persp, a, b):
                            changed |= lg.orient_toward(persp, key, frozenset((a, b)), b, "mr3")
                        if changed:
                            count("mr3")
                            progress = True
                        break
        if not progress:
            break
    return lg


@dataclass
class RcdResult:
    dpags: dict[str, Dpag]
    rule_counts: dict[str, int]
    sepsets: SepsetTable
    learned: LearnedGraph
    truth: dict[str, SigmaAgg]
    oracle_kind: str


def rcd(
    model: RelationalModel,
    oracle_kind: str = "sigma",
    h: int | None = None,
    max_depth: int | None = None,
    h_agg: int | None = None,
) -> RcdResult:
    """Run both phases against the true abstract ground graphs of ``model``."""
    if h is None:
        h = model.hop_threshold
    if h_agg is None:
        h_agg = 2 * h
    truth = {
        persp: build_sigma_agg(model, persp, h_agg)
        for persp in sorted(model.schema.entities)
    }
    oracle = SeparationOracle(truth, oracle_kind)
    lg, sepsets = learn_skeleton(model.schema, h, oracle, max_depth, h_agg)
    orient_edges(lg, sepsets, oracle, max_depth)
    dpags = {persp: lg.to_dpag(persp) for persp in lg.perspectives}
    return RcdResult(dpags, dict(lg.rule_counts), sepsets, lg, truth, oracle_kind)


class RCD(BaseEstimator):
    """Constraint-based discovery for relational causal models, shaped like a
    scikit-learn estimator: construct with hyperparameters, ``fit`` a
    relational model, read fitted attributes.

    Parameters
    ----------
    oracle : {"sigma", "d"}
        Separation criterion the independence oracle applies to the true
        abstract ground graphs.
    max_depth : int or None
        Largest conditioning-set size searched; None searches up to the
        available neighbor pools.
    agg_hop : int or None
        Hop threshold of the abstract ground graphs; defaults to twice the
        model's hop threshold.
    """

    def __init__(self, oracle: str = "sigma", max_depth: int | None = None, agg_hop: int | None = None):
        self.oracle = oracle
        self.max_depth = max_depth
        self.agg_hop = agg_hop

    def fit(self, model: RelationalModel, y=None) -> "RCD":
        result = rcd(
            model,
            oracle_kind=self.oracle,
            max_depth=self.max_depth,
            h_agg=self.agg_hop,
        )
        self.result_ = result
        self.dpags_ = result.dpags
        self.rule_counts_ = result.rule_counts
        self.sepsets_ = result.sepsets
        self.truth_aggs_ = result.truth
        self.perspectives_ = sorted(result.dpags)
        return self

    def possible_ancestor(self, perspective: str, i: AggNode, j: AggNode) -> bool:
        from .pag import is_possible_ancestor

        return is_possible_ancestor(self.dpags_[perspective], i, j)

    def possible_cycle(self, perspective: str, i: AggNode, j: AggNode) -> bool:
        from .pag import is_possible_cycle

        return is_possible_cycle(self.dpags_[perspective], i, j)

    def recalls(self, kind: str) -> dict[str, float]:
        from .pag import compute_recall

        return {
            persp: compute_recall(self.dpags_[persp], self.truth_aggs_[persp], kind)
            for persp in self.perspectives_
        }

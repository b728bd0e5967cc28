"""Relational paths and variables: path validity, path composition, traversal
of skeletons under bridge-burning semantics, and enumeration of the relational
variables reachable from a perspective."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

from .schema import Cardinality, Schema

if TYPE_CHECKING:  # pragma: no cover
    from .model import Skeleton

Path = tuple[str, ...]


def hop(path: Sequence[str]) -> int:
    """Number of traversal steps of a path: its item count minus one."""
    return len(path) - 1


def is_valid_path(schema: Schema, items: Sequence[str]) -> bool:
    """Check alternation, participation, and the repeated-endpoint triple rule.

    A triple <I, J, K> with I == K is invalid when J is a relationship class
    (the two participants of a binary relationship are distinct), and valid for
    an entity class J only when card(I, J) is MANY, i.e. J may take part in
    that relationship more than once.

    Unknown class names are rejected with ``ValueError``.
    """
    if not items:
        raise ValueError("path must be non-empty")
    for name in items:
        if not (schema.is_entity(name) or schema.is_relationship(name)):
            raise ValueError(f"unknown item class: {name!r}")
    if not schema.is_entity(items[0]) or not schema.is_entity(items[-1]):
        return False
    for i, name in enumerate(items):
        want_entity = i % 2 == 0
        if schema.is_entity(name) != want_entity:
            return False
        if i > 0:
            ent, rel = (items[i - 1], name) if want_entity is False else (name, items[i - 1])
            if not schema.participates(rel, ent):
                return False
    for i in range(len(items) - 2):
        first, mid, last = items[i], items[i + 1], items[i + 2]
        if first != last:
            continue
        if schema.is_relationship(mid):
            return False
        if schema.card(first, mid) is not Cardinality.MANY:
            return False
    return True


def reverse_path(path: Sequence[str]) -> Path:
    return tuple(reversed(path))


def extend_path(schema: Schema, p: Sequence[str], q: Sequence[str]) -> set[Path]:
    """Compose two relational paths that meet at ``last(p) == first(q)``.

    Pivots are the lengths i >= 1 at which the reversed tail of ``p`` equals
    the head of ``q``; each pivot contributes the concatenation of ``p`` minus
    its folded tail with ``q`` minus its folded head. Results failing the path
    validity rules are dropped.
    """
    p = tuple(p)
    q = tuple(q)
    if not p or not q or p[-1] != q[0]:
        raise ValueError("paths must share an endpoint: last(p) == first(q)")
    rev = reverse_path(p)
    out: set[Path] = set()
    max_i = min(len(p), len(q))
    for i in range(1, max_i + 1):
        if rev[:i] != q[:i]:
            continue
        candidate = p[: len(p) - i + 1] + q[i:]
        if is_valid_path(schema, candidate):
            out.add(candidate)
    return out


@dataclass(frozen=True, order=True)
class RelationalVariable:
    """A relational path plus an attribute of the path's terminal entity class."""

    path: Path
    attr: str

    @property
    def perspective(self) -> str:
        return self.path[0]

    @property
    def terminal(self) -> str:
        return self.path[-1]

    @property
    def label(self) -> str:
        return f"[{', '.join(self.path)}].{self.attr}"

    def __str__(self) -> str:  # pragma: no cover
        return self.label

    def to_json(self) -> dict:
        return {"path": list(self.path), "attribute": self.attr}

    @staticmethod
    def from_json(obj: dict) -> "RelationalVariable":
        return RelationalVariable(tuple(obj["path"]), obj["attribute"])


@dataclass(frozen=True, order=True)
class RelationalDependency:
    """cause P.X -> effect [B].Y where B is the first item of the cause path."""

    cause: RelationalVariable
    effect_attr: str

    @property
    def effect(self) -> RelationalVariable:
        return RelationalVariable((self.cause.perspective,), self.effect_attr)

    @property
    def label(self) -> str:
        return f"{self.cause.label} -> {self.effect.label}"

    def reverse(self) -> "RelationalDependency":
        """The same class-level adjacency read from the cause's end."""
        return RelationalDependency(
            RelationalVariable(reverse_path(self.cause.path), self.effect_attr),
            self.cause.attr,
        )

    def validate(self, schema: Schema, h: int | None = None) -> None:
        if not is_valid_path(schema, self.cause.path):
            raise ValueError(f"invalid cause path: {self.cause.path}")
        if self.cause.attr not in schema.attrs(self.cause.terminal):
            raise ValueError(f"{self.cause.attr!r} is not an attribute of {self.cause.terminal!r}")
        if self.effect_attr not in schema.attrs(self.cause.perspective):
            raise ValueError(
                f"{self.effect_attr!r} is not an attribute of {self.cause.perspective!r}"
            )
        if len(self.cause.path) == 1 and self.cause.attr == self.effect_attr:
            raise ValueError("self-dependency on one variable is not allowed")
        if h is not None and hop(self.cause.path) > h:
            raise ValueError(f"cause path exceeds hop threshold {h}: {self.cause.path}")

    def to_json(self) -> dict:
        return {"cause": self.cause.to_json(), "effect_attribute": self.effect_attr}

    @staticmethod
    def from_json(obj: dict) -> "RelationalDependency":
        return RelationalDependency(RelationalVariable.from_json(obj["cause"]), obj["effect_attribute"])


def all_paths(schema: Schema, perspective: str, h: int) -> list[Path]:
    """Every valid relational path starting at ``perspective`` with at most h hops."""
    if h < 0:
        raise ValueError("h must be >= 0")
    if not schema.is_entity(perspective):
        raise ValueError(f"unknown entity class: {perspective!r}")
    found: list[Path] = []
    frontier: list[Path] = [(perspective,)]
    found.append((perspective,))
    while frontier:
        nxt: list[Path] = []
        for path in frontier:
            if hop(path) + 2 > h:
                continue
            last = path[-1]
            for rel in schema.relationships_of(last):
                other = rel.b.entity if rel.a.entity == last else rel.a.entity
                candidate = path + (rel.name, other)
                if is_valid_path(schema, candidate):
                    nxt.append(candidate)
                    found.append(candidate)
        frontier = nxt
    return sorted(found)


def all_relational_variables(schema: Schema, perspective: str, h: int) -> set[RelationalVariable]:
    """Every relational variable from ``perspective`` with hop count <= h."""
    out: set[RelationalVariable] = set()
    for path in all_paths(schema, perspective, h):
        for attr in sorted(schema.attrs(path[-1])):
            out.add(RelationalVariable(path, attr))
    return out


def terminal_set(skeleton: "Skeleton", base: str, path: Sequence[str]) -> set[str]:
    """Instances reached from ``base`` by walking ``path`` hop by hop.

    Bridge-burning: every instance visited at any earlier hop is excluded from
    later frontiers. The whole frontier advances together; the result is the
    final frontier.
    """
    path = tuple(path)
    schema = skeleton.schema
    if not is_valid_path(schema, path):
        raise ValueError(f"invalid path: {path}")
    if base not in skeleton.instances_of(path[0]):
        raise ValueError(f"{base!r} is not an instance of {path[0]!r}")
    frontier: set[str] = {base}
    visited: set[str] = {base}
    for klass in path[1:]:
        nxt: set[str] = set()
        for inst in frontier:
            nxt.update(skeleton.neighbors(inst, klass))
        nxt -= visited
        visited |= nxt
        frontier = nxt
        if not frontier:
            break
    return frontier

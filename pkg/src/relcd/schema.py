"""Relational schemas: entity classes, binary relationship classes, attributes,
and cardinality constraints, plus the random generator used by the experiment
harness."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable


class Cardinality(str, Enum):
    ONE = "one"
    MANY = "many"


@dataclass(frozen=True)
class Participant:
    entity: str
    card: Cardinality


@dataclass(frozen=True)
class Relationship:
    """A binary relationship class between two distinct entity classes."""

    name: str
    a: Participant
    b: Participant


@dataclass(frozen=True)
class Schema:
    """Type system of a relational domain.

    ``attributes`` maps entity-class names to their attribute names. Attribute
    names are globally unique so that class-level dependency graphs can use
    them directly as node labels.
    """

    entities: frozenset[str]
    relationships: tuple[Relationship, ...]
    attributes: dict[str, frozenset[str]] = field(default_factory=dict)

    def is_entity(self, name: str) -> bool:
        return name in self.entities

    def is_relationship(self, name: str) -> bool:
        return name in self._rel_index

    def relationship(self, name: str) -> Relationship:
        return self._rel_index[name]

    @property
    def _rel_index(self) -> dict[str, Relationship]:
        return {r.name: r for r in self.relationships}

    def card(self, rel_name: str, entity: str) -> Cardinality:
        """Number of times an ``entity`` instance may participate in ``rel_name``."""
        rel = self.relationship(rel_name)
        if rel.a.entity == entity:
            return rel.a.card
        if rel.b.entity == entity:
            return rel.b.card
        raise ValueError(f"{entity!r} does not participate in {rel_name!r}")

    def participates(self, rel_name: str, entity: str) -> bool:
        rel = self._rel_index.get(rel_name)
        return rel is not None and entity in (rel.a.entity, rel.b.entity)

    def relationships_of(self, entity: str) -> list[Relationship]:
        return [r for r in self.relationships if entity in (r.a.entity, r.b.entity)]

    def attrs(self, entity: str) -> frozenset[str]:
        return self.attributes.get(entity, frozenset())

    def attr_owner(self, attr: str) -> str:
        for ent in sorted(self.entities):
            if attr in self.attrs(ent):
                return ent
        raise ValueError(f"unknown attribute {attr!r}")

    def to_json(self) -> dict:
        return {
            "entities": sorted(self.entities),
            "relationships": [
                {
                    "name": r.name,
                    "a": {"entity": r.a.entity, "card": r.a.card.value},
                    "b": {"entity": r.b.entity, "card": r.b.card.value},
                }
                for r in self.relationships
            ],
            "attributes": {e: sorted(self.attrs(e)) for e in sorted(self.entities)},
        }

    @staticmethod
    def from_json(obj: dict) -> "Schema":
        rels = tuple(
            Relationship(
                r["name"],
                Participant(r["a"]["entity"], Cardinality(r["a"]["card"])),
                Participant(r["b"]["entity"], Cardinality(r["b"]["card"])),
            )
            for r in obj["relationships"]
        )
        return Schema(
            entities=frozenset(obj["entities"]),
            relationships=rels,
            attributes={e: frozenset(v) for e, v in obj["attributes"].items()},
        )


def make_schema(
    entities: Iterable[str],
    relationships: Iterable[tuple[str, tuple[str, Cardinality], tuple[str, Cardinality]]],
    attributes: dict[str, Iterable[str]],
) -> Schema:
    """Convenience constructor from plain tuples."""
    rels = tuple(
        Relationship(name, Participant(a[0], a[1]), Participant(b[0], b[1]))
        for name, a, b in relationships
    )
    return Schema(
        entities=frozenset(entities),
        relationships=rels,
        attributes={e: frozenset(v) for e, v in attributes.items()},
    )


def validate_schema(schema: Schema) -> list[str]:
    """Return a list of invariant violations; an empty list means the schema is ok.

    Violations are data, not exceptions, so callers can report them all at once.
    """
    violations: list[str] = []
    names_seen: set[str] = set()
    for ent in sorted(schema.entities):
        if ent in names_seen:
            violations.append(f"duplicate class name: {ent}")
        names_seen.add(ent)
    for rel in schema.relationships:
        if rel.name in names_seen:
            violations.append(f"duplicate class name: {rel.name}")
        names_seen.add(rel.name)
        for part in (rel.a, rel.b):
            if part.entity not in schema.entities:
                violations.append(f"unknown entity class: {part.entity} in {rel.name}")
        if rel.a.entity == rel.b.entity:
            violations.append(f"self-relationship not allowed: {rel.name}")
    all_attrs: set[str] = set()
    for owner, attrs in sorted(schema.attributes.items()):
        if owner not in schema.entities:
            violations.append(f"attributes declared on non-entity class: {owner}")
        for attr in sorted(attrs):
            if attr in names_seen or attr in all_attrs:
                violations.append(f"duplicate class name: {attr}")
            all_attrs.add(attr)
    for ent in sorted(schema.entities):
        if not schema.attrs(ent):
            violations.append(f"item class without attributes: {ent}")
    return violations


def poisson_plus_one(rng: random.Random, lam: float = 1.0) -> int:
    """Sample Pois(lam) + 1 by inversion (sequential search); exact and portable."""
    u = rng.random()
    k = 0
    p = math.exp(-lam)
    cum = p
    while u > cum:
        k += 1
        p *= lam / k
        cum += p
    return k + 1


def random_schema(rng_seed: int, num_entities: int) -> Schema:
    """Generate a chain-topology schema: E1-R1-E2-R2-E3, ...

    Every entity participates in at least one relationship (for
    ``num_entities > 1``), cardinalities are uniform over {ONE, MANY}, and each
    entity draws Pois(1) + 1 attributes. Deterministic for a fixed seed.
    """
    if num_entities < 1:
        raise ValueError("num_entities must be >= 1")
    rng = random.Random(rng_seed)
    entities = [f"E{i}" for i in range(1, num_entities + 1)]
    rels = []
    for i in range(num_entities - 1):
        card_a = rng.choice([Cardinality.ONE, Cardinality.MANY])
        card_b = rng.choice([Cardinality.ONE, Cardinality.MANY])
        rels.append(
            Relationship(
                f"R{i + 1}",
                Participant(entities[i], card_a),
                Participant(entities[i + 1], card_b),
            )
        )
    attributes: dict[str, frozenset[str]] = {}
    counter = 0
    for ent in entities:
        n_attrs = poisson_plus_one(rng)
        names = []
        for _ in range(n_attrs):
            counter += 1
            names.append(f"X{counter}")
        attributes[ent] = frozenset(names)
    return Schema(entities=frozenset(entities), relationships=tuple(rels), attributes=attributes)

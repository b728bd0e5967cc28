import random

import pytest

from relcd.digraph import DiGraph
from relcd.model import Link, RelationalModel, Skeleton
from relcd.paths import RelationalDependency, RelationalVariable
from relcd.schema import Cardinality, make_schema


@pytest.fixture
def media_schema():
    """User/Post/Media with Reacts (many-many) and Creates (one media per post)."""
    return make_schema(
        ["User", "Post", "Media"],
        [
            ("Reacts", ("User", Cardinality.MANY), ("Post", Cardinality.MANY)),
            ("Creates", ("Media", Cardinality.MANY), ("Post", Cardinality.ONE)),
        ],
        {"User": ["Sentiment"], "Post": ["Engagement"], "Media": ["Preference"]},
    )


@pytest.fixture
def media_model(media_schema):
    """Sentiment and engagement feed back on each other; media preference
    drives engagement."""
    return RelationalModel(
        media_schema,
        frozenset(
            [
                RelationalDependency(
                    RelationalVariable(("Post", "Reacts", "User"), "Sentiment"), "Engagement"
                ),
                RelationalDependency(
                    RelationalVariable(("User", "Reacts", "Post"), "Engagement"), "Sentiment"
                ),
                RelationalDependency(
                    RelationalVariable(("Post", "Creates", "Media"), "Preference"), "Engagement"
                ),
            ]
        ),
        2,
    )


@pytest.fixture
def media_skeleton(media_schema):
    """Alice reacts to P1 and P2, Bob reacts to P1, M1 created both posts."""
    return Skeleton(
        media_schema,
        {"User": ["Alice", "Bob"], "Post": ["P1", "P2"], "Media": ["M1"]},
        [
            Link("Reacts", "Alice", "P1"),
            Link("Reacts", "Alice", "P2"),
            Link("Reacts", "Bob", "P1"),
            Link("Creates", "M1", "P1"),
            Link("Creates", "M1", "P2"),
        ],
    )


@pytest.fixture
def chain_schema():
    """Three entities on a chain, both relationships many-many, one attribute
    per entity."""
    return make_schema(
        ["A", "B", "C"],
        [
            ("AB", ("A", Cardinality.MANY), ("B", Cardinality.MANY)),
            ("BC", ("B", Cardinality.MANY), ("C", Cardinality.MANY)),
        ],
        {"A": ["X1"], "B": ["Y1"], "C": ["Z1"]},
    )


@pytest.fixture
def feedback_chain_model(chain_schema):
    """A feedback loop across AB plus an upstream driver from C; relational
    acyclification at the model's own hop threshold is impossible here."""
    return RelationalModel(
        chain_schema,
        frozenset(
            [
                RelationalDependency(RelationalVariable(("A", "AB", "B"), "Y1"), "X1"),
                RelationalDependency(RelationalVariable(("B", "AB", "A"), "X1"), "Y1"),
                RelationalDependency(RelationalVariable(("B", "BC", "C"), "Z1"), "Y1"),
            ]
        ),
        2,
    )


def single_entity_model(edges, attrs=None, h=2):
    """A model over one entity class whose dependencies mirror a digraph."""
    if attrs is None:
        attrs = sorted({n for e in edges for n in e})
    schema = make_schema(["E"], [], {"E": attrs})
    deps = frozenset(
        RelationalDependency(RelationalVariable(("E",), u), v) for u, v in edges
    )
    return RelationalModel(schema, deps, h)


def random_dcg(rng: random.Random, max_nodes: int = 6, edge_prob: float = 0.3) -> DiGraph:
    n = rng.randint(2, max_nodes)
    nodes = [f"n{i}" for i in range(n)]
    g = DiGraph(nodes)
    for u in nodes:
        for v in nodes:
            if u != v and rng.random() < edge_prob:
                g.add_edge(u, v)
    return g

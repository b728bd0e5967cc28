import math
import random

import pytest

from relcd.schema import (
    Cardinality,
    Schema,
    make_schema,
    poisson_plus_one,
    random_schema,
    validate_schema,
)


def test_media_schema_is_valid(media_schema):
    assert validate_schema(media_schema) == []


def test_unknown_entity_in_relationship_is_flagged():
    schema = make_schema(
        ["A"],
        [("R", ("A", Cardinality.MANY), ("Ghost", Cardinality.ONE))],
        {"A": ["X"]},
    )
    assert any("unknown entity class" in v for v in validate_schema(schema))


def test_entity_without_attributes_is_flagged():
    schema = make_schema(["A", "B"], [("R", ("A", Cardinality.ONE), ("B", Cardinality.ONE))], {"A": ["X"]})
    assert any("without attributes" in v for v in validate_schema(schema))


def test_self_relationship_is_flagged():
    schema = make_schema(["A"], [("R", ("A", Cardinality.MANY), ("A", Cardinality.MANY))], {"A": ["X"]})
    assert any("self-relationship" in v for v in validate_schema(schema))


def test_duplicate_names_are_flagged():
    schema = make_schema(["A", "B"], [("A", ("A", Cardinality.ONE), ("B", Cardinality.ONE))], {"A": ["X"], "B": ["Y"]})
    assert any("duplicate class name" in v for v in validate_schema(schema))


def test_single_entity_schema_has_no_relationships():
    schema = random_schema(11, 1)
    assert len(schema.relationships) == 0
    assert len(schema.entities) == 1


def test_random_schema_is_deterministic():
    assert random_schema(99, 3).to_json() == random_schema(99, 3).to_json()


def test_random_schema_rejects_nonpositive_entities():
    with pytest.raises(ValueError):
        random_schema(0, 0)


@pytest.mark.parametrize("num_entities", [1, 2, 3])
def test_random_schemas_validate_and_chain(num_entities):
    for seed in range(40):
        schema = random_schema(seed, num_entities)
        assert validate_schema(schema) == []
        assert len(schema.relationships) == num_entities - 1
        # chain topology: every entity participates when there are >= 2 entities
        if num_entities > 1:
            for ent in schema.entities:
                assert schema.relationships_of(ent)
        for ent in schema.entities:
            assert len(schema.attrs(ent)) >= 1


def test_attribute_count_mean_matches_shifted_poisson():
    # mean of Pois(1) + 1 is 2, variance is 1
    rng = random.Random(1234)
    n = 10_000
    draws = [poisson_plus_one(rng) for _ in range(n)]
    mean = sum(draws) / n
    se = math.sqrt(1.0 / n)
    assert abs(mean - 2.0) < 3 * se
    assert min(draws) >= 1


def test_schema_json_round_trip():
    schema = random_schema(5, 3)
    assert Schema.from_json(schema.to_json()) == schema


def test_card_lookup(media_schema):
    assert media_schema.card("Reacts", "Post") is Cardinality.MANY
    assert media_schema.card("Creates", "Post") is Cardinality.ONE
    with pytest.raises(ValueError):
        media_schema.card("Creates", "User")

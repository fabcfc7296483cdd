import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from veritest.schema import (
    DatasetSchema,
    FeatureSpec,
    Instance,
    LabelSpec,
    Prediction,
    SchemaError,
    format_rational,
    parse_schema,
    random_instance,
    schema_to_xml,
    validate_instance,
    validate_prediction,
)

TWO_FEATURE_DOC = """
<schema>
  <feature name="age" kind="integer" min="17" max="90"/>
  <feature name="gender" kind="categorical" categories="0,1"/>
  <label name="income" classes="0,1"/>
</schema>
"""


def test_parse_two_feature_document():
    schema = parse_schema(TWO_FEATURE_DOC)
    assert schema.f_size == 2
    assert schema.l_size == 1
    assert schema.features[0].name == "age"
    assert schema.features[0].kind == "integer"
    assert schema.features[0].min == 17
    assert schema.features[0].max == 90
    assert schema.features[1].categories == (0, 1)
    assert schema.labels[0].classes == (0, 1)
    assert not schema.multilabel


def test_parse_min_above_max_names_feature():
    doc = '<schema><feature name="bad" kind="integer" min="5" max="3"/><label name="y" classes="0,1"/></schema>'
    with pytest.raises(SchemaError, match="bad"):
        parse_schema(doc)


def test_parse_wide_image_like_document():
    # 100 continuous features and one 10-class label.
    feats = "\n".join(f'<feature name="px{i}" min="0" max="1"/>' for i in range(100))
    doc = f'<schema>{feats}<label name="digit" classes="0,1,2,3,4,5,6,7,8,9"/></schema>'
    schema = parse_schema(doc)
    assert schema.f_size == 100
    assert schema.labels[0].classes == tuple(range(10))


def test_parse_defaults_continuous_unit_interval():
    schema = parse_schema('<schema><feature name="x"/><label name="y" classes="0,1"/></schema>')
    assert schema.features[0].kind == "continuous"
    assert schema.features[0].min == 0
    assert schema.features[0].max == 1


def test_parse_string_classes_map_to_declaration_index():
    doc = '<schema><feature name="x"/><label name="y" classes="no,yes,maybe"/></schema>'
    schema = parse_schema(doc)
    assert schema.labels[0].classes == (0, 1, 2)


def test_parse_errors():
    with pytest.raises(SchemaError, match="malformed XML"):
        parse_schema("<schema><feature")
    with pytest.raises(SchemaError, match="duplicate name"):
        parse_schema('<schema><feature name="x"/><label name="x" classes="0,1"/></schema>')
    with pytest.raises(SchemaError, match="classes"):
        parse_schema('<schema><feature name="x"/><label name="y" classes="0"/></schema>')
    with pytest.raises(SchemaError, match="root"):
        parse_schema("<nope/>")
    with pytest.raises(SchemaError, match="unexpected element"):
        parse_schema('<schema><thing name="x"/></schema>')
    with pytest.raises(SchemaError, match="categories"):
        parse_schema('<schema><feature name="x" kind="categorical"/><label name="y" classes="0,1"/></schema>')
    with pytest.raises(SchemaError, match="no integer values"):
        parse_schema(
            '<schema><feature name="x" kind="integer" min="1/3" max="2/3"/><label name="y" classes="0,1"/></schema>'
        )


def test_random_instance_degenerate_range():
    schema = DatasetSchema(
        (FeatureSpec("k", "integer", Fraction(7), Fraction(7)),),
        (LabelSpec("y", (0, 1)),),
    )
    rng = random.Random(0)
    for _ in range(20):
        assert random_instance(schema, rng).values == (Fraction(7),)


def test_random_instance_binary_frequency():
    # Oracle: direct sampling; each code of a binary categorical feature
    # should appear with frequency 0.5 +/- 0.02 over 10,000 draws.
    schema = DatasetSchema(
        (FeatureSpec("b", "categorical", Fraction(0), Fraction(1), (0, 1)),),
        (LabelSpec("y", (0, 1)),),
    )
    rng = random.Random(12345)
    ones = sum(int(random_instance(schema, rng).values[0]) for _ in range(10_000))
    assert abs(ones / 10_000 - 0.5) <= 0.02


def test_random_instance_deterministic_given_seed():
    schema = parse_schema(TWO_FEATURE_DOC)
    draws_a = [random_instance(schema, random.Random(99)) for _ in range(1)] + [
        random_instance(schema, random.Random(99)) for _ in range(1)
    ]
    rng = random.Random(7)
    first, second = random_instance(schema, rng), random_instance(schema, rng)
    assert first != second or schema.features[0].min == schema.features[0].max
    rng2 = random.Random(7)
    assert random_instance(schema, rng2) == first
    assert random_instance(schema, rng2) == second
    assert draws_a[0] == draws_a[1]


def test_validate_instance_cases():
    schema = parse_schema(TWO_FEATURE_DOC)
    ok = Instance((Fraction(30), Fraction(1)))
    assert validate_instance(schema, ok) == []
    assert "length mismatch" in validate_instance(schema, Instance((Fraction(1),)))[0]
    bad_cat = Instance((Fraction(30), Fraction(1, 2)))
    msgs = validate_instance(schema, bad_cat)
    assert any("gender" in m for m in msgs)
    out_of_range = Instance((Fraction(200), Fraction(0)))
    assert any("age" in m for m in msgs + validate_instance(schema, out_of_range))


def test_validate_prediction():
    schema = parse_schema(TWO_FEATURE_DOC)
    assert validate_prediction(schema, Prediction((1,))) == []
    assert validate_prediction(schema, Prediction((5,)))
    assert validate_prediction(schema, Prediction((0, 1)))


def test_roundtrip_through_serialization():
    schema = parse_schema(TWO_FEATURE_DOC)
    assert parse_schema(schema_to_xml(schema)) == schema
    cont = parse_schema('<schema><feature name="x" min="0.25" max="3/7"/><label name="y" classes="0,1"/></schema>')
    assert parse_schema(schema_to_xml(cont)) == cont


def test_format_rational():
    assert format_rational(Fraction(3)) == "3"
    assert format_rational(Fraction(1, 4)) == "0.25"
    assert format_rational(Fraction(-1, 8)) == "-0.125"
    assert format_rational(Fraction(1, 3)) == "1/3"


@st.composite
def schemas(draw):
    n = draw(st.integers(1, 5))
    feats = []
    for i in range(n):
        kind = draw(st.sampled_from(["categorical", "integer", "continuous"]))
        if kind == "categorical":
            codes = tuple(sorted(draw(st.sets(st.integers(0, 9), min_size=2, max_size=4))))
            feats.append(FeatureSpec(f"f{i}", kind, Fraction(codes[0]), Fraction(codes[-1]), codes))
        elif kind == "integer":
            lo = draw(st.integers(-50, 50))
            hi = draw(st.integers(lo, lo + 100))
            feats.append(FeatureSpec(f"f{i}", kind, Fraction(lo), Fraction(hi)))
        else:
            lo = Fraction(draw(st.integers(-20, 20)), 4)
            hi = lo + Fraction(draw(st.integers(0, 40)), 4)
            feats.append(FeatureSpec(f"f{i}", kind, lo, hi))
    labels = (LabelSpec("y", tuple(range(draw(st.integers(2, 4))))),)
    return DatasetSchema(tuple(feats), labels)


@settings(max_examples=60, deadline=None)
@given(schemas(), st.integers(0, 2**32 - 1))
def test_random_instance_always_validates(schema, seed):
    x = random_instance(schema, random.Random(seed))
    assert validate_instance(schema, x) == []


@settings(max_examples=30, deadline=None)
@given(schemas())
def test_serialization_roundtrip_property(schema):
    assert parse_schema(schema_to_xml(schema)) == schema

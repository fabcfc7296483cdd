"""Data-space definition: features, labels, XML data-format parsing, instances.

A :class:`DatasetSchema` fixes the input space (an ordered list of features,
each categorical, integer or continuous) and the output space (an ordered
list of labels, each with a finite set of integer class codes).  Instances
and predictions are positional value vectors over that schema.  All numeric
values are exact rationals so that downstream constraint generation never
loses precision.
"""

from __future__ import annotations

import random
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from fractions import Fraction

FEATURE_KINDS = ("categorical", "integer", "continuous")

# Grid resolution for uniform draws on continuous features.  Values are
# rationals with denominator 10**9, which keeps them exactly representable
# in the external-model wire format (<= 9 fractional digits).
_CONTINUOUS_GRID = 10**9


class SchemaError(ValueError):
    """Raised for malformed data-format documents or invalid schema parts."""


def parse_rational(text: str) -> Fraction:
    """Parse an exact rational from a decimal or ``p/q`` literal."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise SchemaError(f"invalid rational literal {text!r}") from exc


def round_half_away(value: Fraction, digits: int) -> Fraction:
    """Round to ``digits`` decimal places, ties away from zero."""
    scale = 10**digits
    scaled = value * scale
    whole = scaled.numerator // scaled.denominator
    remainder = scaled - whole
    if remainder * 2 >= 1:
        whole += 1
    # For negative values the floor-based split biases toward -inf; ties
    # must move away from zero instead.
    if value < 0 and remainder * 2 == 1:
        whole -= 1
    return Fraction(whole, scale)


def format_rational(value: Fraction) -> str:
    """Render a rational exactly: as a decimal when finite, else ``p/q``."""
    den = value.denominator
    if den == 1:
        return str(value.numerator)
    # A fraction has a finite decimal expansion iff den = 2^a * 5^b.
    reduced = den
    for p in (2, 5):
        while reduced % p == 0:
            reduced //= p
    if reduced != 1:
        return f"{value.numerator}/{value.denominator}"
    digits = 0
    num = abs(value.numerator)
    while num * 10**digits % den:
        digits += 1
    scaled = num * 10**digits // den
    text = str(scaled).rjust(digits + 1, "0")
    sign = "-" if value < 0 else ""
    return f"{sign}{text[:-digits]}.{text[-digits:]}"


@dataclass(frozen=True)
class FeatureSpec:
    """One input feature: its kind and value range.

    ``categories`` is only set for categorical features and lists the legal
    integer codes.  ``min``/``max`` always bracket the legal values.
    """

    name: str
    kind: str
    min: Fraction
    max: Fraction
    categories: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in FEATURE_KINDS:
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.min > self.max:
            raise SchemaError(
                f"feature {self.name!r}: min {self.min} exceeds max {self.max}"
            )
        if self.kind == "categorical":
            if self.categories is None or len(self.categories) < 2:
                raise SchemaError(
                    f"feature {self.name!r}: categorical features need >= 2 category codes"
                )
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"feature {self.name!r}: duplicate category codes")
            for code in self.categories:
                if not self.min <= code <= self.max:
                    raise SchemaError(
                        f"feature {self.name!r}: category code {code} outside [{self.min}, {self.max}]"
                    )
        elif self.categories is not None:
            raise SchemaError(f"feature {self.name!r}: categories only allowed on categorical kind")
        if self.kind == "integer" and _int_floor(self.max) < _int_ceil(self.min):
            raise SchemaError(
                f"feature {self.name!r}: no integer values in [{self.min}, {self.max}]"
            )


@dataclass(frozen=True)
class LabelSpec:
    """One output label and its integer class codes."""

    name: str
    classes: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.classes) < 2:
            raise SchemaError(f"label {self.name!r}: needs >= 2 classes")
        if len(set(self.classes)) != len(self.classes):
            raise SchemaError(f"label {self.name!r}: duplicate class codes")


@dataclass(frozen=True)
class DatasetSchema:
    """Ordered features and labels defining the model's input/output space."""

    features: tuple[FeatureSpec, ...]
    labels: tuple[LabelSpec, ...]

    def __post_init__(self) -> None:
        if not self.features:
            raise SchemaError("schema needs at least one feature")
        if not self.labels:
            raise SchemaError("schema needs at least one label")
        names = [f.name for f in self.features] + [l.name for l in self.labels]
        seen: set[str] = set()
        for name in names:
            if name in seen:
                raise SchemaError(f"duplicate name {name!r} in schema")
            seen.add(name)

    @property
    def f_size(self) -> int:
        return len(self.features)

    @property
    def l_size(self) -> int:
        return len(self.labels)

    @property
    def multilabel(self) -> bool:
        return len(self.labels) > 1

    def feature_index(self, name: str) -> int:
        for i, feat in enumerate(self.features):
            if feat.name == name:
                return i
        raise SchemaError(f"unknown feature {name!r}")

    def label_index(self, name: str) -> int:
        for i, lab in enumerate(self.labels):
            if lab.name == name:
                return i
        raise SchemaError(f"unknown label {name!r}")


@dataclass(frozen=True)
class Instance:
    """A concrete input: one rational value per schema feature."""

    values: tuple[Fraction, ...]

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Prediction:
    """A concrete output: one integer class code per schema label."""

    classes: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.classes)


def _int_ceil(value: Fraction) -> int:
    return -((-value.numerator) // value.denominator)


def _int_floor(value: Fraction) -> int:
    return value.numerator // value.denominator


def _parse_code_list(text: str, where: str) -> tuple[int, ...]:
    """Parse a comma-separated code list.

    All-integer token lists are taken verbatim; otherwise the tokens are
    treated as symbolic names and mapped to their declaration index.
    """
    tokens = [tok.strip() for tok in text.split(",") if tok.strip()]
    if not tokens:
        raise SchemaError(f"{where}: empty code list")
    try:
        return tuple(int(tok) for tok in tokens)
    except ValueError:
        return tuple(range(len(tokens)))


def parse_schema(xml_text: str) -> DatasetSchema:
    """Parse the XML data-format document into a :class:`DatasetSchema`.

    The document lists ``<feature>`` and ``<label>`` elements under a
    ``<schema>`` root; features default to continuous kind over [0, 1] when
    kind or range attributes are omitted, and categorical ranges default to
    the span of their category codes.

    Raises:
        SchemaError: on malformed XML or any schema invariant violation,
            naming the offending element path.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise SchemaError(f"malformed XML: {exc}") from exc
    if root.tag != "schema":
        raise SchemaError(f"expected <schema> root, got <{root.tag}>")

    features: list[FeatureSpec] = []
    labels: list[LabelSpec] = []
    counts = {"feature": 0, "label": 0}
    for child in root:
        if child.tag not in counts:
            raise SchemaError(f"schema: unexpected element <{child.tag}>")
        counts[child.tag] += 1
        path = f"schema/{child.tag}[{counts[child.tag]}]"
        name = child.get("name")
        if not name:
            raise SchemaError(f"{path}: missing name attribute")
        try:
            if child.tag == "feature":
                features.append(_parse_feature(child, name))
            else:
                labels.append(LabelSpec(name, _parse_code_list(child.get("classes", ""), path)))
        except SchemaError as exc:
            raise SchemaError(f"{path}: {exc}") from exc
    return DatasetSchema(tuple(features), tuple(labels))


def _parse_feature(elem: ET.Element, name: str) -> FeatureSpec:
    kind = elem.get("kind", "continuous")
    cats_attr = elem.get("categories")
    categories: tuple[int, ...] | None = None
    if kind == "categorical":
        if cats_attr is None:
            raise SchemaError("categorical feature needs a categories attribute")
        categories = _parse_code_list(cats_attr, f"feature {name!r}")
    elif cats_attr is not None:
        raise SchemaError(f"categories attribute not allowed on {kind} feature")
    min_attr, max_attr = elem.get("min"), elem.get("max")
    if kind == "categorical":
        assert categories is not None
        lo = parse_rational(min_attr) if min_attr is not None else Fraction(min(categories))
        hi = parse_rational(max_attr) if max_attr is not None else Fraction(max(categories))
    elif kind == "integer":
        if min_attr is None or max_attr is None:
            raise SchemaError("integer feature needs explicit min and max")
        lo, hi = parse_rational(min_attr), parse_rational(max_attr)
    else:
        lo = parse_rational(min_attr) if min_attr is not None else Fraction(0)
        hi = parse_rational(max_attr) if max_attr is not None else Fraction(1)
    return FeatureSpec(name, kind, lo, hi, categories)


def schema_to_xml(schema: DatasetSchema) -> str:
    """Serialize a schema back to the XML data-format text."""
    lines = ["<schema>"]
    for feat in schema.features:
        attrs = [f'name="{feat.name}"', f'kind="{feat.kind}"']
        attrs.append(f'min="{format_rational(feat.min)}"')
        attrs.append(f'max="{format_rational(feat.max)}"')
        if feat.categories is not None:
            attrs.append('categories="%s"' % ",".join(str(c) for c in feat.categories))
        lines.append("  <feature %s/>" % " ".join(attrs))
    for lab in schema.labels:
        classes = ",".join(str(c) for c in lab.classes)
        lines.append(f'  <label name="{lab.name}" classes="{classes}"/>')
    lines.append("</schema>")
    return "\n".join(lines) + "\n"


def random_instance(schema: DatasetSchema, rng: random.Random) -> Instance:
    """Draw one instance uniformly at random from the schema's value space.

    Continuous features are drawn from a uniform 10^-9 grid over [min, max]
    so values stay exact rationals; integer features are uniform over the
    integer points of the range; categorical features are uniform over the
    category codes.  Deterministic for a given ``rng`` state.
    """
    values: list[Fraction] = []
    for feat in schema.features:
        if feat.kind == "categorical":
            assert feat.categories is not None
            values.append(Fraction(rng.choice(feat.categories)))
        elif feat.kind == "integer":
            values.append(Fraction(rng.randint(_int_ceil(feat.min), _int_floor(feat.max))))
        else:
            step = Fraction(rng.randrange(_CONTINUOUS_GRID + 1), _CONTINUOUS_GRID)
            values.append(feat.min + (feat.max - feat.min) * step)
    return Instance(tuple(values))


def validate_instance(schema: DatasetSchema, x: Instance) -> list[str]:
    """Check an instance against the schema; returns all violations (empty = ok)."""
    if len(x.values) != schema.f_size:
        return [f"length mismatch: expected {schema.f_size} values, got {len(x.values)}"]
    violations: list[str] = []
    for feat, value in zip(schema.features, x.values):
        if not feat.min <= value <= feat.max:
            violations.append(
                f"feature {feat.name!r}: value {value} outside [{feat.min}, {feat.max}]"
            )
        if feat.kind == "categorical":
            assert feat.categories is not None
            if value.denominator != 1 or int(value) not in feat.categories:
                violations.append(f"feature {feat.name!r}: value {value} is not a category code")
        elif feat.kind == "integer" and value.denominator != 1:
            violations.append(f"feature {feat.name!r}: value {value} is not an integer")
    return violations


def validate_prediction(schema: DatasetSchema, z: Prediction) -> list[str]:
    """Check a prediction against the schema; returns all violations (empty = ok)."""
    if len(z.classes) != schema.l_size:
        return [f"length mismatch: expected {schema.l_size} classes, got {len(z.classes)}"]
    violations: list[str] = []
    for lab, code in zip(schema.labels, z.classes):
        if code not in lab.classes:
            violations.append(f"label {lab.name!r}: code {code} is not a class of this label")
    return violations

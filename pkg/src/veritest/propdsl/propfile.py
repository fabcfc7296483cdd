"""Line-oriented declarative property files.

Format (one directive per line, ``#`` lines and blank lines ignored)::

    var x y
    let s = 1
    let t = [0, 1, 0.5]
    assume forall-features i except s: x[i] == y[i]
    assume x[s] != y[s]
    assert predict(x) == predict(y)

``var`` declares the instance variables (required, once, first).  ``let``
binds a name to a rational literal or vector for use in later conditions.
The ``forall-features`` assume unrolls its condition once per feature
index, skipping the excepted feature; the loop variable is bound to the
feature index in each copy.  Exactly one ``assert`` is required.
"""

from __future__ import annotations

import re
from fractions import Fraction

from veritest.propdsl.clauses import (
    AssertClause,
    AssumeClause,
    PropertyError,
    PropertySpec,
    build_property,
)
from veritest.propdsl.parser import ConditionSyntaxError, parse_condition_named
from veritest.schema import DatasetSchema

_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z_0-9]*$")
_FORALL_RE = re.compile(r"^forall-features\s+(\w+)\s+except\s+(\S+)\s*:\s*(.*)$")


def _parse_literal(text: str, lineno: int) -> Fraction | tuple[Fraction, ...]:
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise PropertyError(f"line {lineno}: unterminated vector literal")
        items = [t.strip() for t in text[1:-1].split(",") if t.strip()]
        if not items:
            raise PropertyError(f"line {lineno}: empty vector literal")
        try:
            return tuple(Fraction(item) for item in items)
        except (ValueError, ZeroDivisionError) as exc:
            raise PropertyError(f"line {lineno}: bad vector element: {exc}") from exc
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise PropertyError(f"line {lineno}: bad literal {text!r}") from exc


def parse_property_file(text: str, schema: DatasetSchema) -> PropertySpec:
    """Parse property-file text into a property against ``schema``.

    Raises:
        PropertyError: structural problems (missing var/assert, duplicate
            directives, bad literals), each naming the offending line.
        ConditionSyntaxError: condition-level parse failures.
    """
    variables: list[str] | None = None
    lets: dict[str, object] = {}
    assumes: list[AssumeClause] = []
    assertion: AssertClause | None = None

    def parse_cond(cond_text: str, extra: dict[str, object], lineno: int):
        assert variables is not None
        bindings = {**lets, **extra}
        try:
            return parse_condition_named(cond_text, bindings, schema, variables)
        except ConditionSyntaxError as exc:
            raise ConditionSyntaxError(f"line {lineno}: {exc.args[0]}", exc.position) from exc

    def resolve_feature(token: str, lineno: int) -> int:
        for i, feat in enumerate(schema.features):
            if feat.name == token:
                return i
        if token in lets and isinstance(lets[token], Fraction):
            value = lets[token]
        else:
            try:
                value = Fraction(token)
            except (ValueError, ZeroDivisionError):
                raise PropertyError(f"line {lineno}: unknown feature {token!r}") from None
        if isinstance(value, Fraction) and value.denominator == 1 and 0 <= value < schema.f_size:
            return int(value)
        raise PropertyError(f"line {lineno}: feature index {token!r} out of range")

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        directive, _, rest = line.partition(" ")
        rest = rest.strip()
        if directive == "var":
            if variables is not None:
                raise PropertyError(f"line {lineno}: duplicate var directive")
            names = rest.split()
            if not names:
                raise PropertyError(f"line {lineno}: var needs at least one name")
            for name in names:
                if not _IDENT_RE.match(name):
                    raise PropertyError(f"line {lineno}: bad variable name {name!r}")
                if any(f.name == name for f in schema.features) or any(
                    l.name == name for l in schema.labels
                ):
                    raise PropertyError(
                        f"line {lineno}: variable {name!r} collides with a feature or label"
                    )
            if len(set(names)) != len(names):
                raise PropertyError(f"line {lineno}: duplicate variable names")
            variables = names
            continue
        if directive == "let":
            name, eq, value_text = rest.partition("=")
            name = name.strip()
            if not eq or not _IDENT_RE.match(name):
                raise PropertyError(f"line {lineno}: let needs the form 'let name = value'")
            if name in lets:
                raise PropertyError(f"line {lineno}: duplicate let {name!r}")
            lets[name] = _parse_literal(value_text, lineno)
            continue
        if directive in ("assume", "assert"):
            if variables is None:
                raise PropertyError(f"line {lineno}: var directive must come first")
            if directive == "assert":
                if assertion is not None:
                    raise PropertyError(f"line {lineno}: duplicate assert directive")
                assertion = AssertClause(parse_cond(rest, {}, lineno), rest)
                continue
            forall = _FORALL_RE.match(rest)
            if forall:
                loop_var, except_tok, cond_text = forall.groups()
                excluded = resolve_feature(except_tok, lineno)
                for i in range(schema.f_size):
                    if i == excluded:
                        continue
                    ast = parse_cond(cond_text, {loop_var: Fraction(i)}, lineno)
                    assumes.append(AssumeClause(ast, cond_text, (i,)))
            else:
                assumes.append(AssumeClause(parse_cond(rest, {}, lineno), rest))
            continue
        raise PropertyError(f"line {lineno}: unknown directive {directive!r}")

    if variables is None:
        raise PropertyError("property file has no var directive")
    if assertion is None:
        raise PropertyError("property file has no assert directive")
    return build_property(assumes, assertion)

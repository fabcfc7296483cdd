"""Runs constraint scripts and parses satisfying assignments."""

from __future__ import annotations

import re
import shlex
import subprocess
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from ..solver import ScriptError, SexprError, parse_all, solve_text
from .script import SmtScript

_FEATURE_RE = re.compile(r"^f_(\d+)_(\d+)$")
_CLASS_RE = re.compile(r"^class_(.+)_(\d+)$")


class SolverFailure(RuntimeError):
    """Solver crash or unparseable output; raw output attached."""

    def __init__(self, message: str, raw: str = "") -> None:
        super().__init__(message)
        self.raw = raw


@dataclass(frozen=True)
class Assignment:
    """Feature and class values per copy, in copy order 1..n."""

    features: tuple[tuple[Fraction, ...], ...]
    classes: tuple[tuple[int, ...], ...]
    raw: str


def _parse_value(expr) -> Fraction:
    if isinstance(expr, str):
        try:
            return Fraction(expr)
        except ValueError as exc:
            raise SolverFailure(f"unparseable model value: {expr}") from exc
    if len(expr) == 2 and expr[0] == "-":
        return -_parse_value(expr[1])
    if len(expr) == 3 and expr[0] == "/":
        return _parse_value(expr[1]) / _parse_value(expr[2])
    raise SolverFailure(f"unparseable model value: {expr!r}")


def _model_pairs(forms) -> dict[str, Fraction]:
    """Name -> value from (get-model) or (get-value) style output."""
    values: dict[str, Fraction] = {}
    for form in forms:
        if not isinstance(form, list):
            continue
        items = form[1:] if form and form[0] == "model" else form
        for item in items:
            if not isinstance(item, list) or not item:
                continue
            if item[0] == "define-fun" and len(item) >= 5:
                name, value = item[1], item[4]
            elif len(item) == 2 and isinstance(item[0], str):
                name, value = item[0], item[1]
            else:
                continue
            if value in ("true", "false"):
                continue
            values[name] = _parse_value(value)
    return values


def _collect(script: SmtScript, values: dict[str, Fraction], raw: str) -> Assignment:
    """Arrange model values by the script's feature/class declarations."""
    features: dict[int, dict[int, Fraction]] = {}
    classes: dict[int, list[int]] = {}
    for name, _sort in script.declarations:
        m = _FEATURE_RE.match(name)
        if m:
            i, c = int(m.group(1)), int(m.group(2))
            features.setdefault(c, {})[i] = values.get(name, Fraction(0))
            continue
        m = _CLASS_RE.match(name)
        if m:
            c = int(m.group(2))
            value = values.get(name, Fraction(0))
            if value.denominator != 1:
                raise SolverFailure(f"class variable {name} is not integral", raw)
            classes.setdefault(c, []).append(int(value))
    if not features:
        raise SolverFailure("model has no feature variables", raw)
    copy_order = sorted(features)
    return Assignment(
        features=tuple(
            tuple(features[c][i] for i in sorted(features[c])) for c in copy_order
        ),
        classes=tuple(tuple(classes.get(c, ())) for c in copy_order),
        raw=raw,
    )


def solve(
    script: SmtScript,
    solver_command: Optional[str] = None,
    timeout: Optional[float] = None,
) -> tuple[str, Optional[Assignment]]:
    """Run one script; ('sat', Assignment) | ('unsat', None) | ('unknown', None).

    `solver_command` None or "builtin" solves in-process; anything else is run
    as a subprocess receiving the script on stdin in batch mode.
    """
    if solver_command is None or solver_command == "builtin":
        try:
            status, model = solve_text(script.text, timeout=timeout)
        except (ScriptError, SexprError) as exc:
            raise SolverFailure(f"builtin solver rejected script: {exc}") from exc
        if status != "sat":
            return status, None
        values = {k: v for k, v in model.items() if isinstance(v, Fraction)}
        return "sat", _collect(script, values, raw="")

    try:
        proc = subprocess.run(
            shlex.split(solver_command),
            input=script.text,
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    except subprocess.TimeoutExpired:
        return "unknown", None
    except OSError as exc:
        raise SolverFailure(f"cannot run solver {solver_command!r}: {exc}") from exc
    raw = proc.stdout
    lines = [l for l in raw.splitlines() if l.strip()]
    if not lines:
        raise SolverFailure("solver produced no output", raw + proc.stderr)
    verdict = lines[0].strip()
    if verdict == "unsat":
        return "unsat", None
    if verdict == "unknown":
        return "unknown", None
    if verdict != "sat":
        raise SolverFailure(f"unrecognized solver verdict: {verdict}", raw + proc.stderr)
    rest = "\n".join(lines[1:])
    try:
        forms = parse_all(rest)
    except SexprError as exc:
        raise SolverFailure(f"unparseable model output: {exc}", raw) from exc
    return "sat", _collect(script, _model_pairs(forms), raw)

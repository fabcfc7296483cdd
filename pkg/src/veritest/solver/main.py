"""Batch interpreter for the SMT-LIB 2 subset the constraint scripts use.

Supported commands: set-option, set-logic, set-info, declare-const,
declare-fun (zero arity), assert, check-sat, get-model, get-value, exit.
Sorts: Int, Real, Bool.  Terms: and/or/not/=>/=/distinct, the four orderings,
linear +, -, *, / over numerals, decimals, and declared constants.

Each check-sat translates the accumulated assertions from scratch, so checks
are independent and deterministic.
"""

from __future__ import annotations

import argparse
import sys
import time
from fractions import Fraction
from typing import Optional

from . import sexpr
from .dpll import CnfBuilder, SatSolver, TheoryBridge

SORTS = ("Int", "Real", "Bool")

_BOOL_HEADS = {"and", "or", "not", "=>", "<=", "<", ">=", ">", "distinct"}


class ScriptError(ValueError):
    pass


class _Translator:
    def __init__(self, bridge: TheoryBridge, cnf: CnfBuilder, sorts: dict[str, str]) -> None:
        self.bridge = bridge
        self.cnf = cnf
        self.sorts = sorts

    # -- terms ---------------------------------------------------------------

    def arith(self, e) -> tuple[dict[int, Fraction], Fraction]:
        """Linear expression as (var -> coefficient, constant)."""
        if isinstance(e, str):
            value = sexpr.parse_rational_token(e)
            if value is not None:
                return {}, value
            sort = self.sorts.get(e)
            if sort in ("Int", "Real"):
                return {self.bridge.var_of_name[e]: Fraction(1)}, Fraction(0)
            raise ScriptError(f"not an arithmetic term: {e}")
        if not e:
            raise ScriptError("empty term")
        head = e[0]
        args = e[1:]
        if head == "+":
            combo: dict[int, Fraction] = {}
            const = Fraction(0)
            for a in args:
                combo, const = self._add(combo, const, *self.arith(a), Fraction(1))
            return combo, const
        if head == "-":
            if len(args) == 1:
                combo, const = self.arith(args[0])
                return {v: -c for v, c in combo.items()}, -const
            combo, const = self.arith(args[0])
            for a in args[1:]:
                combo, const = self._add(combo, const, *self.arith(a), Fraction(-1))
            return combo, const
        if head == "*":
            combo, const = self.arith(args[0])
            for a in args[1:]:
                c2, k2 = self.arith(a)
                if combo and c2:
                    raise ScriptError("nonlinear product")
                if c2:
                    combo, const, c2, k2 = c2, k2, combo, const
                combo = {v: c * k2 for v, c in combo.items()}
                const = const * k2
            return combo, const
        if head == "/":
            if len(args) != 2:
                raise ScriptError("/ takes two arguments")
            combo, const = self.arith(args[0])
            c2, k2 = self.arith(args[1])
            if c2 or k2 == 0:
                raise ScriptError("division by a non-constant or zero")
            return {v: c / k2 for v, c in combo.items()}, const / k2
        raise ScriptError(f"unknown arithmetic operator: {head}")

    @staticmethod
    def _add(combo, const, combo2, const2, sign: Fraction):
        out = dict(combo)
        for var, c in combo2.items():
            acc = out.get(var, Fraction(0)) + sign * c
            if acc == 0:
                out.pop(var, None)
            else:
                out[var] = acc
        return out, const + sign * const2

    # -- formulas --------------------------------------------------------------

    def _boolish(self, e) -> bool:
        if isinstance(e, str):
            return e in ("true", "false") or self.sorts.get(e) == "Bool"
        if not e:
            return False
        if e[0] == "=":
            return self._boolish(e[1])
        return e[0] in _BOOL_HEADS

    def formula(self, e) -> tuple:
        if e == "true":
            return ("true",)
        if e == "false":
            return ("false",)
        if isinstance(e, str):
            if self.sorts.get(e) == "Bool":
                return ("bvar", e)
            raise ScriptError(f"expected a Bool term: {e}")
        if not e:
            raise ScriptError("empty formula")
        head = e[0]
        args = e[1:]
        if head == "and":
            if not args:
                return ("true",)
            return ("and",) + tuple(self.formula(a) for a in args)
        if head == "or":
            if not args:
                return ("false",)
            return ("or",) + tuple(self.formula(a) for a in args)
        if head == "not":
            if len(args) != 1:
                raise ScriptError("not takes one argument")
            return ("not", self.formula(args[0]))
        if head == "=>":
            if len(args) < 2:
                raise ScriptError("=> takes at least two arguments")
            out = self.formula(args[-1])
            for a in reversed(args[:-1]):
                out = ("=>", self.formula(a), out)
            return out
        if head == "=":
            if len(args) < 2:
                raise ScriptError("= takes at least two arguments")
            if self._boolish(args[0]):
                parts = [
                    ("iff", self.formula(args[i]), self.formula(args[i + 1]))
                    for i in range(len(args) - 1)
                ]
            else:
                parts = [self._eq(args[i], args[i + 1]) for i in range(len(args) - 1)]
            return parts[0] if len(parts) == 1 else ("and",) + tuple(parts)
        if head == "distinct":
            if len(args) != 2:
                raise ScriptError("distinct supports two arguments")
            if self._boolish(args[0]):
                return ("not", ("iff", self.formula(args[0]), self.formula(args[1])))
            return ("not", self._eq(args[0], args[1]))
        if head in ("<=", "<", ">=", ">"):
            if len(args) < 2:
                raise ScriptError(f"{head} takes at least two arguments")
            parts = [self._cmp(head, args[i], args[i + 1]) for i in range(len(args) - 1)]
            return parts[0] if len(parts) == 1 else ("and",) + tuple(parts)
        raise ScriptError(f"unknown operator: {head}")

    def _cmp(self, op: str, a, b) -> tuple:
        ca, ka = self.arith(a)
        cb, kb = self.arith(b)
        combo, _ = self._add(ca, Fraction(0), cb, Fraction(0), Fraction(-1))
        k = kb - ka
        if not combo:
            holds = {
                "<=": Fraction(0) <= k,
                "<": Fraction(0) < k,
                ">=": Fraction(0) >= k,
                ">": Fraction(0) > k,
            }[op]
            return ("true",) if holds else ("false",)
        return ("atom", self.bridge.make_atom(combo, op, k))

    def _eq(self, a, b) -> tuple:
        le = self._cmp("<=", a, b)
        ge = self._cmp(">=", a, b)
        if le[0] != "atom":
            return le if le == ge else ("false",) if ("false",) in (le, ge) else ("true",)
        return ("and", le, ge)


class Interpreter:
    """Runs a full script and collects the output lines."""

    def __init__(self, soft_timeout: Optional[float] = None) -> None:
        self.decls: list[tuple[str, str]] = []
        self.sorts: dict[str, str] = {}
        self.asserts: list = []
        self.out: list[str] = []
        self.soft_timeout = soft_timeout
        self.last_status: Optional[str] = None
        self.last_model: Optional[dict] = None

    def run_text(self, text: str) -> str:
        for form in sexpr.parse_all(text):
            self.command(form)
        return "".join(line + "\n" for line in self.out)

    def command(self, form) -> None:
        if not isinstance(form, list) or not form or not isinstance(form[0], str):
            raise ScriptError(f"bad command: {sexpr.to_text(form)}")
        head = form[0]
        if head in ("set-logic", "set-info"):
            return
        if head == "set-option":
            if len(form) == 3 and form[1] == ":timeout":
                self.soft_timeout = int(form[2]) / 1000.0
            return
        if head in ("declare-const", "declare-fun"):
            self._declare(form)
            return
        if head == "assert":
            if len(form) != 2:
                raise ScriptError("assert takes one argument")
            self.asserts.append(form[1])
            return
        if head == "check-sat":
            self._check()
            return
        if head == "get-model":
            self._emit_model()
            return
        if head == "get-value":
            self._emit_values(form)
            return
        if head == "exit":
            return
        raise ScriptError(f"unsupported command: {head}")

    def _declare(self, form) -> None:
        if form[0] == "declare-const":
            if len(form) != 3:
                raise ScriptError("declare-const takes a name and a sort")
            name, sort = form[1], form[2]
        else:
            if len(form) != 4 or form[2] != []:
                raise ScriptError("declare-fun supports only zero-arity constants")
            name, sort = form[1], form[3]
        if not isinstance(name, str) or not isinstance(sort, str):
            raise ScriptError("bad declaration")
        if sort not in SORTS:
            raise ScriptError(f"unsupported sort: {sort}")
        if name in self.sorts:
            raise ScriptError(f"duplicate declaration: {name}")
        self.decls.append((name, sort))
        self.sorts[name] = sort

    def _check(self) -> None:
        bridge = TheoryBridge()
        cnf = CnfBuilder()
        for name, sort in self.decls:
            if sort != "Bool":
                bridge.declare(name, sort == "Int")
        translator = _Translator(bridge, cnf, self.sorts)
        for e in self.asserts:
            cnf.assert_top(translator.formula(e))
        solver = SatSolver(bridge, cnf)
        deadline = None
        if self.soft_timeout is not None:
            deadline = time.monotonic() + self.soft_timeout
        status = solver.solve(deadline)
        self.out.append(status)
        self.last_status = status
        if status == "sat":
            self.last_model = self._snapshot(bridge, cnf, solver)
        else:
            self.last_model = None

    def _snapshot(self, bridge: TheoryBridge, cnf: CnfBuilder, solver: SatSolver) -> dict:
        eps = bridge.simplex.epsilon()
        model: dict[str, object] = {}
        for name, sort in self.decls:
            if sort == "Bool":
                var = cnf.bool_var.get(name)
                model[name] = solver.bool_value(var) if var is not None else False
            else:
                model[name] = bridge.model_value(name, eps)
        return model

    def _emit_model(self) -> None:
        if self.last_model is None:
            self.out.append('(error "model is not available")')
            return
        self.out.append("(")
        for name, sort in self.decls:
            self.out.append(f"  (define-fun {name} () {sort} {self._value_text(name)})")
        self.out.append(")")

    def _emit_values(self, form) -> None:
        if self.last_model is None:
            self.out.append('(error "model is not available")')
            return
        if len(form) != 2 or not isinstance(form[1], list):
            raise ScriptError("get-value takes a term list")
        parts = []
        for name in form[1]:
            if not isinstance(name, str) or name not in self.sorts:
                raise ScriptError("get-value supports declared constants only")
            parts.append(f"({name} {self._value_text(name)})")
        self.out.append("(" + " ".join(parts) + ")")

    def _value_text(self, name: str) -> str:
        value = self.last_model[name]
        if isinstance(value, bool):
            return "true" if value else "false"
        return sexpr.rational_sexpr(value, self.sorts[name] == "Real")


def solve_text(script: str, timeout: Optional[float] = None) -> tuple[str, Optional[dict]]:
    """In-process entry: run a script, return the last check-sat verdict and,
    when sat, the model as {name: Fraction | bool}."""
    interp = Interpreter(soft_timeout=timeout)
    interp.run_text(script)
    if interp.last_status is None:
        raise ScriptError("script contains no check-sat")
    return interp.last_status, interp.last_model


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="veritest-solver",
        description="Deterministic solver for linear integer/real constraint scripts.",
    )
    parser.add_argument("script", nargs="?", help="script file (default: stdin)")
    parser.add_argument("--timeout", type=float, default=None, help="soft time limit in seconds")
    args = parser.parse_args(argv)
    if args.script:
        with open(args.script, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = sys.stdin.read()
    try:
        interp = Interpreter(soft_timeout=args.timeout)
        output = interp.run_text(text)
    except (ScriptError, sexpr.SexprError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(output)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Propositional search over linear-arithmetic atoms.

Formulas arrive as nested tuples (see main.py for the script reader):

    ('true',) ('false',) ('bvar', name) ('atom', atom_id)
    ('not', f) ('and', f, ...) ('or', f, ...) ('=>', f, g) ('iff', f, g)

Tseitin translation gives a CNF whose variables are numbered in creation
order; the search always decides the smallest unassigned variable first, so
constraints asserted early in a script are explored first.  Theory literals
are pushed into the simplex as soon as they hit the trail, the simplex is
checked at every propagation fixpoint, and theory conflicts are learned as
clauses.  Integer feasibility is established by branch and bound once a full
propositional model survives the rational check.
"""

from __future__ import annotations

import time
from fractions import Fraction
from typing import Optional

from .theory import DeltaRational, Simplex

NEG_OP = {"<=": ">", "<": ">=", ">=": "<", ">": "<="}
FLIP_OP = {"<=": ">=", "<": ">", ">=": "<=", ">": "<"}

BB_NODE_BUDGET = 50_000


class SolverTimeout(Exception):
    pass


def _floor(k: Fraction) -> Fraction:
    return Fraction(k.numerator // k.denominator)


def _ceil(k: Fraction) -> Fraction:
    return Fraction(-((-k.numerator) // k.denominator))


class TheoryBridge:
    """Maps normalized linear atoms onto simplex bounds."""

    def __init__(self) -> None:
        self.simplex = Simplex()
        self.var_of_name: dict[str, int] = {}
        self.int_names: set[str] = set()
        self._int_vars: set[int] = set()
        self._slacks: dict[tuple, int] = {}
        self._atom_ids: dict[tuple, int] = {}
        # atom id -> (simplex var, op, constant, tighten-to-integer)
        self.atoms: list[tuple[int, str, Fraction, bool]] = []

    def declare(self, name: str, is_int: bool) -> int:
        var = self.simplex.new_var(is_int)
        self.var_of_name[name] = var
        if is_int:
            self.int_names.add(name)
            self._int_vars.add(var)
        return var

    def make_atom(self, combo: dict[int, Fraction], op: str, k: Fraction) -> int:
        """Register `sum(combo) op k` and return its atom id."""
        items = sorted(combo.items())
        lead = items[0][1]
        if len(items) == 1:
            svar = items[0][0]
        else:
            key = tuple((v, c / lead) for v, c in items)
            svar = self._slacks.get(key)
            if svar is None:
                svar = self.simplex.define_slack(dict(key), is_int=False)
                self._slacks[key] = svar
        k = k / lead
        if lead < 0:
            op = FLIP_OP[op]
        tighten = svar in self._int_vars
        atom_key = (svar, op, k)
        atom_id = self._atom_ids.get(atom_key)
        if atom_id is None:
            atom_id = len(self.atoms)
            self.atoms.append((svar, op, k, tighten))
            self._atom_ids[atom_key] = atom_id
        return atom_id

    def assert_lit(self, atom_id: int, polarity: bool, reason: int) -> Optional[list[int]]:
        svar, op, k, tighten = self.atoms[atom_id]
        if not polarity:
            op = NEG_OP[op]
        if op in ("<=", "<"):
            if tighten:
                bound = DeltaRational(_floor(k) if op == "<=" else _ceil(k) - 1)
            else:
                bound = DeltaRational(k) if op == "<=" else DeltaRational(k, Fraction(-1))
            return self.simplex.assert_upper(svar, bound, reason)
        if tighten:
            bound = DeltaRational(_ceil(k) if op == ">=" else _floor(k) + 1)
        else:
            bound = DeltaRational(k) if op == ">=" else DeltaRational(k, Fraction(1))
        return self.simplex.assert_lower(svar, bound, reason)

    def check(self) -> Optional[list[int]]:
        return self.simplex.check()

    def push(self) -> None:
        self.simplex.push()

    def pop(self) -> None:
        self.simplex.pop()

    # -- integer feasibility -------------------------------------------------

    def integer_search(self, deadline: Optional[float]) -> str:
        """'sat', 'conflict', or 'unknown'.  On 'sat' the simplex state holds
        an integer assignment for every declared Int variable."""
        budget = [BB_NODE_BUDGET]
        result = self._branch(budget, deadline)
        return result

    def _fractional_int_var(self) -> Optional[int]:
        for name in sorted(self.int_names):
            var = self.var_of_name[name]
            if not self.simplex.beta[var].is_integer():
                return var
        return None

    def _branch(self, budget: list[int], deadline: Optional[float]) -> str:
        if self.simplex.check() is not None:
            return "conflict"
        var = self._fractional_int_var()
        if var is None:
            return "sat"
        if budget[0] <= 0:
            return "unknown"
        if deadline is not None and time.monotonic() > deadline:
            raise SolverTimeout()
        budget[0] -= 1
        value = self.simplex.beta[var]
        if value.main.denominator == 1:
            mid = value.main - 1 if value.delta < 0 else value.main
        else:
            mid = _floor(value.main)
        for is_upper, bound in ((True, mid), (False, mid + 1)):
            self.simplex.push()
            if is_upper:
                conflict = self.simplex.assert_upper(var, DeltaRational(bound), 0)
            else:
                conflict = self.simplex.assert_lower(var, DeltaRational(bound), 0)
            if conflict is None:
                sub = self._branch(budget, deadline)
                if sub != "conflict":
                    return sub  # keep the simplex state live for the model
            self.simplex.pop()
        return "conflict"

    # -- models ---------------------------------------------------------------

    def model_value(self, name: str, eps: Fraction) -> Fraction:
        var = self.var_of_name.get(name)
        if var is None:
            return Fraction(0)
        return self.simplex.concrete_value(var, eps)


class CnfBuilder:
    """Tseitin translation with structural sharing.  Variable 1 is constant
    true."""

    def __init__(self) -> None:
        self.nvars = 1
        self.clauses: list[list[int]] = [[1]]
        self._memo: dict = {("true",): 1, ("false",): -1}
        self._atom_var: dict[int, int] = {}
        self.bool_var: dict[str, int] = {}
        self.atom_of_var: dict[int, int] = {}

    def _new_var(self) -> int:
        self.nvars += 1
        return self.nvars

    def lit(self, f: tuple) -> int:
        cached = self._memo.get(f)
        if cached is not None:
            return cached
        kind = f[0]
        if kind == "not":
            value = -self.lit(f[1])
        elif kind == "atom":
            atom_id = f[1]
            var = self._atom_var.get(atom_id)
            if var is None:
                var = self._new_var()
                self._atom_var[atom_id] = var
                self.atom_of_var[var] = atom_id
            value = var
        elif kind == "bvar":
            name = f[1]
            var = self.bool_var.get(name)
            if var is None:
                var = self._new_var()
                self.bool_var[name] = var
            value = var
        elif kind in ("and", "or"):
            parts = [self.lit(g) for g in f[1:]]
            if len(parts) == 1:
                value = parts[0]
            else:
                var = self._new_var()
                if kind == "and":
                    for p in parts:
                        self.clauses.append([-var, p])
                    self.clauses.append([var] + [-p for p in parts])
                else:
                    for p in parts:
                        self.clauses.append([var, -p])
                    self.clauses.append([-var] + parts)
                value = var
        elif kind == "=>":
            a, b = self.lit(f[1]), self.lit(f[2])
            var = self._new_var()
            self.clauses.append([-var, -a, b])
            self.clauses.append([var, a])
            self.clauses.append([var, -b])
            value = var
        elif kind == "iff":
            a, b = self.lit(f[1]), self.lit(f[2])
            var = self._new_var()
            self.clauses.append([-var, -a, b])
            self.clauses.append([-var, a, -b])
            self.clauses.append([var, a, b])
            self.clauses.append([var, -a, -b])
            value = var
        else:
            raise ValueError(f"unknown formula node {kind!r}")
        self._memo[f] = value
        return value

    def assert_top(self, f: tuple) -> None:
        if f[0] == "and":
            for g in f[1:]:
                self.assert_top(g)
        elif f[0] == "true":
            pass
        elif f[0] == "false":
            self.clauses.append([])
        else:
            self.clauses.append([self.lit(f)])


class SatSolver:
    """Chronological DPLL with theory-conflict clause learning."""

    def __init__(self, bridge: TheoryBridge, cnf: CnfBuilder) -> None:
        self.bridge = bridge
        self.nvars = cnf.nvars
        self.clauses = [list(c) for c in cnf.clauses]
        self.atom_of_var = cnf.atom_of_var
        self.assign = [0] * (self.nvars + 1)
        self.occ: dict[int, list[int]] = {}
        for ci in range(len(self.clauses)):
            self._register(ci)
        self.trail: list[int] = []
        self.level_marks: list[int] = []
        self.decisions: list[list] = []  # [lit, flipped]
        self.queue_head = 0
        self.num_assigned = 0
        # every var below this is assigned
        self._decide_from = 1

    # -- plumbing -----------------------------------------------------------

    def _register(self, ci: int) -> None:
        for lit in self.clauses[ci]:
            self.occ.setdefault(lit, []).append(ci)

    def _value(self, lit: int) -> int:
        v = self.assign[abs(lit)]
        return v if lit > 0 else -v

    def _enqueue(self, lit: int) -> bool:
        v = self._value(lit)
        if v == 1:
            return True
        if v == -1:
            return False
        self.assign[abs(lit)] = 1 if lit > 0 else -1
        self.trail.append(lit)
        self.num_assigned += 1
        return True

    def _undo_to(self, mark: int) -> None:
        while len(self.trail) > mark:
            lit = self.trail.pop()
            self.assign[abs(lit)] = 0
            self.num_assigned -= 1
            if abs(lit) < self._decide_from:
                self._decide_from = abs(lit)
        self.queue_head = mark

    # -- propagation ----------------------------------------------------------

    def _propagate(self) -> Optional[list[int]]:
        """Drain the trail queue; return a violated clause or None."""
        while self.queue_head < len(self.trail):
            lit = self.trail[self.queue_head]
            self.queue_head += 1
            atom_id = self.atom_of_var.get(abs(lit))
            if atom_id is not None:
                conflict = self.bridge.assert_lit(atom_id, lit > 0, lit)
                if conflict is not None:
                    return self._learn(conflict)
            for ci in self.occ.get(-lit, ()):
                clause = self.clauses[ci]
                satisfied = False
                unassigned = None
                extra = False
                for l2 in clause:
                    v = self._value(l2)
                    if v == 1:
                        satisfied = True
                        break
                    if v == 0:
                        if unassigned is None:
                            unassigned = l2
                        else:
                            extra = True
                            break
                if satisfied or extra:
                    continue
                if unassigned is None:
                    return clause
                self._enqueue(unassigned)
        conflict = self.bridge.check()
        if conflict is not None:
            return self._learn(conflict)
        return None

    def _learn(self, conflict_lits: list[int]) -> list[int]:
        clause = sorted({-l for l in conflict_lits})
        self.clauses.append(clause)
        self._register(len(self.clauses) - 1)
        return clause

    # -- search ---------------------------------------------------------------

    def _decide(self) -> None:
        var = self._decide_from
        while self.assign[var] != 0:
            var += 1
        self._decide_from = var
        self.level_marks.append(len(self.trail))
        self.decisions.append([var, False])
        self.bridge.push()
        self._enqueue(var)

    def _resolve(self, clause: Optional[list[int]]) -> bool:
        """Backtrack out of a conflict; False means the search space is
        exhausted."""
        while True:
            while self.decisions and self.decisions[-1][1]:
                self._undo_to(self.level_marks.pop())
                self.decisions.pop()
                self.bridge.pop()
            if not self.decisions:
                return False
            lit = self.decisions[-1][0]
            self._undo_to(self.level_marks[-1])
            self.bridge.pop()
            self.bridge.push()
            self.decisions[-1] = [-lit, True]
            self._enqueue(-lit)
            if clause is None or any(self._value(l) != -1 for l in clause):
                return True
            # The learned clause is still violated below this level.

    def solve(self, deadline: Optional[float] = None) -> str:
        for clause in self.clauses:
            if not clause:
                return "unsat"
        try:
            for clause in list(self.clauses):
                if len(clause) == 1 and not self._enqueue(clause[0]):
                    return "unsat"
            while True:
                if deadline is not None and time.monotonic() > deadline:
                    return "unknown"
                conflict = self._propagate()
                if conflict is not None:
                    if not self._resolve(conflict):
                        return "unsat"
                    continue
                if self.num_assigned == self.nvars:
                    verdict = self.bridge.integer_search(deadline)
                    if verdict == "sat":
                        return "sat"
                    if verdict == "unknown":
                        return "unknown"
                    coarse = [
                        -l for l in self.trail if abs(l) in self.atom_of_var
                    ]
                    if not coarse:
                        return "unsat"
                    self.clauses.append(coarse)
                    self._register(len(self.clauses) - 1)
                    if not self._resolve(coarse):
                        return "unsat"
                    continue
                self._decide()
        except SolverTimeout:
            return "unknown"

    def bool_value(self, var: int) -> bool:
        return self.assign[var] == 1

"""Exact linear-rational arithmetic core: delta-rationals and a general simplex.

The simplex follows the incremental scheme of Dutertre and de Moura: every
linear combination that appears in a constraint gets a slack variable whose
defining row lives in the tableau, and each asserted literal only tightens a
bound on a single variable.  Strict bounds are represented exactly with an
infinitesimal delta component.  All arithmetic is over fractions.Fraction.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional

ZERO = Fraction(0)


class DeltaRational:
    """a + b*delta for an infinitesimal positive delta."""

    __slots__ = ("main", "delta")

    def __init__(self, main: Fraction, delta: Fraction = ZERO) -> None:
        self.main = main
        self.delta = delta

    def __add__(self, other: "DeltaRational") -> "DeltaRational":
        return DeltaRational(self.main + other.main, self.delta + other.delta)

    def __sub__(self, other: "DeltaRational") -> "DeltaRational":
        return DeltaRational(self.main - other.main, self.delta - other.delta)

    def scale(self, k: Fraction) -> "DeltaRational":
        return DeltaRational(self.main * k, self.delta * k)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, DeltaRational)
            and self.main == other.main
            and self.delta == other.delta
        )

    def __lt__(self, other: "DeltaRational") -> bool:
        return (self.main, self.delta) < (other.main, other.delta)

    def __le__(self, other: "DeltaRational") -> bool:
        return (self.main, self.delta) <= (other.main, other.delta)

    def __gt__(self, other: "DeltaRational") -> bool:
        return (self.main, self.delta) > (other.main, other.delta)

    def __ge__(self, other: "DeltaRational") -> bool:
        return (self.main, self.delta) >= (other.main, other.delta)

    def __hash__(self) -> int:
        return hash((self.main, self.delta))

    def __repr__(self) -> str:
        if self.delta == 0:
            return f"{self.main}"
        return f"{self.main}{'+' if self.delta > 0 else ''}{self.delta}d"

    def is_integer(self) -> bool:
        return self.delta == 0 and self.main.denominator == 1


DR_ZERO = DeltaRational(ZERO)


class Simplex:
    """General simplex over delta-rationals with a bound-restore trail.

    Variables are dense integer indices.  A variable is basic exactly when it
    owns a row in `rows`.  `beta` always satisfies every tableau row; bounds
    may be violated on basic variables between `check` calls.
    """

    def __init__(self) -> None:
        self.n = 0
        self.is_int: list[bool] = []
        self.lower: list[Optional[DeltaRational]] = []
        self.upper: list[Optional[DeltaRational]] = []
        self.low_reason: list[int] = []
        self.up_reason: list[int] = []
        self.beta: list[DeltaRational] = []
        # basic var -> {nonbasic var: coefficient}
        self.rows: dict[int, dict[int, Fraction]] = {}
        # nonbasic var -> set of basic vars whose row mentions it
        self.cols: dict[int, set[int]] = {}
        self._trail: list[tuple] = []
        self._marks: list[int] = []

    # -- construction ------------------------------------------------------

    def new_var(self, is_int: bool = False) -> int:
        idx = self.n
        self.n += 1
        self.is_int.append(is_int)
        self.lower.append(None)
        self.upper.append(None)
        self.low_reason.append(0)
        self.up_reason.append(0)
        self.beta.append(DR_ZERO)
        self.cols[idx] = set()
        return idx

    def define_slack(self, combo: dict[int, Fraction], is_int: bool) -> int:
        """New basic variable s with row s = sum(combo)."""
        s = self.new_var(is_int)
        row = dict(combo)
        self.rows[s] = row
        value = DR_ZERO
        for var, coef in row.items():
            self.cols[var].add(s)
            value = value + self.beta[var].scale(coef)
        self.beta[s] = value
        del self.cols[s]
        return s

    # -- trail -------------------------------------------------------------

    def push(self) -> None:
        self._marks.append(len(self._trail))

    def pop(self) -> None:
        mark = self._marks.pop()
        while len(self._trail) > mark:
            kind, var, bound, reason = self._trail.pop()
            if kind == "u":
                self.upper[var] = bound
                self.up_reason[var] = reason
            else:
                self.lower[var] = bound
                self.low_reason[var] = reason

    @property
    def level(self) -> int:
        return len(self._marks)

    def pop_to(self, level: int) -> None:
        while len(self._marks) > level:
            self.pop()

    # -- bound assertion ---------------------------------------------------

    def assert_upper(self, var: int, bound: DeltaRational, reason: int) -> Optional[list[int]]:
        current = self.upper[var]
        if current is not None and current <= bound:
            return None
        low = self.lower[var]
        if low is not None and bound < low:
            return [reason, self.low_reason[var]]
        self._trail.append(("u", var, current, self.up_reason[var]))
        self.upper[var] = bound
        self.up_reason[var] = reason
        if var not in self.rows and self.beta[var] > bound:
            self._update(var, bound)
        return None

    def assert_lower(self, var: int, bound: DeltaRational, reason: int) -> Optional[list[int]]:
        current = self.lower[var]
        if current is not None and current >= bound:
            return None
        up = self.upper[var]
        if up is not None and bound > up:
            return [reason, self.up_reason[var]]
        self._trail.append(("l", var, current, self.low_reason[var]))
        self.lower[var] = bound
        self.low_reason[var] = reason
        if var not in self.rows and self.beta[var] < bound:
            self._update(var, bound)
        return None

    def _update(self, var: int, value: DeltaRational) -> None:
        diff = value - self.beta[var]
        for b in self.cols[var]:
            self.beta[b] = self.beta[b] + diff.scale(self.rows[b][var])
        self.beta[var] = value

    # -- satisfiability ----------------------------------------------------

    def check(self) -> Optional[list[int]]:
        """Pivot until all bounds hold; return conflict literals on failure.

        Bland-style smallest-index selection keeps the search terminating and
        deterministic.
        """
        while True:
            broken = -1
            below = False
            for var in sorted(self.rows):
                lo = self.lower[var]
                if lo is not None and self.beta[var] < lo:
                    broken, below = var, True
                    break
                up = self.upper[var]
                if up is not None and self.beta[var] > up:
                    broken, below = var, False
                    break
            if broken < 0:
                return None
            row = self.rows[broken]
            pivot = -1
            for var in sorted(row):
                coef = row[var]
                if below:
                    grows = coef > 0
                else:
                    grows = coef < 0
                if grows:
                    up = self.upper[var]
                    if up is None or self.beta[var] < up:
                        pivot = var
                        break
                else:
                    lo = self.lower[var]
                    if lo is None or self.beta[var] > lo:
                        pivot = var
                        break
            if pivot < 0:
                conflict = [self.low_reason[broken] if below else self.up_reason[broken]]
                for var in sorted(row):
                    coef = row[var]
                    if (coef > 0) == below:
                        conflict.append(self.up_reason[var])
                    else:
                        conflict.append(self.low_reason[var])
                return conflict
            target = self.lower[broken] if below else self.upper[broken]
            self._pivot_and_update(broken, pivot, target)

    def _pivot_and_update(self, basic: int, nonbasic: int, value: DeltaRational) -> None:
        row = self.rows.pop(basic)
        coef = row[nonbasic]
        inv = Fraction(1) / coef
        theta = (value - self.beta[basic]).scale(inv)
        self.beta[basic] = value
        self.beta[nonbasic] = self.beta[nonbasic] + theta
        for other in self.cols[nonbasic]:
            if other != basic:
                self.beta[other] = self.beta[other] + theta.scale(self.rows[other][nonbasic])
        mentions = [b for b in self.cols[nonbasic] if b != basic]

        # Solve the old row for the entering variable.
        new_row: dict[int, Fraction] = {basic: inv}
        for var, c in row.items():
            self.cols[var].discard(basic)
            if var != nonbasic:
                new_row[var] = -c * inv
        self.cols[basic] = set()
        del self.cols[nonbasic]
        self.rows[nonbasic] = new_row
        for var in new_row:
            self.cols[var].add(nonbasic)

        # Substitute it into every other row that mentioned it.
        for b in mentions:
            target_row = self.rows[b]
            factor = target_row.pop(nonbasic)
            for var, c in new_row.items():
                acc = target_row.get(var, ZERO) + factor * c
                if acc == 0:
                    if var in target_row:
                        del target_row[var]
                    self.cols[var].discard(b)
                else:
                    target_row[var] = acc
                    self.cols[var].add(b)

    # -- models ------------------------------------------------------------

    def epsilon(self) -> Fraction:
        """A concrete positive value for delta that preserves every bound."""
        eps = Fraction(1)
        for var in range(self.n):
            value = self.beta[var]
            lo = self.lower[var]
            if lo is not None and lo.main < value.main and lo.delta > value.delta:
                gap = (value.main - lo.main) / (lo.delta - value.delta)
                if gap < eps:
                    eps = gap
            up = self.upper[var]
            if up is not None and value.main < up.main and value.delta > up.delta:
                gap = (up.main - value.main) / (value.delta - up.delta)
                if gap < eps:
                    eps = gap
        return eps

    def concrete_value(self, var: int, eps: Fraction) -> Fraction:
        value = self.beta[var]
        return value.main + value.delta * eps

"""Reference testers: uniform random testing and adaptive random testing.

Both drive the same property interface as the verification engine and hold
counterexamples to the same bar (a candidate counts only if check_candidate
confirms it on the model under test), so detection rates are directly
comparable.  Assume clauses are satisfied constructively where the clause
shape allows it (pinned features, paired-instance equalities) and by
rejection sampling otherwise.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from fractions import Fraction

from .engine import Counterexample, TestSuite, check_candidate, property_id
from .oracle import ModelUnderTest, OracleError
from .propdsl import Cmp, FeatureRef, PropertySpec, RationalLit, eval_condition
from .schema import DatasetSchema, Instance, random_instance


class BaselineError(RuntimeError):
    """Sampling could not satisfy the property's assumptions."""


@dataclass(frozen=True)
class BaselineConfig:
    budget: int
    kind: str = "random"
    art_pool: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("random", "art"):
            raise ValueError(f"kind must be 'random' or 'art', got {self.kind!r}")
        if self.budget <= 0 or self.art_pool <= 0:
            raise ValueError("budget and art_pool must be positive")


@dataclass(frozen=True)
class _DrawPlan:
    """Structure mined from the assume clauses ahead of sampling.

    pins: per instance var, features forced to a constant.
    eq/neq: for two-variable specs, features the second instance must
    copy from or differ from the first.
    """

    pins: dict
    eq: tuple[int, ...]
    neq: tuple[int, ...]


def _analyze(spec: PropertySpec) -> _DrawPlan:
    pins: dict = {var: {} for var in spec.instance_vars}
    eq: list[int] = []
    neq: list[int] = []
    for clause in spec.assumes:
        ast = clause.ast
        if not isinstance(ast, Cmp):
            continue
        lhs, rhs = ast.lhs, ast.rhs
        if isinstance(rhs, FeatureRef) and isinstance(lhs, RationalLit):
            lhs, rhs = rhs, lhs
        if (
            ast.op == "=="
            and isinstance(lhs, FeatureRef)
            and isinstance(rhs, RationalLit)
        ):
            pins[lhs.var][lhs.feature] = rhs.value
        elif (
            ast.op in ("==", "!=")
            and isinstance(lhs, FeatureRef)
            and isinstance(rhs, FeatureRef)
            and lhs.var != rhs.var
            and lhs.feature == rhs.feature
        ):
            (eq if ast.op == "==" else neq).append(lhs.feature)
    return _DrawPlan(pins=pins, eq=tuple(eq), neq=tuple(neq))


def _fresh_value(schema: DatasetSchema, i: int, rng: random.Random) -> Fraction:
    return random_instance(schema, rng).values[i]


def _distinct_value(
    schema: DatasetSchema, i: int, current: Fraction, rng: random.Random
) -> Fraction:
    feat = schema.features[i]
    if feat.kind == "categorical":
        others = [c for c in feat.categories if Fraction(c) != current]
        return Fraction(rng.choice(others))
    for _ in range(100):
        v = _fresh_value(schema, i, rng)
        if v != current:
            return v
    raise BaselineError("assumptions unsatisfiable by sampling")


def _draw_candidate(
    spec: PropertySpec, schema: DatasetSchema, plan: _DrawPlan, rng: random.Random
) -> tuple[Instance, ...]:
    instances = []
    for k, var in enumerate(spec.instance_vars):
        values = list(random_instance(schema, rng).values)
        if k == 1:
            base = instances[0].values
            for i in plan.eq:
                values[i] = base[i]
            for i in plan.neq:
                values[i] = _distinct_value(schema, i, base[i], rng)
        for i, v in plan.pins[var].items():
            values[i] = v
        instances.append(Instance(tuple(values)))
    return tuple(instances)


def _draw_satisfying(
    spec: PropertySpec,
    schema: DatasetSchema,
    plan: _DrawPlan,
    rng: random.Random,
    rejections: list,
    limit: int,
) -> tuple[Instance, ...]:
    while True:
        candidate = _draw_candidate(spec, schema, plan, rng)
        inst_env = dict(zip(spec.instance_vars, candidate))
        if all(eval_condition(c.ast, inst_env, {}) for c in spec.assumes):
            return candidate
        rejections[0] += 1
        if rejections[0] > limit:
            raise BaselineError("assumptions unsatisfiable by sampling")


def _sq_distance(a: tuple[Instance, ...], b: tuple[Instance, ...]) -> Fraction:
    total = Fraction(0)
    for ia, ib in zip(a, b):
        for va, vb in zip(ia.values, ib.values):
            total += (va - vb) ** 2
    return total


def _select_art(
    pool: list, executed: list
) -> tuple[Instance, ...]:
    """Max-min euclidean candidate; the first one when nothing ran yet."""
    if not executed:
        return pool[0]
    best = pool[0]
    best_score = min(_sq_distance(pool[0], e) for e in executed)
    for cand in pool[1:]:
        score = min(_sq_distance(cand, e) for e in executed)
        if score > best_score:
            best, best_score = cand, score
    return best


def _run(
    mut: ModelUnderTest,
    spec: PropertySpec,
    schema: DatasetSchema,
    cfg: BaselineConfig,
) -> TestSuite:
    rng = random.Random(cfg.seed)
    start = time.monotonic()
    plan = _analyze(spec)
    limit = 1000 * cfg.budget
    rejections = [0]
    stats = {
        "tester": cfg.kind,
        "rejected": 0,
        "samples_used": 0,
        "assume_rejections": 0,
        "error": None,
    }
    suite: list[Counterexample] = []
    executed: list = []
    try:
        for step in range(1, cfg.budget + 1):
            if cfg.kind == "random":
                candidate = _draw_satisfying(spec, schema, plan, rng, rejections, limit)
            else:
                pool = [
                    _draw_satisfying(spec, schema, plan, rng, rejections, limit)
                    for _ in range(cfg.art_pool)
                ]
                candidate = _select_art(pool, executed)
            executed.append(candidate)
            stats["samples_used"] = step
            valid, predictions = check_candidate(mut, spec, candidate)
            if valid:
                suite.append(
                    Counterexample(
                        instances=candidate,
                        mut_predictions=predictions,
                        surrogate_predictions=(),
                        iteration=step,
                    )
                )
                break
            stats["rejected"] += 1
    except (BaselineError, OracleError) as exc:
        stats["error"] = str(exc)
    stats["assume_rejections"] = rejections[0]
    stats["queries"] = mut.query_count
    stats["wall_time"] = time.monotonic() - start
    return TestSuite(
        tester=cfg.kind,
        property_id=property_id(spec),
        instance_vars=spec.instance_vars,
        counterexamples=tuple(suite),
        stats=stats,
    )


def random_test(
    mut: ModelUnderTest,
    spec: PropertySpec,
    schema: DatasetSchema,
    cfg: BaselineConfig,
) -> TestSuite:
    """Uniform random testing: independent assume-satisfying draws."""
    if cfg.kind != "random":
        raise ValueError("random_test needs cfg.kind == 'random'")
    return _run(mut, spec, schema, cfg)


def adaptive_random_test(
    mut: ModelUnderTest,
    spec: PropertySpec,
    schema: DatasetSchema,
    cfg: BaselineConfig,
) -> TestSuite:
    """Adaptive random testing: per step, the candidate farthest from
    everything executed so far (squared euclidean, exact arithmetic)."""
    if cfg.kind != "art":
        raise ValueError("adaptive_random_test needs cfg.kind == 'art'")
    return _run(mut, spec, schema, cfg)

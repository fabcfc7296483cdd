"""Counterexample-generation loop.

Train a surrogate on predictions of the model under test, verify the property
on the surrogate with the constraint solver, validate each satisfying
assignment against the MUT, retrain on accumulated disagreements, and collect
confirmed violations into a test suite.  Every solver candidate is blocked
after inspection (valid or not) so the deterministic solver always advances;
confirmed suite entries stay blocked across retrains.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import time
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

from .oracle import ModelUnderTest, OracleError, wire_round
from .propdsl import PropertySpec, eval_condition
from .schema import DatasetSchema, Instance, Prediction, format_rational, random_instance, validate_instance
from .smt import SolverFailure, block_assignment, encode_property, feature_var, solve
from .smt.script import rat
from .surrogate import LabeledSet, TrainParams, train_decision_tree, train_mlp


@dataclass(frozen=True)
class EngineConfig:
    wbm: str = "dt"
    multi: bool = False
    max_samples: int = 1000
    bound_cex: bool = False
    initial_train_size: int = 200
    retrain_trigger: int = 5
    seed: int = 0
    solver_command: Optional[str] = None
    solver_timeout: Optional[float] = None
    # min_leaf=1 so the tree can isolate single disagreement rows; a
    # surrogate that cannot memorize point anomalies never surfaces them
    train: TrainParams = TrainParams(min_leaf=1)
    # optional explicit seeding rows (e.g. a dataset's training split);
    # random draws over the schema otherwise
    seed_instances: Optional[tuple[Instance, ...]] = None
    dump_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if self.wbm not in ("dt", "nn"):
            raise ValueError(f"wbm must be 'dt' or 'nn', got {self.wbm!r}")
        for name in ("max_samples", "initial_train_size", "retrain_trigger"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Counterexample:
    instances: tuple[Instance, ...]
    mut_predictions: tuple[Prediction, ...]
    surrogate_predictions: tuple[Prediction, ...]
    iteration: int


@dataclass(frozen=True)
class TestSuite:
    __test__ = False  # keep pytest from collecting this as a test class

    tester: str
    property_id: str
    instance_vars: tuple[str, ...]
    counterexamples: tuple[Counterexample, ...]
    stats: dict


def property_id(spec: PropertySpec) -> str:
    text = "\n".join(
        [f"var {' '.join(spec.instance_vars)}"]
        + [f"assume {c.source}" for c in spec.assumes]
        + [f"assert {spec.assertion.source}"]
    )
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def derive_bounds(data: LabeledSet) -> tuple[tuple[Fraction, Fraction], ...]:
    """Componentwise [min, max] over the training instances."""
    if len(data) == 0:
        raise ValueError("cannot derive bounds from an empty training set")
    rows = [x.values for x, _ in data]
    n = len(rows[0])
    return tuple(
        (min(r[i] for r in rows), max(r[i] for r in rows)) for i in range(n)
    )


def check_candidate(
    mut: ModelUnderTest, spec: PropertySpec, instances: tuple[Instance, ...]
) -> tuple[bool, tuple[Prediction, ...]]:
    """Query the MUT and evaluate assume ∧ ¬assert on its predictions."""
    predictions = tuple(mut.predict(list(instances)))
    inst_env = dict(zip(spec.instance_vars, instances))
    pred_env = dict(zip(spec.instance_vars, predictions))
    assumes_hold = all(
        eval_condition(clause.ast, inst_env, pred_env) for clause in spec.assumes
    )
    asserted = eval_condition(spec.assertion.ast, inst_env, pred_env)
    return assumes_hold and not asserted, predictions


def _snap_instance(schema: DatasetSchema, values: tuple[Fraction, ...]) -> Instance:
    """Round solver values onto the oracle wire grid and clamp to the schema."""
    out = []
    for feat, v in zip(schema.features, values):
        if feat.kind == "continuous":
            v = wire_round(Instance((v,))).values[0]
            v = min(max(v, feat.min), feat.max)
        out.append(v)
    return Instance(tuple(out))


def _train(data: LabeledSet, cfg: EngineConfig):
    params = replace(cfg.train, seed=cfg.seed)
    if cfg.wbm == "dt":
        return train_decision_tree(data, params)
    return train_mlp(data, params)


def _instance_block(instances: tuple[Instance, ...]) -> str:
    parts = []
    for c, inst in enumerate(instances, start=1):
        for i, v in enumerate(inst.values):
            parts.append(f"(= {feature_var(i, c)} {rat(v)})")
    if len(parts) == 1:
        return f"(not {parts[0]})"
    return "(not (and " + " ".join(parts) + "))"


def generate_test_suite(
    mut: ModelUnderTest,
    spec: PropertySpec,
    schema: DatasetSchema,
    cfg: EngineConfig,
) -> TestSuite:
    rng = random.Random(cfg.seed)
    start = time.monotonic()
    stats = {
        "tester": "engine",
        "wbm": cfg.wbm,
        "solver_calls": 0,
        "retrains": 0,
        "rejected": 0,
        "samples_used": 0,
        "error": None,
    }
    suite: list[Counterexample] = []
    suite_keys: set = set()
    permanent_blocks: list[str] = []
    dump_seq = [0]

    def dump(script) -> None:
        if cfg.dump_dir is None:
            return
        os.makedirs(cfg.dump_dir, exist_ok=True)
        path = os.path.join(cfg.dump_dir, f"{dump_seq[0]:04d}.smt2")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(script.text)
        dump_seq[0] += 1

    data = LabeledSet(schema)
    bounds: Optional[tuple] = None

    def rebuild(surrogate):
        script = encode_property(spec, schema, surrogate, bounds=bounds)
        for b in permanent_blocks:
            script = script.with_block(b)
        return script

    try:
        if cfg.seed_instances is not None:
            seed_rows = list(cfg.seed_instances)
        else:
            seed_rows = [
                random_instance(schema, rng) for _ in range(cfg.initial_train_size)
            ]
        for x, z in zip(seed_rows, mut.predict(seed_rows)):
            data.add(x, z)
        if cfg.bound_cex:
            # frozen at seed time: later augmentation rows must not widen
            # the candidate region the flag promises to stay inside
            bounds = derive_bounds(data)

        surrogate = _train(data, cfg)
        script = rebuild(surrogate)
        used = 0
        disagreements = 0
        fresh_retrain_done = False

        while used < cfg.max_samples:
            dump(script)
            status, assignment = solve(script, cfg.solver_command, cfg.solver_timeout)
            stats["solver_calls"] += 1
            if status == "sat":
                used += 1
                script = script.with_block(block_assignment(assignment))
                instances = tuple(
                    _snap_instance(schema, values) for values in assignment.features
                )
                if any(validate_instance(schema, inst) for inst in instances):
                    stats["rejected"] += 1
                    continue
                valid, predictions = check_candidate(mut, spec, instances)
                if valid:
                    key = tuple(inst.values for inst in instances)
                    if key not in suite_keys:
                        suite_keys.add(key)
                        suite.append(
                            Counterexample(
                                instances=instances,
                                mut_predictions=predictions,
                                surrogate_predictions=tuple(
                                    Prediction(c) for c in assignment.classes
                                ),
                                iteration=used,
                            )
                        )
                        block = _instance_block(instances)
                        permanent_blocks.append(block)
                        script = script.with_block(block)
                        if not cfg.multi or len(suite) >= cfg.max_samples:
                            break
                else:
                    stats["rejected"] += 1
                    disagreements += 1
                    for inst, pred in zip(instances, predictions):
                        data.add(inst, pred)
                    if disagreements >= cfg.retrain_trigger:
                        surrogate = _train(data, cfg)
                        stats["retrains"] += 1
                        disagreements = 0
                        fresh_retrain_done = False
                        script = rebuild(surrogate)
            else:
                # unsat or unknown: one fresh-data retrain guards against a
                # degenerate surrogate, then conclude; keep at least one
                # budget slot so the retrained surrogate actually gets solved
                fresh = min(cfg.initial_train_size, cfg.max_samples - used - 1)
                if fresh_retrain_done or fresh < 1:
                    break
                rows = [random_instance(schema, rng) for _ in range(fresh)]
                for x, z in zip(rows, mut.predict(rows)):
                    data.add(x, z)
                used += fresh
                surrogate = _train(data, cfg)
                stats["retrains"] += 1
                disagreements = 0
                fresh_retrain_done = True
                script = rebuild(surrogate)
        stats["samples_used"] = used
    except (OracleError, SolverFailure) as exc:
        stats["error"] = str(exc)
    stats["queries"] = mut.query_count
    stats["wall_time"] = time.monotonic() - start
    return TestSuite(
        tester="engine",
        property_id=property_id(spec),
        instance_vars=spec.instance_vars,
        counterexamples=tuple(suite),
        stats=stats,
    )


# -- serialization -------------------------------------------------------------

_VOLATILE_STAT_KEYS = ("wall_time",)


def suite_to_jsonl(suite: TestSuite) -> str:
    """JSON-lines form: one record per counterexample plus a stats record.

    Volatile fields (wall time) are omitted so identical runs serialize to
    identical bytes.
    """
    lines = []
    for cex in suite.counterexamples:
        record = {
            "kind": "counterexample",
            "property": suite.property_id,
            "iteration": cex.iteration,
            "instances": {
                var: [format_rational(v) for v in inst.values]
                for var, inst in zip(suite.instance_vars, cex.instances)
            },
            "mut_predictions": {
                var: list(pred.classes)
                for var, pred in zip(suite.instance_vars, cex.mut_predictions)
            },
            "surrogate_predictions": {
                var: list(pred.classes)
                for var, pred in zip(suite.instance_vars, cex.surrogate_predictions)
            },
        }
        lines.append(json.dumps(record, sort_keys=True))
    stats = {k: v for k, v in suite.stats.items() if k not in _VOLATILE_STAT_KEYS}
    stats["kind"] = "stats"
    stats["property"] = suite.property_id
    stats["suite_size"] = len(suite.counterexamples)
    lines.append(json.dumps(stats, sort_keys=True))
    return "\n".join(lines) + "\n"


def write_suite(suite: TestSuite, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(suite_to_jsonl(suite))

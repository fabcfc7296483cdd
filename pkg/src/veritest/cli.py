"""Command-line front end.

Two commands: ``run`` executes one tester against one model and property,
``bench`` sweeps a manifest of (tester, model, property) cells and tabulates
detection probabilities.  Exit codes: 0 ran to completion, 1 violations
found under --fail-on-cex, 2 usage or configuration error, 3 oracle or
solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import statistics
import sys
from fractions import Fraction
from typing import Optional, Sequence

from .baseline import BaselineConfig, adaptive_random_test, random_test
from .engine import EngineConfig, TestSuite, generate_test_suite, property_id, write_suite
from .oracle import (
    ConstantModel,
    ModelUnderTest,
    OracleError,
    builtin_mut,
    RuleModel,
    spawn_external,
    TableModel,
)
from .propdsl import (
    ConditionSyntaxError,
    PropertyError,
    PropertySpec,
    concept_property,
    fairness_property,
    parse_condition,
    parse_property_file,
    trojan_property,
)
from .schema import DatasetSchema, Instance, Prediction, SchemaError, parse_schema
from .surrogate import TrainParams

SOLVER_ENV = "VERITEST_SOLVER"


class UsageError(ValueError):
    """Bad flags, unreadable files, malformed model/property descriptions."""


# -- input loading ---------------------------------------------------------


def _read_file(path: str, what: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path!r}: {exc}") from exc


def _load_schema(path: str) -> DatasetSchema:
    try:
        return parse_schema(_read_file(path, "schema file"))
    except SchemaError as exc:
        raise UsageError(f"schema file {path!r}: {exc}") from exc


def _parse_classes(raw: object, what: str) -> Prediction:
    if not isinstance(raw, list) or not all(isinstance(c, int) for c in raw):
        raise UsageError(f"{what}: 'classes' must be a list of integers")
    return Prediction(tuple(raw))


def _parse_values(raw: object, what: str) -> Instance:
    if not isinstance(raw, list):
        raise UsageError(f"{what}: 'values' must be a list")
    try:
        return Instance(tuple(Fraction(str(v)) for v in raw))
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"{what}: bad feature value: {exc}") from exc


def _load_builtin_model(path: str, schema: DatasetSchema) -> ModelUnderTest:
    try:
        doc = json.loads(_read_file(path, "model file"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"model file {path!r} is not valid JSON: {exc}") from exc
    kind = doc.get("type")
    if kind == "constant":
        model = ConstantModel(_parse_classes(doc.get("classes"), path))
    elif kind == "rule":
        rules = []
        for i, rule in enumerate(doc.get("rules", [])):
            try:
                cond = parse_condition(rule["if"], [], schema, ["x"])
            except (KeyError, ConditionSyntaxError) as exc:
                raise UsageError(f"{path}: rule {i}: {exc}") from exc
            rules.append((cond, _parse_classes(rule.get("classes"), path)))
        model = RuleModel(tuple(rules), _parse_classes(doc.get("default"), path))
    elif kind == "table":
        rows = tuple(
            (_parse_values(row.get("values"), path), _parse_classes(row.get("classes"), path))
            for row in doc.get("rows", [])
        )
        model = TableModel(rows)
    else:
        raise UsageError(f"{path}: unknown model type {kind!r} (want constant/rule/table)")
    return builtin_mut(model, schema)


def _load_mut(spec_text: str, schema: DatasetSchema) -> ModelUnderTest:
    scheme, _, rest = spec_text.partition(":")
    if not rest:
        raise UsageError(f"--mut needs 'builtin:<file>' or 'external:<command>', got {spec_text!r}")
    if scheme == "builtin":
        return _load_builtin_model(rest, schema)
    if scheme == "external":
        try:
            return spawn_external(rest, schema)
        except OracleError as exc:
            raise UsageError(f"cannot start external model: {exc}") from exc
    raise UsageError(f"unknown model scheme {scheme!r} (want builtin/external)")


def _load_trojan(path: str, schema: DatasetSchema) -> PropertySpec:
    try:
        doc = json.loads(_read_file(path, "trigger file"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"trigger file {path!r} is not valid JSON: {exc}") from exc
    raw_features = doc.get("trigger_features")
    if not isinstance(raw_features, list):
        raise UsageError(f"{path}: 'trigger_features' must be a list of feature names or indices")
    features = []
    for f in raw_features:
        try:
            features.append(f if isinstance(f, int) else schema.feature_index(str(f)))
        except SchemaError as exc:
            raise UsageError(f"{path}: {exc}") from exc
    instance = _parse_values(doc.get("instance"), path)
    target = _parse_classes(doc.get("classes"), path)
    try:
        return trojan_property(schema, features, instance, target)
    except PropertyError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _build_property(text: str, schema: DatasetSchema) -> PropertySpec:
    scheme, _, rest = text.partition(":")
    try:
        if scheme == "fairness" and rest:
            key, _, name = rest.partition("=")
            if key != "s" or not name:
                raise UsageError(f"--property fairness needs 's=<feature>', got {rest!r}")
            try:
                index = int(name) if name.isdigit() else schema.feature_index(name)
            except SchemaError as exc:
                raise UsageError(str(exc)) from exc
            return fairness_property(schema, index)
        if scheme == "concept" and rest:
            phi = parse_condition(rest, [], schema, ["x"])
            return concept_property(schema, phi)
        if scheme == "trojan" and rest:
            return _load_trojan(rest, schema)
        return parse_property_file(_read_file(text, "property file"), schema)
    except (PropertyError, ConditionSyntaxError) as exc:
        raise UsageError(f"property {text!r}: {exc}") from exc


# -- config files ----------------------------------------------------------

_CONFIG_KEYS = {
    "schema": str,
    "property": str,
    "mut": str,
    "tester": str,
    "wbm": str,
    "multi": bool,
    "max_samples": int,
    "bound_cex": bool,
    "seed": int,
    "repeat": int,
    "fail_on_cex": bool,
    "out": str,
    "dump_smt": str,
    "solver": str,
    "solver_timeout": float,
    "hidden": str,
    "initial_train_size": int,
    "retrain_trigger": int,
    "art_pool": int,
    "min_leaf": int,
    "epochs": int,
    "learning_rate": float,
}


def _parse_config_file(path: str) -> dict:
    """key = value lines; '#' comments; quotes around strings optional."""
    out: dict = {}
    for lineno, raw in enumerate(_read_file(path, "config file").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip().strip("'\"")
        if not eq or not key or not value:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        want = _CONFIG_KEYS[key]
        try:
            if want is bool:
                if value not in ("true", "false"):
                    raise ValueError("expected true or false")
                out[key] = value == "true"
            else:
                out[key] = want(value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return out


def _parse_hidden(text: str) -> tuple[int, ...]:
    try:
        layers = tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise UsageError(f"bad hidden layout {text!r}: {exc}") from exc
    if not layers or any(h < 1 for h in layers):
        raise UsageError(f"bad hidden layout {text!r}: want comma-separated positive widths")
    return layers


# -- execution -------------------------------------------------------------


def _solver_command(args: argparse.Namespace) -> Optional[str]:
    if args.solver:
        return None if args.solver == "builtin" else args.solver
    env = os.environ.get(SOLVER_ENV)
    if env:
        return None if env == "builtin" else env
    return None


def _run_once(args: argparse.Namespace, schema: DatasetSchema, spec: PropertySpec, seed: int) -> TestSuite:
    mut = _load_mut(args.mut, schema)
    try:
        if args.tester in ("random", "art"):
            cfg = BaselineConfig(
                budget=args.max_samples, kind=args.tester, art_pool=args.art_pool, seed=seed
            )
            runner = random_test if args.tester == "random" else adaptive_random_test
            return runner(mut, spec, schema, cfg)
        wbm = args.tester[len("engine-"):] if args.tester.startswith("engine-") else args.wbm
        cfg = EngineConfig(
            wbm=wbm,
            multi=args.multi,
            max_samples=args.max_samples,
            bound_cex=args.bound_cex,
            initial_train_size=args.initial_train_size,
            retrain_trigger=args.retrain_trigger,
            seed=seed,
            solver_command=_solver_command(args),
            solver_timeout=args.solver_timeout,
            train=TrainParams(
                hidden=_parse_hidden(args.hidden),
                min_leaf=args.min_leaf,
                epochs=args.epochs,
                learning_rate=args.learning_rate,
            ),
            dump_dir=args.dump_smt,
        )
        return generate_test_suite(mut, spec, schema, cfg)
    finally:
        mut.close()


def _mean_sem(values: Sequence[float]) -> str:
    mean = statistics.fmean(values)
    sem = statistics.stdev(values) / math.sqrt(len(values)) if len(values) > 1 else 0.0
    return f"{mean:.2f} ± {sem:.2f}"


def _suite_path(base: str, seed: int, repeated: bool) -> str:
    if not repeated:
        return base
    stem, ext = os.path.splitext(base)
    return f"{stem}-s{seed}{ext or '.jsonl'}"


def _cmd_run(args: argparse.Namespace) -> int:
    schema = _load_schema(args.schema)
    spec = _build_property(args.property, schema)
    seeds = list(range(args.seed, args.seed + args.repeat))
    suites = []
    for seed in seeds:
        suite = _run_once(args, schema, spec, seed)
        if suite.stats.get("error"):
            print(f"error: {suite.stats['error']}", file=sys.stderr)
            return 3
        write_suite(suite, _suite_path(args.out, seed, args.repeat > 1))
        suites.append(suite)

    print(f"tester: {suites[0].tester}    property: {property_id(spec)}")
    if args.repeat == 1:
        suite = suites[0]
        stats = suite.stats
        line = f"counterexamples: {len(suite.counterexamples)}    queries: {stats['queries']}"
        if "solver_calls" in stats:
            line += f"    solver calls: {stats['solver_calls']}    retrains: {stats['retrains']}"
        print(line)
        print(f"suite written to {args.out}")
    else:
        found = [bool(s.counterexamples) for s in suites]
        print(f"runs: {len(seeds)} (seeds {seeds[0]}..{seeds[-1]})")
        print(f"detection probability: {sum(found) / len(found):.2f}")
        print(f"suite size: {_mean_sem([len(s.counterexamples) for s in suites])}")
        print(f"queries: {_mean_sem([s.stats['queries'] for s in suites])}")
        if "solver_calls" in suites[0].stats:
            print(f"solver calls: {_mean_sem([s.stats['solver_calls'] for s in suites])}")
        print(f"wall time: {_mean_sem([s.stats['wall_time'] for s in suites])} s")
        print(f"suites written to {_suite_path(args.out, seeds[0], True)} ...")
    if args.fail_on_cex and any(s.counterexamples for s in suites):
        return 1
    return 0


_TESTERS = ("engine-dt", "engine-nn", "random", "art")


def _read_manifest(path: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(_read_file(path, "manifest"))))
    if not rows:
        raise UsageError(f"manifest {path!r} has no cells")
    for i, row in enumerate(rows):
        missing = [k for k in ("tester", "mut", "property") if not row.get(k)]
        if missing:
            raise UsageError(f"manifest {path!r} row {i + 1}: missing {', '.join(missing)}")
        if row["tester"] not in _TESTERS:
            raise UsageError(
                f"manifest {path!r} row {i + 1}: unknown tester {row['tester']!r} "
                f"(want one of {', '.join(_TESTERS)})"
            )
        extra = row.get("max_samples")
        if extra and not extra.isdigit():
            raise UsageError(f"manifest {path!r} row {i + 1}: bad max_samples {extra!r}")
    return rows


def _cmd_bench(args: argparse.Namespace) -> int:
    default_schema = _load_schema(args.schema)
    cells = _read_manifest(args.manifest)
    results = []
    for cell in cells:
        # optional per-cell schema column so one table can mix models
        # over different data formats
        schema = _load_schema(cell["schema"]) if cell.get("schema") else default_schema
        spec = _build_property(cell["property"], schema)
        cell_args = argparse.Namespace(**vars(args))
        cell_args.tester = cell["tester"]
        cell_args.mut = cell["mut"]
        if cell.get("max_samples"):
            cell_args.max_samples = int(cell["max_samples"])
        found, sizes, queries = [], [], []
        for seed in range(args.seed, args.seed + args.repeat):
            suite = _run_once(cell_args, schema, spec, seed)
            if suite.stats.get("error"):
                print(f"error in cell {cell['tester']}/{cell['mut']}: {suite.stats['error']}", file=sys.stderr)
                return 3
            found.append(bool(suite.counterexamples))
            sizes.append(len(suite.counterexamples))
            queries.append(suite.stats["queries"])
        results.append(
            {
                "tester": cell["tester"],
                "mut": cell["mut"],
                "property": cell["property"],
                "probability": f"{sum(found) / len(found):.2f}",
                "mean_suite_size": f"{statistics.fmean(sizes):.2f}",
                "mean_queries": f"{statistics.fmean(queries):.1f}",
            }
        )

    fields = ["tester", "mut", "property", "probability", "mean_suite_size", "mean_queries"]
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(results)
        table = buf.getvalue()
    else:
        head = "| " + " | ".join(fields) + " |"
        rule = "|" + "|".join([" --- "] * len(fields)) + "|"
        body = ["| " + " | ".join(r[f] for f in fields) + " |" for r in results]
        table = "\n".join([head, rule] + body) + "\n"
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(table)
    print(table, end="")
    return 0


# -- argument parsing ------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file supplying any flag below")
    p.add_argument("--schema", help="XML data-format file")
    p.add_argument("--wbm", choices=("dt", "nn"), default=None, help="white-box kind (default dt)")
    p.add_argument("--multi", action="store_true", default=None, help="collect many counterexamples")
    p.add_argument("--max-samples", type=int, default=None, help="candidate budget (default 1000)")
    p.add_argument("--bound-cex", action="store_true", default=None,
                   help="restrict candidates to the training data's bounds")
    p.add_argument("--seed", type=int, default=None, help="base RNG seed (default 0)")
    p.add_argument("--repeat", type=int, default=None, help="number of seeded runs (default 1)")
    p.add_argument("--solver", default=None,
                   help=f"solver command ('builtin' for in-process; ${SOLVER_ENV} overrides the default)")
    p.add_argument("--solver-timeout", type=float, default=None, help="per-call solver timeout, seconds")
    p.add_argument("--dump-smt", metavar="DIR", default=None, help="write each solver script to DIR")


_DEFAULTS = {
    "wbm": "dt",
    "multi": False,
    "max_samples": 1000,
    "bound_cex": False,
    "seed": 0,
    "repeat": 1,
    "solver": None,
    "solver_timeout": None,
    "dump_smt": None,
    "hidden": "10,10",
    "initial_train_size": 200,
    "retrain_trigger": 5,
    "art_pool": 10,
    "min_leaf": 1,
    "epochs": 80,
    "learning_rate": 0.1,
    "fail_on_cex": False,
    "tester": "engine",
    "out": None,
}


def _apply_config(args: argparse.Namespace) -> None:
    """Resolution order: explicit flag, then config file, then default."""
    layered = dict(_DEFAULTS)
    if args.config:
        layered.update(_parse_config_file(args.config))
    for key, value in layered.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="veritest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="test one model against one property")
    _add_common(run)
    run.add_argument("--property", help="fairness:s=<feature> | concept:<formula> | trojan:<file> | <property file>")
    run.add_argument("--mut", help="builtin:<model.json> | external:<command>")
    run.add_argument("--tester", choices=("engine", "engine-dt", "engine-nn", "random", "art"),
                     default=None, help="which tester to run (default engine)")
    run.add_argument("--fail-on-cex", action="store_true", default=None,
                     help="exit 1 when violations are found")
    run.add_argument("--out", default=None, help="suite output path (default suite.jsonl)")

    bench = sub.add_parser("bench", help="sweep a manifest of (tester, mut, property) cells")
    _add_common(bench)
    bench.add_argument("--manifest",
                       help="CSV with columns tester,mut,property[,max_samples][,schema]")
    bench.add_argument("--format", choices=("csv", "md"), default="csv", help="table format")
    bench.add_argument("--out", default=None, help="table output path (default bench.csv)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        _apply_config(args)
        if args.command == "run":
            if args.out is None:
                args.out = "suite.jsonl"
            for required in ("schema", "property", "mut"):
                if getattr(args, required) is None:
                    raise UsageError(f"--{required} is required (flag or config file)")
            return _cmd_run(args)
        if args.out is None:
            args.out = "bench.csv"
        if args.schema is None or args.manifest is None:
            raise UsageError("--schema and --manifest are required")
        return _cmd_bench(args)
    except (UsageError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except OracleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Acceptance gate: eleven scaled-down planted experiments over the pipeline.

Each numbered test checks one acceptance criterion end to end, from encoding
fidelity through the generation loop to the benchmark harness, and prints a
single PASS/FAIL verdict line (run with ``pytest -s`` to see them; under
plain ``pytest -v`` the test outcome itself is the per-criterion line).

A shared harness revalidates every suite entry these tests produce against a
fresh oracle wrapper; the final tally test asserts that nothing ever failed
revalidation.
"""

import csv
import itertools
import json
import random
import time
from fractions import Fraction
from pathlib import Path

from veritest.cli import main
from veritest.engine import EngineConfig, check_candidate, generate_test_suite
from veritest.oracle import ConstantModel, RuleModel, TableModel, builtin_mut
from veritest.propdsl import (
    AssertClause,
    AssumeClause,
    BoolLit,
    Cmp,
    FeatureRef,
    PredictRef,
    PropertySpec,
    concept_property,
    fairness_property,
    parse_condition,
    trojan_property,
)
from veritest.schema import (
    DatasetSchema,
    FeatureSpec,
    Instance,
    LabelSpec,
    Prediction,
    parse_schema,
)
from veritest.smt import (
    LOGIC,
    SmtScript,
    block_assignment,
    class_var,
    encode_decision_tree,
    encode_mlp,
    encode_property,
    feature_var,
    solve,
)
from veritest.smt.script import feature_sort, rat
from veritest.solver import solve_text
from veritest.surrogate import (
    DecisionTree,
    DtLeaf,
    LabeledSet,
    TrainParams,
    dt_predict,
    mlp_forward,
    train_decision_tree,
)

from conftest import all_binary_instances, binary_schema, random_quantized_mlp


def verdict(criterion: str, ok: bool, detail: str) -> None:
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {criterion}: {detail}"


REVALIDATED = {"entries": 0, "failed": 0}


def revalidate(suite, model, schema, spec) -> None:
    """Re-check every suite entry against a fresh oracle wrapper."""
    mut = builtin_mut(model, schema)
    for cex in suite.counterexamples:
        ok, predictions = check_candidate(mut, spec, cex.instances)
        REVALIDATED["entries"] += 1
        if not ok or predictions != cex.mut_predictions:
            REVALIDATED["failed"] += 1
    assert REVALIDATED["failed"] == 0, "a suite entry failed revalidation"


def standalone(schema, parts, pins, extra=()):
    """One-copy script with pinned features, mirroring the engine's layout."""
    decls = [(feature_var(i, 1), feature_sort(f)) for i, f in enumerate(schema.features)]
    decls += [(class_var(l.name, 1), "Int") for l in schema.labels]
    domain = tuple(f"(= {feature_var(i, 1)} {rat(v)})" for i, v in sorted(pins.items()))
    return SmtScript(
        logic=LOGIC,
        declarations=tuple(decls) + parts[0],
        domain_assertions=domain,
        surrogate_assertions=parts[1],
        property_assertions=tuple(extra),
    )


def test_criterion_01_tree_encoding_matches_tree_inference():
    # 20 trees trained on random labelings of the full 6-bit input space;
    # pinned scripts must be sat exactly at the class the tree predicts.
    schema = binary_schema(6)
    instances = all_binary_instances(6)
    rng = random.Random(101)
    start = time.monotonic()
    scripts = 0
    mismatches = 0
    for t in range(20):
        data = LabeledSet(schema)
        for x in instances:
            data.add(x, Prediction((rng.randrange(2),)))
        tree = train_decision_tree(data, TrainParams(min_leaf=1, seed=t))
        parts = encode_decision_tree(tree, 1, schema)
        for x in instances:
            want = dt_predict(tree, x).classes[0]
            pins = dict(enumerate(x.values))
            for klass in (0, 1):
                script = standalone(schema, parts, pins, (f"(= {class_var('y', 1)} {klass})",))
                status, _ = solve(script)
                expected = "sat" if klass == want else "unsat"
                mismatches += status != expected
                scripts += 1
    elapsed = time.monotonic() - start
    verdict(
        "1",
        mismatches == 0 and elapsed < 60.0,
        f"20 trees x 64 inputs x 2 classes = {scripts} scripts, "
        f"{mismatches} disagreements with dt_predict, {elapsed:.1f}s",
    )


def exact_preacts(net, x: Instance) -> list[tuple[Fraction, ...]]:
    """Pre-activation vector of every layer, computed independently."""
    outs = x.values
    layers = []
    for w, b in zip(net.weights, net.biases):
        pre = tuple(
            sum((w[j][l] * outs[l] for l in range(len(outs))), start=Fraction(0)) + b[j]
            for j in range(len(w))
        )
        layers.append(pre)
        outs = tuple(v if v > 0 else Fraction(0) for v in pre)
    return layers


def test_criterion_02_net_encoding_matches_exact_forward_pass():
    schema = DatasetSchema(
        features=tuple(
            FeatureSpec(f"x{i}", "continuous", Fraction(-1), Fraction(1)) for i in range(5)
        ),
        labels=(LabelSpec("y", (0, 1, 2)),),
    )
    rng = random.Random(202)
    cases = 0
    class_mismatches = 0
    preact_errors = 0
    for _ in range(20):
        net = random_quantized_mlp(5, (10, 10), 3, rng)
        parts = encode_mlp(net, 1, schema)
        decls = tuple((feature_var(i, 1), "Real") for i in range(5))
        decls += ((class_var("y", 1), "Int"),) + parts[0]
        done = 0
        while done < 50:
            x = Instance(tuple(Fraction(rng.randrange(-1000, 1001), 1000) for _ in range(5)))
            pre, pred = mlp_forward(net, x)
            if pre.count(max(pre)) > 1:  # tied argmax: redraw
                continue
            done += 1
            cases += 1
            pins = tuple(f"(= {feature_var(i, 1)} {rat(v)})" for i, v in enumerate(x.values))
            script = SmtScript(
                logic=LOGIC,
                declarations=decls,
                domain_assertions=pins,
                surrogate_assertions=parts[1],
                property_assertions=(),
            )
            status, model = solve_text(script.text)
            assert status == "sat", "pinned forward-pass script must be satisfiable"
            class_mismatches += model.get(class_var("y", 1)) != pred.classes[0]
            for layer, wanted in enumerate(exact_preacts(net, x), start=1):
                for l, value in enumerate(wanted, start=1):
                    preact_errors += model.get(f"in_{l}_{layer}_1") != value
    verdict(
        "2",
        class_mismatches == 0 and preact_errors == 0,
        f"20 nets x 50 untied inputs = {cases} cases, {class_mismatches} class "
        f"mismatches, {preact_errors} pre-activation errors",
    )


def test_criterion_03_fairness_compiles_to_golden_formula():
    schema = parse_schema(
        "<schema>"
        '<feature name="a" kind="categorical" categories="0,1"/>'
        '<feature name="b" kind="categorical" categories="0,1"/>'
        '<feature name="c" kind="categorical" categories="0,1"/>'
        '<feature name="d" kind="categorical" categories="0,1"/>'
        '<label name="class" classes="0,1"/>'
        "</schema>"
    )
    spec = fairness_property(schema, schema.feature_index("b"))
    golden = PropertySpec(
        assumes=(
            AssumeClause(Cmp("==", FeatureRef("x", 0), FeatureRef("y", 0)), "x[i] == y[i]", (0,)),
            AssumeClause(Cmp("!=", FeatureRef("x", 1), FeatureRef("y", 1)), "x[i] != y[i]", (1,)),
            AssumeClause(Cmp("==", FeatureRef("x", 2), FeatureRef("y", 2)), "x[i] == y[i]", (2,)),
            AssumeClause(Cmp("==", FeatureRef("x", 3), FeatureRef("y", 3)), "x[i] == y[i]", (3,)),
        ),
        assertion=AssertClause(
            Cmp("==", PredictRef("x", 0), PredictRef("y", 0)), "predict(x) == predict(y)"
        ),
        instance_vars=("x", "y"),
    )
    leaf = DecisionTree(root=DtLeaf(Prediction((0,))), schema=schema)
    compiled = encode_property(spec, schema, leaf).property_assertions
    wanted = (
        "(= f_0_1 f_0_2)",
        "(not (= f_1_1 f_1_2))",
        "(= f_2_1 f_2_2)",
        "(= f_3_1 f_3_2)",
        "(not (= class_class_1 class_class_2))",
    )
    verdict(
        "3",
        spec == golden and compiled == wanted,
        "sensitive feature b over {a,b,c,d}: property AST and compiled "
        "formula both match the golden fixture",
    )


def unfair_model(schema, s: int) -> RuleModel:
    cond = parse_condition(f"x[{s}] == 1", [], schema, ["x"])
    return RuleModel(((cond, Prediction((1,))),), Prediction((0,)))


def test_criterion_04_planted_unfairness_is_found():
    schema = binary_schema(4)
    model = unfair_model(schema, 2)
    spec = fairness_property(schema, 2)
    found = 0
    slowest = 0.0
    for seed in range(20):
        start = time.monotonic()
        suite = generate_test_suite(
            builtin_mut(model, schema),
            spec,
            schema,
            EngineConfig(wbm="dt", max_samples=100, seed=seed),
        )
        slowest = max(slowest, time.monotonic() - start)
        assert suite.stats["error"] is None, suite.stats["error"]
        revalidate(suite, model, schema, spec)
        found += bool(suite.counterexamples)
    multi = generate_test_suite(
        builtin_mut(model, schema),
        spec,
        schema,
        EngineConfig(wbm="dt", multi=True, max_samples=50, seed=0),
    )
    assert multi.stats["error"] is None, multi.stats["error"]
    revalidate(multi, model, schema, spec)
    distinct = {tuple(inst.values for inst in cex.instances) for cex in multi.counterexamples}
    verdict(
        "4",
        found == 20 and len(distinct) >= 10 and slowest < 30.0,
        f"{found}/20 seeds found a valid counterexample (slowest run "
        f"{slowest:.1f}s); multi mode returned {len(distinct)} distinct pairs",
    )


def test_criterion_05_constant_model_never_yields_counterexamples():
    schema = binary_schema(4)
    model = ConstantModel(Prediction((0,)))
    spec = fairness_property(schema, 2)
    nonempty = 0
    runs = 0
    for wbm in ("dt", "nn"):
        for seed in range(20):
            if wbm == "dt":
                cfg = EngineConfig(wbm="dt", max_samples=40, initial_train_size=30, seed=seed)
            else:
                cfg = EngineConfig(
                    wbm="nn",
                    max_samples=12,
                    initial_train_size=30,
                    seed=seed,
                    train=TrainParams(hidden=(4,)),
                )
            suite = generate_test_suite(builtin_mut(model, schema), spec, schema, cfg)
            assert suite.stats["error"] is None, suite.stats["error"]
            revalidate(suite, model, schema, spec)
            runs += 1
            nonempty += bool(suite.counterexamples)
    verdict(
        "5",
        nonempty == 0,
        f"{runs} runs (20 seeds x both surrogate kinds) on a constant model "
        f"all returned empty suites",
    )


POISON = (
    (1, 1, 0, 0, 1, 0, 1, 0),
    (1, 1, 1, 1, 0, 0, 0, 1),
    (1, 1, 0, 1, 1, 1, 0, 0),
)


def trigger_table(schema, exceptions) -> TableModel:
    """Rows with f0=1 and f1=1 map to class 1, except the given bit rows."""
    rows = []
    for bits in itertools.product((0, 1), repeat=8):
        trigger = bits[0] == 1 and bits[1] == 1
        z = Prediction((1,)) if trigger and bits not in exceptions else Prediction((0,))
        rows.append((Instance(tuple(Fraction(b) for b in bits)), z))
    return TableModel(tuple(rows))


def test_criterion_06_planted_trojan_rows_are_surfaced():
    schema = binary_schema(8)
    spec = trojan_property(
        schema,
        [0, 1],
        Instance(tuple(Fraction(v) for v in (1, 1, 0, 0, 0, 0, 0, 0))),
        Prediction((1,)),
    )
    poisoned = trigger_table(schema, exceptions=POISON)
    hits = 0
    for seed in range(20):
        suite = generate_test_suite(
            builtin_mut(poisoned, schema),
            spec,
            schema,
            EngineConfig(wbm="dt", max_samples=200, seed=seed),
        )
        assert suite.stats["error"] is None, suite.stats["error"]
        revalidate(suite, poisoned, schema, spec)
        hits += any(
            tuple(int(v) for v in cex.instances[0].values) in POISON
            for cex in suite.counterexamples
        )
    clean = trigger_table(schema, exceptions=())
    leftovers = 0
    for seed in range(5):
        suite = generate_test_suite(
            builtin_mut(clean, schema),
            spec,
            schema,
            EngineConfig(wbm="dt", max_samples=200, seed=seed),
        )
        assert suite.stats["error"] is None, suite.stats["error"]
        leftovers += len(suite.counterexamples)
    verdict(
        "6",
        hits >= 18 and leftovers == 0,
        f"poisoned table: {hits}/20 seeds surfaced a poison row (threshold "
        f"18); fully-poisoned table: {leftovers} counterexamples in 5 runs",
    )


def test_criterion_07_label_implication_violations_found_by_both_surrogates():
    schema = parse_schema(
        "<schema>"
        '<feature name="u" min="0" max="1"/>'
        '<feature name="v" min="0" max="1"/>'
        '<label name="dog" classes="0,1"/>'
        '<label name="animal" classes="0,1"/>'
        "</schema>"
    )
    quarter = parse_condition("x[0] < 0.5 and x[1] < 0.5", [], schema, ["x"])
    model = RuleModel(((quarter, Prediction((1, 0))),), Prediction((1, 1)))
    phi = parse_condition("mut.predict(x)[dog] => mut.predict(x)[animal]", [], schema, ["x"])
    spec = concept_property(schema, phi)
    params = {
        "dt": TrainParams(min_leaf=1),
        "nn": TrainParams(hidden=(4,), epochs=300, learning_rate=0.5),
    }
    found = {"dt": 0, "nn": 0}
    for wbm in ("dt", "nn"):
        for seed in range(20):
            suite = generate_test_suite(
                builtin_mut(model, schema),
                spec,
                schema,
                EngineConfig(wbm=wbm, max_samples=25, seed=seed, train=params[wbm]),
            )
            assert suite.stats["error"] is None, suite.stats["error"]
            revalidate(suite, model, schema, spec)
            found[wbm] += bool(suite.counterexamples)
    trivial = concept_property(schema, BoolLit(True))
    nonempty = 0
    for wbm in ("dt", "nn"):
        for seed in range(3):
            suite = generate_test_suite(
                builtin_mut(model, schema),
                trivial,
                schema,
                EngineConfig(
                    wbm=wbm,
                    max_samples=10,
                    initial_train_size=20,
                    seed=seed,
                    train=params[wbm],
                ),
            )
            assert suite.stats["error"] is None, suite.stats["error"]
            nonempty += len(suite.counterexamples)
    verdict(
        "7",
        found["dt"] == 20 and found["nn"] == 20 and nonempty == 0,
        f"dog-implies-animal violated in {found['dt']}/20 dt and "
        f"{found['nn']}/20 nn seeds; constant-true property produced "
        f"{nonempty} counterexamples",
    )


def test_criterion_08_blocking_enumerates_all_solutions_then_unsat():
    schema = parse_schema(
        "<schema>"
        '<feature name="c" kind="categorical" categories="0,1,2,3,4"/>'
        '<label name="y" classes="0,1"/>'
        "</schema>"
    )
    leaf = DecisionTree(root=DtLeaf(Prediction((1,))), schema=schema)
    phi = parse_condition("mut.predict(x)[y] == 0", [], schema, ["x"])
    script = encode_property(concept_property(schema, phi), schema, leaf)
    seen = set()
    status, assignment = solve(script)
    while status == "sat":
        value = assignment.features[0][0]
        assert value not in seen, "solver repeated a blocked assignment"
        seen.add(value)
        script = script.with_block(block_assignment(assignment))
        status, assignment = solve(script)
    verdict(
        "8",
        seen == {Fraction(v) for v in range(5)} and status == "unsat",
        f"5-solution script: enumerated {sorted(int(v) for v in seen)}, then unsat",
    )


def test_criterion_09_bound_cex_stays_inside_training_span():
    schema = parse_schema(
        "<schema>"
        '<feature name="g" kind="integer" min="0" max="10"/>'
        '<feature name="h" kind="integer" min="0" max="10"/>'
        '<label name="y" classes="0,1"/>'
        "</schema>"
    )
    model = ConstantModel(Prediction((1,)))
    phi = parse_condition("mut.predict(x)[y] == 0", [], schema, ["x"])
    spec = concept_property(schema, phi)
    total = 0
    outside = 0
    for seed in range(20):
        # training rows whose feature 0 spans exactly [2, 7]
        rows = tuple(
            Instance((Fraction(f0), Fraction((seed * 3 + k) % 11)))
            for k, f0 in enumerate((2, 7, 4, 5, 3))
        )
        cfg = EngineConfig(
            wbm="dt",
            multi=True,
            max_samples=8,
            bound_cex=True,
            seed=seed,
            seed_instances=rows,
        )
        suite = generate_test_suite(builtin_mut(model, schema), spec, schema, cfg)
        assert suite.stats["error"] is None, suite.stats["error"]
        assert suite.counterexamples, "bounded run found nothing; check would be vacuous"
        revalidate(suite, model, schema, spec)
        for cex in suite.counterexamples:
            total += 1
            outside += not (2 <= cex.instances[0].values[0] <= 7)
    verdict(
        "9",
        total > 0 and outside == 0,
        f"20 bounded runs, {total} suite instances, {outside} outside [2, 7] "
        f"on feature 0",
    )


SCHEMA4_XML = (
    "<schema>"
    + "".join(f'<feature name="f{i}" kind="categorical" categories="0,1"/>' for i in range(4))
    + '<label name="y" classes="0,1"/></schema>'
)
SCHEMA8_XML = (
    "<schema>"
    + "".join(f'<feature name="f{i}" kind="categorical" categories="0,1"/>' for i in range(8))
    + '<label name="y" classes="0,1"/></schema>'
)


def write_bench_inputs(tmp_path) -> None:
    (tmp_path / "schema4.xml").write_text(SCHEMA4_XML)
    (tmp_path / "schema8.xml").write_text(SCHEMA8_XML)
    unfair = {"type": "rule", "rules": [{"if": "x[2] == 1", "classes": [1]}], "default": [0]}
    (tmp_path / "unfair.json").write_text(json.dumps(unfair))
    rows = []
    for bits in itertools.product((0, 1), repeat=8):
        trigger = bits[0] == 1 and bits[1] == 1
        z = 1 if trigger and bits not in POISON else 0
        rows.append({"values": list(bits), "classes": [z]})
    (tmp_path / "trojan.json").write_text(json.dumps({"type": "table", "rows": rows}))
    trigger_spec = {
        "trigger_features": [0, 1],
        "instance": [1, 1, 0, 0, 0, 0, 0, 0],
        "classes": [1],
    }
    (tmp_path / "trigger.json").write_text(json.dumps(trigger_spec))


def test_criterion_10_bench_table_shows_engine_margin(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    write_bench_inputs(tmp_path)
    (tmp_path / "bench.cfg").write_text(
        "hidden = 8\n"
        "epochs = 300\n"
        "learning_rate = 0.5\n"
        "initial_train_size = 400\n"
        "min_leaf = 1\n"
    )
    lines = ["tester,mut,property,max_samples,schema"]
    for tester in ("engine-dt", "engine-nn", "random", "art"):
        lines.append(f"{tester},builtin:unfair.json,fairness:s=2,15,schema4.xml")
    for tester in ("engine-dt", "engine-nn", "random", "art"):
        lines.append(f"{tester},builtin:trojan.json,trojan:trigger.json,15,schema8.xml")
    (tmp_path / "manifest.csv").write_text("\n".join(lines) + "\n")
    rc = main(
        [
            "bench",
            "--schema",
            "schema4.xml",
            "--manifest",
            "manifest.csv",
            "--config",
            "bench.cfg",
            "--repeat",
            "20",
            "--out",
            "bench.csv",
        ]
    )
    capsys.readouterr()
    assert rc == 0, "bench run failed"
    with open(tmp_path / "bench.csv", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames
        rows = list(reader)
    shape_ok = (
        fields == ["tester", "mut", "property", "probability", "mean_suite_size", "mean_queries"]
        and len(rows) == 8
    )
    probs = {(r["tester"], r["property"]): float(r["probability"]) for r in rows}
    dt = probs[("engine-dt", "trojan:trigger.json")]
    nn = probs[("engine-nn", "trojan:trigger.json")]
    rnd = probs[("random", "trojan:trigger.json")]
    art = probs[("art", "trojan:trigger.json")]
    verdict(
        "10",
        shape_ok and dt >= rnd and dt >= art and nn >= rnd and nn >= art,
        f"8-cell probability table; trojan detection engine-dt {dt:.2f} / "
        f"engine-nn {nn:.2f} vs random {rnd:.2f} / art {art:.2f}",
    )


def test_criterion_11_identical_seeds_write_identical_suites(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "schema4.xml").write_text(SCHEMA4_XML)
    unfair = {"type": "rule", "rules": [{"if": "x[2] == 1", "classes": [1]}], "default": [0]}
    (tmp_path / "unfair.json").write_text(json.dumps(unfair))
    args = [
        "run",
        "--schema",
        "schema4.xml",
        "--property",
        "fairness:s=2",
        "--mut",
        "builtin:unfair.json",
        "--tester",
        "engine",
        "--wbm",
        "dt",
        "--max-samples",
        "100",
        "--seed",
        "7",
    ]
    assert main([*args, "--out", "first.jsonl"]) == 0
    assert main([*args, "--out", "second.jsonl"]) == 0
    capsys.readouterr()
    first = Path("first.jsonl").read_bytes()
    second = Path("second.jsonl").read_bytes()
    verdict(
        "11",
        first == second and len(first) > 0,
        f"same seed and solver twice: both suite files are the identical "
        f"{len(first)} bytes",
    )


def test_revalidation_tally_is_clean():
    verdict(
        "5 (harness tally)",
        REVALIDATED["failed"] == 0 and REVALIDATED["entries"] > 0,
        f"{REVALIDATED['entries']} suite entries revalidated across all "
        f"acceptance runs, {REVALIDATED['failed']} failures",
    )

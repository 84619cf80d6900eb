"""Acceptance criteria 1-7. A PASS/FAIL line per criterion is printed after the run."""

import json
import random
import re
import time

import pytest

from conftest import CORPUS, GOLDEN, corpus_annotations, corpus_files, needs_solver, run_corpus
from liftc import ir
from liftc.cli import read_candidate, run_cli
from liftc.errors import LiftError
from liftc.frontend import interpret, load_kernel, parse_source
from liftc.vcgen import make_vcs
from test_vcgen import exhaustive_failures

WINDOW = str(CORPUS / "window_sum.mc")
FLAGSHIP_INV = "(== result (conv1d (slice data 0 (+ i 1)) (seq SeqInt 1 1) 1))"
FLAGSHIP_BUDGET_S = 60.0
SOUNDNESS_INPUTS = 500


def equality_clause(sexp):
    inv = ir.parse_sexp(sexp)
    parts = inv.args if isinstance(inv, ir.Op) and inv.kind == "and" else (inv,)
    eqs = [p for p in parts if isinstance(p, ir.Op) and p.kind == "=="]
    assert len(eqs) == 1
    return ir.to_sexp(eqs[0])


@pytest.fixture(scope="module")
def flagship(tmp_path_factory):
    out = tmp_path_factory.mktemp("flagship")
    start = time.monotonic()
    code = run_cli([WINDOW, "--out", str(out), "--timeout", "10", "--emit", "both"])
    elapsed = time.monotonic() - start
    return code, json.loads((out / "window_sum.json").read_text()), elapsed, out


@needs_solver
@pytest.mark.criterion(1)
def test_c1_flagship(flagship):
    code, report, _, out = flagship
    assert code == 0
    assert report["status"] == "found"
    assert report["lifted"]["op"] == "conv1d"
    assert report["lifted"]["constants"] == {"kernel": [1, 1], "stride": 1}
    assert report["lifted"]["args"] == {"data": "data"}
    assert equality_clause(report["invariant"]) == FLAGSHIP_INV
    assert "liftc_conv1d(data, data_len, k0, 2, 1, result)" in (out / "window_sum.c").read_text()


@needs_solver
@pytest.mark.criterion(2)
def test_c2_flagship_time(flagship):
    code, _, elapsed, _ = flagship
    print(f"flagship wall time {elapsed:.2f} s")
    assert code == 0
    assert elapsed < FLAGSHIP_BUDGET_S


def apply_tree(tree, env, registry):
    """Evaluate a report's call tree directly through the registry."""
    if tree["op"] == "empty_output":
        return ()
    spec = registry[tree["op"]]
    args = []
    for p, _ in spec.params:
        if p in tree["constants"]:
            v = tree["constants"][p]
            args.append(tuple(v) if isinstance(v, list) else v)
        else:
            a = tree["args"][p]
            args.append(env[a] if isinstance(a, str) else apply_tree(a, env, registry))
    return registry.apply(tree["op"], args)


def random_inputs(ast, rng):
    n = rng.randint(0, 12)
    return {name: [rng.randint(-10, 10) for _ in range(n)] if t.is_seq else rng.randint(-10, 10)
            for name, t in ast.params}


@needs_solver
@pytest.mark.criterion(3)
def test_c3_soundness(corpus_run, registry):
    out, codes = corpus_run
    found = [p for p in corpus_files() if codes[p.stem] == 0]
    assert {"window_sum", "dotprod", "vecadd", "scale3", "weighted_window"} <= {p.stem for p in found}
    for path in found:
        ast = parse_source(path.read_text())
        report = json.loads((out / f"{path.stem}.json").read_text())
        rng = random.Random(f"soundness-{path.stem}")
        mismatches = checked = 0
        for _ in range(SOUNDNESS_INPUTS):
            args = random_inputs(ast, rng)
            try:
                expected = interpret(ast, args)
            except LiftError:
                continue  # the source itself faults
            env = {k: tuple(v) if isinstance(v, list) else v for k, v in args.items()}
            checked += 1
            mismatches += apply_tree(report["lifted"], env, registry) != expected
        print(f"{path.stem}: {checked} inputs checked, {mismatches} mismatches")
        assert checked > SOUNDNESS_INPUTS // 2
        assert mismatches == 0


@needs_solver
@pytest.mark.criterion(4)
def test_c4_negative_controls(corpus_run, tmp_path, registry, capsys):
    out, codes = corpus_run
    assert codes["adjprod"] == 2
    report = json.loads((out / "adjprod.json").read_text())
    assert report["status"] == "no_candidate" and report["lifted"] is None
    assert report["stats"]["enumerated"] > 0

    capsys.readouterr()
    code = run_cli([WINDOW, "--verify-only", str(GOLDEN / "window_sum_k12.cand"), "--out", str(tmp_path)])
    assert code == 2
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["status"] == "counterexample"
    loop = load_kernel(WINDOW)
    cand = read_candidate(GOLDEN / "window_sum_k12.cand", loop, registry)
    vc = {v.label: v for v in make_vcs(loop, cand, registry)}[verdict["vc"]]
    witness = {k: tuple(v) if isinstance(v, list) else v for k, v in verdict["witness"].items()}
    assert ir.evaluate(vc.body, witness, registry) is False


@pytest.mark.criterion(5)
def test_c5_operator_properties(registry):
    kernels = {1: (3,), 2: (1, -2), 3: (2, 0, 1)}
    for n in range(11):
        for data in (tuple(range(n)), tuple(-v for v in range(n))):
            for k, kernel in kernels.items():
                for stride in (1, 2):
                    want = (n - k) // stride + 1 if n >= k else 0
                    assert len(registry.apply("conv1d", [data, kernel, stride])) == want
    rng = random.Random(2024)
    for _ in range(200):
        d = tuple(rng.randint(-10, 10) for _ in range(rng.randint(0, 12)))
        assert registry.apply("conv1d", [d, (1,), 1]) == d
    for _ in range(200):
        a = tuple(rng.randint(-10, 10) for _ in range(rng.randint(0, 12)))
        b = tuple(rng.randint(-10, 10) for _ in range(rng.randint(0, 12)))
        assert registry.apply("dot_product", [a, b]) == registry.apply("dot_product", [b, a])


@pytest.mark.criterion(6)
@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_c6_vc_structure(path, registry):
    loop = load_kernel(path)
    cand = read_candidate(GOLDEN / f"{path.stem}.cand", loop, registry)
    vcs = make_vcs(loop, cand, registry)
    assert [vc.label for vc in vcs] == ["initial", "preservation", "termination"]
    assert vcs.to_sexp() == (GOLDEN / f"{path.stem}.vcs").read_text()
    init, pres, term = vcs
    assert pres.body.kind == "=>" and cand.inv in pres.body.args[0].args
    assert term.body.kind == "=>" and term.body.args[1] == cand.ps
    assert exhaustive_failures(loop, cand, registry, max_len=3) == []


@needs_solver
@pytest.mark.criterion(7)
def test_c7_determinism(corpus_run, tmp_path):
    first, codes = corpus_run
    second = tmp_path / "again"
    assert run_corpus(second) == codes
    for path in corpus_files():
        a = (first / f"{path.stem}.json").read_bytes()
        b = (second / f"{path.stem}.json").read_bytes()
        assert a == b, path.stem
    dumps_a = {p.name: p.read_bytes() for p in (first / "smt").iterdir()}
    dumps_b = {p.name: p.read_bytes() for p in (second / "smt").iterdir()}
    assert dumps_a and dumps_a.keys() == dumps_b.keys()
    assert dumps_a == dumps_b

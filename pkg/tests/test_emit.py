import json
import shutil
import subprocess
from pathlib import Path

import pytest

from conftest import corpus_files, needs_solver
from liftc import emit, ir
from liftc.errors import NotFound
from liftc.frontend import LoopNest, load_kernel
from liftc.ir import SEQ_SEQ_INT
from liftc.synth import GrammarConfig, Stats, Status, SynthesisResult, synthesize
from liftc.vcgen import Candidate

SHIPPED_HEADER = Path(emit.__file__).with_name(emit.HEADER_NAME)
have_cc = pytest.mark.skipif(shutil.which("cc") is None, reason="no C compiler")


def kernel(stem):
    return load_kernel(next(p for p in corpus_files() if p.stem == stem))


@pytest.fixture(scope="module")
def window_result(registry):
    return synthesize(kernel("window_sum"), GrammarConfig(), registry)


@pytest.fixture(scope="module")
def dot_result(registry):
    return synthesize(kernel("dotprod"), GrammarConfig(), registry)


def matmul_result():
    loop = LoopNest(name="mm", params=(("A", SEQ_SEQ_INT), ("B", SEQ_SEQ_INT)), state_vars=(),
                    init={}, cond=ir.FALSE, update={}, output_var="C", output_type=SEQ_SEQ_INT,
                    counter="i", lo=ir.Int(0), hi=ir.Int(0))
    term = ir.call("matmul", ir.Var("A"), ir.Var("B"))
    cand = Candidate(ir.eq(ir.Var("C"), term), ir.TRUE, {"index": 0, "term": term})
    return SynthesisResult(Status.FOUND, loop, cand, Stats(), solver="z3 -in")


def test_header_matches_shipped_file(registry):
    assert SHIPPED_HEADER.read_text() == emit.emit_header(registry)
    assert emit.prototype(registry["conv1d"]) == (
        "int liftc_conv1d(const int *data, int data_len, const int *kernel, int kernel_len, int stride, int *out);")


@needs_solver
def test_window_sum_json(window_result, registry):
    report = json.loads(emit.emit_json(window_result, registry, timings=False))
    assert list(report) == ["kernel", "status", "lifted", "invariant", "verification", "stats"]
    assert report["lifted"] == {"op": "conv1d", "args": {"data": "data"},
                                "constants": {"kernel": [1, 1], "stride": 1}}
    assert report["verification"]["mode"] == "full" and report["verification"]["bound"] is None
    assert report["stats"]["wall_ms"] == 0
    assert list(report["stats"]) == ["enumerated", "oracle_pruned", "smt_queries", "counterexamples", "wall_ms"]
    assert emit.emit_json(window_result, registry, timings=False) == emit.emit_json(window_result, registry, False)


@needs_solver
def test_dotprod_json_and_stub(dot_result, registry):
    lifted = json.loads(emit.emit_json(dot_result, registry))["lifted"]
    assert lifted == {"op": "dot_product", "args": {"a": "a", "b": "b"}, "constants": {}}
    stub = emit.emit_c_stub(dot_result, registry)
    assert "return liftc_dot_product(a, a_len, b, b_len);" in stub


@needs_solver
def test_window_sum_stub(window_result, registry):
    stub = emit.emit_c_stub(window_result, registry)
    assert "int window_sum(const int *data, int data_len, int *result)" in stub
    assert "static const int k0[] = {1, 1};" in stub
    assert "return liftc_conv1d(data, data_len, k0, 2, 1, result);" in stub


def test_not_found(registry):
    res = SynthesisResult(Status.NO_CANDIDATE, kernel("adjprod"))
    with pytest.raises(NotFound):
        emit.emit_json(res, registry)
    with pytest.raises(NotFound):
        emit.emit_c_stub(res, registry)
    report = emit.report(res, registry)
    assert report["status"] == "no_candidate" and report["lifted"] is None and report["invariant"] is None


def test_matmul_stub(registry):
    stub = emit.emit_c_stub(matmul_result(), registry)
    assert "int mm(const int *A, int A_rows, int A_cols, const int *B, int B_rows, int B_cols, int *C, int *C_cols)" in stub
    assert "return liftc_matmul(A, A_rows, A_cols, B, B_rows, B_cols, C, C_cols);" in stub


def test_nested_call_tree(registry):
    term = ir.parse_sexp("(elemwise_mul data (conv1d data (seq SeqInt 0 1) 1))")
    tree = emit.call_tree(term, registry)
    assert tree == {"op": "elemwise_mul", "args": {"a": "data", "b": {
        "op": "conv1d", "args": {"data": "data"}, "constants": {"kernel": [0, 1], "stride": 1}}}, "constants": {}}


def _compile(tmp_path, name, text):
    shutil.copy(SHIPPED_HEADER, tmp_path / emit.HEADER_NAME)
    src = tmp_path / f"{name}.c"
    src.write_text(text)
    return subprocess.run(["cc", "-std=c99", "-pedantic", "-Wall", "-Wextra", "-Werror", "-c", str(src),
                           "-o", str(tmp_path / f"{name}.o")], capture_output=True, text=True)


@have_cc
def test_stubs_compile(tmp_path, registry):
    loop = kernel("adjprod")
    term = ir.parse_sexp("(elemwise_mul data (conv1d data (seq SeqInt 0 1) 1))")
    nested = SynthesisResult(Status.FOUND, loop, Candidate(ir.eq(ir.Var("result"), term), ir.TRUE,
                                                           {"index": 0, "term": term}), Stats())
    empty = SynthesisResult(Status.FOUND, kernel("empty_loop"), Candidate(ir.TRUE, ir.TRUE, {"index": 0}), Stats())
    for name, res in (("mm", matmul_result()), ("adj", nested), ("empty", empty)):
        out = _compile(tmp_path, name, emit.emit_c_stub(res, registry))
        assert out.returncode == 0, out.stderr

import itertools

import pytest

from conftest import corpus_files, needs_solver
from liftc import ir
from liftc.errors import LiftError
from liftc.frontend import load_kernel
from liftc.synth import (GrammarConfig, Oracle, Status, enumerate_candidates, make_test_suite,
                         oracle_prefilter, synthesize)
from liftc.vcgen import Candidate

P = ir.parse_sexp


def kernel(stem):
    return load_kernel(next(p for p in corpus_files() if p.stem == stem))


def test_config_validation():
    with pytest.raises(LiftError):
        GrammarConfig(max_depth=0)
    with pytest.raises(LiftError):
        GrammarConfig(slice_offsets=())
    with pytest.raises(LiftError):
        GrammarConfig(hole_grids={"conv1d": {"stride": ()}})


def test_test_suite_deterministic_and_well_formed():
    loop = kernel("dotprod")
    a = make_test_suite(loop, GrammarConfig(seed=5))
    assert a == make_test_suite(loop, GrammarConfig(seed=5))
    assert a != make_test_suite(loop, GrammarConfig(seed=6))
    for env in a:
        assert len(env["a"]) == len(env["b"])
        assert all(-10 <= v <= 10 for v in env["a"] + env["b"])


def test_enumeration_order(registry):
    loop = kernel("window_sum")
    first = list(itertools.islice(enumerate_candidates(loop, GrammarConfig(), registry), 8))
    assert [c.index for c in first] == list(range(8))
    # the empty-output summary comes first, then depth-1 terms in registry order
    assert ir.to_sexp(first[0].ps) == "(== result (seq SeqInt))"
    assert ir.to_sexp(first[4].ps) == "(== result (conv1d data (seq SeqInt -2) 1))"
    assert ir.to_sexp(first[4].inv) == "(== result (conv1d (slice data 0 i) (seq SeqInt -2) 1))"
    again = list(itertools.islice(enumerate_candidates(loop, GrammarConfig(), registry), 8))
    assert [(c.ps, c.inv) for c in again] == [(c.ps, c.inv) for c in first]


def test_enumeration_without_extras(registry):
    loop = kernel("window_sum")
    cfg = GrammarConfig(empty_output=False, bound_conjuncts=False, slice_offsets=(1,))
    first = next(iter(enumerate_candidates(loop, cfg, registry)))
    assert ir.to_sexp(first.inv) == "(== result (conv1d (slice data 0 (+ i 1)) (seq SeqInt -2) 1))"


def test_oracle_trace_and_wrong_kernel(registry):
    loop = kernel("window_sum")
    good = Candidate(P("(== result (conv1d data (seq SeqInt 1 1) 1))"),
                     P("(== result (conv1d (slice data 0 (+ i 1)) (seq SeqInt 1 1) 1))"))
    bad = Candidate(P("(== result (conv1d data (seq SeqInt 1 2) 1))"),
                    P("(== result (conv1d (slice data 0 (+ i 1)) (seq SeqInt 1 2) 1))"))
    assert oracle_prefilter(loop, good, [{"data": (1, 2, 3, 4)}], registry)
    res = oracle_prefilter(loop, bad, [{"data": (1, 1, 1)}], registry)
    assert not res and res.witness == {"data": (1, 1, 1)}
    # right summary, wrong invariant: caught on a loop-head state
    off = Candidate(good.ps, P("(== result (conv1d (slice data 0 i) (seq SeqInt 1 1) 1))"))
    res = oracle_prefilter(loop, off, [{"data": (1, 2, 3)}], registry)
    assert not res and "invariant" in res.reason


def test_oracle_skips_faulting_inputs(registry):
    oracle = Oracle(kernel("dotprod"), registry)
    assert not oracle.add_test({"a": (1, 2), "b": (1,)})  # b[1] is out of bounds
    assert oracle.add_test({"a": (1, 2), "b": (3, 4)})
    assert not oracle.add_test({"a": (1, 2), "b": (3, 4)})
    assert oracle.tests == [{"a": (1, 2), "b": (3, 4)}]


def test_adjprod_composition_passes_oracle(registry):
    # a depth-2 composition does compute adjacent products
    loop = kernel("adjprod")
    cand = Candidate(P("(== result (elemwise_mul data (conv1d data (seq SeqInt 0 1) 1)))"),
                     P("(== result (elemwise_mul (slice data 0 (+ i 1)) (conv1d (slice data 0 (+ i 1)) (seq SeqInt 0 1) 1)))"))
    assert oracle_prefilter(loop, cand, make_test_suite(loop, GrammarConfig()), registry)


@needs_solver
@pytest.mark.parametrize("stem, op", [("window_sum", "conv1d"), ("dotprod", "dot_product"), ("scale3", "scalar_scale")])
def test_synthesize_finds(stem, op, registry):
    res = synthesize(kernel(stem), GrammarConfig(), registry)
    assert res.status is Status.FOUND
    assert res.candidate.meta["term"].fn == op
    assert res.stats.enumerated == res.candidate.index + 1
    assert res.stats.smt_queries >= 1


@needs_solver
def test_synthesize_empty_loop(registry):
    res = synthesize(kernel("empty_loop"), GrammarConfig(), registry)
    assert res.found and res.candidate.index == 0


@needs_solver
def test_adjprod_depth_one(registry):
    res = synthesize(kernel("adjprod"), GrammarConfig(max_depth=1), registry)
    assert res.status is Status.NO_CANDIDATE
    assert res.stats.enumerated == res.stats.oracle_pruned + res.stats.smt_queries


@needs_solver
def test_limits(registry):
    loop = kernel("window_sum")
    res = synthesize(loop, GrammarConfig(max_candidates=100), registry)
    assert res.status is Status.NO_CANDIDATE and res.stats.enumerated == 100
    res = synthesize(kernel("weighted_window"), GrammarConfig(total_timeout=0.5), registry)
    assert res.status is Status.TIMEOUT


@needs_solver
def test_bounded_mode_label(registry):
    res = synthesize(kernel("window_sum"), GrammarConfig(bounded=4), registry)
    assert res.found and res.mode == "bounded" and res.bound == 4

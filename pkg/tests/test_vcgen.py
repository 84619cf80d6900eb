import itertools

import pytest

from conftest import GOLDEN, corpus_files
from liftc import ir
from liftc.cli import read_candidate
from liftc.errors import IRTypeError
from liftc.frontend import load_kernel
from liftc.vcgen import VC, Candidate, check_vcs, make_vcs, safety

VALUES = (-2, -1, 0, 1, 2)
SMALL_SEQS = [s for n in range(4) for s in itertools.product(VALUES, repeat=n)]


def golden(stem, registry, cand=None):
    loop = load_kernel(next(p for p in corpus_files() if p.stem == stem))
    return loop, read_candidate(GOLDEN / f"{cand or stem}.cand", loop, registry)


def states(loop, cand, env, registry):
    """Loop states near the invariant: each i in -1..4 with the output the invariant demands, plus junk."""
    out = loop.output_var
    rhs = cand.inv.args[1] if isinstance(cand.inv, ir.Op) and cand.inv.kind == "==" else None
    junk = (0, 1) if loop.output_type is ir.INT else ((), (0,))
    for i in range(-1, 5):
        values = list(junk)
        if rhs is not None:
            try:
                values.append(ir.evaluate(rhs, {**env, loop.counter: i}, registry))
            except Exception:
                pass
        for v in values:
            yield {loop.counter: i, out: v}


def param_envs(loop, max_len=3):
    seq_params = [n for n, t in loop.params if t.is_seq]
    pool = [s for s in SMALL_SEQS if len(s) <= max_len]
    for combo in itertools.product(pool, repeat=len(seq_params)):
        yield dict(zip(seq_params, combo))


def exhaustive_failures(loop, cand, registry, limit=1, max_len=3):
    vcs = make_vcs(loop, cand, registry)
    bad = []
    for env in param_envs(loop, max_len):
        for st in states(loop, cand, env, registry):
            res = check_vcs(vcs, {**env, **st}, registry)
            if not all(res.values()):
                bad.append(({**env, **st}, res))
                if len(bad) >= limit:
                    return bad
    return bad


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_golden_vc_dump(path, registry):
    loop, cand = golden(path.stem, registry)
    vcs = make_vcs(loop, cand, registry)
    assert [vc.label for vc in vcs] == ["initial", "preservation", "termination"]
    assert vcs.to_sexp() == (GOLDEN / f"{path.stem}.vcs").read_text()


@pytest.mark.parametrize("stem", ["window_sum", "scale3", "empty_loop", "weighted_window", "adjprod"])
def test_golden_candidates_concretely_valid(stem, registry):
    loop, cand = golden(stem, registry)
    assert exhaustive_failures(loop, cand, registry) == []


@pytest.mark.parametrize("stem", ["dotprod", "vecadd"])
def test_golden_two_input_candidates_valid(stem, registry):
    # two sequence parameters; the acceptance suite covers length 3
    loop, cand = golden(stem, registry)
    assert exhaustive_failures(loop, cand, registry, max_len=2) == []


def test_wrong_kernel_is_refuted_concretely(registry):
    loop, cand = golden("window_sum", registry, "window_sum_k12")
    bad = exhaustive_failures(loop, cand, registry)
    assert bad
    env, res = bad[0]
    assert not all(res.values())


def test_window_sum_vc_shapes(registry):
    loop, cand = golden("window_sum", registry)
    init, pres, term = make_vcs(loop, cand, registry)
    assert [n for n, _ in init.vars] == ["data"]
    assert [n for n, _ in pres.vars] == ["data", "i", "result"]
    # initial: the invariant at i = 0, result = []
    assert ir.to_sexp(init.body) == "(== (seq SeqInt) (conv1d (slice data 0 (+ 0 1)) (seq SeqInt 1 1) 1))"
    assert pres.body.kind == "=>" and term.body.kind == "=>"
    assert ir.to_sexp(term.body.args[1]) == ir.to_sexp(cand.ps)
    assert ir.not_(loop.cond) in term.body.args[0].args


def test_trivial_candidate(registry):
    loop, _ = golden("window_sum", registry)
    vcs = make_vcs(loop, Candidate(ir.TRUE, ir.TRUE), registry)
    assert len(vcs) == 3
    assert all(check_vcs(vcs, {"data": (1, 2), "i": 0, "result": ()}, registry).values())


def test_ill_typed_candidate(registry):
    loop, _ = golden("window_sum", registry)
    with pytest.raises(IRTypeError):
        make_vcs(loop, Candidate(ir.Var("i"), ir.TRUE), registry)


def test_safety_orders_inner_first():
    e = ir.parse_sexp("(index s (index t 0))")
    conds = safety(e).args
    assert ir.to_sexp(conds[0]) == "(<= 0 0)"
    assert ir.to_sexp(conds[1]) == "(< 0 (len t))"
    assert ir.to_sexp(conds[-1]) == "(< (index t 0) (len s))"


def test_vc_sexp():
    vc = VC("initial", (("x", ir.INT),), ir.le(ir.Int(0), ir.Var("x")))
    assert vc.to_sexp() == "(forall ((x Int)) (<= 0 x))"

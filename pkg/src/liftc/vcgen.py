"""Verification conditions for a (summary, invariant) candidate."""

from __future__ import annotations

from dataclasses import dataclass, field

from liftc import ir
from liftc.errors import IRTypeError
from liftc.ir import BOOL, Expr, Op


@dataclass
class Candidate:
    """A program summary ``ps`` and loop invariant ``inv``, holes filled.

    ``meta`` records how the enumerator built it (index, operator term,
    hole values, slice offset, bound conjuncts).
    """

    ps: Expr
    inv: Expr
    meta: dict = field(default_factory=dict)

    @property
    def index(self):
        return self.meta.get("index")


@dataclass(frozen=True)
class VC:
    label: str
    vars: tuple  # ((name, IRType), ...) -- the universally quantified prefix
    body: Expr

    def to_sexp(self):
        binders = " ".join(f"({n} {t.value})" for n, t in self.vars)
        return f"(forall ({binders}) {ir.to_sexp(self.body)})"


@dataclass(frozen=True)
class VCSet:
    initial: VC
    preservation: VC
    termination: VC

    def __iter__(self):
        return iter((self.initial, self.preservation, self.termination))

    def __len__(self):
        return 3

    def to_sexp(self):
        return "\n".join(f"; {vc.label}\n{vc.to_sexp()}" for vc in self) + "\n"


def safety(*exprs) -> Expr:
    """In-bounds conditions for every ``index`` subterm of ``exprs``.

    Conditions for inner indexes come before outer ones, so a left-to-right
    evaluation of the conjunction never indexes out of bounds.
    """
    conds = []
    seen = set()

    def visit(e):
        for k in ir.children(e):
            visit(k)
        if isinstance(e, Op) and e.kind == "index":
            s, i = e.args
            for c in (ir.le(ir.Int(0), i), ir.lt(i, ir.length(s))):
                if c not in seen:
                    seen.add(c)
                    conds.append(c)

    for e in exprs:
        visit(e)
    return ir.and_(*conds) if conds else ir.TRUE


def make_vcs(loop, cand: Candidate, registry=None) -> VCSet:
    """Build the initial, preservation and termination conditions.

    Each antecedent also assumes that the source statements it mentions do
    not index out of bounds, so a verified candidate agrees with the source
    on every input where the source itself runs without error.
    """
    ctx = loop.context
    for what, e in (("summary", cand.ps), ("invariant", cand.inv)):
        t = ir.typecheck(e, ctx, registry)
        if t != BOOL:
            raise IRTypeError(f"candidate {what} has type {t}, expected Bool")
    state_names = [n for n, _ in loop.state_vars]
    init = {n: loop.init[n] for n in state_names}
    update = {n: loop.update[n] for n in state_names}
    params = tuple(loop.params)
    everything = params + tuple(loop.state_vars)

    init_safe = safety(*init.values())
    cond_safe = safety(loop.cond)
    update_safe = safety(*update.values())

    initial = ir.substitute(cand.inv, init)
    if init_safe != ir.TRUE:
        initial = ir.implies(init_safe, initial)
    preservation = ir.implies(
        ir.and_(*_nontrivial(cond_safe, cand.inv, loop.cond, update_safe)),
        ir.substitute(cand.inv, update),
    )
    termination = ir.implies(
        ir.and_(*_nontrivial(cond_safe, cand.inv, ir.not_(loop.cond))),
        cand.ps,
    )
    return VCSet(
        VC("initial", params, initial),
        VC("preservation", everything, preservation),
        VC("termination", everything, termination),
    )


def _nontrivial(*conjuncts):
    out = []
    for c in conjuncts:
        if c == ir.TRUE:
            continue
        out.extend(c.args if isinstance(c, Op) and c.kind == "and" else (c,))
    return out or [ir.TRUE]


def check_vcs(vcs: VCSet, env: dict, registry) -> dict:
    """Evaluate each VC at a concrete environment; returns label -> bool."""
    out = {}
    for vc in vcs:
        out[vc.label] = ir.evaluate(vc.body, {n: env[n] for n, _ in vc.vars}, registry)
    return out

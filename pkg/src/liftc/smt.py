"""SMT-LIB v2.6 emission and an external-solver driver.

Two encodings of the operator registry are supported.

``instantiated`` (the default for full verification) declares every
operator as an uninterpreted function and asserts ground facts about the
terms that occur in the query: instances of the operator's defining
equation, unfolded to a fixed depth, and instances of prefix lemmas whose
inductive proof has already been discharged by the same solver. Every
asserted fact is a valid consequence of the recursive definitions, so an
``unsat`` answer proves the verification condition. A ``sat`` answer may be
spurious; it is only reported after the model re-evaluates to ``false``
under :func:`liftc.ir.evaluate`.

``recursive`` transcribes each operator body verbatim with
``define-fun-rec``. It is used for bounded verification, where input
lengths are capped and unfolding is complete.
"""

from __future__ import annotations

import enum
import logging
import os
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from liftc import ir
from liftc.errors import LiftError, ProtocolError, SolverUnavailable, UnsupportedType
from liftc.ir import BOOL, INT, SEQ_INT, SEQ_SEQ_INT, Call, Expr, Op, SeqLit, Var

log = logging.getLogger(__name__)

DEFAULT_SOLVER = "z3 -in"
VC_LABELS = ("initial", "preservation", "termination")


def default_solver_cmd():
    return os.environ.get("LIFTC_SOLVER") or DEFAULT_SOLVER


# ---------------------------------------------------------------- sorts and terms

_SORTS = {INT: "Int", BOOL: "Bool", SEQ_INT: "(Seq Int)", SEQ_SEQ_INT: "(Seq (Seq Int))"}
_SLICE_FN = {SEQ_INT: "liftc_slice", SEQ_SEQ_INT: "liftc_slice2"}
_SIMPLE_OPS = {
    "+": "+", "-": "-", "*": "*", "<": "<", "<=": "<=", "==": "=",
    "and": "and", "or": "or", "not": "not", "=>": "=>", "ite": "ite",
    "len": "seq.len", "index": "seq.nth", "concat": "seq.++",
}


def sort(t):
    try:
        return _SORTS[t]
    except KeyError:
        raise UnsupportedType(str(t)) from None


def smt_int(v):
    return str(v) if v >= 0 else f"(- {-v})"


class Emitter:
    """Renders IR to SMT terms; needs types for empty literals and slices."""

    def __init__(self, ctx, registry):
        self.ctx = dict(ctx)
        self.registry = registry
        self.slice_sorts = set()

    def type_of(self, e):
        return ir.typecheck(e, self.ctx, self.registry)

    def term(self, e: Expr) -> str:
        if isinstance(e, ir.Int):
            return smt_int(e.value)
        if isinstance(e, ir.Bool):
            return "true" if e.value else "false"
        if isinstance(e, Var):
            return _symbol(e.name)
        if isinstance(e, SeqLit):
            if not e.items:
                return f"(as seq.empty {sort(e.type)})"
            units = [f"(seq.unit {self.term(x)})" for x in e.items]
            return units[0] if len(units) == 1 else "(seq.++ " + " ".join(units) + ")"
        if isinstance(e, Call):
            if not e.args:
                return _symbol(e.fn)
            return "(" + " ".join([_symbol(e.fn)] + [self.term(a) for a in e.args]) + ")"
        k, a = e.kind, e.args
        if k == "append":
            return f"(seq.++ {self.term(a[0])} (seq.unit {self.term(a[1])}))"
        if k == "prepend":
            return f"(seq.++ (seq.unit {self.term(a[0])}) {self.term(a[1])})"
        if k == "slice":
            t = self.type_of(a[0])
            self.slice_sorts.add(t)
            return f"({_SLICE_FN[t]} " + " ".join(self.term(x) for x in a) + ")"
        if k in _SIMPLE_OPS:
            return "(" + " ".join([_SIMPLE_OPS[k]] + [self.term(x) for x in a]) + ")"
        raise UnsupportedType(f"no SMT mapping for {k}")


def _symbol(name):
    if all(c.isalnum() or c in "_.-" for c in name) and not name[0].isdigit():
        return name
    return f"|{name}|"


def slice_helper(t):
    s = sort(t)
    return (
        f"(define-fun {_SLICE_FN[t]} ((s {s}) (lo Int) (hi Int)) {s}\n"
        "  (let ((l (ite (< lo 0) 0 lo))) (seq.extract s l (- hi l))))"
    )


# ---------------------------------------------------------------- ground facts


class Hyps:
    """Linear facts ``sum + const >= 0`` that hold wherever a term is used.

    Normalization consults them to decide ``min``/``max`` comparisons that
    clamped slices introduce; every query that uses a rewritten term
    asserts the same facts, so the rewriting is sound there.
    """

    def __init__(self, forms=()):
        self.forms = tuple(forms)

    @classmethod
    def from_formula(cls, f):
        forms = []
        for c in _conjuncts(f):
            forms.extend(_ineqs(c))
        return cls(forms)

    def proves_le(self, a, b):
        la, lb = ir.linear_form(a), ir.linear_form(b)
        if la is None or lb is None:
            return False
        diff = _lin_sub(lb, la)
        if _obviously_nonneg(diff):
            return True
        for i, f in enumerate(self.forms):
            rest = _lin_sub(diff, f)
            if _obviously_nonneg(rest):
                return True
            for g in self.forms[i:]:
                if _obviously_nonneg(_lin_sub(rest, g)):
                    return True
        return False


NO_HYPS = Hyps()


def _conjuncts(f):
    if isinstance(f, Op) and f.kind == "and":
        for a in f.args:
            yield from _conjuncts(a)
    elif isinstance(f, Op) and f.kind == "not" and isinstance(f.args[0], Op) and f.args[0].kind == "=>":
        yield from _conjuncts(f.args[0].args[0])
        yield ir.not_(f.args[0].args[1])
    else:
        yield f


def _ineqs(c):
    neg = isinstance(c, Op) and c.kind == "not"
    if neg:
        c = c.args[0]
    if not (isinstance(c, Op) and c.kind in ("<", "<=", "==")):
        return []
    la, lb = ir.linear_form(c.args[0]), ir.linear_form(c.args[1])
    if la is None or lb is None:
        return []
    if c.kind == "==":
        return [] if neg else [_lin_sub(lb, la), _lin_sub(la, lb)]
    strict = c.kind == "<"
    if neg:  # not (a < b) is b <= a; not (a <= b) is b < a
        la, lb, strict = lb, la, not strict
    coeffs, k = _lin_sub(lb, la)
    return [(coeffs, k - 1 if strict else k)]


def _lin_sub(x, y):
    out = dict(x[0])
    for t, c in y[0].items():
        out[t] = out.get(t, 0) - c
        if out[t] == 0:
            del out[t]
    return out, x[1] - y[1]


def _obviously_nonneg(form):
    coeffs, k = form
    return k >= 0 and all(c > 0 and isinstance(t, Op) and t.kind == "len" for t, c in coeffs.items())


def _pick(a, b, larger, hyps):
    if a == b:
        return a
    if hyps.proves_le(a, b):
        return b if larger else a
    if hyps.proves_le(b, a):
        return a if larger else b
    cond = ir.le(b, a) if larger else ir.le(a, b)
    return ir.ite(cond, a, b)


def _flatten(node, hyps):
    """Rewrite slice-of-slice and len-of-slice into single slices of a base term."""
    zero = ir.Int(0)
    if isinstance(node, Op) and node.kind == "slice":
        s, lo, hi = node.args
        if isinstance(s, Op) and s.kind == "slice":
            x, a, b = s.args
            start = _pick(a, zero, True, hyps)
            return ir.slice_(x, ir.simplify_node(ir.add(start, _pick(lo, zero, True, hyps))),
                             _pick(ir.simplify_node(ir.add(start, hi)), b, False, hyps))
        if hyps.proves_le(lo, zero) and hyps.proves_le(ir.length(s), hi):
            return s
    if isinstance(node, Op) and node.kind == "len":
        s = node.args[0]
        if isinstance(s, Op) and s.kind == "slice":
            x, a, b = s.args
            span = ir.simplify_node(ir.sub(_pick(b, ir.length(x), False, hyps), _pick(a, zero, True, hyps)))
            return _pick(span, zero, True, hyps)
        if isinstance(s, Op) and s.kind in ("append", "prepend"):
            inner = s.args[0] if s.kind == "append" else s.args[1]
            return ir.add(ir.length(inner), ir.Int(1))
    return node


def normalize(e: Expr, hyps: Hyps = NO_HYPS) -> Expr:
    """Constant-fold, flatten nested slices, and rewrite linear Int terms canonically.

    Without hypotheses every rewrite preserves the value of the expression
    in every environment, including the clamping behaviour of slices.
    """
    e = ir.simplify(e)
    memo = {}

    def flat(node):
        if node in memo:
            return memo[node]
        kids = ir.children(node)
        out = node
        if kids:
            out = ir.simplify_node(ir.rebuild(node, (flat(k) for k in kids)))
        while True:
            nxt = _flatten(out, hyps)
            if nxt == out:
                break
            out = ir.simplify_node(nxt)
        memo[node] = out
        return out

    lmemo = {}

    def lin(node):
        if node in lmemo:
            return lmemo[node]
        out = node
        lf = ir.linear_form(node) if isinstance(node, Op) and node.kind in ir.ARITH else None
        if lf is not None:
            coeffs = {}
            for atom, c in lf[0].items():
                atom = lin(atom)
                coeffs[atom] = coeffs.get(atom, 0) + c
            out = ir.from_linear({a: c for a, c in coeffs.items() if c}, lf[1])
        elif ir.children(node):
            out = ir.rebuild(node, (lin(k) for k in ir.children(node)))
        lmemo[node] = out
        return out

    return ir.simplify(lin(flat(e)))


def call_terms(e):
    """Operator applications in ``e``, in first-occurrence order."""
    seen = {}
    for node in ir.subterms(e):
        if isinstance(node, Call) and node not in seen:
            seen[node] = None
    return list(seen)


def literal_value(e):
    e = ir.simplify(e)
    if isinstance(e, (ir.Int, ir.Bool)):
        return e.value
    if isinstance(e, SeqLit):
        vals = tuple(literal_value(x) for x in e.items)
        if any(v is None for v in vals):
            return None
        return vals
    return None


def _shrinks_literal(parent: Call, child: Call) -> bool:
    """A recursive call whose literal argument got shorter terminates on its own."""
    if parent.fn != child.fn:
        return False
    return any(isinstance(p, SeqLit) and isinstance(c, SeqLit) and len(c.items) < len(p.items)
               for p, c in zip(parent.args, child.args))


def unfold(term: Call, registry, hyps: Hyps = NO_HYPS) -> Expr:
    spec = registry[term.fn]
    body = ir.substitute(spec.body, dict(zip(spec.param_names, term.args)))
    return normalize(body, hyps)


def match_lemma(lemma, term: Call, registry, hyps: Hyps = NO_HYPS):
    """Bind the lemma's variables so that its left-hand side equals ``term``.

    Returns a substitution or ``None``. Integer positions may be solved
    linearly (see :class:`liftc.operators.Lemma`).
    """
    spec = registry[lemma.op]
    types = lemma.var_types(spec)
    patvars = set(types)
    sigma = {}
    deferred = []

    def m(p, t):
        if isinstance(p, Var) and p.name in patvars:
            if p.name in sigma:
                return ir.linear_equal(normalize(sigma[p.name], hyps), normalize(t, hyps))
            sigma[p.name] = t
            return True
        if types_int(p) and (ir.free_vars(p) & patvars):
            deferred.append((p, t))
            return True
        if type(p) is not type(t):
            return False
        if isinstance(p, Op):
            return p.kind == t.kind and len(p.args) == len(t.args) and all(map(m, p.args, t.args))
        if isinstance(p, Call):
            return p.fn == t.fn and len(p.args) == len(t.args) and all(map(m, p.args, t.args))
        if isinstance(p, SeqLit):
            return len(p.items) == len(t.items) and all(map(m, p.items, t.items))
        return p == t

    def types_int(p):
        return isinstance(p, Op) and p.kind in ir.ARITH

    if not m(lemma.lhs, term):
        return None
    for c in lemma.consts:
        if literal_value(sigma.get(c, Var(c))) is None:
            return None
    for p, t in deferred:
        p = normalize(ir.substitute(p, sigma), hyps)
        if not _solve_linear(lemma, p, normalize(t, hyps), sigma, patvars):
            return None
    if set(sigma) != patvars:
        return None
    inst = normalize(ir.substitute(lemma.lhs, sigma), hyps)
    if not _equal_mod_linear(inst, normalize(term, hyps)):
        return None
    return sigma


def _solve_linear(lemma, p, t, sigma, patvars):
    lp, lt = ir.linear_form(p), ir.linear_form(t)
    if lp is None or lt is None:
        return False
    pc, pk = lp
    unknown = {a.name: c for a, c in pc.items() if isinstance(a, Var) and a.name in patvars and a.name not in sigma}
    if any(ir.free_vars(a) & (patvars - set(sigma)) for a in pc if not (isinstance(a, Var) and a.name in unknown)):
        return False
    # rest = t - (p without unknowns)
    rc, rk = dict(lt[0]), lt[1] - pk
    for a, c in pc.items():
        if isinstance(a, Var) and a.name in unknown:
            continue
        rc[a] = rc.get(a, 0) - c
        if rc[a] == 0:
            del rc[a]
    rem = lemma.remainder
    if rem is not None and rem[0] in unknown:
        rname = rem[0]
        bound = literal_value(normalize(ir.substitute(rem[1], sigma)))
        quot = [v for v in unknown if v != rname]
        if len(quot) != 1 or unknown[rname] != 1 or bound is None or unknown[quot[0]] != bound or bound <= 0:
            return False
        q = quot[0]
        if any(c % bound for c in rc.values()):
            return False
        r = rk % bound
        sigma[rname] = ir.Int(r)
        sigma[q] = ir.from_linear({a: c // bound for a, c in rc.items()}, (rk - r) // bound)
        return True
    if not unknown:
        return not rc and rk == 0
    if len(unknown) != 1:
        return False
    (v, c), = unknown.items()
    if any(x % c for x in rc.values()) or rk % c:
        return False
    sigma[v] = ir.from_linear({a: x // c for a, x in rc.items()}, rk // c)
    return True


def _equal_mod_linear(a, b):
    if isinstance(a, Op) and a.kind in ir.ARITH or isinstance(b, Op) and b.kind in ir.ARITH:
        return ir.linear_equal(a, b)
    if type(a) is not type(b):
        return False
    if isinstance(a, (Op, Call, SeqLit)):
        ka, kb = ir.children(a), ir.children(b)
        head_a = a.kind if isinstance(a, Op) else a.fn if isinstance(a, Call) else a.type
        head_b = b.kind if isinstance(b, Op) else b.fn if isinstance(b, Call) else b.type
        return head_a == head_b and len(ka) == len(kb) and all(map(_equal_mod_linear, ka, kb))
    return a == b


def lemma_instance(lemma, sigma, hyps: Hyps = NO_HYPS):
    return normalize(ir.substitute(lemma.statement(), sigma), hyps)


@dataclass
class GroundFacts:
    definitions: list = field(default_factory=list)
    lemmas: list = field(default_factory=list)
    lemma_keys: list = field(default_factory=list)


# ---------------------------------------------------------------- queries


class Outcome(enum.Enum):
    VERIFIED = "verified"
    BOUNDED_VERIFIED = "bounded_verified"
    COUNTEREXAMPLE = "counterexample"
    UNKNOWN = "unknown"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class SmtQuery:
    script: str
    vc_label: str
    candidate_index: Optional[int] = None
    declared: tuple = ()


@dataclass
class SolverResult:
    status: str  # sat | unsat | unknown | timeout
    model: Optional[dict] = None
    raw: str = ""
    seconds: float = 0.0


@dataclass
class VerificationOutcome:
    status: Outcome
    vc_label: Optional[str] = None
    witness: Optional[dict] = None
    transcript: list = field(default_factory=list)
    queries: int = 0

    @property
    def verified(self):
        return self.status in (Outcome.VERIFIED, Outcome.BOUNDED_VERIFIED)


@dataclass
class SmtConfig:
    solver_cmd: str = field(default_factory=default_solver_cmd)
    timeout: float = 10.0
    unfold_depth: int = 2
    lemma_rounds: int = 2
    bounded: Optional[int] = None
    dump_dir: Optional[Path] = None
    kernel_name: str = "kernel"


def _operator_closure(names, registry):
    out = []
    todo = list(names)
    while todo:
        n = todo.pop(0)
        if n in out:
            continue
        out.append(n)
        todo.extend(sorted(ir.calls_in(registry[n].body) - set(out)))
    return out


def _rec_order(names, registry):
    """Definitions first, callers after (self-recursion allowed)."""
    done, out = set(), []

    def visit(n, stack=()):
        if n in done:
            return
        if n in stack:
            raise LiftError(f"mutual recursion through {n} is not supported")
        for dep in sorted(ir.calls_in(registry[n].body) - {n}):
            visit(dep, stack + (n,))
        done.add(n)
        out.append(n)

    for n in names:
        visit(n)
    return out


def build_script(goal: Expr, variables, registry, *, encoding="instantiated", facts: GroundFacts = None,
                 bounded: Optional[int] = None, comment: str = "") -> SmtQuery:
    """Assemble a script asserting ``goal`` (already negated by the caller)."""
    ctx = dict(variables)
    em = Emitter(ctx, registry)
    ops = set(ir.calls_in(goal))
    fact_exprs = []
    if facts is not None:
        fact_exprs = facts.definitions + facts.lemmas
        for f in fact_exprs:
            ops |= ir.calls_in(f)
    ops = _operator_closure(sorted(ops), registry)
    body = [em.term(goal)]
    fact_terms = [em.term(f) for f in fact_exprs]
    opdefs = []
    if encoding == "recursive":
        for n in _rec_order(ops, registry):
            spec = registry[n]
            sub = Emitter(dict(spec.params), registry)
            params = " ".join(f"({_symbol(p)} {sort(t)})" for p, t in spec.params)
            text = sub.term(spec.body)
            em.slice_sorts |= sub.slice_sorts
            kw = "define-fun-rec" if spec.is_recursive else "define-fun"
            opdefs.append(f"({kw} {_symbol(n)} ({params}) {sort(spec.return_type)}\n  {text})")
    else:
        for n in ops:
            spec = registry[n]
            args = " ".join(sort(t) for _, t in spec.params)
            opdefs.append(f"(declare-fun {_symbol(n)} ({args}) {sort(spec.return_type)})")
    lines = []
    if comment:
        lines.extend(f"; {c}" for c in comment.splitlines())
    lines.append("(set-logic ALL)")
    for t in sorted(em.slice_sorts, key=str):
        lines.append(slice_helper(t))
    lines.extend(opdefs)
    for name, t in variables:
        lines.append(f"(declare-const {_symbol(name)} {sort(t)})")
    if bounded is not None:
        for name, t in variables:
            if t.is_seq:
                lines.append(f"(assert (<= (seq.len {_symbol(name)}) {bounded}))")
    if facts is not None:
        for text in fact_terms[: len(facts.definitions)]:
            lines.append(f"(assert {text})")
        for key, text in zip(facts.lemma_keys, fact_terms[len(facts.definitions):]):
            lines.append(f"; lemma {key}")
            lines.append(f"(assert {text})")
    lines.append(f"(assert {body[0]})")
    lines.append("(check-sat)")
    if variables:
        lines.append("(get-value (" + " ".join(_symbol(n) for n, _ in variables) + "))")
    return SmtQuery(script="\n".join(lines) + "\n", vc_label="", declared=tuple(variables))


# ---------------------------------------------------------------- solver process


def run_solver(query, solver_cmd=None, timeout=10.0) -> SolverResult:
    """Run one solver process on ``query`` (an SmtQuery or script text)."""
    script = query.script if isinstance(query, SmtQuery) else query
    declared = query.declared if isinstance(query, SmtQuery) else ()
    if timeout is not None and timeout <= 0:
        return SolverResult("timeout")
    cmd = shlex.split(solver_cmd or default_solver_cmd())
    start = time.monotonic()
    try:
        proc = subprocess.Popen(cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                stderr=subprocess.PIPE, text=True)
    except OSError as exc:
        raise SolverUnavailable(f"cannot start solver {cmd!r}: {exc}") from exc
    try:
        out, err = proc.communicate(script, timeout=timeout)
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.communicate()
        return SolverResult("timeout", seconds=time.monotonic() - start)
    elapsed = time.monotonic() - start
    return parse_solver_output(out, declared, err, elapsed)


def parse_solver_output(out, declared=(), err="", seconds=0.0) -> SolverResult:
    text = out.strip()
    if not text:
        raise ProtocolError(f"solver produced no output; stderr: {err.strip()[:500]}")
    first, _, rest = text.partition("\n")
    first = first.strip()
    if first not in ("sat", "unsat", "unknown"):
        raise ProtocolError(f"unexpected solver output: {text[:500]}")
    model = None
    if first == "sat" and declared:
        model = parse_values(rest, dict(declared))
    return SolverResult(first, model=model, raw=text, seconds=seconds)


def parse_values(text, types):
    """Parse a ``get-value`` response into Python values."""
    try:
        forms = ir.read_sexp(text)
    except LiftError as exc:
        raise ProtocolError(f"unparseable model: {exc}") from exc
    if not forms or not isinstance(forms[0], list):
        raise ProtocolError(f"unparseable model: {text[:300]}")
    out = {}
    for entry in forms[0]:
        if not isinstance(entry, list) or len(entry) != 2:
            raise ProtocolError(f"bad model entry {entry!r}")
        name = entry[0].strip("|")
        out[name] = _smt_value(entry[1], types.get(name))
    return out


def _smt_value(tree, t):
    if isinstance(tree, str):
        if tree in ("true", "false"):
            return tree == "true"
        try:
            return int(tree)
        except ValueError:
            raise ProtocolError(f"unexpected atom {tree!r} in model") from None
    head = tree[0]
    if head == "-" and len(tree) == 2:
        return -_smt_value(tree[1], INT)
    if head == "as" and tree[1] == "seq.empty":
        return ()
    if head == "seq.unit":
        return (_smt_value(tree[1], t.elem if t is not None and t.is_seq else None),)
    if head == "seq.++":
        out = ()
        for part in tree[1:]:
            out += _smt_value(part, t)
        return out
    raise ProtocolError(f"unsupported model term {tree!r}")


# ---------------------------------------------------------------- backend


class Backend:
    """Emits queries, proves lemmas (cached), verifies VC sets."""

    def __init__(self, registry, config: SmtConfig = None):
        self.registry = registry
        self.config = config or SmtConfig()
        self.lemma_status = {}
        self.queries = 0
        self.transcript = []

    # -- ground facts

    def ground_facts(self, formulas, *, use_lemmas=True, hyps: Hyps = NO_HYPS) -> GroundFacts:
        cfg = self.config
        facts = GroundFacts()
        known = {}
        for f in formulas:
            for t in call_terms(f):
                known.setdefault(t, None)
        if use_lemmas:
            frontier = list(known)
            seen_inst = set()
            for _ in range(cfg.lemma_rounds):
                new_terms = []
                for term in frontier:
                    spec = self.registry[term.fn]
                    for lemma in spec.lemmas:
                        sigma = match_lemma(lemma, term, self.registry, hyps)
                        if sigma is None:
                            continue
                        consts = tuple(literal_value(sigma[c]) for c in lemma.consts)
                        inst = lemma_instance(lemma, sigma, hyps)
                        if inst in seen_inst or inst == ir.TRUE:
                            continue
                        if not self.prove_lemma(lemma, consts):
                            continue
                        seen_inst.add(inst)
                        facts.lemmas.append(inst)
                        facts.lemma_keys.append(f"{lemma.name} {_const_key(lemma, consts)}")
                        for t in call_terms(inst):
                            if t not in known:
                                known[t] = None
                                new_terms.append(t)
                frontier = new_terms
        # definitional unfolding
        depth = {t: 0 for t in known}
        queue = list(known)
        while queue:
            term = queue.pop(0)
            d = depth[term]
            if d >= cfg.unfold_depth:
                continue
            body = unfold(term, self.registry, hyps)
            facts.definitions.append(ir.eq(term, body))
            for t in call_terms(body):
                if t not in depth:
                    depth[t] = d if _shrinks_literal(term, t) else d + 1
                    queue.append(t)
        return facts

    # -- lemma proofs

    def prove_lemma(self, lemma, consts) -> bool:
        key = (lemma.name, consts)
        if key in self.lemma_status:
            return self.lemma_status[key]
        spec = self.registry[lemma.op]
        const_sub = {c: ir.as_expr(v) for c, v in zip(lemma.consts, consts)}
        premise = normalize(ir.substitute(lemma.premise, const_sub))
        hyps = Hyps.from_formula(premise)
        concl = normalize(ir.substitute(ir.eq(lemma.lhs, lemma.rhs), const_sub), hyps)
        measure = normalize(ir.substitute(lemma.measure, const_sub))
        ih_sub = {v: ir.substitute(e, const_sub) for v, e in lemma.ih.items()}
        ih = normalize(
            ir.implies(
                ir.and_(ir.le(ir.Int(0), ir.substitute(measure, ih_sub)),
                        ir.lt(ir.substitute(measure, ih_sub), measure)),
                ir.substitute(ir.implies(premise, concl), ih_sub),
            ),
            hyps,
        )
        goal = ir.and_(premise, ir.or_(ir.not_(concl), ir.lt(measure, ir.Int(0))))
        facts = self.ground_facts([goal, ih], use_lemmas=False, hyps=hyps)
        facts.lemmas.append(ih)
        facts.lemma_keys.append(f"{lemma.name} induction hypothesis")
        variables = tuple(lemma.vars)
        query = build_script(goal, variables, self.registry, facts=facts,
                             comment=f"induction step for lemma {lemma.name} {_const_key(lemma, consts)}")
        self._dump(query, f"{self.config.kernel_name}.lemma.{lemma.name}.{_const_key(lemma, consts, sep='_')}")
        res = self._run(query)
        ok = res.status == "unsat"
        if not ok:
            log.warning("lemma %s %s not proven (%s)", lemma.name, consts, res.status)
        self.lemma_status[key] = ok
        return ok

    # -- VC queries

    def emit_query(self, vc, label=None, candidate_index=None, encoding=None) -> SmtQuery:
        cfg = self.config
        label = label or vc.label
        goal = normalize(ir.not_(vc.body))
        hyps = Hyps.from_formula(goal)
        # keep the unrewritten goal so the hypotheses used for rewriting stay asserted
        rewritten = normalize(goal, hyps)
        if rewritten != goal:
            goal = ir.and_(goal, rewritten)
        if cfg.bounded is not None or encoding == "recursive":
            query = build_script(goal, vc.vars, self.registry, encoding="recursive", bounded=cfg.bounded,
                                 comment=f"{label} (recursive encoding)")
        else:
            facts = self.ground_facts([goal], hyps=hyps)
            query = build_script(goal, vc.vars, self.registry, facts=facts, comment=label)
        return SmtQuery(query.script, label, candidate_index, query.declared)

    def _run(self, query):
        self.queries += 1
        res = run_solver(query, self.config.solver_cmd, self.config.timeout)
        self.transcript.append((query.vc_label, res.status, round(res.seconds, 3)))
        return res

    def _dump(self, query, stem):
        if self.config.dump_dir is None:
            return
        path = Path(self.config.dump_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / f"{stem}.smt2").write_text(query.script)

    def verify(self, vcs, candidate_index=None) -> VerificationOutcome:
        transcript = []
        issued = 0
        for vc in vcs:
            query = self.emit_query(vc, candidate_index=candidate_index)
            self._dump(query, f"{self.config.kernel_name}.{candidate_index}.{vc.label}")
            res = self._run(query)
            issued += 1
            transcript.append((vc.label, res.status, res.raw[:2000]))
            if res.status == "unsat":
                continue
            if res.status == "timeout":
                return VerificationOutcome(Outcome.TIMEOUT, vc.label, transcript=transcript, queries=issued)
            if res.status == "unknown":
                return VerificationOutcome(Outcome.UNKNOWN, vc.label, transcript=transcript, queries=issued)
            witness = res.model or {}
            if self.recheck(vc, witness):
                return VerificationOutcome(Outcome.COUNTEREXAMPLE, vc.label, witness=witness,
                                           transcript=transcript, queries=issued)
            if self.config.bounded is not None:
                raise ProtocolError(f"solver model for {vc.label} does not falsify the condition: {witness}")
            # the instantiated encoding under-constrains operators; an
            # unconfirmed model proves nothing either way
            transcript.append((vc.label, "unconfirmed-model", repr(witness)))
            return VerificationOutcome(Outcome.UNKNOWN, vc.label, transcript=transcript, queries=issued)
        status = Outcome.VERIFIED if self.config.bounded is None else Outcome.BOUNDED_VERIFIED
        return VerificationOutcome(status, transcript=transcript, queries=issued)

    def recheck(self, vc, witness) -> bool:
        """True iff ``witness`` binds every variable and falsifies the VC concretely."""
        env = {}
        for name, t in vc.vars:
            if name not in witness or not ir.value_has_type(witness[name], t):
                return False
            env[name] = witness[name]
        try:
            return ir.evaluate(vc.body, env, self.registry) is False
        except LiftError:
            return False


def _const_key(lemma, consts, sep=" "):
    if not consts:
        return "generic"
    parts = []
    for c, v in zip(lemma.consts, consts):
        text = ",".join(map(str, v)) if isinstance(v, tuple) else str(v)
        parts.append(f"{c}={text}")
    return sep.join(parts)


def emit_query(vc, registry, label=None, config=None, candidate_index=None):
    return Backend(registry, config).emit_query(vc, label, candidate_index)


def verify_candidate(vcs, registry, solver_cmd=None, config=None, candidate_index=None) -> VerificationOutcome:
    config = config or SmtConfig()
    if solver_cmd is not None:
        config.solver_cmd = solver_cmd
    return Backend(registry, config).verify(vcs, candidate_index)

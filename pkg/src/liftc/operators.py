"""Accelerator operator registry.

Every operator is defined by a recursive equation in the IR. The same
definition is interpreted by :func:`eval_operator` and translated to SMT by
:mod:`liftc.smt`. Operators may also carry *prefix lemmas*: equations about
the operator applied to prefix slices. The SMT backend proves each lemma by
induction before it uses instances of it, so lemmas add no trust.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Optional

from liftc import ir
from liftc.errors import (
    ArityMismatch,
    IRTypeError,
    LiftError,
    NonPositiveStride,
    NonRectangularMatrix,
    UnknownOperator,
)
from liftc.ir import INT, SEQ_INT, SEQ_SEQ_INT, Call, Expr, IRType, Op, Var


@dataclass(frozen=True)
class Lemma:
    """``forall vars. premise => lhs == rhs``, proven by strong induction on ``measure``.

    ``consts`` names operator parameters that occur in the lemma and are
    bound to concrete constants when the lemma is instantiated. ``ih`` is the
    substitution producing the induction-hypothesis instance. ``remainder``
    optionally names an Int variable ranging over ``[0, bound)``; the matcher
    uses it to solve ``q * bound + r == t`` for the quotient and remainder.
    """

    name: str
    op: str
    vars: tuple
    consts: tuple
    premise: Expr
    lhs: Expr
    rhs: Expr
    measure: Expr
    ih: Mapping[str, Expr]
    remainder: Optional[tuple] = None

    def statement(self):
        return ir.implies(self.premise, ir.eq(self.lhs, self.rhs))

    def var_types(self, spec):
        types = dict(self.vars)
        params = dict(spec.params)
        for c in self.consts:
            types[c] = params[c]
        return types


@dataclass(frozen=True)
class OperatorSpec:
    name: str
    params: tuple
    return_type: IRType
    body: Expr
    holes: Mapping[str, tuple] = field(default_factory=dict)
    decreasing: Optional[str] = None
    positive: tuple = ()
    nonempty: tuple = ()
    enumerable: bool = True
    lemmas: tuple = ()
    doc: str = ""

    @property
    def param_names(self):
        return tuple(p for p, _ in self.params)

    @property
    def tensor_params(self):
        return tuple((p, t) for p, t in self.params if p not in self.holes)

    @property
    def is_recursive(self):
        return self.name in ir.calls_in(self.body)


class Registry(Mapping):
    """Immutable, ordered collection of operator specs."""

    def __init__(self, specs):
        self._specs = {}
        for s in specs:
            if s.name in self._specs:
                raise LiftError(f"duplicate operator {s.name}")
            if s.name in ir.RESERVED:
                raise LiftError(f"operator name {s.name} is reserved")
            self._specs[s.name] = s
        for s in self._specs.values():
            check_spec(s, self)
        self._apply = lru_cache(maxsize=1 << 16)(self._apply_uncached)

    def __getitem__(self, name):
        try:
            return self._specs[name]
        except KeyError:
            raise UnknownOperator(name) from None

    def __iter__(self):
        return iter(self._specs)

    def __len__(self):
        return len(self._specs)

    def __contains__(self, name):
        return name in self._specs

    def __hash__(self):
        return id(self)

    def __eq__(self, other):
        return self is other

    def extend(self, specs):
        return Registry(list(self._specs.values()) + list(specs))

    def apply(self, name, args):
        return self._apply(name, tuple(args))

    def _apply_uncached(self, name, args):
        spec = self[name]
        check_args(spec, args)
        return ir.evaluate(spec.body, dict(zip(spec.param_names, args)), self)

    def lemmas(self):
        for s in self._specs.values():
            yield from s.lemmas


def eval_operator(name, args, registry):
    return registry.apply(name, args)


def check_args(spec, args):
    if len(args) != len(spec.params):
        raise ArityMismatch(f"{spec.name} takes {len(spec.params)} arguments, got {len(args)}")
    for value, (pname, ptype) in zip(args, spec.params):
        if not ir.value_has_type(value, ptype):
            raise IRTypeError(f"argument {pname} of {spec.name} must be {ptype}, got {value!r}")
        if ptype is SEQ_SEQ_INT and value and len({len(row) for row in value}) > 1:
            raise NonRectangularMatrix(f"argument {pname} of {spec.name} is not rectangular")
    named = dict(zip(spec.param_names, args))
    for p in spec.positive:
        if named[p] <= 0:
            raise NonPositiveStride(f"{spec.name}: {p} must be >= 1, got {named[p]}")
    for p in spec.nonempty:
        if len(named[p]) == 0:
            raise IRTypeError(f"{spec.name}: {p} must be non-empty")


def _is_strict_suffix(arg, spec):
    """``slice(p, lo, len(p))`` with ``lo`` a positive literal or a positive parameter."""
    p = Var(spec.decreasing)
    if not (isinstance(arg, Op) and arg.kind == "slice"):
        return False
    seq, lo, hi = arg.args
    if seq != p or hi != ir.length(p):
        return False
    if isinstance(lo, ir.Int):
        return lo.value >= 1
    return isinstance(lo, Var) and lo.name in spec.positive


def recursion_step(spec):
    """How far each self-call advances the decreasing parameter.

    Returns an ``int``, the name of a (positive) parameter, or ``None`` for
    non-recursive operators.
    """
    if not spec.is_recursive:
        return None
    pos = spec.param_names.index(spec.decreasing)
    for node in ir.subterms(spec.body):
        if isinstance(node, Call) and node.fn == spec.name:
            lo = node.args[pos].args[1]
            return lo.value if isinstance(lo, ir.Int) else lo.name
    return None


def check_spec(spec, registry):
    ctx = dict(spec.params)
    if len(ctx) != len(spec.params):
        raise LiftError(f"{spec.name}: duplicate parameter names")
    t = ir.typecheck(spec.body, ctx, registry)
    if t is not spec.return_type:
        raise IRTypeError(f"{spec.name}: body has type {t}, declared {spec.return_type}")
    for name, grid in spec.holes.items():
        if name not in ctx:
            raise LiftError(f"{spec.name}: hole {name} is not a parameter")
        if not grid:
            raise LiftError(f"{spec.name}: empty grid for {name}")
        for v in grid:
            if not ir.value_has_type(v, ctx[name]):
                raise IRTypeError(f"{spec.name}: grid value {v!r} is not {ctx[name]}")
    if spec.is_recursive:
        if spec.decreasing is None or ctx.get(spec.decreasing) is None:
            raise LiftError(f"{spec.name}: recursive operator needs a decreasing sequence parameter")
        pos = spec.param_names.index(spec.decreasing)
        for node in ir.subterms(spec.body):
            if isinstance(node, Call) and node.fn == spec.name:
                if not _is_strict_suffix(node.args[pos], spec):
                    raise LiftError(
                        f"{spec.name}: self-call argument {ir.to_sexp(node.args[pos])} "
                        "is not a strict suffix slice"
                    )
    for lemma in spec.lemmas:
        types = lemma.var_types(spec)
        for part in (lemma.premise, lemma.measure, lemma.lhs, lemma.rhs):
            ir.typecheck(part, types, registry)
        if ir.typecheck(lemma.measure, types, registry) is not INT:
            raise IRTypeError(f"lemma {lemma.name}: measure must be Int")
        if not (isinstance(lemma.lhs, Call) and lemma.lhs.fn == spec.name):
            raise LiftError(f"lemma {lemma.name}: left-hand side must apply {spec.name}")


# ---------------------------------------------------------------- builtins

P = ir.parse_sexp


def kernel_grid(min_len=1, max_len=3, lo=-2, hi=2):
    out = []
    for n in range(min_len, max_len + 1):
        for entries in itertools.product(range(lo, hi + 1), repeat=n):
            if any(entries):
                out.append(tuple(entries))
    return tuple(out)


def nonzero_range(lo, hi):
    return tuple(v for v in range(lo, hi + 1) if v != 0)


def _pointwise(name, combine, doc):
    body = P(f"""
        (ite (or (== (len a) 0) (== (len b) 0))
             (seq SeqInt)
             (prepend ({combine} (index a 0) (index b 0))
                      ({name} (slice a 1 (len a)) (slice b 1 (len b)))))""")
    lemmas = (
        Lemma(
            name=f"{name}.prefix",
            op=name,
            vars=(("a", SEQ_INT), ("b", SEQ_INT), ("j", INT)),
            consts=(),
            premise=P("(and (<= 0 j) (<= (+ j 1) (len a)) (<= (+ j 1) (len b)))"),
            lhs=P(f"({name} (slice a 0 (+ j 1)) (slice b 0 (+ j 1)))"),
            rhs=P(f"(append ({name} (slice a 0 j) (slice b 0 j)) ({combine} (index a j) (index b j)))"),
            measure=Var("j"),
            ih={"a": P("(slice a 1 (len a))"), "b": P("(slice b 1 (len b))"), "j": P("(- j 1)")},
        ),
        Lemma(
            name=f"{name}.truncate",
            op=name,
            vars=(("a", SEQ_INT), ("b", SEQ_INT), ("n", INT)),
            consts=(),
            premise=P("(or (<= (len a) n) (<= (len b) n))"),
            lhs=P(f"({name} (slice a 0 n) (slice b 0 n))"),
            rhs=P(f"({name} a b)"),
            measure=P("(+ (len a) (len b))"),
            ih={"a": P("(slice a 1 (len a))"), "b": P("(slice b 1 (len b))"), "n": P("(- n 1)")},
        ),
    )
    return OperatorSpec(
        name=name,
        params=(("a", SEQ_INT), ("b", SEQ_INT)),
        return_type=SEQ_INT,
        body=body,
        decreasing="a",
        lemmas=lemmas,
        doc=doc,
    )


def builtin_specs():
    dot = OperatorSpec(
        name="dot_product",
        params=(("a", SEQ_INT), ("b", SEQ_INT)),
        return_type=INT,
        body=P("""
            (ite (or (== (len a) 0) (== (len b) 0))
                 0
                 (+ (* (index a 0) (index b 0))
                    (dot_product (slice a 1 (len a)) (slice b 1 (len b)))))"""),
        decreasing="a",
        lemmas=(
            Lemma(
                name="dot_product.prefix",
                op="dot_product",
                vars=(("a", SEQ_INT), ("b", SEQ_INT), ("j", INT)),
                consts=(),
                premise=P("(and (<= 0 j) (<= (+ j 1) (len a)) (<= (+ j 1) (len b)))"),
                lhs=P("(dot_product (slice a 0 (+ j 1)) (slice b 0 (+ j 1)))"),
                rhs=P("(+ (dot_product (slice a 0 j) (slice b 0 j)) (* (index a j) (index b j)))"),
                measure=Var("j"),
                ih={"a": P("(slice a 1 (len a))"), "b": P("(slice b 1 (len b))"), "j": P("(- j 1)")},
            ),
            Lemma(
                name="dot_product.truncate",
                op="dot_product",
                vars=(("a", SEQ_INT), ("b", SEQ_INT), ("n", INT)),
                consts=(),
                premise=P("(or (<= (len a) n) (<= (len b) n))"),
                lhs=P("(dot_product (slice a 0 n) (slice b 0 n))"),
                rhs=P("(dot_product a b)"),
                measure=P("(+ (len a) (len b))"),
                ih={"a": P("(slice a 1 (len a))"), "b": P("(slice b 1 (len b))"), "n": P("(- n 1)")},
            ),
        ),
        doc="sum of a[j] * b[j] over the common prefix",
    )
    conv = OperatorSpec(
        name="conv1d",
        params=(("data", SEQ_INT), ("kernel", SEQ_INT), ("stride", INT)),
        return_type=SEQ_INT,
        body=P("""
            (ite (< (len data) (len kernel))
                 (seq SeqInt)
                 (prepend (dot_product data kernel)
                          (conv1d (slice data stride (len data)) kernel stride)))"""),
        holes={"kernel": kernel_grid(), "stride": (1, 2)},
        decreasing="data",
        positive=("stride",),
        nonempty=("kernel",),
        lemmas=(
            Lemma(
                name="conv1d.prefix",
                op="conv1d",
                vars=(("d", SEQ_INT), ("j", INT), ("r", INT)),
                consts=("kernel", "stride"),
                premise=P("""
                    (and (<= 0 j) (<= 0 r) (< r stride)
                         (<= (+ (* stride j) (len kernel)) (len d)))"""),
                lhs=P("(conv1d (slice d 0 (+ (* stride j) (+ (len kernel) r))) kernel stride)"),
                rhs=P("""
                    (append (conv1d (slice d 0 (- (+ (* stride j) (len kernel)) stride)) kernel stride)
                            (dot_product (slice d (* stride j) (+ (* stride j) (len kernel))) kernel))"""),
                measure=Var("j"),
                ih={"d": P("(slice d stride (len d))"), "j": P("(- j 1)")},
                remainder=("r", Var("stride")),
            ),
        ),
        doc="1-D convolution: dot products of kernel-sized windows taken every stride elements",
    )
    scale = OperatorSpec(
        name="scalar_scale",
        params=(("a", SEQ_INT), ("c", INT)),
        return_type=SEQ_INT,
        body=P("""
            (ite (== (len a) 0)
                 (seq SeqInt)
                 (prepend (* c (index a 0)) (scalar_scale (slice a 1 (len a)) c)))"""),
        holes={"c": nonzero_range(-3, 3)},
        decreasing="a",
        lemmas=(
            Lemma(
                name="scalar_scale.prefix",
                op="scalar_scale",
                vars=(("a", SEQ_INT), ("j", INT)),
                consts=("c",),
                premise=P("(and (<= 0 j) (<= (+ j 1) (len a)))"),
                lhs=P("(scalar_scale (slice a 0 (+ j 1)) c)"),
                rhs=P("(append (scalar_scale (slice a 0 j) c) (* c (index a j)))"),
                measure=Var("j"),
                ih={"a": P("(slice a 1 (len a))"), "j": P("(- j 1)")},
            ),
        ),
        doc="multiply every element by a constant",
    )
    vecmat = OperatorSpec(
        name="vecmat",
        params=(("r", SEQ_INT), ("m", SEQ_SEQ_INT)),
        return_type=SEQ_INT,
        body=P("""
            (ite (or (== (len r) 0) (== (len m) 0))
                 (seq SeqInt)
                 (ite (or (== (len r) 1) (== (len m) 1))
                      (scalar_scale (index m 0) (index r 0))
                      (elemwise_add (scalar_scale (index m 0) (index r 0))
                                    (vecmat (slice r 1 (len r)) (slice m 1 (len m))))))"""),
        decreasing="r",
        enumerable=False,
        doc="row vector times matrix (helper for matmul)",
    )
    matmul = OperatorSpec(
        name="matmul",
        params=(("A", SEQ_SEQ_INT), ("B", SEQ_SEQ_INT)),
        return_type=SEQ_SEQ_INT,
        body=P("""
            (ite (== (len A) 0)
                 (seq SeqSeqInt)
                 (prepend (vecmat (index A 0) B) (matmul (slice A 1 (len A)) B)))"""),
        decreasing="A",
        doc="matrix product, result[i][j] = sum_k A[i][k] * B[k][j]",
    )
    return [
        dot,
        conv,
        _pointwise("elemwise_add", "+", "pointwise sum over the common prefix"),
        _pointwise("elemwise_mul", "*", "pointwise product over the common prefix"),
        scale,
        vecmat,
        matmul,
    ]


_BUILTIN = None


def builtin_registry() -> Registry:
    global _BUILTIN
    if _BUILTIN is None:
        _BUILTIN = Registry(builtin_specs())
    return _BUILTIN


# ---------------------------------------------------------------- spec files


def _grid_from_tree(tree, ptype):
    """Grid forms: explicit values, ``(range lo hi [nonzero])``, ``(kernels minlen maxlen lo hi)``."""
    if isinstance(tree, list) and tree and tree[0] == "range":
        lo, hi = int(tree[1]), int(tree[2])
        if "nonzero" in tree[3:]:
            return nonzero_range(lo, hi)
        return tuple(range(lo, hi + 1))
    if isinstance(tree, list) and tree and tree[0] == "kernels":
        return kernel_grid(*(int(x) for x in tree[1:5]))
    values = []
    for item in tree:
        e = ir.simplify(ir.from_tree(item))
        values.append(ir.evaluate(e, {}))
    return tuple(values)


def _clauses(forms):
    out = {}
    for f in forms:
        if not isinstance(f, list) or not f or not isinstance(f[0], str):
            raise LiftError(f"malformed clause {f!r}")
        out[f[0]] = f[1:]
    return out


def _typed_list(tree):
    return tuple((name, IRType.parse(t)) for name, t in tree)


def load_spec_file(text: str):
    """Parse operator declarations.

    ::

        (operator NAME ((p TYPE) ...) RET
           (body EXPR) [(decreasing p)] [(positive p ...)] [(nonempty p ...)]
           [(holes (p GRID) ...)] [(enumerable false)])
        (lemma NAME OP (vars (v TYPE) ...) (consts p ...) (premise EXPR)
           (lhs EXPR) (rhs EXPR) (measure EXPR) (ih (v EXPR) ...) [(remainder v EXPR)])

    Returns a list of OperatorSpec with their lemmas attached.
    """
    ops = {}
    order = []
    pending = []
    for form in ir.read_sexp(text):
        kind = form[0]
        if kind == "operator":
            name, params, ret = form[1], _typed_list(form[2]), IRType.parse(form[3])
            cl = _clauses(form[4:])
            if "body" not in cl:
                raise LiftError(f"operator {name} has no body")
            ptypes = dict(params)
            holes = {p: _grid_from_tree(g, ptypes.get(p)) for p, g in cl.get("holes", [])}
            ops[name] = dict(
                name=name,
                params=params,
                return_type=ret,
                body=ir.from_tree(cl["body"][0]),
                holes=holes,
                decreasing=cl["decreasing"][0] if "decreasing" in cl else None,
                positive=tuple(cl.get("positive", ())),
                nonempty=tuple(cl.get("nonempty", ())),
                enumerable=cl.get("enumerable", ["true"])[0] != "false",
            )
            order.append(name)
        elif kind == "lemma":
            name, opname = form[1], form[2]
            cl = _clauses(form[3:])
            rem = cl.get("remainder")
            pending.append(
                Lemma(
                    name=name,
                    op=opname,
                    vars=_typed_list(cl.get("vars", [])),
                    consts=tuple(cl.get("consts", ())),
                    premise=ir.from_tree(cl["premise"][0]) if "premise" in cl else ir.TRUE,
                    lhs=ir.from_tree(cl["lhs"][0]),
                    rhs=ir.from_tree(cl["rhs"][0]),
                    measure=ir.from_tree(cl["measure"][0]),
                    ih={v: ir.from_tree(e) for v, e in cl.get("ih", [])},
                    remainder=(rem[0], ir.from_tree(rem[1])) if rem else None,
                )
            )
        else:
            raise LiftError(f"unknown declaration {kind!r}")
    lemmas_by_op = {}
    for lemma in pending:
        if lemma.op not in ops:
            raise LiftError(f"lemma {lemma.name} refers to undeclared operator {lemma.op}")
        lemmas_by_op.setdefault(lemma.op, []).append(lemma)
    return [OperatorSpec(**ops[n], lemmas=tuple(lemmas_by_op.get(n, ()))) for n in order]


def load_registry(paths=(), base=None) -> Registry:
    base = builtin_registry() if base is None else base
    specs = []
    for path in paths:
        specs.extend(load_spec_file(Path(path).read_text()))
    return base.extend(specs) if specs else base

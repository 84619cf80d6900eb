"""Typed expression IR over integers, booleans and integer sequences.

The same trees are interpreted concretely (``evaluate``), rendered as
canonical s-expressions for reports and golden files, and translated to
SMT-LIB by :mod:`liftc.smt`.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterator, Mapping

from liftc.errors import (
    IndexOutOfBounds,
    IRTypeError,
    LiftError,
    UnboundVariable,
    UnknownOperator,
)


class IRType(enum.Enum):
    INT = "Int"
    BOOL = "Bool"
    SEQ_INT = "SeqInt"
    SEQ_SEQ_INT = "SeqSeqInt"

    def __str__(self):
        return self.value

    @property
    def is_seq(self):
        return self in (IRType.SEQ_INT, IRType.SEQ_SEQ_INT)

    @property
    def elem(self):
        if self is IRType.SEQ_INT:
            return IRType.INT
        if self is IRType.SEQ_SEQ_INT:
            return IRType.SEQ_INT
        raise IRTypeError(f"{self} is not a sequence type")

    @classmethod
    def parse(cls, name):
        for t in cls:
            if t.value == name:
                return t
        raise IRTypeError(f"unknown type name {name!r}")


INT = IRType.INT
BOOL = IRType.BOOL
SEQ_INT = IRType.SEQ_INT
SEQ_SEQ_INT = IRType.SEQ_SEQ_INT


class Expr:
    """Base class of all IR nodes. Nodes are immutable and hashable."""

    __slots__ = ()

    def __str__(self):
        return to_sexp(self)


@dataclass(frozen=True, eq=True)
class Int(Expr):
    value: int


@dataclass(frozen=True, eq=True)
class Bool(Expr):
    value: bool


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True)
class SeqLit(Expr):
    """Sequence literal; ``type`` is the type of the whole literal."""

    items: tuple
    type: IRType = SEQ_INT


@dataclass(frozen=True, eq=True)
class Op(Expr):
    kind: str
    args: tuple


@dataclass(frozen=True, eq=True)
class Call(Expr):
    fn: str
    args: tuple


ARITH = ("+", "-", "*")
COMPARE = ("<", "<=")
CONNECTIVES = ("and", "or")
OP_ARITY = {
    "+": 2, "-": 2, "*": 2, "<": 2, "<=": 2, "==": 2,
    "not": 1, "=>": 2, "len": 1, "index": 2, "append": 2, "prepend": 2,
    "concat": 2, "slice": 3, "ite": 3,
}
OP_KINDS = frozenset(OP_ARITY) | frozenset(CONNECTIVES)
RESERVED = OP_KINDS | {"seq", "true", "false", "forall"}

TRUE = Bool(True)
FALSE = Bool(False)


def empty(t=SEQ_INT):
    return SeqLit((), t)


def ints(*values):
    return SeqLit(tuple(Int(v) for v in values), SEQ_INT)


def op(kind, *args):
    return Op(kind, tuple(args))


def add(a, b):
    return Op("+", (a, b))


def sub(a, b):
    return Op("-", (a, b))


def mul(a, b):
    return Op("*", (a, b))


def lt(a, b):
    return Op("<", (a, b))


def le(a, b):
    return Op("<=", (a, b))


def eq(a, b):
    return Op("==", (a, b))


def not_(a):
    return Op("not", (a,))


def implies(a, b):
    return Op("=>", (a, b))


def and_(*args):
    args = tuple(args)
    if not args:
        return TRUE
    if len(args) == 1:
        return args[0]
    return Op("and", args)


def or_(*args):
    args = tuple(args)
    if not args:
        return FALSE
    if len(args) == 1:
        return args[0]
    return Op("or", args)


def length(e):
    return Op("len", (e,))


def index(e, i):
    return Op("index", (e, i))


def append(e, x):
    return Op("append", (e, x))


def prepend(x, e):
    return Op("prepend", (x, e))


def concat(a, b):
    return Op("concat", (a, b))


def slice_(e, lo, hi):
    return Op("slice", (e, lo, hi))


def ite(c, t, f):
    return Op("ite", (c, t, f))


def call(fn, *args):
    return Call(fn, tuple(args))


def as_expr(x):
    """Lift a Python literal (int, bool, nested tuples/lists of ints) to IR."""
    if isinstance(x, Expr):
        return x
    if isinstance(x, bool):
        return Bool(x)
    if isinstance(x, int):
        return Int(x)
    if isinstance(x, (list, tuple)):
        items = tuple(as_expr(v) for v in x)
        if items and isinstance(items[0], SeqLit):
            return SeqLit(items, SEQ_SEQ_INT)
        return SeqLit(items, SEQ_INT)
    raise TypeError(f"cannot lift {x!r} into the IR")


def children(e):
    if isinstance(e, (Op, Call)):
        return e.args
    if isinstance(e, SeqLit):
        return e.items
    return ()


def rebuild(e, new_children):
    new_children = tuple(new_children)
    if isinstance(e, Op):
        return Op(e.kind, new_children)
    if isinstance(e, Call):
        return Call(e.fn, new_children)
    if isinstance(e, SeqLit):
        return SeqLit(new_children, e.type)
    return e


def subterms(e) -> Iterator[Expr]:
    """Pre-order traversal of ``e`` and every subexpression."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def free_vars(e):
    return {n.name for n in subterms(e) if isinstance(n, Var)}


def calls_in(e):
    return {n.fn for n in subterms(e) if isinstance(n, Call)}


# ---------------------------------------------------------------- typing


def value_type(v):
    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return INT
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return SEQ_SEQ_INT
        if all(isinstance(x, int) and not isinstance(x, bool) for x in v):
            return SEQ_INT
    raise IRTypeError(f"not an IR value: {v!r}")


def value_has_type(v, t):
    if t is BOOL:
        return isinstance(v, bool)
    if t is INT:
        return isinstance(v, int) and not isinstance(v, bool)
    if t is SEQ_INT:
        return isinstance(v, tuple) and all(value_has_type(x, INT) for x in v)
    if t is SEQ_SEQ_INT:
        return isinstance(v, tuple) and all(value_has_type(x, SEQ_INT) for x in v)
    return False


def typecheck(expr: Expr, ctx: Mapping[str, IRType], registry=None) -> IRType:
    """Return the type of ``expr`` under ``ctx``.

    ``registry`` is consulted for operator signatures; without one, any
    call raises ``UnknownOperator``.
    """

    def fail(msg, node):
        raise IRTypeError(f"{msg} in {to_sexp(node)}")

    def go(e):
        if isinstance(e, Int):
            return INT
        if isinstance(e, Bool):
            return BOOL
        if isinstance(e, Var):
            if e.name not in ctx:
                raise UnboundVariable(e.name)
            return ctx[e.name]
        if isinstance(e, SeqLit):
            if not e.type.is_seq:
                fail("sequence literal with non-sequence type", e)
            for item in e.items:
                if go(item) is not e.type.elem:
                    fail(f"element is not {e.type.elem}", e)
            return e.type
        if isinstance(e, Call):
            if registry is None or e.fn not in registry:
                raise UnknownOperator(e.fn)
            spec = registry[e.fn]
            if len(e.args) != len(spec.params):
                fail(f"{e.fn} expects {len(spec.params)} arguments", e)
            for arg, (pname, ptype) in zip(e.args, spec.params):
                if go(arg) is not ptype:
                    fail(f"argument {pname} of {e.fn} must be {ptype}", e)
            return spec.return_type
        if not isinstance(e, Op):
            fail("unknown node", e)
        k, args = e.kind, e.args
        if k in CONNECTIVES:
            for a in args:
                if go(a) is not BOOL:
                    fail(f"operand of {k} must be Bool", e)
            return BOOL
        if len(args) != OP_ARITY.get(k, -1):
            fail(f"bad arity for {k}", e)
        ts = [go(a) for a in args]
        if k in ARITH:
            if ts != [INT, INT]:
                fail(f"operands of {k} must be Int", e)
            return INT
        if k in COMPARE:
            if ts != [INT, INT]:
                fail(f"operands of {k} must be Int", e)
            return BOOL
        if k == "==":
            if ts[0] is not ts[1]:
                fail("operands of == differ in type", e)
            return BOOL
        if k == "not":
            if ts[0] is not BOOL:
                fail("operand of not must be Bool", e)
            return BOOL
        if k == "=>":
            if ts != [BOOL, BOOL]:
                fail("operands of => must be Bool", e)
            return BOOL
        if k == "len":
            if not ts[0].is_seq:
                fail("len of non-sequence", e)
            return INT
        if k == "index":
            if not ts[0].is_seq or ts[1] is not INT:
                fail("index needs a sequence and an Int", e)
            return ts[0].elem
        if k == "append":
            if not ts[0].is_seq or ts[0].elem is not ts[1]:
                fail("append element type mismatch", e)
            return ts[0]
        if k == "prepend":
            if not ts[1].is_seq or ts[1].elem is not ts[0]:
                fail("prepend element type mismatch", e)
            return ts[1]
        if k == "concat":
            if not ts[0].is_seq or ts[0] is not ts[1]:
                fail("concat of mismatched sequences", e)
            return ts[0]
        if k == "slice":
            if not ts[0].is_seq or ts[1:] != [INT, INT]:
                fail("slice needs a sequence and two Ints", e)
            return ts[0]
        if k == "ite":
            if ts[0] is not BOOL or ts[1] is not ts[2]:
                fail("ill-typed ite", e)
            return ts[1]
        fail(f"unknown operation {k}", e)

    return go(expr)


# ---------------------------------------------------------------- evaluation


def clamp_slice(seq, lo, hi):
    n = len(seq)
    lo = min(max(lo, 0), n)
    hi = min(max(hi, 0), n)
    if lo >= hi:
        return ()
    return seq[lo:hi]


def evaluate(expr: Expr, env: Mapping[str, object], registry=None):
    """Evaluate ``expr`` in ``env``. Sequences are tuples, matrices tuples of tuples."""

    def go(e):
        if isinstance(e, (Int, Bool)):
            return e.value
        if isinstance(e, Var):
            try:
                return env[e.name]
            except KeyError:
                raise UnboundVariable(e.name) from None
        if isinstance(e, SeqLit):
            return tuple(go(x) for x in e.items)
        if isinstance(e, Call):
            if registry is None:
                raise UnknownOperator(e.fn)
            return registry.apply(e.fn, [go(a) for a in e.args])
        k, args = e.kind, e.args
        # short-circuiting forms first
        if k == "and":
            return all(go(a) for a in args)
        if k == "or":
            return any(go(a) for a in args)
        if k == "=>":
            return (not go(args[0])) or go(args[1])
        if k == "ite":
            return go(args[1]) if go(args[0]) else go(args[2])
        vs = [go(a) for a in args]
        if k == "+":
            return vs[0] + vs[1]
        if k == "-":
            return vs[0] - vs[1]
        if k == "*":
            return vs[0] * vs[1]
        if k == "<":
            return vs[0] < vs[1]
        if k == "<=":
            return vs[0] <= vs[1]
        if k == "==":
            return vs[0] == vs[1]
        if k == "not":
            return not vs[0]
        if k == "len":
            return len(vs[0])
        if k == "index":
            s, i = vs
            if not 0 <= i < len(s):
                raise IndexOutOfBounds(f"index {i} outside sequence of length {len(s)}")
            return s[i]
        if k == "append":
            return vs[0] + (vs[1],)
        if k == "prepend":
            return (vs[0],) + vs[1]
        if k == "concat":
            return vs[0] + vs[1]
        if k == "slice":
            return clamp_slice(*vs)
        raise LiftError(f"cannot evaluate {k}")

    return go(expr)


# ---------------------------------------------------------------- substitution


def substitute(expr: Expr, bindings: Mapping[str, Expr], ctx=None, registry=None) -> Expr:
    """Simultaneous substitution of variables by expressions.

    The IR has no binders, so substitution is trivially capture-free. When
    ``ctx`` is given, each replacement is checked against the type of the
    variable it replaces.
    """
    if not bindings:
        return expr
    if ctx is not None:
        for name, repl in bindings.items():
            if name in ctx:
                t = typecheck(repl, ctx, registry)
                if t is not ctx[name]:
                    raise IRTypeError(f"cannot replace {name}: {ctx[name]} by {to_sexp(repl)}: {t}")

    def go(e):
        if isinstance(e, Var):
            return bindings.get(e.name, e)
        kids = children(e)
        if not kids:
            return e
        return rebuild(e, (go(k) for k in kids))

    return go(expr)


def replace_subterms(expr: Expr, mapping: Mapping[Expr, Expr]) -> Expr:
    """Replace whole subterms (outermost first) according to ``mapping``."""

    def go(e):
        if e in mapping:
            return mapping[e]
        kids = children(e)
        if not kids:
            return e
        return rebuild(e, (go(k) for k in kids))

    return go(expr)


# ---------------------------------------------------------------- simplification


def simplify(expr: Expr) -> Expr:
    """Bottom-up constant folding. Preserves meaning on every environment."""
    memo = {}

    def go(e):
        if e in memo:
            return memo[e]
        kids = children(e)
        out = e if not kids else simplify_node(rebuild(e, (go(k) for k in kids)))
        memo[e] = out
        return out

    return go(expr)


def _lit_value(e):
    if isinstance(e, (Int, Bool)):
        return e.value
    if isinstance(e, SeqLit):
        vals = [_lit_value(x) for x in e.items]
        if any(v is None for v in vals):
            return None
        return tuple(vals)
    return None


def simplify_node(e: Expr) -> Expr:
    """One folding step at the root, assuming the children are already folded."""
    if not isinstance(e, Op):
        return e
    k, a = e.kind, e.args
    if k in ARITH:
        x, y = a
        if isinstance(x, Int) and isinstance(y, Int):
            return Int(x.value + y.value if k == "+" else x.value - y.value if k == "-" else x.value * y.value)
        if k == "+" and x == Int(0):
            return y
        if k in ("+", "-") and y == Int(0):
            return x
        if k == "*" and (x == Int(1) or y == Int(1)):
            return y if x == Int(1) else x
        if k == "*" and (x == Int(0) or y == Int(0)):
            return Int(0)
        return e
    if k in COMPARE:
        x, y = a
        if isinstance(x, Int) and isinstance(y, Int):
            return Bool(x.value < y.value if k == "<" else x.value <= y.value)
        return e
    if k == "==":
        x, y = _lit_value(a[0]), _lit_value(a[1])
        if x is not None and y is not None:
            return Bool(x == y)
        if a[0] == a[1]:
            return TRUE
        return e
    if k == "and":
        out = []
        for x in a:
            if x == FALSE:
                return FALSE
            if x == TRUE:
                continue
            out.extend(x.args if isinstance(x, Op) and x.kind == "and" else (x,))
        return and_(*out)
    if k == "or":
        out = []
        for x in a:
            if x == TRUE:
                return TRUE
            if x == FALSE:
                continue
            out.extend(x.args if isinstance(x, Op) and x.kind == "or" else (x,))
        return or_(*out)
    if k == "not":
        if isinstance(a[0], Bool):
            return Bool(not a[0].value)
        return e
    if k == "=>":
        x, y = a
        if x == FALSE or y == TRUE:
            return TRUE
        if x == TRUE:
            return y
        return e
    if k == "ite":
        c, t, f = a
        if isinstance(c, Bool):
            return t if c.value else f
        if t == f:
            return t
        return e
    if k == "len":
        if isinstance(a[0], SeqLit):
            return Int(len(a[0].items))
        return e
    if k == "index":
        s, i = a
        if isinstance(s, SeqLit) and isinstance(i, Int) and 0 <= i.value < len(s.items):
            return s.items[i.value]
        return e
    if k == "slice":
        s, lo, hi = a
        if isinstance(s, SeqLit) and isinstance(lo, Int) and isinstance(hi, Int):
            return SeqLit(clamp_slice(s.items, lo.value, hi.value), s.type)
        return e
    if k in ("append", "prepend", "concat"):
        if k == "append" and isinstance(a[0], SeqLit):
            return SeqLit(a[0].items + (a[1],), a[0].type)
        if k == "prepend" and isinstance(a[1], SeqLit):
            return SeqLit((a[0],) + a[1].items, a[1].type)
        if k == "concat" and isinstance(a[0], SeqLit) and isinstance(a[1], SeqLit):
            return SeqLit(a[0].items + a[1].items, a[0].type)
        return e
    return e


# ---------------------------------------------------------------- linear forms


def linear_form(e: Expr):
    """Decompose an Int expression as ``sum(coef * atom) + const``.

    Returns ``(coeffs, const)`` where ``coeffs`` maps non-arithmetic
    subterms to nonzero integer coefficients, or ``None`` when ``e`` is not
    linear (a product of two non-constant terms).
    """
    if isinstance(e, Int):
        return {}, e.value
    if isinstance(e, Op) and e.kind in ARITH:
        left, right = linear_form(e.args[0]), linear_form(e.args[1])
        if left is None or right is None:
            return None
        (lc, lk), (rc, rk) = left, right
        if e.kind == "*":
            if not lc:
                return {t: lk * c for t, c in rc.items() if lk * c}, lk * rk
            if not rc:
                return {t: rk * c for t, c in lc.items() if rk * c}, lk * rk
            return None
        sign = 1 if e.kind == "+" else -1
        out = dict(lc)
        for t, c in rc.items():
            out[t] = out.get(t, 0) + sign * c
            if out[t] == 0:
                del out[t]
        return out, lk + sign * rk
    return {e: 1}, 0


def from_linear(coeffs, const):
    """Rebuild a canonical expression from a linear form."""
    terms = []
    for atom in sorted(coeffs, key=to_sexp):
        c = coeffs[atom]
        terms.append(atom if c == 1 else mul(Int(c), atom))
    if not terms:
        return Int(const)
    out = terms[0]
    for t in terms[1:]:
        out = add(out, t)
    if const > 0:
        out = add(out, Int(const))
    elif const < 0:
        out = sub(out, Int(-const))
    return out


def linear_equal(a: Expr, b: Expr) -> bool:
    la, lb = linear_form(a), linear_form(b)
    if la is None or lb is None:
        return a == b
    return la == lb


# ---------------------------------------------------------------- rendering


def to_sexp(e: Expr) -> str:
    """Canonical s-expression rendering (stable; used by golden files)."""
    if isinstance(e, Int):
        return str(e.value)
    if isinstance(e, Bool):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, SeqLit):
        return "(" + " ".join(["seq", str(e.type)] + [to_sexp(x) for x in e.items]) + ")"
    if isinstance(e, Call):
        return "(" + " ".join([e.fn] + [to_sexp(x) for x in e.args]) + ")"
    if isinstance(e, Op):
        return "(" + " ".join([e.kind] + [to_sexp(x) for x in e.args]) + ")"
    raise TypeError(f"not an IR node: {e!r}")


_INFIX_PREC = {"=>": 1, "or": 2, "and": 3, "==": 4, "<": 4, "<=": 4, "+": 5, "-": 5, "*": 6}
_INFIX_SYM = {"and": "&&", "or": "||"}


def to_infix(e: Expr) -> str:
    """Human-oriented rendering, e.g. ``result == conv1d(slice(data, 0, i + 1), [1, 1], 1)``."""

    def go(e, ctx_prec):
        if isinstance(e, (Int, Bool, Var)):
            return to_sexp(e)
        if isinstance(e, SeqLit):
            return "[" + ", ".join(go(x, 0) for x in e.items) + "]"
        if isinstance(e, Call):
            return f"{e.fn}(" + ", ".join(go(x, 0) for x in e.args) + ")"
        k, a = e.kind, e.args
        if k in _INFIX_PREC:
            p = _INFIX_PREC[k]
            sym = f" {_INFIX_SYM.get(k, k)} "
            # left-associative: right operand of - binds tighter
            parts = [go(a[0], p)] + [go(x, p + 1 if k in ("-", "=>") or p == 4 else p) for x in a[1:]]
            text = sym.join(parts)
            return f"({text})" if p < ctx_prec else text
        if k == "not":
            return "!" + go(a[0], 7)
        if k == "index":
            return f"{go(a[0], 8)}[{go(a[1], 0)}]"
        return f"{k}(" + ", ".join(go(x, 0) for x in a) + ")"

    return go(e, 0)


_TOKEN = re.compile(r"(?:\s|;[^\n]*)*(?:(\()|(\))|([^\s();]+))")
_BLANK = re.compile(r"(?:\s|;[^\n]*)*\Z")


def _tokenize_sexp(text):
    pos = 0
    while not _BLANK.match(text, pos):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise LiftError(f"bad s-expression near {text[pos:pos + 20]!r}")
        pos = m.end()
        yield m.group(1) or m.group(2) or m.group(3)


def read_sexp(text):
    """Parse text into nested Python lists of atom strings."""
    tokens = list(_tokenize_sexp(text))
    pos = 0

    def parse():
        nonlocal pos
        if pos >= len(tokens):
            raise LiftError("unexpected end of s-expression")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            out = []
            while pos < len(tokens) and tokens[pos] != ")":
                out.append(parse())
            if pos >= len(tokens):
                raise LiftError("unbalanced parentheses")
            pos += 1
            return out
        if tok == ")":
            raise LiftError("unexpected ')'")
        return tok

    forms = []
    while pos < len(tokens):
        forms.append(parse())
    return forms


def from_tree(tree) -> Expr:
    """Convert a parsed s-expression (see ``read_sexp``) into an IR node."""
    if isinstance(tree, str):
        if re.fullmatch(r"-?\d+", tree):
            return Int(int(tree))
        if tree == "true":
            return TRUE
        if tree == "false":
            return FALSE
        return Var(tree)
    if not tree:
        raise LiftError("empty list in s-expression")
    head, rest = tree[0], tree[1:]
    if not isinstance(head, str):
        raise LiftError("s-expression head must be a symbol")
    if head == "seq":
        return SeqLit(tuple(from_tree(x) for x in rest[1:]), IRType.parse(rest[0]))
    args = tuple(from_tree(x) for x in rest)
    if head in OP_KINDS:
        return Op(head, args)
    return Call(head, args)


def parse_sexp(text: str) -> Expr:
    forms = read_sexp(text)
    if len(forms) != 1:
        raise LiftError("expected exactly one expression")
    return from_tree(forms[0])

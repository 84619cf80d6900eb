"""Mini-language parser, reference interpreter, and loop analysis.

The accepted language is a single function with one ``for`` loop::

    fn window_sum(data: list<int>) -> list<int> {
        let result: list<int> = [];
        for i in 0 .. len(data) - 1 {
            result.push(data[i] + data[i + 1]);
        }
        return result;
    }

``for i in lo .. hi`` evaluates ``lo`` once and re-evaluates ``hi`` before
every iteration, i.e. it means ``i = lo; while (i < hi) { ...; i = i + 1; }``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from liftc import ir
from liftc.errors import IndexOutOfBounds, IRTypeError, LiftError, NoLoop, SourceSyntaxError, UnsupportedConstruct
from liftc.ir import BOOL, INT, SEQ_INT, Expr, IRType, Var

# ---------------------------------------------------------------- source AST


@dataclass(frozen=True)
class Pos:
    line: int
    column: int


@dataclass(frozen=True)
class Num:
    value: int
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True)
class EmptyList:
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True)
class Name:
    name: str
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "SourceExpr"
    right: "SourceExpr"
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True)
class Index:
    seq: str
    index: "SourceExpr"
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True)
class Len:
    seq: str
    pos: Optional[Pos] = field(default=None, compare=False)


SourceExpr = Union[Num, EmptyList, Name, BinOp, Index, Len]


@dataclass(frozen=True)
class Let:
    name: str
    type: IRType
    value: SourceExpr
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True)
class Assign:
    name: str
    value: SourceExpr
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True)
class Push:
    name: str
    value: SourceExpr
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True)
class For:
    var: str
    lo: SourceExpr
    hi: SourceExpr
    body: tuple
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True)
class Return:
    value: SourceExpr
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple  # ((name, IRType), ...)
    return_type: IRType
    body: tuple


SourceAST = Function

# ---------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>\.\.|->|<=|==|&&|[-+*<>=(){}\[\],:;.!/%|&])
    """,
    re.VERBOSE,
)

_UNSUPPORTED_WORDS = {"if", "else", "while", "loop", "break", "continue", "fn"}
_KEYWORDS = {"fn", "let", "for", "in", "return", "int", "list", "len"}


@dataclass(frozen=True)
class Token:
    kind: str  # int | ident | sym | eof
    text: str
    pos: Pos


def tokenize(text: str) -> list:
    tokens = []
    line, col, i = 1, 1, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise SourceSyntaxError(f"unexpected character {text[i]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(Token(kind, chunk, Pos(line, col)))
        nl = chunk.count("\n")
        if nl:
            line += nl
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        i = m.end()
    tokens.append(Token("eof", "", Pos(line, col)))
    return tokens


# ---------------------------------------------------------------- parser

_BINOPS = {"&&": 1, "<": 2, "<=": 2, "==": 2, "+": 3, "-": 3, "*": 4}


class _Parser:
    def __init__(self, text):
        self.toks = tokenize(text)
        self.k = 0
        self.scope = {}

    @property
    def tok(self):
        return self.toks[self.k]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        shown = tok.text or "end of input"
        return SourceSyntaxError(f"{msg} (found {shown!r})", tok.pos.line, tok.pos.column)

    def at(self, text):
        return self.tok.kind in ("sym", "ident") and self.tok.text == text

    def expect(self, text):
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        tok = self.tok
        self.k += 1
        return tok

    def ident(self):
        tok = self.tok
        if tok.kind != "ident":
            raise self.error("expected identifier")
        self.k += 1
        return tok.text, tok.pos

    # -- declarations

    def declare(self, name, t, pos):
        if name in _KEYWORDS or name in _UNSUPPORTED_WORDS:
            raise SourceSyntaxError(f"{name!r} is a reserved word", pos.line, pos.column)
        if name in self.scope:
            raise SourceSyntaxError(f"{name!r} is already declared", pos.line, pos.column)
        self.scope[name] = t

    def use(self, name, pos):
        if name not in self.scope:
            raise SourceSyntaxError(f"{name!r} is used before its declaration", pos.line, pos.column)
        return self.scope[name]

    def type_(self):
        name, pos = self.ident()
        if name == "int":
            return INT
        if name == "list":
            self.expect("<")
            inner, ipos = self.ident()
            if inner != "int":
                raise UnsupportedConstruct(f"{ipos.line}:{ipos.column}: list elements must be int, not {inner}")
            self.expect(">")
            return SEQ_INT
        raise UnsupportedConstruct(f"{pos.line}:{pos.column}: unsupported type {name!r}")

    def program(self):
        self.expect("fn")
        name, _ = self.ident()
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                pname, ppos = self.ident()
                self.expect(":")
                t = self.type_()
                self.declare(pname, t, ppos)
                params.append((pname, t))
                if not self.at(","):
                    break
                self.expect(",")
        self.expect(")")
        self.expect("->")
        ret = self.type_()
        body = self.block(in_loop=False)
        if self.at("fn"):
            raise UnsupportedConstruct(f"{self.tok.pos.line}:{self.tok.pos.column}: only one function per file")
        if self.tok.kind != "eof":
            raise self.error("expected end of input")
        return Function(name, tuple(params), ret, tuple(body))

    def block(self, in_loop):
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("expected '}'")
            stmts.append(self.stmt(in_loop))
        self.expect("}")
        return stmts

    def stmt(self, in_loop):
        tok = self.tok
        if tok.kind == "ident" and tok.text in _UNSUPPORTED_WORDS:
            raise UnsupportedConstruct(f"{tok.pos.line}:{tok.pos.column}: {tok.text!r} is not supported")
        if self.at("let"):
            self.k += 1
            name, pos = self.ident()
            self.expect(":")
            t = self.type_()
            self.expect("=")
            value = self.expr()
            self.expect(";")
            self.declare(name, t, pos)
            return Let(name, t, value, tok.pos)
        if self.at("for"):
            if in_loop:
                raise UnsupportedConstruct(f"{tok.pos.line}:{tok.pos.column}: nested loops are not supported")
            self.k += 1
            var, pos = self.ident()
            self.expect("in")
            lo = self.expr()
            self.expect("..")
            self.declare(var, INT, pos)
            hi = self.expr()
            body = self.block(in_loop=True)
            return For(var, lo, hi, tuple(body), tok.pos)
        if self.at("return"):
            self.k += 1
            value = self.expr()
            self.expect(";")
            return Return(value, tok.pos)
        name, pos = self.ident()
        self.use(name, pos)
        if self.at("."):
            self.k += 1
            method, mpos = self.ident()
            if method != "push":
                raise UnsupportedConstruct(f"{mpos.line}:{mpos.column}: unsupported method {method!r}")
            self.expect("(")
            value = self.expr()
            self.expect(")")
            self.expect(";")
            return Push(name, value, tok.pos)
        self.expect("=")
        value = self.expr()
        self.expect(";")
        return Assign(name, value, tok.pos)

    # -- expressions (precedence climbing)

    def expr(self, min_prec=1):
        left = self.atom()
        while self.tok.kind == "sym" and self.tok.text in _BINOPS and _BINOPS[self.tok.text] >= min_prec:
            op_tok = self.tok
            prec = _BINOPS[op_tok.text]
            self.k += 1
            right = self.expr(prec + 1)
            if prec == 2 and isinstance(left, BinOp) and _BINOPS[left.op] == 2:
                raise self.error("comparisons do not chain", op_tok)
            left = BinOp(op_tok.text, left, right, op_tok.pos)
        return left

    def atom(self):
        tok = self.tok
        if tok.kind == "int":
            self.k += 1
            return Num(int(tok.text), tok.pos)
        if self.at("("):
            self.k += 1
            e = self.expr()
            self.expect(")")
            return e
        if self.at("["):
            self.k += 1
            self.expect("]")
            return EmptyList(tok.pos)
        if self.at("len"):
            self.k += 1
            self.expect("(")
            name, pos = self.ident()
            self.use(name, pos)
            self.expect(")")
            return Len(name, tok.pos)
        if tok.kind == "ident":
            name, pos = self.ident()
            self.use(name, pos)
            if self.at("["):
                self.k += 1
                idx = self.expr()
                self.expect("]")
                return Index(name, idx, pos)
            return Name(name, pos)
        raise self.error("expected an expression")


def parse_source(text: str) -> SourceAST:
    """Parse mini-language text into a :class:`Function`."""
    return _Parser(text).program()


# ---------------------------------------------------------------- reference interpreter


class _Return(Exception):
    def __init__(self, value):
        self.value = value


def _src_eval(e, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, EmptyList):
        return ()
    if isinstance(e, Name):
        return env[e.name]
    if isinstance(e, Len):
        return len(env[e.seq])
    if isinstance(e, Index):
        seq, i = env[e.seq], _src_eval(e.index, env)
        if not 0 <= i < len(seq):
            raise IndexOutOfBounds(f"{e.seq}[{i}] with length {len(seq)}")
        return seq[i]
    x, y = _src_eval(e.left, env), _src_eval(e.right, env)
    op = e.op
    if op == "+":
        return x + y
    if op == "-":
        return x - y
    if op == "*":
        return x * y
    if op == "<":
        return x < y
    if op == "<=":
        return x <= y
    if op == "==":
        return x == y
    return bool(x) and bool(y)


def interpret(ast: SourceAST, args: dict, max_steps: int = 100_000):
    """Run the source program directly (not through the IR) on ``args``."""
    env = {}
    for name, _ in ast.params:
        env[name] = tuple(args[name]) if isinstance(args[name], (list, tuple)) else args[name]
    steps = 0

    def run(stmts):
        nonlocal steps
        for s in stmts:
            if isinstance(s, Let) or isinstance(s, Assign):
                env[s.name] = _src_eval(s.value, env)
            elif isinstance(s, Push):
                env[s.name] = env[s.name] + (_src_eval(s.value, env),)
            elif isinstance(s, Return):
                raise _Return(_src_eval(s.value, env))
            elif isinstance(s, For):
                env[s.var] = _src_eval(s.lo, env)
                while env[s.var] < _src_eval(s.hi, env):
                    steps += 1
                    if steps > max_steps:
                        raise LiftError("iteration limit exceeded")
                    run(s.body)
                    env[s.var] += 1

    try:
        run(ast.body)
    except _Return as r:
        return r.value
    raise LiftError(f"function {ast.name} ended without return")


# ---------------------------------------------------------------- analysis


@dataclass(frozen=True)
class LoopNest:
    """Symbolic form of a single-loop kernel.

    ``counter`` is the loop variable; ``lo`` and ``hi`` are the loop bounds
    as IR over params and state (``cond`` is ``counter < hi``).
    """

    name: str
    params: tuple
    state_vars: tuple
    init: dict
    cond: Expr
    update: dict
    output_var: str
    output_type: IRType
    counter: str
    lo: Expr
    hi: Expr

    @property
    def context(self):
        return dict(self.params + self.state_vars)

    @property
    def tensor_params(self):
        return tuple(n for n, t in self.params if t.is_seq)

    def initial_state(self, args):
        env = dict(args)
        return {v: ir.evaluate(self.init[v], env) for v, _ in self.state_vars}

    def run(self, args, max_steps=100_000):
        """Execute init, then update while cond; return (output, loop-head states)."""
        state = self.initial_state(args)
        trace = [dict(state)]
        steps = 0
        while ir.evaluate(self.cond, {**args, **state}):
            steps += 1
            if steps > max_steps:
                raise LiftError("iteration limit exceeded")
            env = {**args, **state}
            state = {v: ir.evaluate(self.update[v], env) for v, _ in self.state_vars}
            trace.append(dict(state))
        return state[self.output_var], trace


def _to_ir(e, sym):
    """Translate a source expression, replacing names by ``sym`` bindings."""
    if isinstance(e, Num):
        return ir.Int(e.value)
    if isinstance(e, EmptyList):
        return ir.empty()
    if isinstance(e, Name):
        return sym[e.name]
    if isinstance(e, Len):
        return ir.length(sym[e.seq])
    if isinstance(e, Index):
        return ir.index(sym[e.seq], _to_ir(e.index, sym))
    x, y = _to_ir(e.left, sym), _to_ir(e.right, sym)
    return {
        "+": ir.add, "-": ir.sub, "*": ir.mul, "<": ir.lt, "<=": ir.le, "==": ir.eq, "&&": ir.and_,
    }[e.op](x, y)


def _assigned(stmts):
    out = []
    for s in stmts:
        if isinstance(s, (Assign, Push)) and s.name not in out:
            out.append(s.name)
    return out


def analyze(ast: SourceAST) -> LoopNest:
    loops = [s for s in ast.body if isinstance(s, For)]
    if not loops:
        raise NoLoop(f"function {ast.name} has no loop to lift")
    if len(loops) > 1:
        raise UnsupportedConstruct("only one loop per function is supported")
    k = ast.body.index(loops[0])
    pre, loop, post = ast.body[:k], loops[0], ast.body[k + 1:]
    if len(post) != 1 or not isinstance(post[0], Return):
        raise UnsupportedConstruct("the loop must be followed by exactly one return statement")
    ret = post[0].value
    if not isinstance(ret, Name):
        raise UnsupportedConstruct("the function must return a variable")

    params = tuple(ast.params)
    param_names = {n for n, _ in params}
    types = dict(params)
    sym = {n: Var(n) for n, _ in params}
    for s in pre:
        if isinstance(s, Return):
            raise UnsupportedConstruct("return before the loop leaves nothing to lift")
        if isinstance(s, Let):
            types[s.name] = s.type
        elif s.name in param_names:
            raise UnsupportedConstruct(f"parameter {s.name!r} may not be modified")
        value = _to_ir(s.value, sym)
        if isinstance(s, Push):
            value = ir.append(sym[s.name], value)
        sym[s.name] = ir.simplify(value)

    mutated = _assigned(loop.body)
    for name in mutated:
        if name in param_names:
            raise UnsupportedConstruct(f"parameter {name!r} may not be modified")
        if name == loop.var:
            raise UnsupportedConstruct(f"loop counter {loop.var!r} may not be assigned in the body")
    state_names = [loop.var] + [n for n in mutated if n in types]
    if ret.name not in state_names:
        raise UnsupportedConstruct(f"returned variable {ret.name!r} is not updated by the loop")
    types[loop.var] = INT

    # loop-invariant locals are inlined; mutated ones become state variables
    init = {loop.var: ir.simplify(_to_ir(loop.lo, sym))}
    for n in state_names[1:]:
        init[n] = sym[n]
    state_sym = dict(sym)
    for n in state_names:
        state_sym[n] = Var(n)
    cur = dict(state_sym)
    for s in loop.body:
        if isinstance(s, Let):
            types[s.name] = s.type
            cur[s.name] = _to_ir(s.value, cur)
        elif isinstance(s, Assign):
            cur[s.name] = _to_ir(s.value, cur)
        elif isinstance(s, Push):
            cur[s.name] = ir.append(cur[s.name], _to_ir(s.value, cur))
        else:
            raise UnsupportedConstruct("loop bodies may only contain let, assignment, and push")
    update = {loop.var: ir.add(Var(loop.var), ir.Int(1))}
    for n in state_names[1:]:
        update[n] = cur[n]
    hi = _to_ir(loop.hi, state_sym)
    lo = init[loop.var]
    cond = ir.lt(Var(loop.var), hi)

    state_vars = tuple((n, types[n]) for n in state_names)
    ctx = dict(params + state_vars)
    for n, t in state_vars:
        _expect_type(init[n], dict(params), t, f"initial value of {n}")
        _expect_type(update[n], ctx, t, f"update of {n}")
    _expect_type(cond, ctx, BOOL, "loop bound")
    if types[ret.name] != ast.return_type:
        raise IRTypeError(f"returns {ret.name} of type {types[ret.name]} but is declared {ast.return_type}")
    return LoopNest(
        name=ast.name,
        params=params,
        state_vars=state_vars,
        init=init,
        cond=cond,
        update=update,
        output_var=ret.name,
        output_type=types[ret.name],
        counter=loop.var,
        lo=lo,
        hi=hi,
    )


def _expect_type(e, ctx, t, what):
    got = ir.typecheck(e, ctx)
    if got != t:
        raise IRTypeError(f"{what} has type {got}, expected {t}")


def load_kernel(path) -> LoopNest:
    return analyze(parse_source(Path(path).read_text(encoding="utf-8")))

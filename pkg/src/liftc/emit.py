"""Reports and target code for a synthesis result.

The C side targets ``liftc_accel.h``, a stand-in accelerator API with one
entry point per registry operator. Prototypes follow one convention:

* a sequence argument ``p`` becomes ``const int *p, int p_len``;
* a matrix argument ``P`` becomes ``const int *P, int P_rows, int P_cols``
  (row-major);
* a sequence result is written to ``int *out`` and its length returned;
* an integer result is returned directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from liftc import ir
from liftc.errors import NotFound
from liftc.ir import INT, SEQ_INT, SEQ_SEQ_INT, Call, Var

HEADER_NAME = "liftc_accel.h"
EMPTY_OUTPUT = "empty_output"


@dataclass(frozen=True)
class LiftedProgram:
    kernel: str
    call: dict  # {"op", "args", "constants"}; args map tensor params to names or nested calls
    invariant: str
    candidate_index: int
    mode: str
    bound: Optional[int]
    solver: str
    wall_ms: int


def call_tree(term, registry) -> dict:
    if term is None:
        return {"op": EMPTY_OUTPUT, "args": {}, "constants": {}}
    spec = registry[term.fn]
    args, consts = {}, {}
    for (p, _), a in zip(spec.params, term.args):
        if p in spec.holes:
            v = ir.evaluate(a, {})
            consts[p] = list(v) if isinstance(v, tuple) else v
        elif isinstance(a, Call):
            args[p] = call_tree(a, registry)
        elif isinstance(a, Var):
            args[p] = a.name
        else:
            raise ValueError(f"unexpected operator argument {ir.to_sexp(a)}")
    return {"op": term.fn, "args": args, "constants": consts}


def lift(result, registry) -> LiftedProgram:
    if not result.found:
        raise NotFound(f"no verified candidate for {result.loop.name} ({result.status.value})")
    cand = result.candidate
    return LiftedProgram(
        kernel=result.loop.name,
        call=call_tree(cand.meta.get("term"), registry),
        invariant=ir.to_sexp(cand.inv),
        candidate_index=cand.index,
        mode=result.mode,
        bound=result.bound,
        solver=result.solver,
        wall_ms=result.stats.wall_ms,
    )


def report(result, registry, timings=True) -> dict:
    """The report as a dict, for any status."""
    lifted = lift(result, registry) if result.found else None
    stats = result.stats.as_dict()
    if not timings:
        stats["wall_ms"] = 0
    verification = {"mode": result.mode, "bound": result.bound}
    if lifted is not None:
        verification["candidate_index"] = lifted.candidate_index
        verification["solver"] = lifted.solver
    return {
        "kernel": result.loop.name,
        "status": result.status.value,
        "lifted": lifted.call if lifted else None,
        "invariant": lifted.invariant if lifted else None,
        "verification": verification,
        "stats": stats,
    }


def dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def emit_json(result, registry, timings=True) -> str:
    """Canonical JSON for a Found result; raises NotFound otherwise."""
    if not result.found:
        raise NotFound(f"no verified candidate for {result.loop.name} ({result.status.value})")
    return dumps(report(result, registry, timings))


# ---------------------------------------------------------------- C


def _c_params(params):
    out = []
    for name, t in params:
        if t is INT:
            out.append(f"int {name}")
        elif t is SEQ_INT:
            out += [f"const int *{name}", f"int {name}_len"]
        elif t is SEQ_SEQ_INT:
            out += [f"const int *{name}", f"int {name}_rows", f"int {name}_cols"]
        else:
            raise ValueError(f"no C mapping for {t}")
    return out


def _c_result(t):
    if t is INT:
        return []
    if t is SEQ_INT:
        return ["int *out"]
    return ["int *out", "int *out_cols"]


def prototype(spec) -> str:
    params = _c_params(spec.params) + _c_result(spec.return_type)
    return f"int liftc_{spec.name}({', '.join(params)});"


def emit_header(registry) -> str:
    lines = [
        "/* Accelerator entry points targeted by liftc stubs.",
        " *",
        " * A stand-in interface: one function per registry operator.",
        " * Sequences are (pointer, length) pairs, matrices are row-major",
        " * (pointer, rows, cols). Sequence results go to `out` and the",
        " * function returns their length; matrix results also report",
        " * `out_cols` and return the row count; Int results are returned.",
        " */",
        "#ifndef LIFTC_ACCEL_H",
        "#define LIFTC_ACCEL_H",
        "",
    ]
    for name in registry:
        spec = registry[name]
        if spec.doc:
            lines.append(f"/* {spec.doc} */")
        lines.append(prototype(spec))
    lines += ["", "#endif /* LIFTC_ACCEL_H */", ""]
    return "\n".join(lines)


class _CWriter:
    def __init__(self, registry, loop):
        self.registry = registry
        self.loop = loop
        self.decls = []
        self.stmts = []
        self.n = 0
        # every intermediate fits in the total input size (squared once
        # matrices are involved, since a product can outgrow its factors)
        dims = [f"{n}_len" for n, t in loop.params if t is SEQ_INT]
        dims += [f"{n}_rows + {n}_cols" for n, t in loop.params if t is SEQ_SEQ_INT]
        total = " + ".join(dims + ["1"])
        self.capacity = total if all(t is not SEQ_SEQ_INT for _, t in loop.params) else f"({total}) * ({total})"

    def fresh(self, stem):
        self.n += 1
        return f"{stem}{self.n - 1}"

    def arg(self, tree_or_name, t):
        """C argument list text for a tensor argument."""
        if isinstance(tree_or_name, str):
            if t is SEQ_SEQ_INT:
                return [tree_or_name, f"{tree_or_name}_rows", f"{tree_or_name}_cols"]
            return [tree_or_name, f"{tree_or_name}_len"]
        spec = self.registry[tree_or_name["op"]]
        tmp = self.fresh("t")
        if spec.return_type is SEQ_SEQ_INT:
            self.decls.append(f"int {tmp}[{self.capacity}];")
            self.decls.append(f"int {tmp}_cols = 0;")
            self.stmts.append(f"int {tmp}_rows = {self.call(tree_or_name, [tmp, '&' + tmp + '_cols'])};")
            return [tmp, f"{tmp}_rows", f"{tmp}_cols"]
        self.decls.append(f"int {tmp}[{self.capacity}];")
        self.stmts.append(f"int {tmp}_len = {self.call(tree_or_name, [tmp])};")
        return [tmp, f"{tmp}_len"]

    def call(self, tree, out):
        spec = self.registry[tree["op"]]
        parts = []
        for p, t in spec.params:
            if p in tree["constants"]:
                v = tree["constants"][p]
                if isinstance(v, list):
                    name = self.fresh("k")
                    self.decls.append(f"static const int {name}[] = {{{', '.join(map(str, v))}}};")
                    parts += [name, str(len(v))]
                else:
                    parts.append(str(v))
            else:
                parts += self.arg(tree["args"][p], t)
        return f"liftc_{spec.name}({', '.join(parts + out)})"


def emit_c_stub(result, registry) -> str:
    """A C function with the kernel's signature shape forwarding to the accelerator API."""
    prog = lift(result, registry)
    loop = result.loop
    out_name = loop.output_var
    params = _c_params(loop.params)
    if loop.output_type is SEQ_INT:
        params.append(f"int *{out_name}")
    elif loop.output_type is SEQ_SEQ_INT:
        params += [f"int *{out_name}", f"int *{out_name}_cols"]
    w = _CWriter(registry, loop)
    if prog.call["op"] == EMPTY_OUTPUT:
        ret = "0"
        unused = [p.split()[-1].lstrip("*") for p in params]
    else:
        out = []
        if loop.output_type is SEQ_INT:
            out = [out_name]
        elif loop.output_type is SEQ_SEQ_INT:
            out = [out_name, f"{out_name}_cols"]
        ret = w.call(prog.call, out)
        unused = []
    lines = [
        f"/* {loop.name}: lifted by liftc (candidate {prog.candidate_index}, {prog.mode} verification) */",
        f"#include \"{HEADER_NAME}\"",
        "",
        f"int {loop.name}({', '.join(params) or 'void'})",
        "{",
    ]
    lines += [f"    {d}" for d in w.decls]
    lines += [f"    (void){u};" for u in unused]
    lines += [f"    {s}" for s in w.stmts]
    lines.append(f"    return {ret};")
    lines += ["}", ""]
    return "\n".join(lines)

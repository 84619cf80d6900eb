"""The ``liftc`` command line tool."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from liftc import emit, ir
from liftc.errors import LiftError
from liftc.frontend import load_kernel
from liftc.operators import builtin_registry, load_registry
from liftc.smt import Backend, Outcome, SmtConfig, default_solver_cmd
from liftc.synth import GrammarConfig, Status, synthesize
from liftc.vcgen import Candidate, make_vcs

EXIT_FOUND = 0
EXIT_ERROR = 1
EXIT_NO_CANDIDATE = 2
EXIT_TIMEOUT = 3

_EXIT = {Status.FOUND: EXIT_FOUND, Status.NO_CANDIDATE: EXIT_NO_CANDIDATE, Status.TIMEOUT: EXIT_TIMEOUT}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="liftc", description="Lift a mini-language loop kernel onto accelerator operators.")
    p.add_argument("kernel", help="kernel source file (.mc)")
    p.add_argument("--solver-cmd", help="SMT-LIB solver command (default: $LIFTC_SOLVER or 'z3 -in')")
    p.add_argument("--config", help="JSON file with search settings and extra operator spec files")
    p.add_argument("--max-depth", type=int, help="maximum operator nesting depth")
    p.add_argument("--timeout", type=float, help="per-query solver timeout in seconds (default 10)")
    p.add_argument("--total-timeout", type=float, help="wall-clock budget for the whole search in seconds")
    p.add_argument("--seed", type=int, help="seed for the random test inputs")
    p.add_argument("--bounded", type=int, metavar="N", help="bounded verification with sequence lengths <= N")
    p.add_argument("--dump-smt", metavar="DIR", help="write every solver script to DIR")
    p.add_argument("--dump-vcs", action="store_true", help="write the final candidate's VCs next to the report")
    p.add_argument("--emit", choices=("json", "c", "both"), default="both")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--verify-only", metavar="CANDIDATE_FILE",
                   help="check a given (ps ...) (inv ...) candidate instead of searching")
    p.add_argument("--reproducible", action="store_true", help="report wall_ms as 0 so reports are byte-stable")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(path):
    """Read a JSON config: GrammarConfig fields plus ``operators`` (spec files)."""
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise LiftError(f"{path}: config must be a JSON object")
    known = {f.name for f in fields(GrammarConfig)}
    spec_files = [path.parent / p for p in data.pop("operators", [])]
    unknown = sorted(set(data) - known)
    if unknown:
        raise LiftError(f"{path}: unknown config keys {', '.join(unknown)}")
    for k, v in data.items():
        if isinstance(v, list):
            data[k] = tuple(v)
    return data, spec_files


def read_candidate(path, loop, registry) -> Candidate:
    """Parse a candidate file holding ``(ps <expr>)`` and ``(inv <expr>)``."""
    forms = ir.read_sexp(Path(path).read_text(encoding="utf-8"))
    parts = {}
    for form in forms:
        if not (isinstance(form, list) and len(form) == 2 and form[0] in ("ps", "inv")):
            raise LiftError(f"{path}: expected (ps EXPR) and (inv EXPR) forms")
        if form[0] in parts:
            raise LiftError(f"{path}: duplicate ({form[0]} ...) form")
        parts[form[0]] = ir.from_tree(form[1])
    missing = {"ps", "inv"} - set(parts)
    if missing:
        raise LiftError(f"{path}: missing ({' '.join(sorted(missing))} ...)")
    return Candidate(parts["ps"], parts["inv"], {"index": 0})


def _json_value(v):
    if isinstance(v, tuple):
        return [_json_value(x) for x in v]
    return v


def _write(out_dir, name, text):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text, encoding="utf-8")


def _verify_only(args, loop, registry, smt):
    cand = read_candidate(args.verify_only, loop, registry)
    vcs = make_vcs(loop, cand, registry)
    outcome = Backend(registry, smt).verify(vcs, cand.index)
    report = {
        "kernel": loop.name,
        "status": outcome.status.value,
        "summary": ir.to_sexp(cand.ps),
        "invariant": ir.to_sexp(cand.inv),
        "vc": outcome.vc_label,
        "witness": {k: _json_value(v) for k, v in sorted(outcome.witness.items())} if outcome.witness else None,
        "verification": {"mode": "bounded" if smt.bounded is not None else "full", "bound": smt.bounded},
    }
    out_dir = Path(args.out)
    _write(out_dir, f"{loop.name}.verify.json", emit.dumps(report))
    if args.dump_vcs:
        _write(out_dir, f"{loop.name}.vcs", vcs.to_sexp())
    sys.stdout.write(emit.dumps(report))
    if outcome.verified:
        return EXIT_FOUND
    return EXIT_TIMEOUT if outcome.status is Outcome.TIMEOUT else EXIT_NO_CANDIDATE


def run(args) -> int:
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="liftc: %(message)s", stream=sys.stderr)
    kernel_path = Path(args.kernel)
    if not kernel_path.is_file():
        raise FileNotFoundError(f"{kernel_path}: no such kernel file")
    loop = load_kernel(kernel_path)

    settings, spec_files = load_config(args.config) if args.config else ({}, [])
    registry = load_registry(spec_files) if spec_files else builtin_registry()
    for key, value in (("max_depth", args.max_depth), ("seed", args.seed), ("bounded", args.bounded),
                       ("query_timeout", args.timeout), ("total_timeout", args.total_timeout)):
        if value is not None:
            settings[key] = value
    cfg = GrammarConfig(**settings)

    smt = SmtConfig(solver_cmd=args.solver_cmd or default_solver_cmd(), timeout=cfg.query_timeout,
                    bounded=cfg.bounded, kernel_name=loop.name,
                    dump_dir=Path(args.dump_smt) if args.dump_smt else None)
    if args.verify_only:
        return _verify_only(args, loop, registry, smt)

    result = synthesize(loop, cfg, registry, smt=smt)
    report = emit.report(result, registry, timings=not args.reproducible)
    text = emit.dumps(report)
    out_dir = Path(args.out)
    if args.emit in ("json", "both") or not result.found:
        _write(out_dir, f"{loop.name}.json", text)
    if result.found and args.emit in ("c", "both"):
        _write(out_dir, f"{loop.name}.c", emit.emit_c_stub(result, registry))
        _write(out_dir, emit.HEADER_NAME, emit.emit_header(registry))
    if result.found and args.dump_vcs:
        _write(out_dir, f"{loop.name}.vcs", make_vcs(loop, result.candidate, registry).to_sexp())
    sys.stdout.write(text)
    return _EXIT[result.status]


def run_cli(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"liftc: usage error: {e}", file=sys.stderr)
        return EXIT_ERROR
    try:
        return run(args)
    except (LiftError, OSError, ValueError, TypeError) as e:
        print(f"liftc: error: {e}", file=sys.stderr)
        return EXIT_ERROR


def main():
    sys.exit(run_cli())

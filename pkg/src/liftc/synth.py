"""Enumerative search for a verified (summary, invariant) pair.

Candidates come from a small grammar: a program summary ``out == T`` where
``T`` composes registry operators over the kernel's sequence parameters, and
an invariant that applies the same term to prefix slices of the inputs.
Each candidate is screened by running the source loop on a seeded test
suite before the SMT backend sees it; counterexamples from the solver are
fed back into that suite.
"""

from __future__ import annotations

import enum
import itertools
import logging
import random
import time
from dataclasses import dataclass, field, replace
from typing import Optional

from liftc import ir
from liftc.errors import LiftError
from liftc.ir import INT, Call, Var
from liftc.operators import recursion_step
from liftc.smt import Backend, Outcome, SmtConfig, default_solver_cmd
from liftc.vcgen import Candidate, check_vcs, make_vcs

log = logging.getLogger(__name__)


@dataclass
class GrammarConfig:
    max_depth: int = 2
    hole_grids: dict = field(default_factory=dict)  # {op: {param: values}} overrides
    slice_offsets: tuple = (0, 1, 2)
    bound_conjuncts: bool = True
    empty_output: bool = True
    test_lengths: tuple = (0, 1, 2, 3, 5, 8)
    tests_per_length: int = 2
    test_values: tuple = (-10, 10)
    seed: int = 42
    max_candidates: Optional[int] = None
    query_timeout: float = 10.0
    total_timeout: float = 600.0
    bounded: Optional[int] = None

    def __post_init__(self):
        if self.max_depth < 1:
            raise LiftError("max_depth must be at least 1")
        if not self.slice_offsets:
            raise LiftError("slice_offsets must not be empty")
        if not self.test_lengths or self.tests_per_length < 1:
            raise LiftError("the test suite must not be empty")
        lo, hi = self.test_values
        if lo > hi:
            raise LiftError("test_values must be an interval lo <= hi")
        for op, grids in self.hole_grids.items():
            for param, values in grids.items():
                if not values:
                    raise LiftError(f"empty grid for {op}.{param}")

    def grid(self, spec, param):
        override = self.hole_grids.get(spec.name, {}).get(param)
        return tuple(override) if override is not None else tuple(spec.holes[param])


class Status(enum.Enum):
    FOUND = "found"
    NO_CANDIDATE = "no_candidate"
    TIMEOUT = "timeout"


@dataclass
class Stats:
    enumerated: int = 0
    oracle_pruned: int = 0
    smt_queries: int = 0  # candidates submitted to the backend
    counterexamples: int = 0
    wall_ms: int = 0
    solver_calls: int = 0  # solver processes, lemma proofs included
    unknown: int = 0

    def as_dict(self):
        return {
            "enumerated": self.enumerated,
            "oracle_pruned": self.oracle_pruned,
            "smt_queries": self.smt_queries,
            "counterexamples": self.counterexamples,
            "wall_ms": self.wall_ms,
        }


@dataclass
class SynthesisResult:
    status: Status
    loop: object
    candidate: Optional[Candidate] = None
    stats: Stats = field(default_factory=Stats)
    mode: str = "full"
    bound: Optional[int] = None
    solver: str = ""
    outcome: object = None

    @property
    def found(self):
        return self.status is Status.FOUND


# ---------------------------------------------------------------- test suite


def make_test_suite(loop, cfg: GrammarConfig):
    """Seeded inputs on which the source loop runs without error.

    All sequence parameters of one input share a length.
    """
    rng = random.Random(cfg.seed)
    lo, hi = cfg.test_values
    tests = []
    for n in cfg.test_lengths:
        for _ in range(cfg.tests_per_length):
            env = {}
            for name, t in loop.params:
                if t.is_seq:
                    env[name] = tuple(rng.randint(lo, hi) for _ in range(n))
                else:
                    env[name] = rng.randint(lo, hi)
            tests.append(env)
    return [t for t in tests if _runs(loop, t)]


def _runs(loop, env):
    try:
        loop.run(env)
    except LiftError:
        return False
    return True


# ---------------------------------------------------------------- enumeration


@dataclass(frozen=True)
class _Skel:
    op: str
    args: tuple  # tensor arguments: _Skel or parameter name

    @property
    def size(self):
        return 1 + sum(a.size for a in self.args if isinstance(a, _Skel))


def _skeletons(registry, inputs, t, depth):
    """Operator skeletons of result type ``t`` (holes unfilled), registry order."""
    out = []
    for name in registry:
        spec = registry[name]
        if not spec.enumerable or spec.return_type is not t:
            continue
        choices = []
        for _, pt in spec.tensor_params:
            opts = [p for p, ptype in inputs if ptype is pt]
            if depth > 1:
                opts += _skeletons(registry, inputs, pt, depth - 1)
            choices.append(opts)
        for args in itertools.product(*choices):
            out.append(_Skel(name, tuple(args)))
    return out


def _hole_slots(skel, registry):
    """Preorder (spec, param) list of the holes in ``skel``."""
    spec = registry[skel.op]
    slots = [(spec, p) for p, _ in spec.params if p in spec.holes]
    for a in skel.args:
        if isinstance(a, _Skel):
            slots.extend(_hole_slots(a, registry))
    return slots


def _fill(skel, registry, values):
    """Build the IR term; consumes ``values`` (an iterator) in preorder."""
    spec = registry[skel.op]
    holes = {p: ir.as_expr(next(values)) for p, _ in spec.params if p in spec.holes}
    tensors = iter(skel.args)
    args = []
    for p, _ in spec.params:
        if p in holes:
            args.append(holes[p])
        else:
            a = next(tensors)
            args.append(_fill(a, registry, values) if isinstance(a, _Skel) else Var(a))
    return Call(skel.op, tuple(args))


def _steps(term, registry, step_of):
    """Slice multipliers for the invariant: 1 plus each operator's recursion step."""
    ks = {1}
    for node in ir.subterms(term):
        if isinstance(node, Call):
            spec = registry[node.fn]
            step = step_of[node.fn]
            if isinstance(step, str):
                v = node.args[spec.param_names.index(step)]
                if isinstance(v, ir.Int):
                    ks.add(v.value)
            elif isinstance(step, int):
                ks.add(step)
    return sorted(ks)


def _bound_sets(loop, cfg):
    i = Var(loop.counter)
    if not cfg.bound_conjuncts:
        return [()]
    ge = ir.le(loop.lo, i)
    return [(), (ge,), (ge, ir.le(i, loop.hi)), (ge, ir.lt(i, loop.hi))]


class _Group:
    """All candidates sharing one program summary; invariants are built lazily."""

    def __init__(self, ps, term, holes, count, variants):
        self.ps = ps
        self.term = term
        self.holes = holes
        self.count = count
        self._variants = variants

    def __len__(self):
        return self.count

    def variants(self):
        """Yield ``(meta, inv)`` in enumeration order."""
        return self._variants()


def _groups(loop, cfg, registry):
    out = Var(loop.output_var)
    bounds = _bound_sets(loop, cfg)
    ctr = ir.simplify(ir.sub(Var(loop.counter), loop.lo))
    zero = ir.empty() if loop.output_type.is_seq else ir.Int(0)
    if ir.simplify(loop.init[loop.output_var]) != zero:
        return  # only accumulators that start empty (or at zero) are lifted

    if cfg.empty_output and loop.output_type.is_seq:
        def empty_variants():
            for b in bounds:
                meta = {"term": None, "offset": None, "step": None, "bounds": b}
                yield meta, ir.and_(*b, ir.eq(out, ir.empty()))

        yield _Group(ir.eq(out, ir.empty()), None, (), len(bounds), empty_variants)

    inputs = [n for n, t in loop.params if t.is_seq]
    step_of = {name: recursion_step(registry[name]) for name in registry}
    skels = _skeletons(registry, [(n, t) for n, t in loop.params if t.is_seq], loop.output_type, cfg.max_depth)
    skels.sort(key=lambda s: s.size)  # stable: registry order within a size
    for skel in skels:
        slots = _hole_slots(skel, registry)
        grids = [cfg.grid(spec, p) for spec, p in slots]
        for values in itertools.product(*grids):
            term = _fill(skel, registry, iter(values))
            steps = _steps(term, registry, step_of)

            def term_variants(term=term, steps=steps):
                for c in cfg.slice_offsets:
                    for k in steps:
                        hi = ir.simplify(ir.add(ir.mul(ir.Int(k), ctr), ir.Int(c)))
                        prefixed = ir.substitute(term, {n: ir.slice_(Var(n), ir.Int(0), hi) for n in inputs})
                        for b in bounds:
                            meta = {"term": term, "offset": c, "step": k, "bounds": b}
                            yield meta, ir.and_(*b, ir.eq(out, prefixed))

            holes = tuple((f"{spec.name}.{p}", v) for (spec, p), v in zip(slots, values))
            count = len(cfg.slice_offsets) * len(steps) * len(bounds)
            yield _Group(ir.eq(out, term), term, holes, count, term_variants)


def enumerate_candidates(loop, cfg: GrammarConfig, registry):
    """Yield every candidate in the deterministic search order."""
    index = 0
    for group in _groups(loop, cfg, registry):
        for meta, inv in group.variants():
            if cfg.max_candidates is not None and index >= cfg.max_candidates:
                return
            yield Candidate(group.ps, inv, {**meta, "index": index, "holes": group.holes})
            index += 1


# ---------------------------------------------------------------- oracle


@dataclass
class OracleResult:
    passed: bool
    witness: Optional[dict] = None
    reason: str = ""

    def __bool__(self):
        return self.passed


class Oracle:
    """Concrete screening against source traces; caches per-input runs."""

    def __init__(self, loop, registry, tests=()):
        self.loop = loop
        self.registry = registry
        self.tests = []
        self.runs = []
        for t in tests:
            self.add_test(t)

    def add_test(self, env):
        env = {n: env[n] for n, _ in self.loop.params}
        if env in self.tests:
            return False
        try:
            out, trace = self.loop.run(env)
        except LiftError:
            return False
        self.tests.append(env)
        self.runs.append((out, trace))
        return True

    def check_ps(self, ps):
        # longest inputs first: they refute wrong summaries soonest
        order = sorted(range(len(self.tests)), key=lambda k: -len(self.runs[k][1]))
        for k in order:
            env, (value, trace) = self.tests[k], self.runs[k]
            if not self._holds(ps, {**env, **trace[-1]}):
                return OracleResult(False, env, f"summary fails; source returns {_show(value)}")
        return OracleResult(True)

    def check_inv(self, inv):
        for env, (_, trace) in zip(self.tests, self.runs):
            for step, state in enumerate(trace):
                if not self._holds(inv, {**env, **state}):
                    return OracleResult(False, env, f"invariant fails at iteration {step}")
        return OracleResult(True)

    def check(self, cand):
        res = self.check_ps(cand.ps)
        return res if not res else self.check_inv(cand.inv)

    def _holds(self, formula, env):
        try:
            return ir.evaluate(formula, env, self.registry) is True
        except LiftError:
            return False


def _show(v):
    return list(v) if isinstance(v, tuple) else v


def oracle_prefilter(loop, cand: Candidate, tests, registry) -> OracleResult:
    """Pass, or Fail with the first input whose trace falsifies Inv or PS."""
    return Oracle(loop, registry, tests).check(cand)


# ---------------------------------------------------------------- search


def synthesize(loop, cfg: GrammarConfig, registry, solver=None, smt: Optional[SmtConfig] = None) -> SynthesisResult:
    """CEGIS loop: enumerate, screen, verify; first verified candidate wins."""
    start = time.monotonic()
    smt = replace(smt) if smt is not None else SmtConfig()
    if solver is not None:
        smt.solver_cmd = solver
    smt.solver_cmd = smt.solver_cmd or default_solver_cmd()
    smt.bounded = cfg.bounded
    smt.kernel_name = loop.name
    backend = Backend(registry, smt)
    oracle = Oracle(loop, registry, make_test_suite(loop, cfg))
    vc_witnesses = []
    stats = Stats()
    mode = "bounded" if cfg.bounded is not None else "full"
    result = SynthesisResult(Status.NO_CANDIDATE, loop, stats=stats, mode=mode, bound=cfg.bounded,
                             solver=smt.solver_cmd)

    def finish(status, cand=None, outcome=None):
        stats.wall_ms = int((time.monotonic() - start) * 1000)
        stats.solver_calls = backend.queries
        result.status, result.candidate, result.outcome = status, cand, outcome
        return result

    index = 0
    limit = cfg.max_candidates
    for group in _groups(loop, cfg, registry):
        if limit is not None and index >= limit:
            break
        n = len(group) if limit is None else min(len(group), limit - index)
        if not oracle.check_ps(group.ps):
            stats.enumerated += n
            stats.oracle_pruned += n
            index += n
            continue
        for j, (meta, inv) in enumerate(itertools.islice(group.variants(), n)):
            if time.monotonic() - start > cfg.total_timeout:
                return finish(Status.TIMEOUT)
            cand = Candidate(group.ps, inv, {**meta, "index": index, "holes": group.holes})
            index += 1
            stats.enumerated += 1
            if not oracle.check_inv(cand.inv):
                stats.oracle_pruned += 1
                continue
            vcs = make_vcs(loop, cand, registry)
            if _refuted(vcs, vc_witnesses, registry):
                stats.oracle_pruned += 1
                continue
            remaining = cfg.total_timeout - (time.monotonic() - start)
            backend.config.timeout = max(0.0, min(cfg.query_timeout, remaining))
            stats.smt_queries += 1
            outcome = backend.verify(vcs, cand.index)
            log.info("candidate %d %s: %s", cand.index, ir.to_infix(cand.inv), outcome.status.value)
            if outcome.verified:
                return finish(Status.FOUND, cand, outcome)
            if outcome.status is Outcome.TIMEOUT and time.monotonic() - start > cfg.total_timeout:
                return finish(Status.TIMEOUT)
            if outcome.status is not Outcome.COUNTEREXAMPLE:
                stats.unknown += 1
                continue
            stats.counterexamples += 1
            vc_witnesses.append(outcome.witness)
            oracle.add_test(outcome.witness)
            if not oracle.check_ps(group.ps):
                # the new test rules out the summary itself; skip the rest of the group
                rest = n - j - 1
                stats.enumerated += rest
                stats.oracle_pruned += rest
                index += rest
                break
    return finish(Status.NO_CANDIDATE)


def _refuted(vcs, witnesses, registry):
    for env in witnesses:
        try:
            values = check_vcs(vcs, env, registry)
        except (LiftError, KeyError):
            continue
        if not all(values.values()):
            return True
    return False

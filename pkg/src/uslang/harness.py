"""Differential testing of scheduled programs against the reference interpreter.

A case is a pipeline, a schedule and an input.  The algorithm side is
evaluated with ``realize_alg``; the program side is lowered, scheduled,
completed by a bounds engine and executed.  Permitted outcomes are
AlgError, AssertStop, RDOMSTOP and Equivalent; DIVERGENT and MEMFAULT are
soundness bugs.
"""

from __future__ import annotations

import json
import random
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .alg import FuncDef, Pipeline, RealizeInput, Stage, negative_rdoms, pure_stage, realize_alg, render_pipeline, validate
from .bounds import lift_beta0
from .expr import ERR_MEM, Access, Const, Expr, Interval, Op, Value, Var, accesses, is_error, render_value
from .lower import lower
from .sched import (
    AlignBounds,
    BoundExtent,
    ComputeAt,
    Fuse,
    LoopName,
    ScheduleError,
    Specialize,
    Split,
    StoreAt,
    Swap,
    Traverse,
    apply_directive,
    apply_schedule,
    render_schedule,
    used_names,
    validate_schedule,
)
from .tir import AssertFailed, CompiledProgram, Completed, MemError, RdomFailed, TgtProgram, iter_loops

Engine = Callable[[TgtProgram], TgtProgram]

SOUNDNESS_BUGS = ("DIVERGENT", "MEMFAULT")
VERDICT_KINDS = ("AlgError", "AssertStop", "RDOMSTOP", "Equivalent", "DIVERGENT", "MEMFAULT")


@dataclass(frozen=True)
class Verdict:
    kind: str
    point: Optional[tuple] = None
    alg: Optional[Value] = None
    ir: Optional[Value] = None
    detail: str = ""
    # for RDOMSTOP: whether some rdom extent is negative under the input
    explained: bool = True

    @property
    def is_bug(self) -> bool:
        return self.kind in SOUNDNESS_BUGS or not self.explained

    def __str__(self) -> str:
        if self.kind == "Equivalent":
            return "Equivalent"
        if self.kind == "DIVERGENT":
            return f"DIVERGENT at {list(self.point)}: alg={render_value(self.alg)} ir={render_value(self.ir)}"
        if self.kind == "AlgError":
            return f"AlgError at {list(self.point)}: {render_value(self.alg)}"
        s = f"{self.kind}: {self.detail}"
        if self.kind == "RDOMSTOP" and not self.explained:
            s += " (no rdom extent is negative for this input)"
        return s


def complete(p: Pipeline, S: Sequence, engine: Engine = lift_beta0) -> TgtProgram:
    return engine(apply_schedule(lower(p), S))


def alg_error(p: Pipeline, z: RealizeInput, img=None) -> Optional[Verdict]:
    img = realize_alg(p, z) if img is None else img
    for pt in z.points():
        if is_error(img[pt]):
            return Verdict("AlgError", pt, img[pt])
    return None


def judge(p: Pipeline, z: RealizeInput, img, outcome) -> Verdict:
    """Classify an IR outcome against the algorithm's image on R(z)."""
    if isinstance(outcome, AssertFailed):
        return Verdict("AssertStop", detail=f"assert {outcome.site}")
    if isinstance(outcome, RdomFailed):
        return Verdict("RDOMSTOP", detail=outcome.site, explained=bool(negative_rdoms(p, z.params)))
    if isinstance(outcome, MemError):
        return Verdict("MEMFAULT", detail=f"{outcome.site} at {list(outcome.point)}")
    for pt in z.points():
        a = img[pt]
        b = outcome.output.get(pt, ERR_MEM)
        if b != a:
            return Verdict("DIVERGENT", pt, a, b)
    return Verdict("Equivalent")


def check_confluence(p: Pipeline, S: Sequence, engine: Engine, z: RealizeInput) -> Verdict:
    img = realize_alg(p, z)
    bad = alg_error(p, z, img)
    if bad is not None:
        return bad
    prog = CompiledProgram(complete(p, S, engine))
    return judge(p, z, img, prog.run(z))


def _signature(outcome):
    if isinstance(outcome, Completed):
        return ("completed", tuple(outcome.output.items()))
    return (outcome.kind, getattr(outcome, "site", ""), getattr(outcome, "point", None))


def has_parallel(p: TgtProgram) -> bool:
    return any(s.parallel for _, _, s in iter_loops(p))


def permutation_mismatches(prog: CompiledProgram, z: RealizeInput, seeds: Sequence[int], reference=None) -> List[int]:
    """Seeds whose shuffled parallel iteration order changes the outcome."""
    ref = _signature(reference if reference is not None else prog.run(z))
    return [s for s in seeds if _signature(prog.run(z, seed=s)) != ref]


# --------------------------------------------------------------------------- #
# Generators


@dataclass(frozen=True)
class FuzzConfig:
    seed: int = 42
    pipelines: int = 50
    schedules: int = 5
    inputs: int = 4
    max_funcs: int = 4
    max_dims: int = 2
    max_stages: int = 3
    max_rdom_extent: int = 4
    max_window_len: int = 8
    max_depth: int = 4
    perm_seeds: int = 3

    def __post_init__(self):
        caps = (self.max_funcs, self.max_dims, self.max_stages, self.max_rdom_extent, self.max_window_len, self.max_depth)
        if min(caps) <= 0:
            raise ValueError("all size caps must be positive")
        if min(self.pipelines, self.schedules, self.inputs, self.perm_seeds) < 0:
            raise ValueError("counts must be non-negative")


VAR_POOLS = (("x", "y"), ("x", "y"), ("i", "j"), ("a", "b"))
RVARS = ("r", "u")
_BIN = ["+", "+", "-", "*", "/", "%", "min", "max", "<", "==", "&&"]


class PipelineGen:
    def __init__(self, rng: random.Random, cfg: FuzzConfig):
        self.rng = rng
        self.cfg = cfg
        self.params: Tuple[str, ...] = ()
        self.dims: Dict[str, int] = {}

    def const(self) -> Const:
        return Const(self.rng.randint(-3, 5))

    def leaf(self, scope) -> Expr:
        if scope and self.rng.random() < 0.7:
            return Var(self.rng.choice(scope))
        return self.const()

    def index(self, scope, producers, depth) -> Expr:
        r = self.rng.random()
        if r < 0.012 and producers and depth > 0:
            # data-dependent index
            return self.access(scope, producers, depth - 1)
        if r < 0.025 and producers and depth > 0:
            return Op("%", (self.access(scope, producers, depth - 1), Const(self.rng.randint(1, 4))))
        if not scope or r < 0.2:
            return self.const()
        v = Var(self.rng.choice(scope))
        c = self.rng.randint(-2, 2)
        if r < 0.3:
            return Op("*", (v, Const(2)))
        return v if c == 0 else Op("+", (v, Const(c)))

    def access(self, scope, producers, depth) -> Access:
        g = self.rng.choice(producers)
        return Access(g, tuple(self.index(scope, producers, depth) for _ in range(self.dims[g])))

    def expr(self, scope, producers, depth) -> Expr:
        r = self.rng.random()
        if depth <= 0 or r < 0.25:
            return self.leaf(scope)
        if r < 0.55 and producers:
            return self.access(scope, producers, depth - 1)
        o = self.rng.choice(_BIN + ["select", "!"])
        if o == "select":
            return Op("select", tuple(self.expr(scope, producers, depth - 1) for _ in range(3)))
        if o == "!":
            return Op("!", (self.expr(scope, producers, depth - 1),))
        return Op(o, (self.expr(scope, producers, depth - 1), self.expr(scope, producers, depth - 1)))

    def rdom_bound(self, extent: bool) -> Expr:
        if self.params and self.rng.random() < 0.15:
            return Var(self.rng.choice(self.params))
        if extent:
            return Const(self.rng.randint(0, self.cfg.max_rdom_extent))
        return Const(self.rng.randint(-2, 2))

    def update(self, name: str, xs: Tuple[str, ...], producers) -> Stage:
        rng = self.rng
        pure = [x for x in xs if rng.random() < 0.6]
        nr = rng.randint(0 if len(pure) == len(xs) else 1, 2)
        rdom = tuple((RVARS[k], Interval(self.rdom_bound(False), self.rdom_bound(True))) for k in range(nr))
        rvs = [r for r, _ in rdom]
        red_scope = rvs + list(self.params)
        lhs = []
        for x in xs:
            if x in pure:
                lhs.append(Var(x))
            elif rvs and rng.random() < 0.8:
                c = rng.randint(-1, 1)
                v = Var(rng.choice(rvs))
                lhs.append(v if c == 0 else Op("+", (v, Const(c))))
            else:
                lhs.append(self.const())
        scope = pure + red_scope
        self_read = Access(
            name,
            tuple(Var(x) if x in pure else (e if rng.random() < 0.7 else self.index(red_scope, [], 0)) for x, e in zip(xs, lhs)),
        )
        other = self.expr(scope, producers, self.cfg.max_depth - 1)
        how = rng.choice(["+", "+", "-", "min", "max", "select"])
        if how == "select":
            rhs = Op("select", (self.expr(scope, producers, 1), other, self_read))
        else:
            rhs = Op(how, (self_read, other))
        pred: Expr = Const(1)
        if rng.random() < 0.25 and scope:
            pred = Op(rng.choice(["<", "=="]), (Var(rng.choice(scope)), Const(rng.randint(0, 3))))
        return Stage(rdom, tuple(lhs), rhs, pred)

    def func(self, name: str, producers, output: bool) -> FuncDef:
        rng = self.rng
        lo = 1 if output and rng.random() < 0.95 else 0
        nd = rng.randint(lo, self.cfg.max_dims)
        xs = VAR_POOLS[0 if output else rng.randrange(len(VAR_POOLS))][:nd]
        self.dims[name] = nd
        scope = list(xs) + list(self.params)
        body = self.expr(scope, producers, self.cfg.max_depth)
        if producers and rng.random() < 0.8:
            # usually read the previous func so chains survive pruning
            prev = Access(producers[-1], tuple(self.index(scope, [], 0) for _ in range(self.dims[producers[-1]])))
            body = Op(rng.choice(["+", "-", "max"]), (prev, body))
        stages = [pure_stage(xs, body)]
        for _ in range(rng.randint(1, self.cfg.max_stages) - 1):
            stages.append(self.update(name, xs, producers))
        return FuncDef(name, xs, tuple(stages))

    def pipeline(self) -> Pipeline:
        rng = self.rng
        self.params = tuple(f"p{k + 1}" for k in range(rng.randint(0, 2)))
        self.dims = {}
        n = rng.randint(1, self.cfg.max_funcs)
        names = [f"f{k}" for k in range(n)]
        funcs = [self.func(nm, names[:k], k == n - 1) for k, nm in enumerate(names)]
        # keep only what the output needs
        by = {f.name: f for f in funcs}
        need, todo = set(), [names[-1]]
        while todo:
            g = todo.pop()
            if g in need:
                continue
            need.add(g)
            for st in by[g].stages:
                for e in st.exprs():
                    todo.extend(a.func for a in accesses(e) if a.func in by)
        return Pipeline(names[-1], self.params, tuple(f for f in funcs if f.name in need))


def gen_pipeline(rng: random.Random, cfg: FuzzConfig, tries: int = 200) -> Tuple[Pipeline, int]:
    """A valid pipeline and the number of rejected candidates."""
    g = PipelineGen(rng, cfg)
    for k in range(tries):
        p = g.pipeline()
        if not validate(p):
            return p, k
    raise RuntimeError("pipeline generator produced no valid pipeline")


def _loop_name(lid) -> LoopName:
    return LoopName(lid.func, lid.var, lid.spec, lid.stage)


class ScheduleGen:
    def __init__(self, rng: random.Random, p: Pipeline):
        self.rng = rng
        self.p = p
        self.counter = 0

    def fresh(self, base: str, used: set) -> str:
        while True:
            self.counter += 1
            n = f"{base}{self.counter}"
            if n not in used:
                return n

    def _try(self, cur: TgtProgram, d, out: list) -> TgtProgram:
        try:
            nxt = apply_directive(cur, d)
        except ScheduleError:
            return cur
        out.append(d)
        return nxt

    def _place(self, cur: TgtProgram, f: str, kind, out: list) -> bool:
        """Append a compute-at/store-at of ``f`` that applies, preferring consumer loops."""
        consumers = {
            g.name for g in self.p.funcs for st in g.stages for e in st.exprs() if any(a.func == f for a in accesses(e))
        }
        loops = [lid for lid, _, _ in iter_loops(cur) if lid.func != f]
        self.rng.shuffle(loops)
        loops.sort(key=lambda lid: lid.func not in consumers)
        for lid in loops[:8]:
            d = kind(f, _loop_name(lid))
            try:
                apply_directive(cur, d)
            except ScheduleError:
                continue
            out.append(d)
            return True
        return False

    def loop_directive(self, cur: TgtProgram):
        rng = self.rng
        loops = list(iter_loops(cur))
        if not loops:
            return None
        lid, _, s = rng.choice(loops)
        name = _loop_name(lid)
        kind = rng.choice(["split", "split", "split", "fuse", "swap", "traverse", "traverse"])
        used = used_names(cur)
        if kind == "split":
            strategy = "guard"
            if cur.func(lid.func).nstages == 1:
                strategy = rng.choice(["guard", "shift", "round"])
            return Split(name, self.fresh(lid.var + "o", used), self.fresh(lid.var + "i", used), Const(rng.randint(1, 4)), strategy)
        if kind == "fuse":
            return Fuse(name, self.fresh("v", used))
        if kind == "swap":
            return Swap(name)
        return Traverse(name, rng.random() < 0.8)

    def startup_cond(self, cur: TgtProgram) -> Expr:
        v = Var(self.rng.choice(cur.all_params))
        return Op(self.rng.choice(["<", ">", "=="]), (v, Const(self.rng.randint(-1, 4))))

    def schedule(self, base: TgtProgram) -> list:
        rng = self.rng
        cur, out = base, []
        funcs = [f.name for f in base.funcs]
        if cur.all_params and rng.random() < 0.2:
            f = rng.choice(funcs)
            conds = tuple(self.startup_cond(cur) for _ in range(rng.randint(1, 2)))
            cur = self._try(cur, Specialize(f, conds), out)
        for _ in range(rng.randint(0, 4)):
            d = self.loop_directive(cur)
            if d is not None:
                cur = self._try(cur, d, out)
        producers = [f for f in funcs if f != base.output]
        rng.shuffle(producers)
        placed = []
        for f in producers:
            if rng.random() < 0.7 and self._place(cur, f, ComputeAt, out):
                cur = apply_directive(cur, out[-1])
                placed.append(f)
        for f in placed:
            if rng.random() < 0.7 and self._place(cur, f, StoreAt, out):
                cur = apply_directive(cur, out[-1])
        if rng.random() < 0.1:
            f = rng.choice(funcs)
            info = cur.func(f)
            if info.vars:
                dim = rng.choice(info.vars)
                if rng.random() < 0.5:
                    d = BoundExtent(f, dim, Const(rng.randint(0, 8)))
                else:
                    d = AlignBounds(f, dim, Const(rng.randint(1, 4)), Const(0))
                cur = self._try(cur, d, out)
        return out


def gen_schedule(rng: random.Random, p: Pipeline, base: Optional[TgtProgram] = None) -> list:
    return ScheduleGen(rng, p).schedule(lower(p) if base is None else base)


def gen_input(rng: random.Random, p: Pipeline, cfg: FuzzConfig) -> RealizeInput:
    params = tuple(rng.randint(-1, 4) for _ in p.params)
    window = tuple((rng.randint(-3, 3), rng.randint(0, cfg.max_window_len)) for _ in range(p.output_func.dims))
    return RealizeInput(params, window)


# --------------------------------------------------------------------------- #
# Shrinking


def ddmin(items: list, failing: Callable[[list], bool]) -> list:
    """Delta debugging over a list: drop chunks while ``failing`` stays true."""
    items = list(items)
    n = 2
    while len(items) >= 2:
        size = -(-len(items) // n)
        chunks = [items[i : i + size] for i in range(0, len(items), size)]
        for k in range(len(chunks)):
            rest = [d for j, c in enumerate(chunks) if j != k for d in c]
            if failing(rest):
                items, n = rest, max(n - 1, 2)
                break
        else:
            if n >= len(items):
                break
            n = min(len(items), 2 * n)
    if len(items) == 1 and failing([]):
        return []
    return items


def shrink_schedule(p: Pipeline, S: list, engine: Engine, z: RealizeInput, kind: str) -> list:
    base = lower(p)

    def failing(cand):
        if validate_schedule(base, cand):
            return False
        try:
            v = check_confluence(p, cand, engine, z)
        except Exception:
            return False
        return v.kind == kind or (kind == "RDOMSTOP?" and not v.explained)

    return ddmin(S, failing)


# --------------------------------------------------------------------------- #
# Fuzzing


@dataclass
class FuzzReport:
    config: FuzzConfig
    engine: str
    histogram: Counter = field(default_factory=Counter)
    records: List[dict] = field(default_factory=list)
    failures: List[dict] = field(default_factory=list)
    perm_mismatches: int = 0
    unexplained_rdomstops: int = 0
    rejected_pipelines: int = 0
    elapsed: float = 0.0

    @property
    def cases(self) -> int:
        return len(self.records)

    @property
    def ok(self) -> bool:
        return not any(self.histogram[k] for k in SOUNDNESS_BUGS) and not self.perm_mismatches and not self.unexplained_rdomstops

    def text(self) -> str:
        c = self.config
        lines = [
            f"fuzz seed={c.seed} engine={self.engine} cases={self.cases} time={self.elapsed:.1f}s",
            "verdicts:",
        ]
        lines += [f"  {k:<11} {self.histogram[k]}" for k in VERDICT_KINDS]
        n = max(self.cases, 1)
        lines.append(f"assert-stop rate: {self.histogram['AssertStop'] / n:.3f}")
        lines.append(f"permutation mismatches: {self.perm_mismatches}")
        lines.append(f"unexplained RDOMSTOP: {self.unexplained_rdomstops}")
        lines.append(f"rejected pipelines: {self.rejected_pipelines}")
        for f in self.failures[:10]:
            lines.append(f"FAILURE {f['case']}: {f['verdict']}")
            lines.append(f"  input params={f['params']} window={f['window']}")
            lines.append("  pipeline:")
            lines += ["    " + ln for ln in f["pipeline"].splitlines()]
            lines.append("  minimized schedule:")
            lines += ["    " + ln for ln in (f["minimized"].splitlines() or ["(empty)"])]
        lines.append("result: " + ("PASS" if self.ok else "FAIL"))
        return "\n".join(lines) + "\n"

    def write_records(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for r in sorted(self.records, key=lambda r: r["case"]):
                fh.write(json.dumps(r, sort_keys=True) + "\n")


def _case_key(pi: int, si: int, ii: int) -> str:
    return f"{pi:04d}.{si:02d}.{ii:02d}"


def fuzz(config: FuzzConfig = FuzzConfig(), engine: Engine = lift_beta0, engine_name: str = "beta0", minimize: bool = True) -> FuzzReport:
    rep = FuzzReport(config, engine_name)
    t_start = time.perf_counter()
    perm_seeds = list(range(1, config.perm_seeds + 1))
    for pi in range(config.pipelines):
        prng = random.Random(f"{config.seed}/pipeline/{pi}")
        p, rejected = gen_pipeline(prng, config)
        rep.rejected_pipelines += rejected
        base = lower(p)
        nsched = max(config.schedules, 1)
        for si in range(nsched):
            srng = random.Random(f"{config.seed}/schedule/{pi}/{si}")
            S = [] if config.schedules == 0 else gen_schedule(srng, p, base)
            t0 = time.perf_counter()
            done = engine(apply_schedule(base, S))
            prog = CompiledProgram(done)
            t_engine = time.perf_counter() - t0
            parallel = has_parallel(done)
            for ii in range(config.inputs):
                irng = random.Random(f"{config.seed}/input/{pi}/{si}/{ii}")
                z = gen_input(irng, p, config)
                t1 = time.perf_counter()
                img = realize_alg(p, z)
                t_alg = time.perf_counter() - t1
                t2 = time.perf_counter()
                v = alg_error(p, z, img)
                mismatched: List[int] = []
                if v is None:
                    out = prog.run(z)
                    v = judge(p, z, img, out)
                    if parallel:
                        mismatched = permutation_mismatches(prog, z, perm_seeds, out)
                t_ir = time.perf_counter() - t2
                key = _case_key(pi, si, ii)
                rep.histogram[v.kind] += 1
                rep.records.append(
                    {
                        "case": key,
                        "seed": config.seed,
                        "pipeline": pi,
                        "schedule": si,
                        "input": ii,
                        "verdict": v.kind,
                        "detail": str(v),
                        "directives": len(S),
                        "permutation_mismatch": bool(mismatched),
                        "ms_engine": round(1000 * t_engine, 3),
                        "ms_alg": round(1000 * t_alg, 3),
                        "ms_ir": round(1000 * t_ir, 3),
                    }
                )
                if mismatched:
                    rep.perm_mismatches += 1
                if v.kind == "RDOMSTOP" and not v.explained:
                    rep.unexplained_rdomstops += 1
                if v.is_bug or mismatched:
                    kind = v.kind if v.kind in SOUNDNESS_BUGS else ("RDOMSTOP?" if not v.explained else v.kind)
                    small = shrink_schedule(p, S, engine, z, kind) if minimize and (v.is_bug) else S
                    rep.failures.append(
                        {
                            "case": key,
                            "verdict": str(v) + (f" (permutation seeds {mismatched} differ)" if mismatched else ""),
                            "params": list(z.params),
                            "window": [list(w) for w in z.window],
                            "pipeline": render_pipeline(p),
                            "schedule": render_schedule(S),
                            "minimized": render_schedule(small),
                        }
                    )
    rep.elapsed = time.perf_counter() - t_start
    return rep


# --------------------------------------------------------------------------- #
# Engine quality


@dataclass
class QualityReport:
    engine: str
    considered: int = 0
    skipped: Counter = field(default_factory=Counter)
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def text(self) -> str:
        lines = [f"engine {self.engine}: {self.considered} clean cases, {len(self.violations)} violations"]
        lines += [f"  skipped ({k}): {n}" for k, n in sorted(self.skipped.items())]
        lines += ["  " + v for v in self.violations[:20]]
        return "\n".join(lines) + "\n"


def check_engine_quality(candidate: Engine, corpus: Sequence[Tuple[Pipeline, Sequence, Sequence[RealizeInput]]], name: str = "candidate") -> QualityReport:
    """Wherever beta0 completes cleanly and matches the algorithm, the candidate must too."""
    rep = QualityReport(name)
    for ci, (p, S, inputs) in enumerate(corpus):
        scheduled = apply_schedule(lower(p), S)
        ref = CompiledProgram(lift_beta0(scheduled))
        cand = None
        for ii, z in enumerate(inputs):
            img = realize_alg(p, z)
            if alg_error(p, z, img) is not None:
                rep.skipped["alg error"] += 1
                continue
            v = judge(p, z, img, ref.run(z))
            if v.kind != "Equivalent":
                rep.skipped[f"beta0 {v.kind}"] += 1
                continue
            rep.considered += 1
            if cand is None:
                cand = CompiledProgram(candidate(scheduled))
            w = judge(p, z, img, cand.run(z))
            if w.kind != "Equivalent":
                rep.violations.append(f"case {ci}.{ii} params={list(z.params)} window={[list(x) for x in z.window]}: {w}")
    return rep


def build_corpus(seed: int = 7, pipelines: int = 12, schedules: int = 3, inputs: int = 3, cfg: Optional[FuzzConfig] = None):
    """Generated (pipeline, schedule, inputs) cases for engine comparison."""
    cfg = cfg or FuzzConfig(seed=seed)
    out = []
    for pi in range(pipelines):
        p, _ = gen_pipeline(random.Random(f"{seed}/corpus/{pi}"), cfg)
        base = lower(p)
        for si in range(schedules):
            S = gen_schedule(random.Random(f"{seed}/corpus/{pi}/{si}"), p, base)
            zs = [gen_input(random.Random(f"{seed}/corpus/{pi}/{si}/{ii}"), p, cfg) for ii in range(inputs)]
            out.append((p, S, zs))
    return out

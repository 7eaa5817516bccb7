"""Algorithm language: pipelines of funcs over unbounded integer lattices.

``realize_alg`` is the big-step reference interpreter; every scheduled program
is compared against it.  Funcs are evaluated lazily at demanded points only and
update stages are unrolled into point updates that shadow the previous
definition.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .expr import (
    ARITY,
    Access,
    Const,
    Err,
    Expr,
    HoleRef,
    Inf,
    Interval,
    Op,
    StructuralError,
    Value,
    Var,
    eval_expr,
    eval_op,
    is_startup_expr,
    render,
    walk,
)

RESERVED_LABEL = re.compile(r"^[sz]\d+$")


@dataclass(frozen=True)
class Stage:
    rdom: Tuple[Tuple[str, Interval], ...]
    lhs: Tuple[Expr, ...]
    rhs: Expr
    predicate: Expr = Const(1)

    @property
    def rvars(self) -> Tuple[str, ...]:
        return tuple(name for name, _ in self.rdom)

    def exprs(self) -> Iterator[Expr]:
        for _, iv in self.rdom:
            yield iv.min
            yield iv.len
        yield from self.lhs
        yield self.rhs
        yield self.predicate


def pure_stage(pure_vars: Sequence[str], rhs: Expr) -> Stage:
    return Stage((), tuple(Var(x) for x in pure_vars), rhs, Const(1))


@dataclass(frozen=True)
class FuncDef:
    name: str
    vars: Tuple[str, ...]
    stages: Tuple[Stage, ...]

    @property
    def dims(self) -> int:
        return len(self.vars)


@dataclass(frozen=True)
class Pipeline:
    output: str
    params: Tuple[str, ...]
    funcs: Tuple[FuncDef, ...]

    def func(self, name: str) -> FuncDef:
        for f in self.funcs:
            if f.name == name:
                return f
        raise KeyError(name)

    @property
    def output_func(self) -> FuncDef:
        return self.func(self.output)

    def window_params(self) -> Tuple[str, ...]:
        out = []
        for x in self.output_func.vars:
            out += [f"{x}_min", f"{x}_len"]
        return tuple(out)

    def __str__(self) -> str:
        return render_pipeline(self)


@dataclass(frozen=True)
class RealizeInput:
    params: Tuple[int, ...]
    window: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        for mn, ln in self.window:
            if ln < 0:
                raise ValueError(f"window length must be non-negative, got {ln}")

    def points(self) -> Iterator[Tuple[int, ...]]:
        """Points of R(z) in row-major order (first dimension slowest)."""
        ranges = [range(mn, mn + ln) for mn, ln in self.window]
        return itertools.product(*ranges)

    def contains(self, point: Tuple[int, ...]) -> bool:
        return all(mn <= c < mn + ln for c, (mn, ln) in zip(point, self.window))


@dataclass
class BufferImage:
    dims: int
    values: Dict[Tuple[int, ...], Value] = field(default_factory=dict)

    def __getitem__(self, point) -> Value:
        return self.values[tuple(point)]

    def get(self, point, default=None):
        return self.values.get(tuple(point), default)

    def __contains__(self, point) -> bool:
        return tuple(point) in self.values

    def __len__(self) -> int:
        return len(self.values)

    def items(self):
        return sorted(self.values.items())

    def restrict(self, points) -> "BufferImage":
        return BufferImage(self.dims, {p: self.values[p] for p in points if p in self.values})


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.location}: [{self.rule}] {self.message}"


# --------------------------------------------------------------------------- #
# Validity


def classify_dims(f: FuncDef) -> List[Tuple[frozenset, frozenset]]:
    """Per stage, the (pure, reduction) dimension indices."""
    out = []
    for st in f.stages:
        names = set()
        for e in st.exprs():
            names |= {n.name for n in walk(e) if isinstance(n, Var)}
        pure = frozenset(i for i, x in enumerate(f.vars) if x in names)
        out.append((pure, frozenset(range(f.dims)) - pure))
    return out


def _self_accesses(f: FuncDef, st: Stage) -> Iterator[Access]:
    for e in st.exprs():
        for n in walk(e):
            if isinstance(n, Access) and n.func == f.name:
                yield n


def validate(p: Pipeline) -> List[Diagnostic]:
    diags: List[Diagnostic] = []

    def bad(rule, loc, msg):
        diags.append(Diagnostic(rule, loc, msg))

    names = [f.name for f in p.funcs]
    seen = set()
    for n in names:
        if n in seen:
            bad("unique-func-names", n, f"func {n} defined more than once")
        seen.add(n)
        if RESERVED_LABEL.match(n):
            bad("reserved-name", n, f"func name {n} collides with stage/specialization labels")
    if len(set(p.params)) != len(p.params):
        bad("unique-params", "pipeline", "duplicate parameter names")
    if not p.funcs or p.funcs[-1].name != p.output:
        bad("output-last", "pipeline", f"output func {p.output} must exist and be defined last")
    if p.output in names:
        for w in p.window_params():
            if w in p.params:
                bad("param-shadow", "pipeline", f"parameter {w} collides with a window parameter")

    params = set(p.params)
    arity: Dict[str, int] = {}
    for f in p.funcs:
        arity.setdefault(f.name, f.dims)
        loc_f = f"func {f.name}"
        if len(set(f.vars)) != len(f.vars):
            bad("unique-pure-vars", loc_f, "pure variable names must be unique")
        for x in f.vars:
            if x in params:
                bad("param-shadow", loc_f, f"pure variable {x} shadows a parameter")
        if not f.stages:
            bad("stages", loc_f, "a func needs at least a pure stage")
            continue
        s0 = f.stages[0]
        if s0.rdom or s0.lhs != tuple(Var(x) for x in f.vars) or s0.predicate != Const(1):
            bad("pure-first-stage", loc_f, "stage 0 must be a pure definition")
        if any(True for _ in _self_accesses(f, s0)):
            bad("pure-first-stage", loc_f, "stage 0 may not include a self-reference")

        for j, st in enumerate(f.stages):
            loc = f"{loc_f} stage {j}"
            rv = st.rvars
            if len(set(rv)) != len(rv):
                bad("unique-rvars", loc, "reduction variable names must be unique")
            for r in rv:
                if r in params or r in f.vars:
                    bad("rvar-shadow", loc, f"reduction variable {r} shadows another name")
            for r, iv in st.rdom:
                for e in (iv.min, iv.len):
                    if not is_startup_expr(e, params):
                        bad("rdom-startup", loc, f"rdom bound {render(e)} is not a startup expression")
            if len(st.lhs) != f.dims:
                bad("arity", loc, f"update lhs has {len(st.lhs)} indices, func has {f.dims} dimensions")
            bound = params | set(f.vars) | set(rv)
            for e in st.exprs():
                for n in walk(e):
                    if isinstance(n, (HoleRef, Inf)):
                        bad("no-holes", loc, "holes are not part of the algorithm language")
                    elif isinstance(n, Var) and n.name not in bound:
                        bad("unbound-var", loc, f"variable {n.name} is not bound")
                    elif isinstance(n, Op) and len(n.args) != ARITY.get(n.op, -1):
                        bad("arity", loc, f"operator {n.op} applied to {len(n.args)} arguments")
                    elif isinstance(n, Access):
                        if n.func == f.name:
                            if j == 0:
                                continue
                        elif n.func not in arity:
                            bad("define-before-use", loc, f"func {n.func} referenced before its definition")
                            continue
                        want = arity.get(n.func, f.dims)
                        if len(n.args) != want:
                            bad("arity", loc, f"access {render(n)} needs {want} indices")
            # syntactic separation
            pure, _ = classify_dims(f)[j]
            for i in sorted(pure):
                xi = Var(f.vars[i])
                if i < len(st.lhs) and st.lhs[i] != xi:
                    bad("separation", loc, f"lhs index {i} must be exactly {xi.name}")
                for a in _self_accesses(f, st):
                    if i < len(a.args) and a.args[i] != xi:
                        bad("separation", loc, f"self-access {render(a)} must use {xi.name} in dimension {i}")
    return diags


# --------------------------------------------------------------------------- #
# Reference interpreter


def _rdom_steps(st: Stage, env) -> Optional[List[Dict[str, int]]]:
    """Unrolled rdom assignments, outermost variable slowest; None if any extent < 0."""
    ranges = []
    for name, iv in st.rdom:
        mn = eval_expr(iv.min, env)
        ln = eval_expr(iv.len, env)
        if not (isinstance(mn, int) and isinstance(ln, int)):
            return None
        if ln < 0:
            return None
        ranges.append((name, range(mn, mn + ln)))
    if not ranges:
        return [{}]
    names = [n for n, _ in reversed(ranges)]
    return [dict(zip(names, vals)) for vals in itertools.product(*(r for _, r in reversed(ranges)))]


class _Realizer:
    def __init__(self, p: Pipeline, params: Dict[str, int], memoize: bool = True):
        self.p = p
        self.params = params
        self.defs = {f.name: f for f in p.funcs}
        self.memo: Optional[dict] = {} if memoize else None
        self.steps: Dict[str, list] = {}
        self.rdom_err: Dict[str, bool] = {}
        for f in p.funcs:
            per_stage = [_rdom_steps(st, params) for st in f.stages]
            self.rdom_err[f.name] = any(s is None for s in per_stage)
            self.steps[f.name] = per_stage

    def final(self, fname: str, point: Tuple[Value, ...]) -> Value:
        errs = [c for c in point if isinstance(c, Err)]
        if errs:
            return max(errs)
        if self.rdom_err[fname]:
            return Err.RDOM
        f = self.defs[fname]
        last = len(f.stages) - 1
        return self.value(fname, last, len(self.steps[fname][last]) if last else 0, point)

    def value(self, fname: str, k: int, t: int, point: Tuple[int, ...]) -> Value:
        """Value of ``fname`` at ``point`` after stage k-1 plus ``t`` unrolled updates of stage k."""
        key = (fname, k, t, point)
        memo = self.memo
        if memo is not None and key in memo:
            return memo[key]
        f = self.defs[fname]
        if k == 0:
            env = dict(self.params)
            env.update(zip(f.vars, point))
            v = eval_expr(f.stages[0].rhs, env, self._reader(fname, None))
        elif t == 0:
            prev = k - 1
            v = self.value(fname, prev, len(self.steps[fname][prev]) if prev else 0, point)
        else:
            st = f.stages[k]
            prev = self.value(fname, k, t - 1, point)
            env = dict(self.params)
            env.update(zip(f.vars, point))
            env.update(self.steps[fname][k][t - 1])
            reader = self._reader(fname, (k, t - 1))
            cond: Value = None
            for e, c in zip(st.lhs, point):
                term = eval_op("==", [eval_expr(e, env, reader), c])
                cond = term if cond is None else eval_op("&&", [cond, term])
            pred = eval_expr(st.predicate, env, reader)
            cond = pred if cond is None else eval_op("&&", [cond, pred])
            body = eval_expr(st.rhs, env, reader)
            v = eval_op("select", [cond, body, prev])
        if memo is not None:
            memo[key] = v
        return v

    def _reader(self, fname: str, self_at: Optional[Tuple[int, int]]):
        def read(a: Access, idx):
            if a.func == fname and self_at is not None:
                errs = [c for c in idx if isinstance(c, Err)]
                if errs:
                    return max(errs)
                return self.value(fname, self_at[0], self_at[1], idx)
            return self.final(a.func, idx)

        return read


def realize_alg(p: Pipeline, z: RealizeInput, memoize: bool = True) -> BufferImage:
    """Evaluate the output func at every point of the requested window."""
    if len(z.params) != len(p.params):
        raise StructuralError(f"pipeline takes {len(p.params)} parameters, got {len(z.params)}")
    out = p.output_func
    if len(z.window) != out.dims:
        raise StructuralError(f"output has {out.dims} dimensions, window has {len(z.window)}")
    r = _Realizer(p, dict(zip(p.params, z.params)), memoize=memoize)
    img = BufferImage(out.dims)
    for pt in z.points():
        img.values[pt] = r.final(p.output, pt)
    return img


def negative_rdoms(p: Pipeline, params: Sequence[int]) -> List[Tuple[str, int]]:
    """(func, stage) pairs whose rdom has a negative extent under ``params``."""
    env = dict(zip(p.params, params))
    return [
        (f.name, j)
        for f in p.funcs
        for j, st in enumerate(f.stages)
        if st.rdom and _rdom_steps(st, env) is None
    ]


# --------------------------------------------------------------------------- #
# Canonical text


def render_stage(f: FuncDef, j: int) -> str:
    st = f.stages[j]
    if j == 0:
        return render(st.rhs)
    head = ""
    if st.rdom:
        head = "rdom(" + ", ".join(f"{r} = ({render(iv.min)}, {render(iv.len)})" for r, iv in st.rdom) + ") in "
    s = head + "(" + ", ".join(render(e) for e in st.lhs) + ") <- " + render(st.rhs)
    if st.predicate != Const(1):
        s += " if " + render(st.predicate)
    return s


def render_func(f: FuncDef) -> str:
    body = "; ".join(render_stage(f, j) for j in range(len(f.stages)))
    return f"fun {f.name}({', '.join(f.vars)}) = {{ {body} }}"


def render_pipeline(p: Pipeline) -> str:
    lines = [f"pipeline {p.output}({', '.join(p.params)}) {{"]
    lines += [f"  {render_func(f)};" for f in p.funcs]
    lines.append("}")
    return "\n".join(lines) + "\n"

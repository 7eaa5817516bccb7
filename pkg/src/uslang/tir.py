"""Imperative loop-nest IR, with or without bounds holes, and its interpreter.

Statements are frozen dataclasses.  ``Seq`` is n-ary.  Labels are plain
strings: a func name marks the func's compute statement, ``s<i>`` a stage and
``z<j>`` a specialization branch.  The interpreter compiles a program to
closures once and then runs it against a concrete input.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

from .expr import (
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
    eval_op,
    _BINARY,
    map_expr,
    render,
    render_interval,
    simplify,
    walk,
)
from .alg import BufferImage, RealizeInput


# --------------------------------------------------------------------------- #
# Holes


@dataclass(frozen=True)
class HoleId:
    kind: str  # "mem" | "cpu"
    func: str
    dim: str
    stage: Optional[int] = None
    spec: Optional[int] = None

    def __str__(self) -> str:
        parts = [self.func]
        if self.stage is not None:
            parts.append(f"s{self.stage}")
        if self.spec is not None:
            parts.append(f"z{self.spec}")
        parts.append(self.dim)
        return f"?{self.kind}:" + ".".join(parts)

    def interval(self) -> Interval:
        return Interval(HoleRef(self, "min"), HoleRef(self, "len"))


def mem_hole(func: str, dim: str) -> HoleId:
    return HoleId("mem", func, dim)


def cpu_hole(func: str, dim: str, stage: Optional[int], spec: Optional[int], nstages: int) -> HoleId:
    """The compute hole for a stage; the last stage's hole is shared by all specializations."""
    if stage is None or stage == nstages - 1:
        return HoleId("cpu", func, dim)
    return HoleId("cpu", func, dim, stage, spec)


class SubstitutionError(Exception):
    pass


# --------------------------------------------------------------------------- #
# Statements


class Stmt:
    __slots__ = ()

    def __str__(self) -> str:
        return "\n".join(dump_stmt(self))


@dataclass(frozen=True)
class Nop(Stmt):
    pass


@dataclass(frozen=True)
class Assert(Stmt):
    cond: Expr


@dataclass(frozen=True)
class Seq(Stmt):
    stmts: Tuple[Stmt, ...]


@dataclass(frozen=True)
class Allocate(Stmt):
    func: str
    bounds: Tuple[Interval, ...]


@dataclass(frozen=True)
class Store(Stmt):
    func: str
    stage: int
    spec: Optional[int]
    args: Tuple[Expr, ...]
    rhs: Expr


@dataclass(frozen=True)
class If(Stmt):
    cond: Expr
    then: Stmt
    orelse: Stmt = Nop()


@dataclass(frozen=True)
class For(Stmt):
    var: str
    interval: Interval
    body: Stmt
    parallel: bool = False
    pure: bool = True


@dataclass(frozen=True)
class Let(Stmt):
    var: str
    value: Expr
    body: Stmt


@dataclass(frozen=True)
class Label(Stmt):
    name: str
    body: Stmt


def seq(*stmts: Stmt) -> Stmt:
    """Flattening sequence constructor; drops nops."""
    out: List[Stmt] = []
    for s in stmts:
        if isinstance(s, Seq):
            out.extend(s.stmts)
        elif not isinstance(s, Nop):
            out.append(s)
    if not out:
        return Nop()
    if len(out) == 1:
        return out[0]
    return Seq(tuple(out))


def stmt_children(s: Stmt) -> Tuple[Stmt, ...]:
    if isinstance(s, Seq):
        return s.stmts
    if isinstance(s, If):
        return (s.then, s.orelse)
    if isinstance(s, (For, Let, Label)):
        return (s.body,)
    return ()


def with_children(s: Stmt, kids: Sequence[Stmt]) -> Stmt:
    if isinstance(s, Seq):
        return Seq(tuple(kids))
    if isinstance(s, If):
        return replace(s, then=kids[0], orelse=kids[1])
    if isinstance(s, (For, Let, Label)):
        return replace(s, body=kids[0])
    return s


def stmt_exprs(s: Stmt) -> Tuple[Expr, ...]:
    """Expressions owned directly by ``s`` (not by its sub-statements)."""
    if isinstance(s, Assert):
        return (s.cond,)
    if isinstance(s, Allocate):
        return tuple(e for iv in s.bounds for e in (iv.min, iv.len))
    if isinstance(s, Store):
        return s.args + (s.rhs,)
    if isinstance(s, If):
        return (s.cond,)
    if isinstance(s, For):
        return (s.interval.min, s.interval.len)
    if isinstance(s, Let):
        return (s.value,)
    return ()


def map_stmt_exprs(s: Stmt, fn: Callable[[Expr], Expr]) -> Stmt:
    """Rewrite every expression in the tree with ``fn``."""

    def iv(i: Interval) -> Interval:
        return Interval(fn(i.min), fn(i.len))

    def go(s: Stmt) -> Stmt:
        if isinstance(s, Assert):
            return Assert(fn(s.cond))
        if isinstance(s, Allocate):
            return Allocate(s.func, tuple(iv(b) for b in s.bounds))
        if isinstance(s, Store):
            return replace(s, args=tuple(fn(a) for a in s.args), rhs=fn(s.rhs))
        if isinstance(s, If):
            return If(fn(s.cond), go(s.then), go(s.orelse))
        if isinstance(s, For):
            return replace(s, interval=iv(s.interval), body=go(s.body))
        if isinstance(s, Let):
            return Let(s.var, fn(s.value), go(s.body))
        if isinstance(s, Label):
            return Label(s.name, go(s.body))
        if isinstance(s, Seq):
            return Seq(tuple(go(c) for c in s.stmts))
        return s

    return go(s)


def walk_stmts(s: Stmt) -> Iterator[Stmt]:
    stack = [s]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(stmt_children(n)))


def get_at(s: Stmt, path: Sequence[int]) -> Stmt:
    for i in path:
        s = stmt_children(s)[i]
    return s


def replace_at(s: Stmt, path: Sequence[int], new: Stmt) -> Stmt:
    if not path:
        return new
    kids = list(stmt_children(s))
    kids[path[0]] = replace_at(kids[path[0]], path[1:], new)
    return with_children(s, kids)


def is_stage_label(name: str) -> bool:
    return len(name) > 1 and name[0] == "s" and name[1:].isdigit()


def is_spec_label(name: str) -> bool:
    return len(name) > 1 and name[0] == "z" and name[1:].isdigit()


# --------------------------------------------------------------------------- #
# Programs


@dataclass(frozen=True)
class FuncInfo:
    name: str
    vars: Tuple[str, ...]
    nstages: int


@dataclass(frozen=True)
class TgtProgram:
    output: str
    params: Tuple[str, ...]
    window_params: Tuple[str, ...]
    body: Stmt
    funcs: Tuple[FuncInfo, ...]

    @property
    def all_params(self) -> Tuple[str, ...]:
        return self.params + self.window_params

    def func(self, name: str) -> FuncInfo:
        for f in self.funcs:
            if f.name == name:
                return f
        raise KeyError(name)

    def func_names(self) -> set:
        return {f.name for f in self.funcs}

    @property
    def holes(self) -> frozenset:
        return frozenset(hole_refs(self.body))

    def with_body(self, body: Stmt) -> "TgtProgram":
        return replace(self, body=body)

    def __str__(self) -> str:
        return dump(self)


def hole_refs(s: Stmt) -> Iterator[HoleId]:
    for n in walk_stmts(s):
        for e in stmt_exprs(n):
            for x in walk(e):
                if isinstance(x, HoleRef):
                    yield x.hole


def check_no_holes(p: TgtProgram) -> List[str]:
    problems = []
    for n in walk_stmts(p.body):
        for e in stmt_exprs(n):
            for x in walk(e):
                if isinstance(x, HoleRef):
                    problems.append(f"hole {x.hole} remains")
                elif isinstance(x, Inf):
                    problems.append("infinity remains")
    return sorted(set(problems))


def substitute_holes(p: TgtProgram, gamma: Mapping[HoleId, Interval]) -> TgtProgram:
    """Fill every hole of ``p`` from ``gamma``; the result is hole-free."""
    missing = sorted(str(h) for h in p.holes if h not in gamma)
    if missing:
        raise SubstitutionError("no filling for " + ", ".join(missing))
    for h in p.holes:
        iv = gamma[h]
        for e in (iv.min, iv.len):
            if any(isinstance(x, (HoleRef, Inf)) for x in walk(e)):
                raise SubstitutionError(f"filling for {h} is not closed: {render_interval(iv)}")

    def fill(n: Expr) -> Optional[Expr]:
        if isinstance(n, HoleRef):
            iv = gamma[n.hole]
            return iv.min if n.part == "min" else iv.len
        return None

    body = map_stmt_exprs(p.body, lambda e: simplify(map_expr(e, fill)))
    return p.with_body(body)


# --------------------------------------------------------------------------- #
# Loop identities


@dataclass(frozen=True)
class LoopId:
    func: Optional[str]
    spec: Optional[int]
    stage: Optional[int]
    var: str

    def __str__(self) -> str:
        parts = [self.func or "?"]
        if self.spec is not None:
            parts.append(f"z{self.spec}")
        if self.stage is not None:
            parts.append(f"s{self.stage}")
        parts.append(self.var)
        return ".".join(parts)


def iter_loops(p: TgtProgram) -> Iterator[Tuple[LoopId, Tuple[int, ...], For]]:
    """Every For with its identity (from the enclosing labels) and path."""
    funcs = p.func_names()

    def go(s: Stmt, path, func, spec, stage):
        if isinstance(s, Label):
            if s.name in funcs:
                func, spec, stage = s.name, None, None
            elif is_spec_label(s.name):
                spec = int(s.name[1:])
            elif is_stage_label(s.name):
                stage = int(s.name[1:])
        if isinstance(s, For):
            yield LoopId(func, spec, stage, s.var), tuple(path), s
        for i, c in enumerate(stmt_children(s)):
            yield from go(c, path + [i], func, spec, stage)

    yield from go(p.body, [], None, None, None)


def find_label(s: Stmt, name: str, path=()) -> Optional[Tuple[int, ...]]:
    if isinstance(s, Label) and s.name == name:
        return tuple(path)
    for i, c in enumerate(stmt_children(s)):
        r = find_label(c, name, path + (i,))
        if r is not None:
            return r
    return None


def find_allocate(s: Stmt, func: str, path=()) -> Optional[Tuple[int, ...]]:
    if isinstance(s, Allocate) and s.func == func:
        return tuple(path)
    for i, c in enumerate(stmt_children(s)):
        r = find_allocate(c, func, path + (i,))
        if r is not None:
            return r
    return None


# --------------------------------------------------------------------------- #
# Textual dump


def _dump_iv(iv: Interval) -> str:
    return render_interval(iv)


def dump_stmt(s: Stmt, indent: int = 0) -> List[str]:
    pad = "  " * indent
    if isinstance(s, Seq):
        out = []
        for c in s.stmts:
            out += dump_stmt(c, indent)
        return out
    if isinstance(s, Nop):
        return [pad + "nop"]
    if isinstance(s, Assert):
        return [pad + "assert " + render(s.cond)]
    if isinstance(s, Allocate):
        return [pad + f"allocate {s.func}(" + ", ".join(_dump_iv(b) for b in s.bounds) + ")"]
    if isinstance(s, Store):
        head = render(Access(s.func, s.args, s.stage, s.spec))
        return [pad + f"{head} <- {render(s.rhs)}"]
    if isinstance(s, If):
        out = [pad + f"if {render(s.cond)}:"] + dump_stmt(s.then, indent + 1)
        if not isinstance(s.orelse, Nop):
            out += [pad + "else:"] + dump_stmt(s.orelse, indent + 1)
        return out
    if isinstance(s, For):
        kw = "parallel for" if s.parallel else "for"
        return [pad + f"{kw} {s.var} in {_dump_iv(s.interval)}:"] + dump_stmt(s.body, indent + 1)
    if isinstance(s, Let):
        return [pad + f"let {s.var} = {render(s.value)} in"] + dump_stmt(s.body, indent + 1)
    if isinstance(s, Label):
        return [pad + f"label {s.name}:"] + dump_stmt(s.body, indent + 1)
    raise StructuralError(f"unknown statement {s!r}")


def dump(p: TgtProgram) -> str:
    head = f"pipeline {p.output}({', '.join(p.all_params)}):"
    return "\n".join([head] + dump_stmt(p.body, 1)) + "\n"


# --------------------------------------------------------------------------- #
# Interpreter


@dataclass
class Buffer:
    bounds: Tuple[Tuple[Value, Value], ...]
    data: Dict[Tuple[int, ...], Value] = field(default_factory=dict)

    def in_bounds(self, pt) -> bool:
        if len(pt) != len(self.bounds):
            return False
        for c, (mn, ln) in zip(pt, self.bounds):
            if type(c) is not int or type(mn) is not int or type(ln) is not int:
                return False
            if not (mn <= c < mn + ln):
                return False
        return True

    def points(self):
        import itertools

        if any(type(mn) is not int or type(ln) is not int for mn, ln in self.bounds):
            return iter(())
        return itertools.product(*(range(mn, mn + ln) for mn, ln in self.bounds))

    def image(self) -> BufferImage:
        return BufferImage(len(self.bounds), {pt: self.data.get(pt, Err.MEM) for pt in self.points()})


@dataclass(frozen=True)
class Completed:
    output: BufferImage
    store: Dict[str, Buffer]
    trace: Counter

    kind = "completed"

    def writes(self, func: str) -> Counter:
        """Write multiplicity per point of ``func`` over all stages."""
        c: Counter = Counter()
        for (f, _stage, _spec, pt), n in self.trace.items():
            if f == func:
                c[pt] += n
        return c


@dataclass(frozen=True)
class AssertFailed:
    site: str
    kind = "assert"


@dataclass(frozen=True)
class RdomFailed:
    site: str
    kind = "rdom"


@dataclass(frozen=True)
class MemError:
    func: str
    point: tuple
    site: str
    kind = "mem"


class _Stuck(Exception):
    def __init__(self, outcome):
        self.outcome = outcome


class _State:
    __slots__ = ("mem", "trace", "rng")

    def __init__(self, rng):
        self.mem: Dict[str, Buffer] = {}
        self.trace: Counter = Counter()
        self.rng = rng


def _worst(vals):
    errs = [v for v in vals if type(v) is not int]
    return max(errs) if errs else None


def _compile_expr(e: Expr):
    t = type(e)
    if t is Const:
        v = e.value
        return lambda env, st: v
    if t is Var:
        name = e.name

        def var(env, st):
            try:
                return env[name]
            except KeyError:
                raise StructuralError(f"unbound variable {name!r}") from None

        return var
    if t is Op:
        fs = [_compile_expr(a) for a in e.args]
        o = e.op
        if len(fs) == 2 and o in _BINARY:
            fa, fb = fs
            fn = _BINARY[o]

            def binop(env, st):
                a = fa(env, st)
                b = fb(env, st)
                if type(a) is int and type(b) is int:
                    return fn(a, b)
                return eval_op(o, [a, b])

            return binop
        return lambda env, st: eval_op(o, [f(env, st) for f in fs])
    if t is Access:
        fs = [_compile_expr(a) for a in e.args]
        func = e.func
        site = render(e)

        def read(env, st):
            idx = tuple(f(env, st) for f in fs)
            w = _worst(idx)
            if w is not None:
                return w
            buf = st.mem.get(func)
            if buf is None or not buf.in_bounds(idx):
                raise _Stuck(MemError(func, idx, "read " + site))
            return buf.data.get(idx, Err.MEM)

        return read
    if t in (HoleRef, Inf):
        raise StructuralError(f"hole in executable program: {render(e)}")
    raise StructuralError(f"not an expression: {e!r}")


def _compile_stmt(s: Stmt):
    if isinstance(s, Nop):
        return lambda env, st: None
    if isinstance(s, Seq):
        parts = [_compile_stmt(c) for c in s.stmts]

        def run_seq(env, st):
            for p in parts:
                p(env, st)

        return run_seq
    if isinstance(s, Label):
        return _compile_stmt(s.body)
    if isinstance(s, Assert):
        cond = _compile_expr(s.cond)
        site = render(s.cond)

        def run_assert(env, st):
            v = cond(env, st)
            if type(v) is not int or v == 0:
                raise _Stuck(AssertFailed(site))

        return run_assert
    if isinstance(s, Allocate):
        bs = [(_compile_expr(b.min), _compile_expr(b.len)) for b in s.bounds]
        func = s.func

        def run_alloc(env, st):
            st.mem[func] = Buffer(tuple((fm(env, st), fl(env, st)) for fm, fl in bs))

        return run_alloc
    if isinstance(s, Store):
        fs = [_compile_expr(a) for a in s.args]
        rhs = _compile_expr(s.rhs)
        func, tag = s.func, (s.func, s.stage, s.spec)
        site = render(Access(s.func, s.args, s.stage, s.spec))

        def run_store(env, st):
            idx = tuple(f(env, st) for f in fs)
            v = rhs(env, st)
            buf = st.mem.get(func)
            if buf is None or not buf.in_bounds(idx):
                raise _Stuck(MemError(func, idx, "write " + site))
            buf.data[idx] = v
            st.trace[tag + (idx,)] += 1

        return run_store
    if isinstance(s, If):
        cond = _compile_expr(s.cond)
        then, orelse = _compile_stmt(s.then), _compile_stmt(s.orelse)

        def run_if(env, st):
            v = cond(env, st)
            if type(v) is int and v != 0:
                then(env, st)
            else:
                orelse(env, st)

        return run_if
    if isinstance(s, Let):
        val = _compile_expr(s.value)
        body = _compile_stmt(s.body)
        name = s.var

        def run_let(env, st):
            env[name] = val(env, st)
            try:
                body(env, st)
            finally:
                env.pop(name, None)

        return run_let
    if isinstance(s, For):
        fmin, flen = _compile_expr(s.interval.min), _compile_expr(s.interval.len)
        body = _compile_stmt(s.body)
        name, parallel = s.var, s.parallel
        site = f"for {s.var} in {render_interval(s.interval)}"

        def run_for(env, st):
            mn = fmin(env, st)
            ln = flen(env, st)
            if type(mn) is not int or type(ln) is not int or ln < 0:
                raise _Stuck(RdomFailed(site))
            order = range(mn, mn + ln)
            if parallel and st.rng is not None and ln > 1:
                order = list(order)
                st.rng.shuffle(order)
            try:
                for i in order:
                    env[name] = i
                    body(env, st)
            finally:
                env.pop(name, None)

        return run_for
    raise StructuralError(f"unknown statement {s!r}")


class CompiledProgram:
    """A hole-free program compiled to closures; reusable across inputs."""

    def __init__(self, p: TgtProgram):
        problems = check_no_holes(p)
        if problems:
            raise StructuralError("; ".join(problems))
        self.program = p
        self._run = _compile_stmt(p.body)

    def run(self, z: RealizeInput, seed: Optional[int] = None):
        p = self.program
        if len(z.params) != len(p.params):
            raise StructuralError(f"program takes {len(p.params)} parameters, got {len(z.params)}")
        if 2 * len(z.window) != len(p.window_params):
            raise StructuralError("window arity does not match the output func")
        env: Dict[str, Value] = dict(zip(p.params, z.params))
        flat = [c for iv in z.window for c in iv]
        env.update(zip(p.window_params, flat))
        st = _State(random.Random(seed) if seed is not None else None)
        try:
            self._run(env, st)
        except _Stuck as stuck:
            return stuck.outcome
        buf = st.mem.get(p.output)
        dims = len(p.window_params) // 2
        out = buf.image() if buf is not None else BufferImage(dims)
        return Completed(out, st.mem, st.trace)


def run_ir(p: TgtProgram, z: RealizeInput):
    """Execute with parallel loops in ascending order."""
    return CompiledProgram(p).run(z)


def run_ir_permuted(p: TgtProgram, z: RealizeInput, seed: int):
    """Execute with every parallel loop iterating in a seeded random order."""
    return CompiledProgram(p).run(z, seed=seed)

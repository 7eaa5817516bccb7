"""Scheduling directives as rewrites of hole-bearing IR."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

from .alg import Diagnostic
from .expr import (
    Access,
    Const,
    Expr,
    HoleRef,
    Interval,
    Op,
    Var,
    add,
    eq,
    free_vars,
    is_startup_expr,
    map_expr,
    mul,
    op,
    render,
    simplify,
    sub,
    walk,
)
from .lower import check_structure
from .tir import (
    Allocate,
    Assert,
    For,
    HoleId,
    If,
    Label,
    Let,
    Nop,
    Seq,
    Stmt,
    Store,
    TgtProgram,
    find_allocate,
    find_label,
    get_at,
    iter_loops,
    map_stmt_exprs,
    replace_at,
    seq,
    stmt_children,
    walk_stmts,
    with_children,
)

STRATEGIES = ("guard", "shift", "round")


class ScheduleError(Exception):
    def __init__(self, rule: str, message: str):
        super().__init__(f"[{rule}] {message}")
        self.rule = rule
        self.message = message


@dataclass(frozen=True)
class LoopName:
    func: str
    var: str
    spec: Optional[int] = None
    stage: Optional[int] = None

    def __str__(self) -> str:
        parts = [self.func]
        if self.spec is not None:
            parts.append(f"z{self.spec}")
        if self.stage is not None:
            parts.append(f"s{self.stage}")
        return ".".join(parts + [self.var])


def _args(*xs) -> str:
    return ", ".join(render(x) if isinstance(x, Expr) else str(x) for x in xs)


@dataclass(frozen=True)
class Specialize:
    func: str
    conds: Tuple[Expr, ...]
    phase = 0

    def __str__(self):
        return f"specialize({_args(self.func, *self.conds)})"


@dataclass(frozen=True)
class Split:
    loop: LoopName
    outer: str
    inner: str
    factor: Expr
    strategy: str = "guard"
    phase = 1

    def __str__(self):
        return f"split({_args(self.loop, self.outer, self.inner, self.factor, self.strategy)})"


@dataclass(frozen=True)
class Fuse:
    loop: LoopName
    fused: str
    phase = 1

    def __str__(self):
        return f"fuse({self.loop}, {self.fused})"


@dataclass(frozen=True)
class Swap:
    loop: LoopName
    phase = 1

    def __str__(self):
        return f"swap({self.loop})"


@dataclass(frozen=True)
class Traverse:
    loop: LoopName
    parallel: bool
    phase = 1

    def __str__(self):
        return f"traverse({self.loop}, {'parallel' if self.parallel else 'serial'})"


@dataclass(frozen=True)
class ComputeAt:
    func: str
    loop: LoopName
    phase = 2

    def __str__(self):
        return f"compute-at({self.func}, {self.loop})"


@dataclass(frozen=True)
class StoreAt:
    func: str
    loop: LoopName
    phase = 3

    def __str__(self):
        return f"store-at({self.func}, {self.loop})"


@dataclass(frozen=True)
class Bound:
    func: str
    dim: str
    min: Expr
    len: Expr
    phase = 4

    def __str__(self):
        return f"bound({_args(self.func, self.dim, self.min, self.len)})"


@dataclass(frozen=True)
class BoundExtent:
    func: str
    dim: str
    len: Expr
    phase = 4

    def __str__(self):
        return f"bound-extent({_args(self.func, self.dim, self.len)})"


@dataclass(frozen=True)
class AlignBounds:
    func: str
    dim: str
    modulus: Expr
    remainder: Expr
    phase = 4

    def __str__(self):
        return f"align-bounds({_args(self.func, self.dim, self.modulus, self.remainder)})"


Directive = object  # any of the classes above


def render_schedule(S: Sequence) -> str:
    return "".join(f"{d}\n" for d in S)


# --------------------------------------------------------------------------- #
# Helpers


def resolve_loop(p: TgtProgram, name: LoopName) -> Tuple[Tuple[int, ...], For]:
    try:
        info = p.func(name.func)
    except KeyError:
        raise ScheduleError("loop-name", f"no func {name.func}") from None
    stage = info.nstages - 1 if name.stage is None else name.stage
    hits = [
        (path, s)
        for lid, path, s in iter_loops(p)
        if lid.func == name.func and lid.var == name.var and lid.spec == name.spec and lid.stage == stage
    ]
    if len(hits) != 1:
        raise ScheduleError("loop-name", f"loop {name} resolves to {len(hits)} loops")
    return hits[0]


def _loop_func_stages(p: TgtProgram, name: LoopName) -> int:
    return p.func(name.func).nstages


def used_names(p: TgtProgram) -> set:
    names = set(p.all_params) | p.func_names()
    for f in p.funcs:
        names |= set(f.vars)
    for s in walk_stmts(p.body):
        if isinstance(s, (For, Let)):
            names.add(s.var)
    return names


def _fresh(p: TgtProgram, *names: str):
    if len(set(names)) != len(names):
        raise ScheduleError("fresh-names", "introduced names must be distinct: " + ", ".join(names))
    taken = used_names(p)
    for n in names:
        if not n.isidentifier():
            raise ScheduleError("fresh-names", f"{n!r} is not a valid name")
        if n in taken:
            raise ScheduleError("fresh-names", f"name {n} is already in use")


def _startup(p: TgtProgram, e: Expr, what: str):
    if not is_startup_expr(e, p.all_params) or any(isinstance(n, HoleRef) for n in walk(e)):
        raise ScheduleError("startup-expr", f"{what} {render(e)} is not a startup expression")


def _push_down(names: set, wrap, s: Stmt) -> Stmt:
    """Sink ``wrap`` below loops and lets that do not mention any of ``names``."""
    if isinstance(s, For) and not names & (free_vars(s.interval.min) | free_vars(s.interval.len)):
        return replace(s, body=_push_down(names, wrap, s.body))
    if isinstance(s, Let) and not names & free_vars(s.value):
        return replace(s, body=_push_down(names, wrap, s.body))
    return wrap(s)


def _cleanup(s: Stmt) -> Stmt:
    """Remove nops left behind in sequences."""
    kids = stmt_children(s)
    if not kids:
        return s
    kids = [_cleanup(k) for k in kids]
    if isinstance(s, Seq):
        return seq(*kids)
    return with_children(s, kids)


# --------------------------------------------------------------------------- #
# Rewrites


def _specialize(p: TgtProgram, d: Specialize) -> TgtProgram:
    try:
        info = p.func(d.func)
    except KeyError:
        raise ScheduleError("specialize", f"no func {d.func}") from None
    for c in d.conds:
        _startup(p, c, "specialization condition")
    path = find_label(p.body, d.func)
    if path is None:
        raise ScheduleError("specialize", f"no label for {d.func}")
    lab = get_at(p.body, path)
    if any(isinstance(s, Label) and s.name.startswith("z") and s.name[1:].isdigit() for s in walk_stmts(lab.body)):
        raise ScheduleError("specialize", f"{d.func} is already specialized")
    last = info.nstages - 1

    def branch(j: int) -> Stmt:
        def relabel_expr(e: Expr) -> Expr:
            def fn(n):
                if isinstance(n, Access) and n.func == d.func and n.stage is not None and n.stage != last:
                    return Access(n.func, n.args, n.stage, j)
                if isinstance(n, HoleRef) and n.hole.kind == "cpu" and n.hole.func == d.func and n.hole.stage is not None:
                    return HoleRef(replace(n.hole, spec=j), n.part)
                return None

            return map_expr(e, fn)

        body = map_stmt_exprs(lab.body, relabel_expr)

        def stores(s: Stmt) -> Stmt:
            if isinstance(s, Store) and s.func == d.func:
                return replace(s, spec=j)
            kids = stmt_children(s)
            return with_children(s, [stores(k) for k in kids]) if kids else s

        return Label(f"z{j}", stores(body))

    chain: Stmt = branch(0)
    for j in range(len(d.conds), 0, -1):
        chain = If(d.conds[j - 1], branch(j), chain)
    return p.with_body(replace_at(p.body, path, Label(d.func, chain)))


def _split(p: TgtProgram, d: Split) -> TgtProgram:
    if d.strategy not in STRATEGIES:
        raise ScheduleError("split", f"unknown tail strategy {d.strategy}")
    path, loop = resolve_loop(p, d.loop)
    _fresh(p, d.outer, d.inner)
    _startup(p, d.factor, "split factor")
    if d.strategy != "guard" and _loop_func_stages(p, d.loop) != 1:
        raise ScheduleError("tail-strategy", f"{d.strategy} is only allowed on single-stage funcs")
    emin, elen = loop.interval.min, loop.interval.len
    fac = d.factor
    xo, xi = Var(d.outer), Var(d.inner)
    if d.strategy == "shift":
        pos = add(add(emin, xi), op("min", mul(fac, xo), op("max", 0, sub(elen, fac))))
    else:
        pos = add(add(emin, xi), mul(fac, xo))
    pos = simplify(pos)

    if d.strategy == "guard":
        bound = simplify(add(emin, elen))
        wrap = lambda s: Let(loop.var, pos, If(op("<", Var(loop.var), bound), s))
    else:
        wrap = lambda s: Let(loop.var, pos, s)
    outer_len = simplify(op("/", sub(add(elen, fac), 1), fac))
    inner = For(d.inner, Interval(Const(0), fac), _push_down({loop.var}, wrap, loop.body), pure=loop.pure)
    outer = For(d.outer, Interval(Const(0), outer_len), inner, pure=loop.pure)
    return p.with_body(replace_at(p.body, path, outer))


def _fuse(p: TgtProgram, d: Fuse) -> TgtProgram:
    path, l1 = resolve_loop(p, d.loop)
    l2 = l1.body
    if not isinstance(l2, For):
        raise ScheduleError("fuse", f"loop {d.loop} has no immediately nested loop")
    if l1.pure != l2.pure:
        raise ScheduleError("fuse", "cannot fuse a pure loop with a reduction loop")
    if l1.var in free_vars(l2.interval.min) | free_vars(l2.interval.len):
        raise ScheduleError("fuse", "inner loop bounds depend on the outer variable")
    _fresh(p, d.fused)
    y = Var(d.fused)
    len2 = l2.interval.len
    v1 = simplify(add(l1.interval.min, op("/", y, len2)))
    v2 = simplify(add(l2.interval.min, op("%", y, len2)))

    def wrap(s: Stmt) -> Stmt:
        return Let(l1.var, v1, Let(l2.var, v2, s))

    body = _push_down({l1.var, l2.var}, wrap, l2.body)
    fused = For(d.fused, Interval(Const(0), simplify(mul(l1.interval.len, len2))), body, pure=l1.pure and l2.pure)
    return p.with_body(replace_at(p.body, path, fused))


def _swap(p: TgtProgram, d: Swap) -> TgtProgram:
    path, l1 = resolve_loop(p, d.loop)
    l2 = l1.body
    if not isinstance(l2, For):
        raise ScheduleError("swap", f"loop {d.loop} has no immediately nested loop")
    if not l1.pure and not l2.pure:
        raise ScheduleError("swap", "swap may not reorder two reduction loops")
    if l1.var in free_vars(l2.interval.min) | free_vars(l2.interval.len):
        raise ScheduleError("swap", "inner loop bounds depend on the outer variable")
    new = replace(l2, body=replace(l1, body=l2.body))
    return p.with_body(replace_at(p.body, path, new))


def _traverse(p: TgtProgram, d: Traverse) -> TgtProgram:
    path, loop = resolve_loop(p, d.loop)
    if not loop.pure:
        raise ScheduleError("traverse", f"loop {d.loop} is a reduction loop")
    return p.with_body(replace_at(p.body, path, replace(loop, parallel=d.parallel)))


def _insert_at_loop_head(p: TgtProgram, body: Stmt, loop_path, stmt: Stmt) -> Stmt:
    loop = get_at(body, loop_path)
    return replace_at(body, loop_path, replace(loop, body=seq(stmt, loop.body)))


def _compute_at(p: TgtProgram, d: ComputeAt) -> TgtProgram:
    if d.func not in p.func_names():
        raise ScheduleError("compute-at", f"no func {d.func}")
    lpath = find_label(p.body, d.func)
    tpath, _ = resolve_loop(p, d.loop)
    if tpath[: len(lpath)] == lpath:
        raise ScheduleError("compute-at", f"target loop {d.loop} lies inside {d.func}'s own label")
    lab = get_at(p.body, lpath)
    body = replace_at(p.body, lpath, Nop())
    body = _insert_at_loop_head(p, body, tpath, lab)
    return p.with_body(_cleanup(body))


def _store_at(p: TgtProgram, d: StoreAt) -> TgtProgram:
    if d.func not in p.func_names():
        raise ScheduleError("store-at", f"no func {d.func}")
    apath = find_allocate(p.body, d.func)
    tpath, _ = resolve_loop(p, d.loop)
    alloc = get_at(p.body, apath)
    body = replace_at(p.body, apath, Nop())
    body = _insert_at_loop_head(p, body, tpath, alloc)
    return p.with_body(_cleanup(body))


def _bound_asserts(p: TgtProgram, d) -> List[Stmt]:
    try:
        info = p.func(d.func)
    except KeyError:
        raise ScheduleError("bounds", f"no func {d.func}") from None
    if d.dim not in info.vars:
        raise ScheduleError("bounds", f"{d.func} has no dimension {d.dim}")
    h = HoleId("cpu", d.func, d.dim)
    hmin, hlen = HoleRef(h, "min"), HoleRef(h, "len")
    if isinstance(d, Bound):
        _startup(p, d.min, "bound")
        _startup(p, d.len, "bound")
        return [Assert(op("&&", eq(hmin, d.min), eq(hlen, d.len)))]
    if isinstance(d, BoundExtent):
        _startup(p, d.len, "bound")
        return [Assert(eq(hlen, d.len))]
    _startup(p, d.modulus, "alignment")
    _startup(p, d.remainder, "alignment")
    return [
        Assert(eq(op("%", hmin, d.modulus), d.remainder)),
        Assert(eq(op("%", hlen, d.modulus), 0)),
    ]


def _bounds(p: TgtProgram, d) -> TgtProgram:
    asserts = _bound_asserts(p, d)
    path = find_label(p.body, d.func)
    lab = get_at(p.body, path)
    stmts = list(lab.body.stmts) if isinstance(lab.body, Seq) else [lab.body]
    k = 0
    while k < len(stmts) and isinstance(stmts[k], Assert):
        k += 1
    new = Label(d.func, seq(*stmts[:k], *asserts, *stmts[k:]))
    return p.with_body(replace_at(p.body, path, new))


_RULES = {
    Specialize: _specialize,
    Split: _split,
    Fuse: _fuse,
    Swap: _swap,
    Traverse: _traverse,
    ComputeAt: _compute_at,
    StoreAt: _store_at,
    Bound: _bounds,
    BoundExtent: _bounds,
    AlignBounds: _bounds,
}


def apply_directive(p: TgtProgram, d) -> TgtProgram:
    """Rewrite ``p`` by one directive; raises ScheduleError and leaves ``p`` untouched on failure."""
    rule = _RULES.get(type(d))
    if rule is None:
        raise ScheduleError("directive", f"unknown directive {d!r}")
    out = rule(p, d)
    problems = check_structure(out)
    if problems:
        raise ScheduleError("structure", f"{d} breaks program structure: {problems[0]}")
    return out


def _phase_problems(S: Sequence) -> List[Diagnostic]:
    diags = []
    last = 0
    specialized = set()
    for k, d in enumerate(S):
        if d.phase < last:
            diags.append(Diagnostic("phase-order", f"directive {k}", f"{d} appears after a later-phase directive"))
        last = max(last, d.phase)
        if isinstance(d, Specialize):
            if d.func in specialized:
                diags.append(Diagnostic("one-specialize", f"directive {k}", f"{d.func} is specialized twice"))
            specialized.add(d.func)
    return diags


def validate_schedule(p: TgtProgram, S: Sequence) -> List[Diagnostic]:
    diags = _phase_problems(S)
    if diags:
        return diags
    cur = p
    for k, d in enumerate(S):
        try:
            cur = apply_directive(cur, d)
        except ScheduleError as e:
            return [Diagnostic(e.rule, f"directive {k}", e.message)]
    return []


def apply_schedule(p: TgtProgram, S: Sequence) -> TgtProgram:
    diags = _phase_problems(S)
    if diags:
        raise ScheduleError(diags[0].rule, diags[0].message)
    for d in S:
        p = apply_directive(p, d)
    return p

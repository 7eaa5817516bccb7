"""Bounds inference posed as hole synthesis.

``extract`` turns a hole-bearing program into a constraint over its holes,
``beta0`` fills the holes by naive symbolic interval arithmetic, ``resolve``
closes the fillings, and ``lift_beta0`` turns the whole thing into a bounds
engine.  ``check_satisfies`` evaluates a filled constraint on concrete inputs.

One addition to the literal extraction rules: for every multi-stage func a
coverage constraint requires the compute region of stage i to lie inside the
compute region of stage i-1.  Without it an update stage that writes only part
of the region (a stage with reduction dimensions) would leave the points it
does not touch uncomputed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .alg import RealizeInput
from .expr import (
    Access,
    Const,
    Expr,
    HoleRef,
    Inf,
    Interval,
    Op,
    Var,
    eval_expr,
    free_vars,
    has_access,
    map_expr,
    op,
    render,
    render_interval,
    simplify,
    truthy,
    walk,
)
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
    cpu_hole,
    is_spec_label,
    is_stage_label,
    mem_hole,
    substitute_holes,
    walk_stmts,
)


# --------------------------------------------------------------------------- #
# Constraints


class Constraint:
    __slots__ = ()

    def __str__(self) -> str:
        return dump_constraint(self)


@dataclass(frozen=True)
class CTrue(Constraint):
    pass


TRUE = CTrue()


@dataclass(frozen=True)
class Atom(Constraint):
    expr: Expr
    origin: str = "assert"  # assert | pure-extent | rdom-extent | cond


@dataclass(frozen=True)
class And(Constraint):
    left: Constraint
    right: Constraint


@dataclass(frozen=True)
class Implies(Constraint):
    antecedent: Constraint
    consequent: Constraint


@dataclass(frozen=True)
class ForallVar(Constraint):
    var: str
    interval: Interval
    body: Constraint


@dataclass(frozen=True)
class ForallParam(Constraint):
    params: Tuple[str, ...]
    body: Constraint


@dataclass(frozen=True)
class ExistsHole(Constraint):
    holes: Tuple[HoleId, ...]
    body: Constraint


@dataclass(frozen=True)
class LetC(Constraint):
    var: str
    expr: Expr
    body: Constraint


Coord = Union[Expr, Interval]


@dataclass(frozen=True)
class InInterval(Constraint):
    """Each coordinate (a point or a whole interval) lies in the matching hole."""

    point: Tuple[Coord, ...]
    target: Tuple[HoleId, ...]


def conj(*cs: Constraint) -> Constraint:
    out: Constraint = TRUE
    for c in reversed(cs):
        if isinstance(c, CTrue):
            continue
        out = c if isinstance(out, CTrue) else And(c, out)
    return out


# --------------------------------------------------------------------------- #
# Extraction


class _Extractor:
    def __init__(self, p: TgtProgram):
        self.p = p
        self.nstages = {f.name: f.nstages for f in p.funcs}
        self.vars = {f.name: f.vars for f in p.funcs}
        self.specs: Dict[str, set] = {f.name: set() for f in p.funcs}
        for s in walk_stmts(p.body):
            if isinstance(s, Store) and s.func in self.specs:
                self.specs[s.func].add(s.spec)

    def cpu_group(self, func: str, stage: Optional[int], spec: Optional[int]) -> Tuple[HoleId, ...]:
        n = self.nstages[func]
        return tuple(cpu_hole(func, x, stage, spec, n) for x in self.vars[func])

    def mem_group(self, func: str) -> Tuple[HoleId, ...]:
        return tuple(mem_hole(func, x) for x in self.vars[func])

    def member(self, args, group) -> Constraint:
        if not group:
            return TRUE
        return InInterval(tuple(args), group)

    def b_cpu(self, e: Expr) -> Constraint:
        if isinstance(e, Access):
            if e.func not in self.vars:
                return conj(*(self.b_cpu(a) for a in e.args))
            return conj(
                *(self.b_cpu(a) for a in e.args),
                self.member(e.args, self.mem_group(e.func)),
                self.member(e.args, self.cpu_group(e.func, e.stage, e.spec)),
            )
        if isinstance(e, Op):
            return conj(*(self.b_cpu(a) for a in e.args))
        return TRUE

    def b_mem(self, e: Expr) -> Constraint:
        if isinstance(e, Access):
            if e.func not in self.vars:
                return conj(*(self.b_cpu(a) for a in e.args))
            return conj(*(self.b_cpu(a) for a in e.args), self.member(e.args, self.mem_group(e.func)))
        if isinstance(e, Op):
            return conj(*(self.b_mem(a) for a in e.args))
        return TRUE

    def coverage(self, func: str) -> Constraint:
        dims = self.vars[func]
        n = self.nstages[func]
        if not dims or n < 2:
            return TRUE
        parts = []
        for j in sorted(self.specs[func], key=lambda v: -1 if v is None else v):
            for i in range(n - 1, 0, -1):
                cur = self.cpu_group(func, i, j)
                prev = self.cpu_group(func, i - 1, j)
                names = [f"{x}'" for x in dims]
                body: Constraint = InInterval(tuple(Var(v) for v in names), prev)
                for v, h in reversed(list(zip(names, cur))):
                    body = ForallVar(v, h.interval(), body)
                parts.append(body)
        return conj(*parts)

    def stmt(self, s: Stmt) -> Constraint:
        if isinstance(s, Nop):
            return TRUE
        if isinstance(s, Assert):
            return Atom(s.cond, "assert")
        if isinstance(s, Seq):
            return self.seq(list(s.stmts))
        if isinstance(s, Allocate):
            return ExistsHole(self.mem_group(s.func), TRUE) if s.bounds else TRUE
        if isinstance(s, Label):
            if s.name in self.vars:
                holes = self.label_holes(s.name)
                return ExistsHole(holes, conj(self.stmt(s.body), self.coverage(s.name)))
            return self.stmt(s.body)
        if isinstance(s, Let):
            return conj(self.b_cpu(s.value), LetC(s.var, s.value, self.stmt(s.body)))
        if isinstance(s, If):
            parts = [self.b_cpu(s.cond), Implies(Atom(s.cond, "cond"), self.stmt(s.then))]
            if not isinstance(s.orelse, Nop):
                parts.append(Implies(Atom(op("!", s.cond), "cond"), self.stmt(s.orelse)))
            return conj(*parts)
        if isinstance(s, For):
            origin = "pure-extent" if s.pure else "rdom-extent"
            ext = Atom(op("!", op("<", s.interval.len, 0)), origin)
            return conj(ext, ForallVar(s.var, s.interval, self.stmt(s.body)))
        if isinstance(s, Store):
            mem = self.mem_group(s.func)
            cpu = self.cpu_group(s.func, s.stage, s.spec)
            return conj(
                self.member(s.args, mem),
                *(self.b_cpu(a) for a in s.args),
                self.b_mem(s.rhs),
                Implies(self.member(s.args, cpu), self.b_cpu(s.rhs)) if cpu else self.b_cpu(s.rhs),
            )
        raise TypeError(f"unknown statement {s!r}")

    def seq(self, stmts: List[Stmt]) -> Constraint:
        if not stmts:
            return TRUE
        head, rest = stmts[0], stmts[1:]
        if isinstance(head, Allocate) and head.bounds:
            return ExistsHole(self.mem_group(head.func), self.seq(rest))
        return conj(self.stmt(head), self.seq(rest))

    def label_holes(self, func: str) -> Tuple[HoleId, ...]:
        out = list(self.cpu_group(func, None, None))
        for j in sorted(self.specs[func], key=lambda v: -1 if v is None else v):
            for i in range(self.nstages[func] - 1):
                out += self.cpu_group(func, i, j)
        return tuple(out)


def extract(p: TgtProgram) -> Constraint:
    ex = _Extractor(p)
    out_dims = ex.vars[p.output]
    window = tuple(
        Interval(Var(f"{x}_min"), Var(f"{x}_len")) for x in out_dims
    )
    body = conj(ex.stmt(p.body), ex.member(window, ex.cpu_group(p.output, None, None)))
    return ForallParam(p.all_params, body)


# --------------------------------------------------------------------------- #
# Symbolic interval arithmetic

NEG_INF, POS_INF = Inf(False), Inf(True)
FULL = Interval(NEG_INF, POS_INF)


def is_infinite(iv: Interval) -> bool:
    return any(isinstance(n, Inf) for e in (iv.min, iv.len) for n in walk(e))


def _s(e: Expr) -> Expr:
    return simplify(e)


def _hi(iv: Interval) -> Expr:
    """Largest member: min + len - 1."""
    return _s(op("-", op("+", iv.min, iv.len), 1))


def _from_bounds(lo: Expr, hi: Expr) -> Interval:
    return Interval(_s(lo), _s(op("+", op("-", hi, lo), 1)))


def _is_point(iv: Interval) -> bool:
    return iv.len == Const(1)


def hull(a: Optional[Interval], b: Interval) -> Interval:
    if a is None:
        return b
    if is_infinite(a) or is_infinite(b):
        return FULL
    if a == b:
        return a
    mn = _s(op("min", a.min, b.min))
    end = _s(op("max", op("+", a.min, a.len), op("+", b.min, b.len)))
    return Interval(mn, _s(op("-", end, mn)))


def interval_of(e: Expr, env: Mapping[str, Interval]) -> Interval:
    """Conservative symbolic range of ``e`` with variables ranging over ``env``."""
    if isinstance(e, Const):
        return Interval(e, Const(1))
    if isinstance(e, Var):
        return env.get(e.name, Interval(e, Const(1)))
    if isinstance(e, HoleRef):
        return Interval(e, Const(1))
    if isinstance(e, (Access, Inf)):
        return FULL
    if not isinstance(e, Op):
        raise TypeError(f"not an expression: {e!r}")
    ivs = [interval_of(a, env) for a in e.args]
    if any(is_infinite(iv) for iv in ivs):
        # comparisons still land in {0, 1}
        if e.op in ("<", ">", "==", "&&", "||", "!"):
            return Interval(Const(0), Const(2))
        return FULL
    if all(_is_point(iv) for iv in ivs):
        return Interval(_s(Op(e.op, tuple(iv.min for iv in ivs))), Const(1))
    return interval_op(e.op, ivs)


def interval_op(o: str, ivs: Sequence[Interval]) -> Interval:
    if o in ("<", ">", "==", "&&", "||", "!"):
        return Interval(Const(0), Const(2))
    if o == "select":
        return hull(ivs[1], ivs[2])
    a, b = ivs
    if o == "+":
        return Interval(_s(op("+", a.min, b.min)), _s(op("-", op("+", a.len, b.len), 1)))
    if o == "-":
        return Interval(_s(op("-", a.min, _hi(b))), _s(op("-", op("+", a.len, b.len), 1)))
    if o == "*":
        if _is_point(a) and _is_point(b):
            return Interval(_s(op("*", a.min, b.min)), Const(1))
        for x, y in ((a, b), (b, a)):
            if _is_point(y) and isinstance(y.min, Const):
                c = y.min.value
                if c >= 0:
                    return Interval(_s(op("*", x.min, c)), _s(op("+", op("*", op("-", x.len, 1), c), 1)))
                return Interval(_s(op("*", _hi(x), c)), _s(op("+", op("*", op("-", x.len, 1), -c), 1)))
        corners = [op("*", p, q) for p in (a.min, _hi(a)) for q in (b.min, _hi(b))]
        lo = corners[0]
        hi = corners[0]
        for c in corners[1:]:
            lo = op("min", lo, c)
            hi = op("max", hi, c)
        return _from_bounds(lo, hi)
    if o in ("/", "%"):
        # |a / b| <= |a| and |a % b| < |b| for total floor division
        w = a if o == "/" else b
        m = _s(op("max", op("-", 0, w.min), _hi(w)))
        return Interval(_s(op("-", 0, m)), _s(op("+", op("*", 2, m), 1)))
    if o in ("min", "max"):
        lo = _s(op(o, a.min, b.min))
        hi = _s(op(o, _hi(a), _hi(b)))
        return _from_bounds(lo, hi)
    raise ValueError(f"unknown operator {o}")


def _loop_range(iv: Interval, env) -> Interval:
    """Range of a loop variable iterating over ``iv``."""
    a = interval_of(iv.min, env)
    b = interval_of(iv.len, env)
    if is_infinite(a) or is_infinite(b):
        return FULL
    if _is_point(a) and _is_point(b):
        return Interval(a.min, b.min)
    return Interval(a.min, _s(op("-", op("+", op("+", a.len, b.min), b.len), 2)))


# --------------------------------------------------------------------------- #
# Baseline engine


def beta0(c: Constraint, observer: Optional[Callable] = None) -> Dict[HoleId, Interval]:
    """Hull every membership into its hole; And is visited right conjunct first."""
    holes: Dict[HoleId, Interval] = {}

    def put(h: HoleId, iv: Interval):
        old = holes.get(h)
        new = hull(old, iv)
        if observer is not None:
            observer(h, old, new)
        holes[h] = new

    def go(c: Constraint, env: Dict[str, Interval]):
        if isinstance(c, (CTrue, Atom)):
            return
        if isinstance(c, And):
            go(c.right, env)
            go(c.left, env)
        elif isinstance(c, Implies):
            go(c.consequent, env)
        elif isinstance(c, (ExistsHole, ForallParam)):
            go(c.body, env)
        elif isinstance(c, ForallVar):
            go(c.body, {**env, c.var: _loop_range(c.interval, env)})
        elif isinstance(c, LetC):
            go(c.body, {**env, c.var: interval_of(c.expr, env)})
        elif isinstance(c, InInterval):
            for coord, h in zip(c.point, c.target):
                if isinstance(coord, Interval):
                    iv = Interval(_s(coord.min), _s(coord.len))
                else:
                    iv = interval_of(coord, env)
                put(h, iv)
        else:
            raise TypeError(f"unknown constraint {c!r}")

    go(c, {})
    return holes


def _nonneg(e: Expr, known: set) -> bool:
    """Cheap proof that ``e`` is never negative for integer parameters."""
    if isinstance(e, Const):
        return e.value >= 0
    if isinstance(e, Var):
        return e.name in known
    if isinstance(e, Op):
        a = e.args
        if e.op in ("+", "*", "/", "min"):
            return all(_nonneg(x, known) for x in a)
        if e.op == "%":
            return _nonneg(a[1], known)
        if e.op == "max":
            return any(_nonneg(x, known) for x in a)
        if e.op == "select":
            return _nonneg(a[1], known) and _nonneg(a[2], known)
        if e.op in ("<", ">", "==", "&&", "||", "!"):
            return True
    return False


@dataclass
class Resolution:
    ok: bool
    gamma: Dict[HoleId, Interval] = field(default_factory=dict)
    failures: Dict[HoleId, str] = field(default_factory=dict)

    def __str__(self) -> str:
        return dump_bounds(self)


def resolve(symbolic: Mapping[HoleId, Interval], holes: Iterable[HoleId] = (), known_nonneg: Iterable[str] = ()) -> Resolution:
    """Substitute hole references until every filling is closed.

    Lengths that cannot be shown non-negative are clamped with ``max(0, len)``
    so an empty request never turns into a negative loop extent.
    """
    known = set(known_nonneg)
    wanted = set(holes) | set(symbolic)
    failures: Dict[HoleId, str] = {}
    done: Dict[HoleId, Interval] = {}
    state: Dict[HoleId, int] = {}

    def refs(iv: Interval) -> set:
        return {n.hole for e in (iv.min, iv.len) for n in walk(e) if isinstance(n, HoleRef)}

    def visit(h: HoleId) -> bool:
        if h in done:
            return True
        if h in failures:
            return False
        if state.get(h) == 1:
            failures[h] = "cyclic dependency"
            return False
        if h not in symbolic:
            failures[h] = "undetermined"
            return False
        iv = symbolic[h]
        if is_infinite(iv):
            failures[h] = "unbounded"
            return False
        state[h] = 1
        ok = True
        for d in sorted(refs(iv), key=str):
            if not visit(d):
                ok = False
        state[h] = 2
        if not ok:
            failures.setdefault(h, "depends on a failed hole")
            return False

        def fill(n):
            if isinstance(n, HoleRef):
                v = done[n.hole]
                return v.min if n.part == "min" else v.len
            return None

        mn = simplify(map_expr(iv.min, fill))
        ln = simplify(map_expr(iv.len, fill))
        if not _nonneg(ln, known):
            ln = simplify(op("max", 0, ln))
        done[h] = Interval(mn, ln)
        return True

    for h in sorted(wanted, key=str):
        visit(h)
    if failures:
        return Resolution(False, done, failures)
    return Resolution(True, done)


def _window_lens(p: TgtProgram) -> set:
    return {w for w in p.window_params if w.endswith("_len")}


def failing_program(p: TgtProgram) -> TgtProgram:
    return p.with_body(Assert(Const(0)))


def infer(p: TgtProgram, observer=None) -> Resolution:
    return resolve(beta0(extract(p), observer), p.holes, _window_lens(p))


def lift_beta0(p: TgtProgram) -> TgtProgram:
    res = infer(p)
    if not res.ok:
        return failing_program(p)
    return substitute_holes(p, res.gamma)


# --------------------------------------------------------------------------- #
# Engines


def doubled_mem_engine(p: TgtProgram) -> TgtProgram:
    """beta0 with every allocation twice as long."""
    res = infer(p)
    if not res.ok:
        return failing_program(p)
    g = {
        h: Interval(iv.min, simplify(op("*", 2, iv.len))) if h.kind == "mem" else iv
        for h, iv in res.gamma.items()
    }
    return substitute_holes(p, g)


def always_false_engine(p: TgtProgram) -> TgtProgram:
    """Compliant but useless: always fails."""
    return failing_program(p)


def broken_engine(p: TgtProgram) -> TgtProgram:
    """Deliberately unsound: allocations one element too short."""
    res = infer(p)
    if not res.ok:
        return failing_program(p)
    g = {
        h: Interval(iv.min, simplify(op("-", iv.len, 1))) if h.kind == "mem" else iv
        for h, iv in res.gamma.items()
    }
    return substitute_holes(p, g)


ENGINES = {
    "beta0": lift_beta0,
    "doubled-mem": doubled_mem_engine,
    "assert-false": always_false_engine,
    "broken": broken_engine,
}


# --------------------------------------------------------------------------- #
# Ground checking


@dataclass
class SatisfiesReport:
    ok: bool = True
    violations: List[str] = field(default_factory=list)
    checked: int = 0
    unchecked: int = 0
    halted: List[str] = field(default_factory=list)

    def __str__(self) -> str:
        head = "satisfied" if self.ok else "violated"
        lines = [f"{head} (checked {self.checked}, unchecked {self.unchecked})"]
        lines += ["  " + v for v in self.violations[:10]]
        return "\n".join(lines)


class _Halt(Exception):
    pass


def substitute_constraint(c: Constraint, gamma: Mapping[HoleId, Interval]) -> Constraint:
    def fill(n):
        if isinstance(n, HoleRef) and n.hole in gamma:
            iv = gamma[n.hole]
            return iv.min if n.part == "min" else iv.len
        return None

    def fe(e):
        return map_expr(e, fill)

    def go(c):
        if isinstance(c, Atom):
            return Atom(fe(c.expr), c.origin)
        if isinstance(c, And):
            return And(go(c.left), go(c.right))
        if isinstance(c, Implies):
            return Implies(go(c.antecedent), go(c.consequent))
        if isinstance(c, ForallVar):
            return ForallVar(c.var, Interval(fe(c.interval.min), fe(c.interval.len)), go(c.body))
        if isinstance(c, ForallParam):
            return ForallParam(c.params, go(c.body))
        if isinstance(c, ExistsHole):
            return ExistsHole(c.holes, go(c.body))
        if isinstance(c, LetC):
            return LetC(c.var, fe(c.expr), go(c.body))
        if isinstance(c, InInterval):
            pts = tuple(Interval(fe(x.min), fe(x.len)) if isinstance(x, Interval) else fe(x) for x in c.point)
            return InInterval(pts, c.target)
        return c

    return go(c)


def _ground(e: Expr, env) -> Optional[int]:
    if has_access(e) or any(isinstance(n, (HoleRef, Inf)) for n in walk(e)):
        return None
    for v in free_vars(e):
        if env.get(v) is None:
            return None
    v = eval_expr(e, env)
    return v if type(v) is int else None


def check_satisfies(p: TgtProgram, gamma: Mapping[HoleId, Interval], samples: Sequence[RealizeInput], limit: int = 200000) -> SatisfiesReport:
    """Evaluate the filled constraint on concrete inputs, in program order.

    A failing assertion or a negative reduction extent stops the evaluation of
    that sample (both are permitted stops).  A failing membership or a negative
    pure-loop extent is a violation.  Facts that depend on buffer contents
    cannot be checked statically and are counted as unchecked.
    """
    c = substitute_constraint(extract(p), gamma)
    rep = SatisfiesReport()
    for z in samples:
        env: Dict[str, Optional[int]] = dict(zip(p.params, z.params))
        env.update(zip(p.window_params, [v for iv in z.window for v in iv]))
        holes: Dict[HoleId, Tuple[Optional[int], Optional[int]]] = {}
        for h, iv in gamma.items():
            holes[h] = (_ground(iv.min, env), _ground(iv.len, env))

        def member(coord, h, env) -> Optional[bool]:
            hm, hl = holes.get(h, (None, None))
            if hm is None or hl is None:
                return None
            if isinstance(coord, Interval):
                m, l = _ground(coord.min, env), _ground(coord.len, env)
                if m is None or l is None:
                    return None
                return l <= 0 or (hm <= m and m + l <= hm + hl)
            v = _ground(coord, env)
            if v is None:
                return None
            return hm <= v < hm + hl

        def in_all(c: InInterval, env) -> Optional[bool]:
            res = True
            for coord, h in zip(c.point, c.target):
                m = member(coord, h, env)
                if m is None:
                    return None
                res = res and m
            return res

        def go(c: Constraint, env):
            if rep.checked > limit:
                raise _Halt("limit")
            if isinstance(c, CTrue):
                return
            if isinstance(c, Atom):
                v = _ground(c.expr, env)
                if v is None:
                    rep.unchecked += 1
                    return
                rep.checked += 1
                if v != 0:
                    return
                if c.origin == "assert":
                    raise _Halt(f"assert {render(c.expr)}")
                if c.origin == "rdom-extent":
                    raise _Halt(f"rdom extent {render(c.expr)}")
                rep.ok = False
                rep.violations.append(f"{render(c.expr)} fails with {_env_str(env)}")
                return
            if isinstance(c, And):
                go(c.left, env)
                go(c.right, env)
            elif isinstance(c, Implies):
                a = c.antecedent
                if isinstance(a, Atom):
                    v = _ground(a.expr, env)
                    holds = v is None or v != 0
                elif isinstance(a, InInterval):
                    m = in_all(a, env)
                    holds = m is None or m
                else:
                    holds = True
                if holds:
                    go(c.consequent, env)
            elif isinstance(c, (ExistsHole, ForallParam)):
                go(c.body, env)
            elif isinstance(c, ForallVar):
                m, l = _ground(c.interval.min, env), _ground(c.interval.len, env)
                if m is None or l is None:
                    rep.unchecked += 1
                    return
                for v in range(m, m + max(l, 0)):
                    go(c.body, {**env, c.var: v})
            elif isinstance(c, LetC):
                go(c.body, {**env, c.var: _ground(c.expr, env)})
            elif isinstance(c, InInterval):
                m = in_all(c, env)
                if m is None:
                    rep.unchecked += 1
                    return
                rep.checked += 1
                if not m:
                    rep.ok = False
                    pts = ", ".join(render_interval(x) if isinstance(x, Interval) else render(x) for x in c.point)
                    tg = ", ".join(f"{h}={_hole_str(holes.get(h))}" for h in c.target)
                    rep.violations.append(f"({pts}) not in {tg} with {_env_str(env)}")

        try:
            go(c, env)
        except _Halt as h:
            rep.halted.append(str(h))
    return rep


def _env_str(env) -> str:
    return "{" + ", ".join(f"{k}={v}" for k, v in sorted(env.items()) if v is not None) + "}"


def _hole_str(v) -> str:
    if v is None:
        return "?"
    return f"({v[0]}, {v[1]})"


# --------------------------------------------------------------------------- #
# Dumps


def dump_constraint(c: Constraint) -> str:
    return "\n".join(_dump_c(c, 0)) + "\n"


def _coord(x) -> str:
    return render_interval(x) if isinstance(x, Interval) else render(x)


def _flatten_and(c: Constraint) -> List[Constraint]:
    if isinstance(c, And):
        return _flatten_and(c.left) + _flatten_and(c.right)
    return [c]


def _dump_c(c: Constraint, ind: int) -> List[str]:
    pad = "  " * ind
    if isinstance(c, CTrue):
        return [pad + "true"]
    if isinstance(c, Atom):
        return [pad + f"(atom {render(c.expr)})"]
    if isinstance(c, InInterval):
        pts = ", ".join(_coord(x) for x in c.point)
        return [pad + f"(in [{pts}] " + " ".join(str(h) for h in c.target) + ")"]
    if isinstance(c, And):
        out = [pad + "(and"]
        for k in _flatten_and(c):
            out += _dump_c(k, ind + 1)
        return out + [pad + ")"]
    if isinstance(c, Implies):
        return [pad + "(implies"] + _dump_c(c.antecedent, ind + 1) + _dump_c(c.consequent, ind + 1) + [pad + ")"]
    if isinstance(c, ForallVar):
        return [pad + f"(forall {c.var} in {render_interval(c.interval)}"] + _dump_c(c.body, ind + 1) + [pad + ")"]
    if isinstance(c, ForallParam):
        return [pad + f"(forall-param {', '.join(c.params)}"] + _dump_c(c.body, ind + 1) + [pad + ")"]
    if isinstance(c, ExistsHole):
        return [pad + "(exists " + " ".join(str(h) for h in c.holes)] + _dump_c(c.body, ind + 1) + [pad + ")"]
    if isinstance(c, LetC):
        return [pad + f"(let {c.var} = {render(c.expr)}"] + _dump_c(c.body, ind + 1) + [pad + ")"]
    raise TypeError(f"unknown constraint {c!r}")


def dump_bounds(res: Resolution) -> str:
    lines = [f"{h} = {render_interval(iv)}" for h, iv in sorted(res.gamma.items(), key=lambda kv: str(kv[0]))]
    if not res.ok:
        lines = ["FAIL"] + [f"{h}: {why}" for h, why in sorted(res.failures.items(), key=lambda kv: str(kv[0]))] + lines
    return "\n".join(lines) + "\n"

"""Lowering algorithms to hole-bearing IR under the default eager schedule."""

from __future__ import annotations

from typing import List, Optional

from .alg import FuncDef, Pipeline, classify_dims
from .expr import Access, Expr, Var, map_expr, walk
from .tir import (
    Allocate,
    For,
    FuncInfo,
    If,
    Label,
    Let,
    Seq,
    Stmt,
    Store,
    TgtProgram,
    cpu_hole,
    is_spec_label,
    is_stage_label,
    iter_loops,
    mem_hole,
    seq,
    stmt_children,
    stmt_exprs,
)


def relabel_self(e: Expr, func: str, stage: int) -> Expr:
    """Point unlabelled self-references of ``func`` at ``stage``."""

    def fn(n):
        if isinstance(n, Access) and n.func == func and n.stage is None:
            return Access(n.func, n.args, stage, n.spec)
        return None

    return map_expr(e, fn)


def lower_stage(f: FuncDef, i: int) -> Stmt:
    st = f.stages[i]
    n = len(f.stages)
    rhs, pred = st.rhs, st.predicate
    lhs = st.lhs
    if i > 0:
        rhs = relabel_self(rhs, f.name, i - 1)
        pred = relabel_self(pred, f.name, i - 1)
        lhs = tuple(relabel_self(e, f.name, i - 1) for e in lhs)
    body: Stmt = If(pred, Store(f.name, i, None, lhs, rhs))
    for r, iv in st.rdom:  # r1 innermost
        body = For(r, iv, body, pure=False)
    for x, e in zip(f.vars, st.lhs):  # x1 innermost
        if e == Var(x):
            body = For(x, cpu_hole(f.name, x, i, None, n).interval(), body, pure=True)
    return body


def lower_func(f: FuncDef) -> Stmt:
    alloc = Allocate(f.name, tuple(mem_hole(f.name, x).interval() for x in f.vars))
    stages = [Label(f"s{i}", lower_stage(f, i)) for i in range(len(f.stages))]
    return seq(alloc, Label(f.name, seq(*stages)))


def lower(p: Pipeline) -> TgtProgram:
    body = seq(*(lower_func(f) for f in p.funcs))
    infos = tuple(FuncInfo(f.name, f.vars, len(f.stages)) for f in p.funcs)
    return TgtProgram(p.output, p.params, p.window_params(), body, infos)


# --------------------------------------------------------------------------- #
# Structural invariants


def _definite(s: Stmt) -> set:
    """Allocations and func labels certainly executed once ``s`` finishes."""
    out = set()
    if isinstance(s, Allocate):
        out.add(("alloc", s.func))
    elif isinstance(s, Label):
        out.add(("label", s.name))
        out |= _definite(s.body)
    elif isinstance(s, (Seq, Let)):
        for c in stmt_children(s):
            out |= _definite(c)
    return out


def check_structure(p: TgtProgram) -> List[str]:
    """Loop-name uniqueness, dominance and absence of variable shadowing.

    An access to ``g`` from outside g's own label must follow a completed
    ``label g`` (an earlier element of an enclosing sequence, reached without
    passing through a loop or branch); being nested inside ``label g`` does not
    count.  Every allocate must dominate its label and all accesses.
    """
    diags: List[str] = []
    funcs = p.func_names()

    seen = {}
    for lid, path, _ in iter_loops(p):
        if lid in seen:
            diags.append(f"loop naming: {lid} names more than one loop")
        seen[lid] = path
        if lid.func is None:
            diags.append(f"loop naming: loop {lid.var} is outside every func label")

    counts = {}

    def check_exprs(s: Stmt, dom: set, owner):
        for e in stmt_exprs(s):
            for n in walk(e):
                if isinstance(n, Access) and n.func in funcs:
                    if n.func == owner:
                        continue
                    if ("label", n.func) not in dom:
                        diags.append(f"dominance: access to {n.func} not dominated by its label")
                    if ("alloc", n.func) not in dom:
                        diags.append(f"dominance: access to {n.func} not dominated by its allocate")

    def visit(s: Stmt, dom: set, scope: set, owner):
        if isinstance(s, Seq):
            d = dom
            for c in s.stmts:
                visit(c, d, scope, owner)
                d = d | _definite(c)
            return
        check_exprs(s, dom, owner)
        if isinstance(s, Allocate):
            counts[("alloc", s.func)] = counts.get(("alloc", s.func), 0) + 1
        elif isinstance(s, Store):
            if s.func != owner:
                diags.append(f"dominance: store to {s.func} outside its label")
            if ("alloc", s.func) not in dom:
                diags.append(f"dominance: store to {s.func} not dominated by its allocate")
        elif isinstance(s, Label):
            inner = owner
            if s.name in funcs:
                counts[("label", s.name)] = counts.get(("label", s.name), 0) + 1
                if ("alloc", s.name) not in dom:
                    diags.append(f"dominance: label {s.name} not dominated by its allocate")
                inner = s.name
            elif not (is_stage_label(s.name) or is_spec_label(s.name)):
                diags.append(f"label {s.name} is neither a func, stage nor specialization")
            visit(s.body, dom, scope, inner)
        elif isinstance(s, (For, Let)):
            if s.var in scope:
                diags.append(f"shadowing: {s.var} is already bound")
            visit(s.body, dom, scope | {s.var}, owner)
        elif isinstance(s, If):
            visit(s.then, dom, scope, owner)
            visit(s.orelse, dom, scope, owner)

    visit(p.body, set(), set(p.all_params), None)
    for (kind, f), n in sorted(counts.items()):
        if n > 1:
            diags.append(f"{kind} for {f} appears {n} times")
    return diags

import random

from uslang.alg import RealizeInput
from uslang.bounds import lift_beta0
from uslang.expr import Access, Const, Interval, Var
from uslang.harness import FuzzConfig, check_confluence, gen_input, gen_pipeline
from uslang.lower import check_structure, lower
from uslang.parse import parse_pipeline
from uslang.tir import Allocate, For, FuncInfo, Label, Store, TgtProgram, dump, iter_loops, seq, walk_stmts


def test_loop_nest_order():
    p = parse_pipeline(
        "pipeline f() { fun f(x, y) = { x + y; rdom(r = (0, 2), u = (0, 3)) in (x, r) <- f[x, r] + u }; }"
    )
    lo = lower(p)
    text = dump(lo)
    # stage 0: y outermost, x innermost; stage 1: pure x outside u outside r
    assert text.index("for y in ?cpu:f.s0.y") < text.index("for x in ?cpu:f.s0.x")
    s1 = text[text.index("label s1"):]
    assert s1.index("for x in ?cpu:f.x") < s1.index("for u in (0, 3)") < s1.index("for r in (0, 2)")
    assert "f@s1[x, r] <- f@s0[x, r] + u" in s1


def test_generated_lowering_invariants():
    cfg = FuzzConfig()
    for k in range(80):
        p, _ = gen_pipeline(random.Random(f"lower/{k}"), cfg)
        lo = lower(p)
        assert check_structure(lo) == []
        ids = [lid for lid, _, _ in iter_loops(lo)]
        assert len(ids) == len(set(ids))
        allocs = [s.func for s in walk_stmts(lo.body) if isinstance(s, Allocate)]
        labels = [s.name for s in walk_stmts(lo.body) if isinstance(s, Label) and s.name in lo.func_names()]
        assert sorted(allocs) == sorted(labels) == sorted(f.name for f in p.funcs)


def test_lowering_is_sound_on_generated_pipelines():
    cfg = FuzzConfig()
    seen = set()
    for k in range(40):
        p, _ = gen_pipeline(random.Random(f"sound/{k}"), cfg)
        for i in range(3):
            z = gen_input(random.Random(f"sound/{k}/{i}"), p, cfg)
            v = check_confluence(p, [], lift_beta0, z)
            assert v.kind not in ("DIVERGENT", "MEMFAULT"), (str(p), z, str(v))
            seen.add(v.kind)
    assert "Equivalent" in seen


def _prog(body, funcs=("g", "f")):
    infos = tuple(FuncInfo(n, ("x",), 1) for n in funcs)
    return TgtProgram("f", (), ("x_min", "x_len"), body, infos)


def _alloc(f):
    return Allocate(f, (Interval(Const(0), Const(4)),))


def _store(f, rhs):
    return Store(f, 0, None, (Var("x"),), rhs)


def _loop(body, var="x"):
    return For(var, Interval(Const(0), Const(4)), body)


def test_structure_rejects_read_before_producer():
    body = seq(
        _alloc("g"), _alloc("f"),
        Label("f", _loop(_store("f", Access("g", (Var("x"),))))),
        Label("g", _loop(_store("g", Const(1)))),
    )
    assert any("dominance" in d for d in check_structure(_prog(body)))


def test_structure_rejects_producer_nested_in_consumer_loop_after_use():
    inner = seq(_store("f", Access("g", (Var("x"),))), Label("g", _loop(_store("g", Const(1)), "y")))
    body = seq(_alloc("g"), _alloc("f"), Label("f", _loop(inner)))
    assert any("dominance" in d for d in check_structure(_prog(body)))


def test_structure_accepts_producer_at_loop_head():
    g = Label("g", For("y", Interval(Const(0), Const(4)), Store("g", 0, None, (Var("y"),), Const(1))))
    inner = seq(g, _store("f", Access("g", (Var("x"),))))
    body = seq(_alloc("g"), _alloc("f"), Label("f", _loop(inner)))
    assert check_structure(_prog(body)) == []


def test_structure_rejects_shadowing_and_duplicate_loops():
    shadow = seq(_alloc("f"), Label("f", _loop(_loop(_store("f", Const(0))))))
    assert any("shadowing" in d for d in check_structure(_prog(shadow, ("f",))))
    twice = seq(_alloc("f"), Label("f", seq(_loop(_store("f", Const(0))), _loop(_store("f", Const(1))))))
    assert any("loop naming" in d for d in check_structure(_prog(twice, ("f",))))


def test_structure_rejects_store_outside_label_and_missing_alloc():
    outside = seq(_alloc("f"), _loop(_store("f", Const(0))), Label("f", seq()))
    assert any("outside its label" in d for d in check_structure(_prog(outside, ("f",))))
    noalloc = Label("f", _loop(_store("f", Const(0))))
    assert any("allocate" in d for d in check_structure(_prog(noalloc, ("f",))))


def test_zero_dim_func_lowers_to_bare_store():
    p = parse_pipeline("pipeline f() { fun f() = { 3 }; }")
    lo = lower(p)
    assert "f@s0[] <- 3" in dump(lo)
    assert check_confluence(p, [], lift_beta0, RealizeInput((), ())).kind == "Equivalent"

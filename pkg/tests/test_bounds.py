import itertools
import random
import time

import pytest

from uslang.alg import RealizeInput
from uslang.bounds import (
    FULL,
    ENGINES,
    beta0,
    check_satisfies,
    doubled_mem_engine,
    dump_bounds,
    dump_constraint,
    extract,
    hull,
    infer,
    interval_of,
    lift_beta0,
    resolve,
)
from uslang.expr import ARITY, Const, HoleRef, Interval, Op, Var, eval_expr, eval_op, op, render_interval
from uslang.harness import FuzzConfig, gen_input, gen_pipeline, gen_schedule
from uslang.lower import lower
from uslang.parse import parse_expr, parse_pipeline, parse_schedule
from uslang.sched import apply_schedule
from uslang.tir import Assert, HoleId, dump, run_ir

MINS = range(-4, 5)
LENS = range(0, 6)
OPERANDS = [(m, l) for m in MINS for l in LENS]


def concrete(iv):
    """(lo, hi) of a closed interval; None bounds for infinities."""
    if iv == FULL:
        return None
    mn, ln = eval_expr(iv.min, {}), eval_expr(iv.len, {})
    return mn, mn + ln - 1


def check_rule(o, operands_per_arg):
    names = [f"v{k}" for k in range(ARITY[o])]
    e = Op(o, tuple(Var(n) for n in names))
    bad = []
    for combo in itertools.product(*operands_per_arg):
        env = {n: Interval(Const(m), Const(l)) for n, (m, l) in zip(names, combo)}
        b = concrete(interval_of(e, env))
        for vals in itertools.product(*(range(m, m + l) for m, l in combo)):
            v = eval_op(o, list(vals))
            if b is not None and not (b[0] <= v <= b[1]):
                bad.append((combo, vals, v, b))
                break
    return bad


BINARY = sorted(o for o, n in ARITY.items() if n == 2)


@pytest.mark.parametrize("o", BINARY + ["!"])
def test_interval_rules_cover_all_results(o):
    assert check_rule(o, [OPERANDS] * ARITY[o]) == []


def test_select_rule_covers_all_results():
    conds = [(m, l) for m in (-1, 0, 1) for l in (0, 1, 2)]
    assert check_rule("select", [conds, OPERANDS, OPERANDS]) == []


def test_division_by_interval_containing_zero():
    env = {"a": Interval(Const(-3), Const(7)), "b": Interval(Const(-1), Const(3))}
    lo, hi = concrete(interval_of(parse_expr("a / b"), env))
    assert lo <= -3 and hi >= 3
    lo, hi = concrete(interval_of(parse_expr("a % b"), env))
    assert lo <= 0 <= hi


def test_symbolic_rules():
    env = {"x": Interval(Var("x_min"), Var("x_len"))}
    assert render_interval(interval_of(parse_expr("x + 1"), env)) == "(x_min + 1, x_len)"
    assert render_interval(interval_of(parse_expr("2 * x"), env)) == "(2 * x_min, 2 * x_len - 1)"
    assert render_interval(interval_of(parse_expr("x < 3"), env)) == "(0, 2)"
    assert interval_of(parse_expr("g[x]"), env) == FULL
    assert render_interval(interval_of(parse_expr("p + 3"), env)) == "(p + 3, 1)"


def test_hull():
    a = Interval(Const(0), Const(3))
    b = Interval(Const(5), Const(2))
    assert hull(a, b) == Interval(Const(0), Const(7))
    assert hull(None, a) == a
    assert hull(a, FULL) == FULL


# --------------------------------------------------------------------------- #
# the running example


def test_default_bounds_golden(blur):
    assert dump_bounds(infer(lower(blur))) == (
        "?cpu:f.x = (x_min, x_len)\n"
        "?cpu:g.x = (x_min, x_len + 1)\n"
        "?mem:f.x = (x_min, x_len)\n"
        "?mem:g.x = (x_min, x_len + 1)\n"
    )


def test_tiled_bounds_widen_enclosing_loops(blur, schedules):
    res = infer(apply_schedule(lower(blur), schedules["tiled"]))
    assert res.ok
    g = res.gamma[HoleId("cpu", "g", "x")]
    # enclosing loop vars are widened to their full range, so each tile
    # recomputes the whole consumed window of g
    env = {"x_min": 0, "x_len": 6}
    assert (eval_expr(g.min, env), eval_expr(g.len, env)) == (0, 7)


def test_round_bounds_pad_to_factor(blur, schedules):
    res = infer(apply_schedule(lower(blur), schedules["round"]))
    mem = res.gamma[HoleId("mem", "f", "x")]
    env = {"x_min": 0, "x_len": 6}
    assert (eval_expr(mem.min, env), eval_expr(mem.len, env)) == (0, 8)


def test_constraint_dump_golden(blur):
    text = dump_constraint(extract(lower(blur)))
    assert text.startswith("(forall-param x_min, x_len\n  (and\n    (exists ?mem:g.x")
    assert "(atom !(?cpu:g.x.len < 0))" in text
    assert "(in [x + 1] ?mem:g.x)" in text and "(in [x + 1] ?cpu:g.x)" in text
    assert text.rstrip().endswith("(in [(x_min, x_len)] ?cpu:f.x)\n  )\n)")


def test_unbounded_access_lifts_to_assert_false():
    p = parse_pipeline("pipeline f() { fun g(x) = { x % 4 }; fun f(x) = { g[g[x]] }; }")
    res = infer(lower(p))
    assert not res.ok and res.failures[HoleId("cpu", "g", "x")] == "unbounded"
    assert lift_beta0(lower(p)).body == Assert(Const(0))
    assert dump_bounds(res).startswith("FAIL\n")


def test_resolve_detects_cycles_and_undetermined():
    a, b = HoleId("cpu", "a", "x"), HoleId("cpu", "b", "x")
    sym = {a: Interval(HoleRef(b, "min"), Const(1)), b: Interval(HoleRef(a, "min"), Const(1))}
    res = resolve(sym)
    assert not res.ok and "cyclic dependency" in res.failures.values()
    res = resolve({a: Interval(HoleRef(b, "min"), Const(1))})
    assert res.failures[b] == "undetermined"


def test_resolve_clamps_unprovable_lengths():
    h = HoleId("cpu", "a", "x")
    res = resolve({h: Interval(Const(0), op("-", Var("p"), 1))})
    assert render_interval(res.gamma[h]) == "(0, max(0, p - 1))"
    res = resolve({h: Interval(Const(0), Var("x_len"))}, known_nonneg=["x_len"])
    assert render_interval(res.gamma[h]) == "(0, x_len)"


def test_beta0_grows_monotonically():
    # every update is a hull, so each filling contains the previous one
    cfg = FuzzConfig()
    for k in range(25):
        p, _ = gen_pipeline(random.Random(f"mono/{k}"), cfg)
        prog = apply_schedule(lower(p), gen_schedule(random.Random(f"mono/{k}/s"), p))
        events = []
        beta0(extract(prog), lambda h, old, new: events.append((old, new)))
        for old, new in events:
            if old is not None:
                assert hull(old, new) == new or new == FULL


def test_engine_contract_on_generated_programs():
    cfg = FuzzConfig()
    checked = 0
    for k in range(30):
        p, _ = gen_pipeline(random.Random(f"contract/{k}"), cfg)
        prog = apply_schedule(lower(p), gen_schedule(random.Random(f"contract/{k}/s"), p))
        res = infer(prog)
        if not res.ok:
            continue
        zs = [gen_input(random.Random(f"contract/{k}/{i}"), p, cfg) for i in range(3)]
        rep = check_satisfies(prog, res.gamma, zs)
        assert rep.ok, (str(p), rep.violations[:3])
        checked += rep.checked
    assert checked > 1000


def test_satisfies_flags_a_too_small_filling(blur, window6):
    res = infer(lower(blur))
    bad = dict(res.gamma)
    bad[HoleId("mem", "g", "x")] = Interval(Var("x_min"), Var("x_len"))
    rep = check_satisfies(lower(blur), bad, [window6])
    assert not rep.ok and rep.violations


def test_engines_registered():
    assert set(ENGINES) == {"beta0", "doubled-mem", "assert-false", "broken"}


def test_doubled_mem_still_runs(blur, window6):
    out = run_ir(doubled_mem_engine(lower(blur)), window6)
    assert [v for _, v in out.output.items()][:6] == [1, 3, 5, 7, 9, 11]


def test_interval_rule_suite_is_fast():
    t = time.perf_counter()
    for o in BINARY:
        check_rule(o, [OPERANDS[::3]] * 2)
    assert time.perf_counter() - t < 30


@pytest.mark.parametrize(
    "mem_len,ok",
    [(op("-", Var("x_len"), 1), False), (op("*", Const(2), Var("x_len")), True)],
)
def test_satisfies_on_alternative_allocations(blur, window6, mem_len, ok):
    gamma = dict(infer(lower(blur)).gamma)
    gamma[HoleId("mem", "g", "x")] = Interval(Var("x_min"), mem_len)
    assert check_satisfies(lower(blur), gamma, [window6]).ok is ok

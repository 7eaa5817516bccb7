import random
from collections import Counter

import pytest

from uslang.alg import RealizeInput
from uslang.bounds import lift_beta0
from uslang.expr import Const, Interval, Var
from uslang.harness import FuzzConfig, check_confluence, gen_pipeline, gen_schedule
from uslang.lower import check_structure, lower
from uslang.parse import parse_pipeline, parse_schedule
from uslang.sched import (
    LoopName,
    ScheduleError,
    Split,
    apply_directive,
    apply_schedule,
    render_schedule,
    validate_schedule,
)
from uslang.tir import CompiledProgram, HoleId, dump, iter_loops, substitute_holes

ID = parse_pipeline("pipeline f() { fun f(x) = { x }; }")


def visits(extent: int, factor: int, strategy: str) -> Counter:
    """Indices written when f's loop over [0, extent) is split and run."""
    p = apply_directive(lower(ID), Split(LoopName("f", "x"), "xo", "xi", Const(factor), strategy))
    gamma = {
        HoleId("cpu", "f", "x"): Interval(Const(0), Const(extent)),
        HoleId("mem", "f", "x"): Interval(Const(-20), Const(60)),
    }
    out = CompiledProgram(substitute_holes(p, gamma)).run(RealizeInput((), ((0, 0),)))
    return Counter(pt[0] for pt, n in out.writes("f").items() for _ in range(n))


def brute_force(extent, factor, strategy):
    """Enumerate the tiled iteration space directly."""
    tiles = -(-extent // factor)
    got = Counter()
    for xo in range(tiles):
        for xi in range(factor):
            if strategy == "guard":
                x = xo * factor + xi
                if x < extent:
                    got[x] += 1
            elif strategy == "shift":
                got[xi + min(xo * factor, max(0, extent - factor))] += 1
            else:
                got[xo * factor + xi] += 1
    return got


@pytest.mark.parametrize("strategy", ["guard", "shift", "round"])
def test_split_strategy_oracle(strategy):
    for extent in range(8):
        for factor in range(1, 6):
            got = visits(extent, factor, strategy)
            assert got == brute_force(extent, factor, strategy)
            base = set(range(extent))
            if strategy == "guard":
                assert got == Counter(base)
            elif strategy == "round":
                padded = -(-extent // factor) * factor
                assert got == Counter(range(padded))
            elif extent >= factor:
                assert set(got) == base
                dup = extent % factor != 0
                assert (max(got.values()) > 1) == dup
                assert sum(got.values()) == -(-extent // factor) * factor


def lowered(text):
    return lower(parse_pipeline(text))


TWO = "pipeline f() { fun g(x, y) = { x * y }; fun f(x, y) = { g[x, y] + g[y, x] }; }"
RED = "pipeline f() { fun f(x) = { x; rdom(r = (0, 3), u = (0, 2)) in (x) <- f[x] + r * u }; }"


def rejects(text, sched, rule=None):
    diags = validate_schedule(lowered(text), parse_schedule(sched))
    assert diags, sched
    if rule:
        assert diags[0].rule == rule, diags[0]


def test_fresh_names_enforced():
    rejects(TWO, "split(f.x, xo, xo, 3, guard)", "fresh-names")
    rejects(TWO, "split(f.x, y, xi, 3, guard)", "fresh-names")
    rejects(TWO, "split(f.x, g, xi, 3, guard)", "fresh-names")


def test_phase_order_and_single_specialize():
    rejects(TWO, "compute-at(g, f.x)\nsplit(f.x, xo, xi, 2, guard)", "phase-order")
    rejects(TWO, "specialize(f, x_len > 2)\nspecialize(f, x_len > 3)", "one-specialize")


def test_startup_expressions_required():
    rejects(TWO, "split(f.x, xo, xi, y, guard)", "startup-expr")
    rejects(TWO, "specialize(f, x > 1)", "startup-expr")
    rejects(TWO, "bound(f, x, 0, y)", "startup-expr")


def test_tail_strategy_single_stage_only():
    rejects(RED, "split(f.x, xo, xi, 2, shift)", "tail-strategy")
    rejects(RED, "split(f.s0.x, xo, xi, 2, round)", "tail-strategy")
    assert validate_schedule(lowered(RED), parse_schedule("split(f.x, xo, xi, 2, guard)")) == []


def test_swap_and_traverse_purity():
    rejects(RED, "swap(f.u)", "swap")
    rejects(RED, "traverse(f.r, parallel)", "traverse")
    assert validate_schedule(lowered(RED), parse_schedule("swap(f.x)\ntraverse(f.x, parallel)")) == []


def test_fuse_needs_matching_nested_loop():
    rejects(RED, "fuse(f.x, v)", "fuse")  # pure over reduction loop
    rejects(TWO, "fuse(f.x, v)", "fuse")  # innermost loop has no nested loop


def test_loop_name_resolution():
    rejects(TWO, "split(f.q, xo, xi, 2, guard)", "loop-name")
    rejects(TWO, "split(h.x, xo, xi, 2, guard)", "loop-name")


def test_compute_at_into_own_label_rejected():
    rejects(TWO, "compute-at(f, f.x)", "compute-at")


def test_store_at_must_dominate_label():
    # allocation moved inside a loop that does not enclose g's label
    rejects(TWO, "store-at(g, f.x)", "structure")


def test_compute_at_rejects_shadowing_loop_vars():
    # g's own loops are named x and y, which are still bound inside f.y
    rejects(TWO, "compute-at(g, f.y)", "structure")


def test_compute_at_places_label_at_loop_head():
    text = TWO.replace("fun g(x, y) = { x * y }", "fun g(a, b) = { a * b }")
    p = apply_schedule(lowered(text), parse_schedule("compute-at(g, f.y)\nstore-at(g, f.y)"))
    out = dump(p)
    body = out[out.index("for y in ?cpu:f.y"):]
    assert body.index("allocate g") < body.index("label g:") < body.index("for x in ?cpu:f.x")
    assert check_confluence(parse_pipeline(text), parse_schedule("compute-at(g, f.y)\nstore-at(g, f.y)"), lift_beta0,
                            RealizeInput((), ((0, 3), (-1, 4)))).kind == "Equivalent"


def test_specialize_builds_branch_chain():
    p = apply_schedule(lowered(RED), parse_schedule("specialize(f, x_len > 4, x_min == 0)"))
    text = dump(p)
    assert text.index("if x_len > 4:") < text.index("label z1:") < text.index("if x_min == 0:")
    assert text.index("label z2:") < text.index("label z0:")
    assert "f@s0.z1[x] <- x" in text and "?cpu:f.s0.z2.x" in text
    # the last stage's interval is shared across specialisations
    assert "for x in ?cpu:f.x:" in text and "?cpu:f.s1" not in text
    ids = [str(lid) for lid, _, _ in iter_loops(p)]
    assert "f.z1.s0.x" in ids and "f.z0.s1.r" in ids


def test_bound_asserts_go_first_in_label():
    p = apply_schedule(lowered(TWO), parse_schedule("bound(f, x, 0, 16)\nbound-extent(g, y, 4)\nalign-bounds(g, x, 2, 0)"))
    text = dump(p)
    lab = text[text.index("label f:"):]
    assert lab.split("\n")[1].strip() == "assert ?cpu:f.x.min == 0 && ?cpu:f.x.len == 16"
    g = text[text.index("label g:"):text.index("label s0:")]
    assert "assert ?cpu:g.y.len == 4" in g and "assert ?cpu:g.x.min % 2 == 0" in g


def test_bound_directive_assertions():
    p = parse_pipeline(TWO)
    z = RealizeInput((), ((0, 3), (0, 3)))
    # beta0 ignores the assertion, so it holds only when it agrees with the inferred window
    assert check_confluence(p, parse_schedule("bound(f, x, x_min, x_len)"), lift_beta0, z).kind == "Equivalent"
    assert check_confluence(p, parse_schedule("bound(g, x, -2, 12)"), lift_beta0, z).kind == "AssertStop"
    assert check_confluence(p, parse_schedule("bound-extent(f, x, 2)"), lift_beta0, z).kind == "AssertStop"


def test_fuse_covers_same_iterations():
    p = parse_pipeline(TWO)
    S = parse_schedule("fuse(f.y, v)\nsplit(f.v, vo, vi, 4, guard)\ntraverse(f.vo, parallel)")
    for w in [((0, 3), (1, 4)), ((-2, 0), (0, 3)), ((1, 5), (2, 2))]:
        assert check_confluence(p, S, lift_beta0, RealizeInput((), w)).kind == "Equivalent"


def test_failed_directive_leaves_program_unchanged():
    base = lowered(TWO)
    before = dump(base)
    with pytest.raises(ScheduleError):
        apply_directive(base, Split(LoopName("f", "x"), "xo", "xo", Const(2)))
    assert dump(base) == before


def test_generated_schedules_preserve_structure_and_round_trip():
    cfg = FuzzConfig()
    n = 0
    for k in range(40):
        p, _ = gen_pipeline(random.Random(f"sched/{k}"), cfg)
        base = lower(p)
        for j in range(4):
            S = gen_schedule(random.Random(f"sched/{k}/{j}"), p, base)
            assert validate_schedule(base, S) == []
            out = apply_schedule(base, S)
            assert check_structure(out) == []
            assert parse_schedule(render_schedule(S)) == S
            n += len(S)
    assert n > 100

"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

The lines are printed as the tests run (visible with ``-s``) and repeated in
the terminal summary by ``conftest.py``.
"""

import itertools
import math
import time
from collections import Counter
from fractions import Fraction

import pytest

from uslang import samples
from uslang.alg import RealizeInput, realize_alg, validate
from uslang.bounds import ENGINES, FULL, dump_bounds, infer, interval_of, lift_beta0
from uslang.expr import ARITY, ERR_MEM, ERR_RDOM, Const, Err, Interval, Op, Var, eval_expr, eval_op
from uslang.harness import FuzzConfig, build_corpus, check_confluence, check_engine_quality, complete, fuzz
from uslang.lower import lower
from uslang.parse import parse_pipeline, parse_schedule
from uslang.sched import LoopName, Split, apply_directive
from uslang.tir import CompiledProgram, HoleId, substitute_holes

RESULTS = {}


def report(n, ok, what):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {what}"
    RESULTS[n] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def blur():
    return parse_pipeline(samples.BLUR)


Z6 = RealizeInput((), ((0, 6),))


# 1 ------------------------------------------------------------------------- #


def test_criterion_1_running_example(blur):
    t = time.perf_counter()
    values = [v for _, v in realize_alg(blur, Z6).items()]
    verdicts = {k: check_confluence(blur, parse_schedule(s), lift_beta0, Z6).kind for k, s in samples.SCHEDULES.items()}
    rounded = CompiledProgram(complete(blur, parse_schedule(samples.ROUND_SCHEDULE))).run(Z6)
    f_trace = rounded.writes("f")
    elapsed = time.perf_counter() - t
    ok = (
        values == [1, 3, 5, 7, 9, 11]
        and set(verdicts.values()) == {"Equivalent"}
        and f_trace == Counter((x,) for x in range(8))
        and set(rounded.writes("g")) >= {(x,) for x in range(7)}
        and elapsed < 1.0
    )
    report(1, ok, f"f={values}, verdicts={verdicts}, round f-trace=[{min(f_trace)[0]},{max(f_trace)[0] + 1}) "
                  f"in {elapsed:.3f}s (limit 1s)")


# 2 ------------------------------------------------------------------------- #


def test_criterion_2_default_bounds(blur):
    text = dump_bounds(infer(lower(blur)))
    want = {
        "?cpu:g.x = (x_min, x_len + 1)",
        "?mem:g.x = (x_min, x_len + 1)",
        "?cpu:f.x = (x_min, x_len)",
    }
    report(2, want <= set(text.splitlines()), "default-schedule bounds match exactly: " + "; ".join(sorted(want)))


# 3 ------------------------------------------------------------------------- #


def test_criterion_3_redundant_recompute(blur):
    S = parse_schedule(samples.TILED_SCHEDULE)
    counts = {}
    for name in ("beta0", "doubled-mem"):
        out = CompiledProgram(complete(blur, S, ENGINES[name])).run(Z6)
        counts[name] = out.writes("g")[(3,)]
    # pinned: two tiles of three, each recomputing g over the whole window
    report(3, counts == {"beta0": 2, "doubled-mem": 2}, f"g(3) write multiplicity under tiling: {counts}")


# 4 ------------------------------------------------------------------------- #


def _covers(o):
    names = [f"v{k}" for k in range(ARITY[o])]
    e = Op(o, tuple(Var(n) for n in names))
    operands = [(m, l) for m in range(-4, 5) for l in range(0, 6)]
    violations = checked = 0
    for combo in itertools.product(operands, repeat=ARITY[o]):
        iv = interval_of(e, {n: Interval(Const(m), Const(l)) for n, (m, l) in zip(names, combo)})
        if iv == FULL:
            continue
        lo = eval_expr(iv.min, {})
        hi = lo + eval_expr(iv.len, {}) - 1
        for vals in itertools.product(*(range(m, m + l) for m, l in combo)):
            checked += 1
            if not lo <= eval_op(o, list(vals)) <= hi:
                violations += 1
    return violations, checked


def test_criterion_4_interval_soundness():
    t = time.perf_counter()
    violations = checked = 0
    for o in sorted(ARITY):
        v, c = _covers(o)
        violations += v
        checked += c
    elapsed = time.perf_counter() - t
    report(4, violations == 0 and elapsed < 30,
           f"{violations} violations over {checked} operand tuples, all operators, in {elapsed:.1f}s (limit 30s)")


# 5 ------------------------------------------------------------------------- #


def test_criterion_5_fuzz_gate():
    rep = fuzz(FuzzConfig(seed=42))
    h = rep.histogram
    ok = (rep.cases >= 1000 and h["DIVERGENT"] == 0 and h["MEMFAULT"] == 0
          and rep.perm_mismatches == 0 and rep.config.perm_seeds == 3 and rep.elapsed < 300)
    report(5, ok, f"{rep.cases} cases (need >= 1000), DIVERGENT={h['DIVERGENT']} MEMFAULT={h['MEMFAULT']} "
                  f"permutation mismatches={rep.perm_mismatches} over 3 seeds, {rep.elapsed:.1f}s (limit 300s)")


# 6 ------------------------------------------------------------------------- #


def test_criterion_6_separation_examples():
    g = "fun g(x) = { x };"
    cases = {
        "in-place shift": (f"pipeline f() {{ {g} fun f(x) = {{ g[x]; (x) <- f[x + 1] }}; }}", False),
        "mixed pure use": (f"pipeline f() {{ {g} fun f(x) = {{ g[x]; rdom(r = (0, 3)) in (x) <- f[x] + f[r] }}; }}", False),
        "other func": (f"pipeline f() {{ {g} fun f(x) = {{ 0; rdom(r = (0, 3)) in (x) <- f[x] + g[x] + g[r] }}; }}", True),
    }
    got = {}
    for name, (text, legal) in cases.items():
        rules = {d.rule for d in validate(parse_pipeline(text))}
        got[name] = (not rules) if legal else (rules == {"separation"})
    report(6, all(got.values()), f"separation snippets classified as expected: {got}")


# 7 ------------------------------------------------------------------------- #


def _oracle(o, args):
    errs = [a for a in args if isinstance(a, Err)]
    if errs:
        return ERR_MEM if ERR_MEM in errs else ERR_RDOM
    if o in ("/", "%"):
        a, b = args
        if b == 0:
            return 0
        q = math.floor(Fraction(a, b))
        return q if o == "/" else a - b * q
    return {
        "+": lambda a, b: a + b, "-": lambda a, b: a - b, "*": lambda a, b: a * b,
        "<": lambda a, b: int(a < b), ">": lambda a, b: int(a > b), "==": lambda a, b: int(a == b),
        "&&": lambda a, b: int(a != 0 and b != 0), "||": lambda a, b: int(a != 0 or b != 0),
        "min": min, "max": max, "!": lambda a: int(a == 0), "select": lambda c, t, f: t if c else f,
    }[o](*args)


def test_criterion_7_error_semantics():
    bad = checked = 0
    ints = range(-8, 9)
    mixed = [ERR_RDOM, ERR_MEM, -8, -1, 0, 1, 8]
    for o in sorted(ARITY):
        n = ARITY[o]
        domain = itertools.chain(itertools.product(ints, repeat=n), itertools.product(mixed, repeat=n))
        for args in domain:
            checked += 1
            bad += eval_op(o, list(args)) != _oracle(o, args)
    total = all(eval_op(o, [x, 0]) == 0 for o in ("/", "%") for x in ints)
    report(7, bad == 0 and total, f"{bad} mismatches over {checked} operator applications; x/0 = x%0 = 0 on [-8,8]: {total}")


# 8 ------------------------------------------------------------------------- #


def _visits(extent, factor, strategy):
    ident = parse_pipeline("pipeline f() { fun f(x) = { x }; }")
    p = apply_directive(lower(ident), Split(LoopName("f", "x"), "xo", "xi", Const(factor), strategy))
    gamma = {
        HoleId("cpu", "f", "x"): Interval(Const(0), Const(extent)),
        HoleId("mem", "f", "x"): Interval(Const(-20), Const(60)),
    }
    out = CompiledProgram(substitute_holes(p, gamma)).run(RealizeInput((), ((0, 0),)))
    return Counter({pt[0]: n for pt, n in out.writes("f").items()})


def test_criterion_8_split_strategies():
    failures = []
    for extent, factor in itertools.product(range(8), range(1, 6)):
        base = Counter(range(extent))
        g = _visits(extent, factor, "guard")
        if g != base:
            failures.append(("guard", extent, factor))
        r = _visits(extent, factor, "round")
        if r != Counter(range(-(-extent // factor) * factor)):
            failures.append(("round", extent, factor))
        if extent >= factor:
            s = _visits(extent, factor, "shift")
            dup = max(s.values()) > 1
            if set(s) != set(base) or dup != (extent % factor != 0):
                failures.append(("shift", extent, factor))
    report(8, not failures, f"guard/shift/round over extents 0..7, factors 1..5; failures={failures}")


# 9 ------------------------------------------------------------------------- #


def test_criterion_9_engine_conformance():
    corpus = build_corpus()
    ref = check_engine_quality(lift_beta0, corpus, "beta0")
    bad = check_engine_quality(ENGINES["assert-false"], corpus, "assert-false")
    ok = ref.ok and ref.considered > 0 and len(bad.violations) == bad.considered > 0
    report(9, ok, f"beta0: {len(ref.violations)} violations on {ref.considered} clean cases; "
                  f"assert-false: {len(bad.violations)}/{bad.considered} violated")

import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from uslang import samples
from uslang.alg import RealizeInput, validate
from uslang.bounds import ENGINES, lift_beta0
from uslang.expr import ERR_MEM
from uslang.harness import (
    FuzzConfig,
    Verdict,
    build_corpus,
    check_confluence,
    check_engine_quality,
    complete,
    ddmin,
    fuzz,
    gen_input,
    gen_pipeline,
    gen_schedule,
    judge,
    shrink_schedule,
)
from uslang.parse import parse_pipeline, parse_schedule
from uslang.tir import CompiledProgram
from uslang.sched import validate_schedule
from uslang.lower import lower


def test_running_example_confluent(blur, schedules, window6):
    for name, S in schedules.items():
        assert check_confluence(blur, S, lift_beta0, window6).kind == "Equivalent", name


def test_round_writes_padded_window(blur, schedules, window6):
    out = CompiledProgram(complete(blur, schedules["round"])).run(window6)
    assert set(out.writes("f")) == {(x,) for x in range(8)}


def test_negative_rdom_gives_alg_error():
    p = parse_pipeline(samples.RDOM_PARAM)
    v = check_confluence(p, [], lift_beta0, RealizeInput((-1,), ((0, 3),)))
    assert v.kind == "AlgError" and str(v) == "AlgError at [0]: err_rdom"
    assert check_confluence(p, [], lift_beta0, RealizeInput((2,), ((0, 3),))).kind == "Equivalent"


def test_judge_treats_missing_points_as_err_mem(blur, window6):
    img = {(x,): 2 * x + 1 for x in range(6)}
    out = CompiledProgram(complete(blur, [])).run(RealizeInput((), ((0, 5),)))
    v = judge(blur, window6, img, out)
    assert v.kind == "DIVERGENT" and v.point == (5,) and v.ir == ERR_MEM
    assert str(v) == "DIVERGENT at [5]: alg=11 ir=err_mem"


def test_verdict_bug_classes():
    assert Verdict("MEMFAULT").is_bug and Verdict("DIVERGENT", (0,), 1, 2).is_bug
    assert not Verdict("AssertStop").is_bug and not Verdict("Equivalent").is_bug
    assert Verdict("RDOMSTOP", explained=False).is_bug


def test_broken_engine_is_caught(blur, window6):
    v = check_confluence(blur, [], ENGINES["broken"], window6)
    assert v.kind == "MEMFAULT"


def test_assert_false_engine_stops(blur, window6):
    assert check_confluence(blur, [], ENGINES["assert-false"], window6).kind == "AssertStop"


# --------------------------------------------------------------------------- #
# shrinking


def test_ddmin_finds_minimal_subset():
    calls = []

    def failing(xs):
        calls.append(xs)
        return 3 in xs and 7 in xs

    assert ddmin(list(range(10)), failing) == [3, 7]
    assert ddmin([1, 2], lambda xs: True) == []
    assert ddmin([], lambda xs: False) == []


@given(st.lists(st.integers(0, 30), unique=True, max_size=12), st.sets(st.integers(0, 30), max_size=3))
@settings(max_examples=60, deadline=None)
def test_ddmin_result_still_fails(items, need):
    def failing(xs):
        return need <= set(xs)

    if not failing(items):
        return
    out = ddmin(items, failing)
    assert failing(out)
    assert set(out) <= set(items)
    # one-minimal: removing any single element breaks it
    for k in range(len(out)):
        assert not failing(out[:k] + out[k + 1:])


def test_shrink_keeps_verdict_class(blur, window6):
    S = parse_schedule("split(f.x, xo, xi, 2, guard)\nswap(f.xo)\ntraverse(f.xi, parallel)")
    broken = ENGINES["broken"]
    assert check_confluence(blur, S, broken, window6).kind == "MEMFAULT"
    small = shrink_schedule(blur, S, broken, window6, "MEMFAULT")
    assert small == []
    assert check_confluence(blur, small, broken, window6).kind == "MEMFAULT"


# --------------------------------------------------------------------------- #
# generators


def test_generators_are_deterministic():
    cfg = FuzzConfig()
    a = gen_pipeline(random.Random("x/1"), cfg)
    b = gen_pipeline(random.Random("x/1"), cfg)
    assert a == b
    p = a[0]
    assert gen_schedule(random.Random("s"), p) == gen_schedule(random.Random("s"), p)
    assert gen_input(random.Random("i"), p, cfg) == gen_input(random.Random("i"), p, cfg)


@given(st.integers(0, 10 ** 6))
@settings(max_examples=40, deadline=None)
def test_generated_cases_are_valid(k):
    cfg = FuzzConfig(max_funcs=3)
    p, _ = gen_pipeline(random.Random(k), cfg)
    assert validate(p) == []
    assert len(p.funcs) <= cfg.max_funcs
    assert all(f.dims <= cfg.max_dims and len(f.stages) <= cfg.max_stages for f in p.funcs)
    S = gen_schedule(random.Random(k + 1), p)
    assert validate_schedule(lower(p), S) == []
    z = gen_input(random.Random(k + 2), p, cfg)
    assert len(z.params) == len(p.params) and len(z.window) == p.output_func.dims
    assert all(0 <= n <= cfg.max_window_len for _, n in z.window)


def test_config_validation():
    with pytest.raises(ValueError):
        FuzzConfig(max_funcs=0)
    with pytest.raises(ValueError):
        FuzzConfig(pipelines=-1)


# --------------------------------------------------------------------------- #
# fuzz driver


def test_small_fuzz_run_is_sound(tmp_path):
    rep = fuzz(FuzzConfig(seed=3, pipelines=8, schedules=3, inputs=2))
    assert rep.cases == 48 and rep.ok
    assert rep.text().endswith("result: PASS\n")
    path = tmp_path / "records.jsonl"
    rep.write_records(path)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert [r["case"] for r in rows] == sorted(r["case"] for r in rows)
    assert {r["verdict"] for r in rows} <= set(rep.histogram)


def test_fuzz_is_reproducible():
    cfg = FuzzConfig(seed=11, pipelines=4, schedules=2, inputs=2)
    a, b = fuzz(cfg), fuzz(cfg)
    strip = lambda rep: [{k: v for k, v in r.items() if not k.startswith("ms_")} for r in rep.records]
    assert strip(a) == strip(b)


def test_fuzz_without_schedules_runs_default():
    rep = fuzz(FuzzConfig(seed=5, pipelines=5, schedules=0, inputs=2))
    assert rep.cases == 10 and all(r["directives"] == 0 for r in rep.records)


def test_fuzz_reports_broken_engine():
    rep = fuzz(FuzzConfig(seed=1, pipelines=3, schedules=2, inputs=2), ENGINES["broken"], "broken")
    assert not rep.ok and rep.histogram["MEMFAULT"] > 0
    f = rep.failures[0]
    assert "MEMFAULT" in f["verdict"]
    assert "FAILURE" in rep.text() and rep.text().endswith("result: FAIL\n")


# --------------------------------------------------------------------------- #
# engine quality


@pytest.fixture(scope="module")
def corpus():
    return build_corpus(pipelines=8)


def test_beta0_meets_its_own_quality_bar(corpus):
    rep = check_engine_quality(lift_beta0, corpus, "beta0")
    assert rep.ok and rep.considered > 20


def test_doubled_allocation_engine_conforms(corpus):
    assert check_engine_quality(ENGINES["doubled-mem"], corpus, "doubled-mem").ok


def test_assert_false_engine_violates_every_clean_case(corpus):
    rep = check_engine_quality(ENGINES["assert-false"], corpus, "assert-false")
    assert rep.considered > 0 and len(rep.violations) == rep.considered

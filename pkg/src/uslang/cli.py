"""Command-line front end.

Exit status: 0 on success, 1 on diagnostics (parse, validity, failed
bounds, a stuck run), 2 on a soundness violation (DIVERGENT or MEMFAULT).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from . import bounds as B
from .alg import RealizeInput, realize_alg, validate
from .expr import render_value
from .harness import FuzzConfig, build_corpus, check_confluence, check_engine_quality, fuzz
from .lower import lower
from .parse import ParseError, parse_pipeline, parse_schedule
from .sched import apply_schedule, validate_schedule
from .tir import Completed, MemError, dump, run_ir

OK, DIAG, UNSOUND = 0, 1, 2


class _Fail(Exception):
    def __init__(self, message: str, status: int = DIAG):
        super().__init__(message)
        self.status = status


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise _Fail(f"{path}: {e.strerror}") from None


def load_pipeline(path: str):
    try:
        p = parse_pipeline(_read(path))
    except ParseError as e:
        raise _Fail(f"{path}:{e}" if e.line else f"{path}: {e}") from None
    diags = validate(p)
    if diags:
        raise _Fail("\n".join(f"{path}: {d}" for d in diags))
    return p


def load_schedule(path: str, program):
    try:
        S = parse_schedule(_read(path))
    except ParseError as e:
        raise _Fail(f"{path}:{e}" if e.line else f"{path}: {e}") from None
    diags = validate_schedule(program, S)
    if diags:
        raise _Fail("\n".join(f"{path}: {d}" for d in diags))
    return S


def parse_window(text: Optional[str], dims: int):
    if text is None:
        if dims == 0:
            return ()
        raise _Fail("--window is required (min:len per output dimension)")
    out = []
    for part in text.split(","):
        if not part.strip() and dims == 0:
            continue
        try:
            mn, ln = part.split(":")
            out.append((int(mn), int(ln)))
        except ValueError:
            raise _Fail(f"bad window component {part!r}; expected min:len") from None
    if len(out) != dims:
        raise _Fail(f"window has {len(out)} dimensions, output has {dims}")
    if any(ln < 0 for _, ln in out):
        raise _Fail("window lengths must be non-negative")
    return tuple(out)


def parse_params(items: List[str], names) -> tuple:
    vals = {}
    for it in items:
        name, eq, v = it.partition("=")
        if not eq:
            raise _Fail(f"bad --param {it!r}; expected name=value")
        if name not in names:
            raise _Fail(f"unknown parameter {name}")
        try:
            vals[name] = int(v)
        except ValueError:
            raise _Fail(f"parameter {name} must be an integer") from None
    missing = [n for n in names if n not in vals]
    if missing:
        raise _Fail("missing --param for " + ", ".join(missing))
    return tuple(vals[n] for n in names)


def _input(args, p) -> RealizeInput:
    return RealizeInput(parse_params(args.param, p.params), parse_window(args.window, p.output_func.dims))


def _engine(name: str):
    try:
        return B.ENGINES[name]
    except KeyError:
        raise _Fail(f"unknown engine {name}; choose from {', '.join(B.ENGINES)}") from None


def _point(pt) -> str:
    return ",".join(str(c) for c in pt)


def _cmd_validate(args) -> int:
    p = load_pipeline(args.pipeline)
    print(f"{p.output}: valid ({len(p.funcs)} funcs)")
    return OK


def _cmd_run_alg(args) -> int:
    p = load_pipeline(args.pipeline)
    img = realize_alg(p, _input(args, p))
    for pt, v in img.items():
        print(f"{p.output}[{_point(pt)}]={render_value(v)}")
    return OK


def _cmd_lower(args) -> int:
    sys.stdout.write(dump(lower(load_pipeline(args.pipeline))))
    return OK


def _scheduled(args):
    p = load_pipeline(args.pipeline)
    base = lower(p)
    S = load_schedule(args.schedule, base)
    return p, S, apply_schedule(base, S)


def _cmd_schedule(args) -> int:
    sys.stdout.write(dump(_scheduled(args)[2]))
    return OK


def _cmd_constraint(args) -> int:
    sys.stdout.write(B.dump_constraint(B.extract(_scheduled(args)[2])) + "\n")
    return OK


def _cmd_bounds(args) -> int:
    res = B.infer(_scheduled(args)[2])
    sys.stdout.write(B.dump_bounds(res))
    return OK if res.ok else DIAG


def _cmd_run(args) -> int:
    p, S, prog = _scheduled(args)
    z = _input(args, p)
    out = run_ir(_engine(args.engine)(prog), z)
    if not isinstance(out, Completed):
        print(f"stuck: {out.kind}: {out.site}" + (f" at {list(out.point)}" if isinstance(out, MemError) else ""))
        return UNSOUND if isinstance(out, MemError) else DIAG
    for pt, v in out.output.items():
        print(f"{p.output}[{_point(pt)}]={render_value(v)}")
    return OK


def _cmd_difftest(args) -> int:
    p, S, _ = _scheduled(args)
    v = check_confluence(p, S, _engine(args.engine), _input(args, p))
    print(v)
    return UNSOUND if v.is_bug else OK


def _config(args) -> FuzzConfig:
    try:
        return FuzzConfig(
            seed=args.seed,
            pipelines=args.pipelines,
            schedules=args.schedules,
            inputs=args.inputs,
            max_funcs=args.max_funcs,
            max_dims=args.max_dims,
            max_stages=args.max_stages,
            max_rdom_extent=args.max_rdom_extent,
            max_window_len=args.max_window_len,
            max_depth=args.max_depth,
            perm_seeds=args.perm_seeds,
        )
    except ValueError as e:
        raise _Fail(str(e)) from None


def _cmd_fuzz(args) -> int:
    rep = fuzz(_config(args), _engine(args.engine), args.engine, minimize=not args.no_minimize)
    sys.stdout.write(rep.text())
    if args.records:
        rep.write_records(args.records)
    if args.plot:
        from .report import plot_verdicts

        plot_verdicts(rep, args.plot)
    return OK if rep.ok else UNSOUND


def _cmd_quality(args) -> int:
    corpus = build_corpus(seed=args.seed, pipelines=args.pipelines)
    rep = check_engine_quality(_engine(args.engine), corpus, args.engine)
    sys.stdout.write(rep.text())
    return OK if rep.ok else DIAG


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uslang", description="Schedule, bound, run and difftest array pipelines.")
    sub = ap.add_subparsers(dest="command", required=True)

    def cmd(name, fn, help, schedule=False, inputs=False, engine=False):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("pipeline")
        if schedule:
            sp.add_argument("schedule")
        if inputs:
            sp.add_argument("--param", action="append", default=[], metavar="NAME=INT")
            sp.add_argument("--window", metavar="MIN:LEN[,MIN:LEN]")
        if engine:
            sp.add_argument("--engine", default="beta0", choices=sorted(B.ENGINES))
        sp.set_defaults(fn=fn)
        return sp

    cmd("validate", _cmd_validate, "check a pipeline's validity rules")
    cmd("run-alg", _cmd_run_alg, "evaluate the reference semantics on a window", inputs=True)
    cmd("lower", _cmd_lower, "dump the hole-bearing lowered program")
    cmd("schedule", _cmd_schedule, "dump the scheduled program", schedule=True)
    cmd("constraint", _cmd_constraint, "dump the extracted bounds constraint", schedule=True)
    cmd("bounds", _cmd_bounds, "dump the inferred hole fillings or FAIL", schedule=True)
    cmd("run", _cmd_run, "complete with a bounds engine and execute", schedule=True, inputs=True, engine=True)
    cmd("difftest", _cmd_difftest, "compare the scheduled program with the algorithm", schedule=True, inputs=True, engine=True)

    fz = sub.add_parser("fuzz", help="random differential testing")
    fz.add_argument("--seed", type=int, default=42)
    d = FuzzConfig()
    for flag in ("pipelines", "schedules", "inputs", "max_funcs", "max_dims", "max_stages",
                 "max_rdom_extent", "max_window_len", "max_depth", "perm_seeds"):
        fz.add_argument("--" + flag.replace("_", "-"), dest=flag, type=int, default=getattr(d, flag))
    fz.add_argument("--engine", default="beta0", choices=sorted(B.ENGINES))
    fz.add_argument("--records", metavar="PATH", help="write one JSON record per case")
    fz.add_argument("--plot", metavar="PATH", help="render the verdict histogram")
    fz.add_argument("--no-minimize", action="store_true", help="skip schedule shrinking")
    fz.set_defaults(fn=_cmd_fuzz)

    q = sub.add_parser("quality", help="compare an engine against beta0 on a generated corpus")
    q.add_argument("--engine", default="beta0", choices=sorted(B.ENGINES))
    q.add_argument("--seed", type=int, default=7)
    q.add_argument("--pipelines", type=int, default=12)
    q.set_defaults(fn=_cmd_quality)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _Fail as e:
        print(f"error: {e}", file=sys.stderr)
        return e.status


if __name__ == "__main__":
    sys.exit(main())

"""Parsers for the pipeline and schedule text formats.

Pipelines::

    pipeline f(p1) {
      fun g(x) = { x * p1 };
      fun f(x) = { g[x] + g[x + 1]; rdom(r = (0, 3)) in (x) <- f[x] + r if r < 2 };
    }

Schedules hold one directive per line; ``#`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Tuple

from .alg import FuncDef, Pipeline, Stage, pure_stage
from .expr import ARITY, Access, Const, Expr, Interval, Op, Var
from . import sched as S


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # int | name | op | eof
    text: str
    line: int
    col: int


_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)"
    r"|(?P<int>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><-|==|&&|\|\||[-+*/%<>!()\[\]{},;=.:@])"
)

KEYWORDS = {"pipeline", "fun", "rdom", "in", "if"}


def tokenize(text: str) -> List[Token]:
    out = []
    pos, line, start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, m.start() - start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str):
        t = self.tok
        raise ParseError(f"{msg}, found {t.text or 'end of input'!r}", t.line, t.col)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "name")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        t = self.tok
        self.i += 1
        return t

    def name(self) -> str:
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS:
            self.error("expected a name")
        self.i += 1
        return t.text

    def names(self, close: str) -> Tuple[str, ...]:
        out = []
        if not self.at(close):
            out.append(self.name())
            while self.accept(","):
                out.append(self.name())
        self.expect(close)
        return tuple(out)

    # expressions -------------------------------------------------------

    _LEVELS = [("||",), ("&&",), ("<", ">", "=="), ("+", "-"), ("*", "/", "%")]

    def expr(self, level: int = 0) -> Expr:
        if level == len(self._LEVELS):
            return self.unary()
        ops = self._LEVELS[level]
        left = self.expr(level + 1)
        if ops == ("<", ">", "=="):
            if self.tok.kind == "op" and self.tok.text in ops:
                o = self.tok.text
                self.i += 1
                left = Op(o, (left, self.expr(level + 1)))
                if self.tok.kind == "op" and self.tok.text in ops:
                    self.error("comparisons do not associate; add parentheses")
            return left
        while self.tok.kind == "op" and self.tok.text in ops:
            o = self.tok.text
            self.i += 1
            left = Op(o, (left, self.expr(level + 1)))
        return left

    def unary(self) -> Expr:
        if self.accept("!"):
            return Op("!", (self.unary(),))
        if self.at("-"):
            self.i += 1
            if self.tok.kind == "int":
                v = int(self.tok.text)
                self.i += 1
                return Const(-v)
            return Op("-", (Const(0), self.unary()))
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return Const(int(t.text))
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "name" and t.text not in KEYWORDS:
            self.i += 1
            if t.text in ("select", "min", "max") and self.at("("):
                self.expect("(")
                args = self.args(")")
                if len(args) != ARITY[t.text]:
                    raise ParseError(f"{t.text} takes {ARITY[t.text]} arguments", t.line, t.col)
                return Op(t.text, tuple(args))
            if self.at("["):
                self.expect("[")
                return Access(t.text, tuple(self.args("]")))
            return Var(t.text)
        self.error("expected an expression")

    def args(self, close: str) -> List[Expr]:
        out = []
        if not self.at(close):
            out.append(self.expr())
            while self.accept(","):
                out.append(self.expr())
        self.expect(close)
        return out

    # pipelines ---------------------------------------------------------

    def pipeline(self) -> Pipeline:
        self.expect("pipeline")
        out = self.name()
        self.expect("(")
        params = self.names(")")
        self.expect("{")
        funcs = []
        while not self.at("}"):
            funcs.append(self.func())
            if not self.accept(";") and not self.at("}"):
                self.error("expected ';' after a func")
        self.expect("}")
        if self.tok.kind != "eof":
            self.error("expected end of input")
        return Pipeline(out, params, tuple(funcs))

    def func(self) -> FuncDef:
        self.expect("fun")
        name = self.name()
        self.expect("(")
        xs = self.names(")")
        self.expect("=")
        self.expect("{")
        stages = [pure_stage(xs, self.expr())]
        while self.accept(";"):
            if self.at("}"):
                break
            stages.append(self.update())
        self.expect("}")
        return FuncDef(name, xs, tuple(stages))

    def update(self) -> Stage:
        rdom = []
        if self.accept("rdom"):
            self.expect("(")
            if not self.at(")"):
                while True:
                    r = self.name()
                    self.expect("=")
                    self.expect("(")
                    mn = self.expr()
                    self.expect(",")
                    ln = self.expr()
                    self.expect(")")
                    rdom.append((r, Interval(mn, ln)))
                    if not self.accept(","):
                        break
            self.expect(")")
            self.expect("in")
        self.expect("(")
        lhs = self.args(")")
        self.expect("<-")
        rhs = self.expr()
        pred: Expr = Const(1)
        if self.accept("if"):
            pred = self.expr()
        return Stage(tuple(rdom), tuple(lhs), rhs, pred)


def parse_expr(text: str) -> Expr:
    p = _Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    return e


def parse_pipeline(text: str) -> Pipeline:
    return _Parser(text).pipeline()


# --------------------------------------------------------------------------- #
# Schedules

_DIRECTIVE = re.compile(r"^([a-z][a-z-]*)\s*\((.*)\)\s*;?$")


def _split_args(s: str, line: int) -> List[str]:
    out, depth, cur = [], 0, []
    for ch in s:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
            if depth < 0:
                raise ParseError("unbalanced parentheses", line)
        if ch == "," and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise ParseError("unbalanced parentheses", line)
    tail = "".join(cur).strip()
    if tail or out:
        out.append(tail)
    return out


def parse_loop_name(s: str, line: int = 0) -> S.LoopName:
    parts = s.strip().split(".")
    if len(parts) < 2 or not all(p.isidentifier() for p in parts):
        raise ParseError(f"bad loop name {s!r}; expected func[.zJ][.sI].var", line)
    func, var, mid = parts[0], parts[-1], parts[1:-1]
    spec = stage = None
    for m in mid:
        if re.fullmatch(r"z\d+", m) and spec is None and stage is None:
            spec = int(m[1:])
        elif re.fullmatch(r"s\d+", m) and stage is None:
            stage = int(m[1:])
        else:
            raise ParseError(f"bad loop name component {m!r} in {s!r}", line)
    return S.LoopName(func, var, spec, stage)


def _ident(s: str, line: int) -> str:
    if not s.isidentifier():
        raise ParseError(f"expected a name, found {s!r}", line)
    return s


def _e(s: str, line: int) -> Expr:
    try:
        return parse_expr(s)
    except ParseError as err:
        raise ParseError(f"in expression {s!r}: {err}", line) from None


_ARGC = {
    "split": (4, 5), "fuse": (2, 2), "swap": (1, 1), "traverse": (2, 2),
    "compute-at": (2, 2), "store-at": (2, 2), "bound": (4, 4),
    "bound-extent": (3, 3), "align-bounds": (4, 4), "specialize": (1, 99),
}


def parse_directive(text: str, line: int = 0):
    m = _DIRECTIVE.match(text.strip())
    if not m:
        raise ParseError(f"cannot parse directive {text.strip()!r}", line)
    name, args = m.group(1), _split_args(m.group(2), line)
    if name not in _ARGC:
        raise ParseError(f"unknown directive {name}", line)
    lo, hi = _ARGC[name]
    if not lo <= len(args) <= hi:
        raise ParseError(f"{name} takes {lo if lo == hi else f'{lo}-{hi}'} arguments, got {len(args)}", line)
    if name == "specialize":
        return S.Specialize(_ident(args[0], line), tuple(_e(a, line) for a in args[1:]))
    if name == "split":
        strategy = args[4].lower() if len(args) == 5 else "guard"
        if strategy not in S.STRATEGIES:
            raise ParseError(f"unknown tail strategy {strategy!r}", line)
        return S.Split(parse_loop_name(args[0], line), _ident(args[1], line), _ident(args[2], line), _e(args[3], line), strategy)
    if name == "fuse":
        return S.Fuse(parse_loop_name(args[0], line), _ident(args[1], line))
    if name == "swap":
        return S.Swap(parse_loop_name(args[0], line))
    if name == "traverse":
        order = args[1].lower()
        if order not in ("serial", "parallel"):
            raise ParseError(f"traversal must be serial or parallel, not {order!r}", line)
        return S.Traverse(parse_loop_name(args[0], line), order == "parallel")
    if name == "compute-at":
        return S.ComputeAt(_ident(args[0], line), parse_loop_name(args[1], line))
    if name == "store-at":
        return S.StoreAt(_ident(args[0], line), parse_loop_name(args[1], line))
    if name == "bound":
        return S.Bound(_ident(args[0], line), _ident(args[1], line), _e(args[2], line), _e(args[3], line))
    if name == "bound-extent":
        return S.BoundExtent(_ident(args[0], line), _ident(args[1], line), _e(args[2], line))
    return S.AlignBounds(_ident(args[0], line), _ident(args[1], line), _e(args[2], line), _e(args[3], line))


def parse_schedule(text: str) -> List:
    out = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(parse_directive(line, n))
    return out

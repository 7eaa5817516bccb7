"""Shared expression language: values, total operators, symbolic expressions.

Values are plain Python ``int`` objects or one of the two ordered error
sentinels in :class:`Err`.  Expressions are immutable trees of small frozen
dataclasses so they can be hashed, compared structurally and shared freely.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, Iterator, Mapping, Optional, Tuple, Union


class StructuralError(Exception):
    """A malformed term: bad arity, unbound variable, hole in executable code."""


class Err(enum.Enum):
    RDOM = 1
    MEM = 2

    def __lt__(self, other: "Err") -> bool:
        return self.value < other.value

    def __str__(self) -> str:
        return "err_rdom" if self is Err.RDOM else "err_mem"


ERR_RDOM = Err.RDOM
ERR_MEM = Err.MEM

Value = Union[int, Err]


def is_error(v: Value) -> bool:
    return isinstance(v, Err)


def render_value(v: Value) -> str:
    return str(v)


# --------------------------------------------------------------------------- #
# Expression trees


class Expr:
    __slots__ = ()

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: int


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True)
class Access(Expr):
    """``f[e1, ..., en]``; in the IR the labels name the stage/specialization read.

    ``stage is None`` means the func's final stage (the stage-free label).
    """

    func: str
    args: Tuple[Expr, ...]
    stage: Optional[int] = None
    spec: Optional[int] = None


@dataclass(frozen=True, eq=True)
class Op(Expr):
    op: str
    args: Tuple[Expr, ...]


@dataclass(frozen=True, eq=True)
class HoleRef(Expr):
    """One part (``min`` or ``len``) of a bounds hole."""

    hole: Any
    part: str


@dataclass(frozen=True, eq=True)
class Inf(Expr):
    """Infinity marker; legal only inside symbolic interval endpoints."""

    positive: bool


@dataclass(frozen=True, eq=True)
class Interval:
    """Half-open window ``[min, min + len)``; empty when ``len <= 0``."""

    min: Expr
    len: Expr

    def __str__(self) -> str:
        return render_interval(self)


ARITY = {
    "+": 2, "-": 2, "*": 2, "/": 2, "%": 2,
    "||": 2, "&&": 2, "!": 1, "<": 2, ">": 2, "==": 2,
    "select": 3, "min": 2, "max": 2,
}
OPERATORS = frozenset(ARITY)


def const(v: int) -> Const:
    return Const(v)


def var(name: str) -> Var:
    return Var(name)


def op(name: str, *args: Union[Expr, int]) -> Op:
    return Op(name, tuple(a if isinstance(a, Expr) else Const(a) for a in args))


def add(a, b) -> Op:
    return op("+", a, b)


def sub(a, b) -> Op:
    return op("-", a, b)


def mul(a, b) -> Op:
    return op("*", a, b)


def lt(a, b) -> Op:
    return op("<", a, b)


def and_(a, b) -> Op:
    return op("&&", a, b)


def eq(a, b) -> Op:
    return op("==", a, b)


# --------------------------------------------------------------------------- #
# Evaluation


def _floordiv(a: int, b: int) -> int:
    return 0 if b == 0 else a // b


def _mod(a: int, b: int) -> int:
    return 0 if b == 0 else a % b


_BINARY: Dict[str, Callable[[int, int], int]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _floordiv,
    "%": _mod,
    "||": lambda a, b: 1 if (a != 0 or b != 0) else 0,
    "&&": lambda a, b: 1 if (a != 0 and b != 0) else 0,
    "<": lambda a, b: 1 if a < b else 0,
    ">": lambda a, b: 1 if a > b else 0,
    "==": lambda a, b: 1 if a == b else 0,
    "min": min,
    "max": max,
}


def eval_op(operator: str, args) -> Value:
    """Apply ``operator`` to fully evaluated arguments.

    Any error argument makes the result the greatest error present.  Division
    rounds toward negative infinity, the remainder takes the divisor's sign,
    and both are zero for a zero divisor.
    """
    arity = ARITY.get(operator)
    if arity is None:
        raise StructuralError(f"unknown operator {operator!r}")
    if len(args) != arity:
        raise StructuralError(f"{operator} expects {arity} arguments, got {len(args)}")
    worst = None
    for a in args:
        if type(a) is not int:
            if not isinstance(a, Err):
                raise StructuralError(f"not a value: {a!r}")
            if worst is None or worst < a:
                worst = a
    if worst is not None:
        return worst
    if arity == 2:
        return _BINARY[operator](args[0], args[1])
    if operator == "!":
        return 1 if args[0] == 0 else 0
    c, t, f = args
    return t if c != 0 else f


Reader = Callable[[Access, Tuple[Value, ...]], Value]


def _no_reader(a: Access, idx) -> Value:
    raise StructuralError(f"no reader for access to {a.func}")


def eval_expr(e: Expr, env: Mapping[str, Value], reader: Reader = _no_reader) -> Value:
    """Strictly evaluate ``e``; every subexpression is evaluated, no short-circuit."""
    t = type(e)
    if t is Const:
        return e.value
    if t is Var:
        try:
            return env[e.name]
        except KeyError:
            raise StructuralError(f"unbound variable {e.name!r}") from None
    if t is Op:
        return eval_op(e.op, [eval_expr(a, env, reader) for a in e.args])
    if t is Access:
        idx = tuple(eval_expr(a, env, reader) for a in e.args)
        return reader(e, idx)
    if t is HoleRef:
        raise StructuralError(f"hole {render(e)} in executable expression")
    if t is Inf:
        raise StructuralError("infinity in executable expression")
    raise StructuralError(f"not an expression: {e!r}")


def truthy(v: Value) -> bool:
    """Errors are not truthy."""
    return type(v) is int and v != 0


# --------------------------------------------------------------------------- #
# Traversals


def children(e: Expr) -> Tuple[Expr, ...]:
    if isinstance(e, (Op, Access)):
        return e.args
    return ()


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(children(n)))


def free_vars(e: Expr) -> set:
    return {n.name for n in walk(e) if isinstance(n, Var)}


def accesses(e: Expr) -> Iterator[Access]:
    for n in walk(e):
        if isinstance(n, Access):
            yield n


def has_access(e: Expr) -> bool:
    return any(isinstance(n, Access) for n in walk(e))


def has_holes(e: Expr) -> bool:
    return any(isinstance(n, (HoleRef, Inf)) for n in walk(e))


def map_expr(e: Expr, fn: Callable[[Expr], Optional[Expr]]) -> Expr:
    """Bottom-up rewrite; ``fn`` returns a replacement or ``None`` to keep."""
    if isinstance(e, Op):
        new_args = tuple(map_expr(a, fn) for a in e.args)
        if new_args != e.args:
            e = Op(e.op, new_args)
    elif isinstance(e, Access):
        new_args = tuple(map_expr(a, fn) for a in e.args)
        if new_args != e.args:
            e = Access(e.func, new_args, e.stage, e.spec)
    r = fn(e)
    return e if r is None else r


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    if not mapping:
        return e
    return map_expr(e, lambda n: mapping.get(n.name) if isinstance(n, Var) else None)


def is_startup_expr(e: Expr, params: Iterable[str]) -> bool:
    params = set(params)
    for n in walk(e):
        if isinstance(n, Access):
            return False
        if isinstance(n, Var) and n.name not in params:
            return False
    return True


# --------------------------------------------------------------------------- #
# Simplification
#
# Linear sums over non-access atoms are normalised so that hulls such as
# min(a, a + 1) fold.  Sub-terms that may evaluate to an error (anything with
# a func access) are never dropped, so error propagation is preserved.
# Variables are assumed to be bound to integers, which holds in both
# semantics.


def _linear(e: Expr) -> Optional[Tuple[Dict[Expr, int], int]]:
    """Return (coefficients, constant) if ``e`` is a linear access-free sum."""
    if isinstance(e, Const):
        return {}, e.value
    if isinstance(e, (Var, HoleRef)):
        return {e: 1}, 0
    if isinstance(e, Op):
        if e.op in ("+", "-"):
            a, b = _linear(e.args[0]), _linear(e.args[1])
            if a is None or b is None:
                return None
            sign = 1 if e.op == "+" else -1
            coeffs = dict(a[0])
            for k, v in b[0].items():
                coeffs[k] = coeffs.get(k, 0) + sign * v
            return {k: v for k, v in coeffs.items() if v != 0}, a[1] + sign * b[1]
        if e.op == "*":
            a, b = _linear(e.args[0]), _linear(e.args[1])
            if a is None or b is None:
                return None
            if not a[0]:
                a, b = b, a
            if not b[0]:
                c = b[1]
                return {k: v * c for k, v in a[0].items() if v * c != 0}, a[1] * c
            return None
        if not has_access(e):
            return {e: 1}, 0
    return None


def _from_linear(coeffs: Dict[Expr, int], c: int) -> Expr:
    pos = [(k, v) for k, v in coeffs.items() if v > 0]
    neg = [(k, -v) for k, v in coeffs.items() if v < 0]

    def term(k: Expr, v: int) -> Expr:
        return k if v == 1 else Op("*", (Const(v), k))

    out: Optional[Expr] = None
    for k, v in pos:
        out = term(k, v) if out is None else Op("+", (out, term(k, v)))
    for k, v in neg:
        out = Op("-", (Const(0) if out is None else out, term(k, v)))
    if out is None:
        return Const(c)
    if c > 0:
        out = Op("+", (out, Const(c)))
    elif c < 0:
        out = Op("-", (out, Const(-c)))
    return out


def _const_diff(a: Expr, b: Expr) -> Optional[int]:
    """``a - b`` if it is a known constant."""
    if a == b:
        return 0
    la, lb = _linear(a), _linear(b)
    if la is None or lb is None or la[0] != lb[0]:
        return None
    return la[1] - lb[1]


def _flatten(name: str, args) -> list:
    out = []
    for a in args:
        if isinstance(a, Op) and a.op == name:
            out.extend(_flatten(name, a.args))
        else:
            out.append(a)
    return out


def _simplify_minmax(name: str, args) -> Expr:
    terms = _flatten(name, args)
    kept: list = []
    for t in terms:
        replaced = False
        for i, k in enumerate(kept):
            d = _const_diff(t, k)
            if d is None:
                continue
            if (d < 0) == (name == "min") and d != 0:
                kept[i] = t
            replaced = True
            break
        if not replaced:
            kept.append(t)
    consts = [k for k in kept if isinstance(k, Const)]
    if len(consts) > 1:
        best = min(c.value for c in consts) if name == "min" else max(c.value for c in consts)
        first = kept.index(consts[0])
        kept = [k for k in kept if not isinstance(k, Const)]
        kept.insert(min(first, len(kept)), Const(best))
    out = kept[0]
    for k in kept[1:]:
        out = Op(name, (out, k))
    return out


def _simplify_node(e: Op) -> Expr:
    args = e.args
    if all(isinstance(a, Const) for a in args):
        return Const(eval_op(e.op, [a.value for a in args]))
    o = e.op
    if o in ("+", "-", "*"):
        lin = _linear(e)
        if lin is not None:
            return _from_linear(*lin)
        a, b = args
        if o == "*" and (a == Const(1)):
            return b
        if o == "*" and (b == Const(1)):
            return a
        if o == "+" and a == Const(0):
            return b
        if o in ("+", "-") and b == Const(0):
            return a
        if o == "*" and (a == Const(0) and not has_access(b) or b == Const(0) and not has_access(a)):
            return Const(0)
        return e
    if o in ("/", "%"):
        a, b = args
        if b == Const(0) and not has_access(a):
            return Const(0)
        if b == Const(1):
            return a if o == "/" else (Const(0) if not has_access(a) else e)
        return e
    if o in ("min", "max"):
        if any(has_access(a) for a in args):
            return e
        return _simplify_minmax(o, args)
    if o == "select":
        c, t, f = args
        if isinstance(c, Const):
            keep, drop = (t, f) if c.value != 0 else (f, t)
            if not has_access(drop):
                return keep
        if t == f and not has_access(c):
            return t
        return e
    if o in ("<", ">", "=="):
        a, b = args
        d = _const_diff(a, b)
        if d is not None:
            return Const(eval_op(o, [d, 0]))
        return e
    if o in ("&&", "||"):
        a, b = args
        for x, y in ((a, b), (b, a)):
            if isinstance(x, Const) and not has_access(y) and _is_boolean(y):
                if o == "&&":
                    return y if x.value != 0 else Const(0)
                return Const(1) if x.value != 0 else y
        return e
    return e


def _is_boolean(e: Expr) -> bool:
    return isinstance(e, Op) and e.op in ("<", ">", "==", "&&", "||", "!")


def simplify(e: Expr) -> Expr:
    """Meaning-preserving constant folding and linear normalisation."""
    if isinstance(e, Op):
        return _simplify_node(Op(e.op, tuple(simplify(a) for a in e.args)))
    if isinstance(e, Access):
        return Access(e.func, tuple(simplify(a) for a in e.args), e.stage, e.spec)
    return e


# --------------------------------------------------------------------------- #
# Rendering

_PREC = {"||": 1, "&&": 2, "<": 3, ">": 3, "==": 3, "+": 4, "-": 4, "*": 5, "/": 5, "%": 5}
_CALL_OPS = ("select", "min", "max")


def _render_access_head(a: Access) -> str:
    labels = []
    if a.stage is not None:
        labels.append(f"s{a.stage}")
    if a.spec is not None:
        labels.append(f"z{a.spec}")
    return a.func + ("@" + ".".join(labels) if labels else "")


def render(e: Expr) -> str:
    return _render(e, 0)


def _render(e: Expr, ctx: int) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Access):
        return _render_access_head(e) + "[" + ", ".join(render(a) for a in e.args) + "]"
    if isinstance(e, HoleRef):
        return f"{e.hole}.{e.part}"
    if isinstance(e, Inf):
        return "+inf" if e.positive else "-inf"
    if isinstance(e, Op):
        if e.op in _CALL_OPS:
            return e.op + "(" + ", ".join(render(a) for a in e.args) + ")"
        if e.op == "!":
            return "!" + _render(e.args[0], 6)
        p = _PREC[e.op]
        if p == 3:
            s = f"{_render(e.args[0], 4)} {e.op} {_render(e.args[1], 4)}"
        else:
            s = f"{_render(e.args[0], p)} {e.op} {_render(e.args[1], p + 1)}"
        return f"({s})" if p < ctx else s
    raise StructuralError(f"cannot render {e!r}")


def render_interval(i: Interval) -> str:
    if (
        isinstance(i.min, HoleRef)
        and isinstance(i.len, HoleRef)
        and i.min.hole == i.len.hole
        and i.min.part == "min"
        and i.len.part == "len"
    ):
        return str(i.min.hole)
    return f"({render(i.min)}, {render(i.len)})"

"""Scalar expression DAGs over mutable parameters.

Expressions are immutable trees (shared subexpressions allowed) whose leaves
are constants and parameter references.  Three operations matter to the rest
of the package: numeric evaluation, exact symbolic differentiation, and
branch pinning, which rewrites the piecewise operators (min, max, abs, norm)
onto whichever operand is active at a given parameter assignment.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Iterable, Mapping, Optional, Union

TOL_DIV = 1e-12
TOL_RESIDUAL = 1e-9
# arcsin/arccos arguments this far outside [-1, 1] are clamped, not rejected.
TOL_TRIG_DOMAIN = 1e-12

UNARY_OPS = ("neg", "sin", "cos", "arcsin", "arccos", "sqrt", "abs", "norm", "square")
BINARY_OPS = ("sub", "add", "mul", "div", "min", "max")
PIECEWISE_OPS = frozenset({"min", "max", "abs", "norm"})


class DomainError(ArithmeticError):
    """An operator was applied outside its domain."""

    def __init__(self, op: str, value: float):
        super().__init__(f"{op} undefined at {value!r}")
        self.op = op
        self.value = value


class BranchyExpression(ValueError):
    """Differentiation requested on an expression that still has piecewise ops."""


_param_ids = itertools.count(1)


class Parameter:
    """A named real scalar; the only unknown the solver ever touches.

    ``owner`` is the structure the parameter belongs to (None until it is
    registered), ``role`` says what kind of unknown it is ("sketch", "frame",
    "slack" or "bbox") and ``home`` is an ``(entity, attribute)`` pair used to
    print a path back to it.
    """

    __slots__ = ("id", "name", "_value", "mutable", "owner", "role", "home")

    def __init__(self, name: str, value: float = 0.0, mutable: bool = True, role: str = "sketch"):
        self.id = next(_param_ids)
        self.name = name
        self._value = 0.0
        self.value = value
        self.mutable = bool(mutable)
        self.owner = None
        self.role = role
        self.home = None

    @property
    def value(self) -> float:
        return self._value

    @value.setter
    def value(self, v) -> None:
        v = float(v)
        if not math.isfinite(v):
            raise ValueError(f"parameter {self.name!r} given non-finite value {v!r}")
        self._value = v

    def ref(self) -> "ParamRef":
        return ParamRef(self)

    def __repr__(self) -> str:
        flag = "" if self.mutable else ", fixed"
        return f"Parameter({self.name!r}, {self._value!r}{flag})"


Number = Union[int, float]
Operand = Union["Expr", Parameter, Number]


class Expr:
    __slots__ = ("_params", "_branchy", "origin")

    def __init__(self):
        self._params = None
        self._branchy = None
        # (entity, attribute) this node was derived from, for printing only
        self.origin = None

    def children(self) -> tuple:
        return ()

    def __add__(self, other): return binary("add", self, other)
    def __radd__(self, other): return binary("add", other, self)
    def __sub__(self, other): return binary("sub", self, other)
    def __rsub__(self, other): return binary("sub", other, self)
    def __mul__(self, other): return binary("mul", self, other)
    def __rmul__(self, other): return binary("mul", other, self)
    def __truediv__(self, other): return binary("div", self, other)
    def __rtruediv__(self, other): return binary("div", other, self)
    def __neg__(self): return unary("neg", self)

    def __repr__(self) -> str:
        return to_sexpr(self)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        super().__init__()
        self.value = float(value)


class ParamRef(Expr):
    __slots__ = ("param",)

    def __init__(self, param: Parameter):
        super().__init__()
        self.param = param


class Unary(Expr):
    __slots__ = ("op", "arg")

    def __init__(self, op: str, arg: Expr):
        super().__init__()
        if op not in UNARY_OPS:
            raise ValueError(f"unknown unary op {op!r}")
        self.op = op
        self.arg = arg

    def children(self):
        return (self.arg,)


class Binary(Expr):
    __slots__ = ("op", "left", "right")

    def __init__(self, op: str, left: Expr, right: Expr):
        super().__init__()
        if op not in BINARY_OPS:
            raise ValueError(f"unknown binary op {op!r}")
        self.op = op
        self.left = left
        self.right = right

    def children(self):
        return (self.left, self.right)


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(x: Operand) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, Parameter):
        return ParamRef(x)
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return Const(x)
    raise TypeError(f"cannot use {type(x).__name__} as an expression")


def unary(op: str, arg: Operand) -> Expr:
    return Unary(op, as_expr(arg))


def binary(op: str, left: Operand, right: Operand) -> Expr:
    return Binary(op, as_expr(left), as_expr(right))


def sin(e): return unary("sin", e)
def cos(e): return unary("cos", e)
def arcsin(e): return unary("arcsin", e)
def arccos(e): return unary("arccos", e)
def sqrt(e): return unary("sqrt", e)
def square(e): return unary("square", e)
def abs_(e): return unary("abs", e)
def norm(e): return unary("norm", e)
def min_(a, b): return binary("min", a, b)
def max_(a, b): return binary("max", a, b)


def min_of(items: Iterable[Operand]) -> Expr:
    """Balanced min over several operands (keeps the tree shallow)."""
    return _balanced("min", [as_expr(i) for i in items])


def max_of(items: Iterable[Operand]) -> Expr:
    return _balanced("max", [as_expr(i) for i in items])


def _balanced(op, items):
    if not items:
        raise ValueError(f"{op} of no operands")
    while len(items) > 1:
        nxt = [Binary(op, items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


# --- evaluation -------------------------------------------------------------

def _arc_arg(op, a):
    if a > 1.0 or a < -1.0:
        if abs(a) - 1.0 > TOL_TRIG_DOMAIN:
            raise DomainError(op, a)
        a = math.copysign(1.0, a)
    return a


def _sqrt(a):
    if a < 0.0:
        raise DomainError("sqrt", a)
    return math.sqrt(a)


_UNARY_FN: dict[str, Callable[[float], float]] = {
    "neg": lambda a: -a,
    "sin": math.sin,
    "cos": math.cos,
    "arcsin": lambda a: math.asin(_arc_arg("arcsin", a)),
    "arccos": lambda a: math.acos(_arc_arg("arccos", a)),
    "sqrt": _sqrt,
    "abs": abs,
    "norm": abs,
    "square": lambda a: a * a,
}


def _div(a, b):
    if abs(b) <= TOL_DIV:
        raise DomainError("div", b)
    return a / b


_BINARY_FN: dict[str, Callable[[float, float], float]] = {
    "sub": lambda a, b: a - b,
    "add": lambda a, b: a + b,
    "mul": lambda a, b: a * b,
    "div": _div,
    "min": min,
    "max": max,
}

Env = Optional[Mapping[int, float]]


def evaluate(expr: Expr, env: Env = None) -> float:
    """Value of ``expr``; parameters are read from ``env`` (keyed by parameter
    id) when given, otherwise from their current values."""
    return _eval(expr, env, {})


def _eval(e, env, cache):
    k = id(e)
    v = cache.get(k)
    if v is not None:
        return v
    t = type(e)
    if t is Const:
        v = e.value
    elif t is ParamRef:
        v = e.param._value if env is None else env[e.param.id]
    elif t is Binary:
        v = _BINARY_FN[e.op](_eval(e.left, env, cache), _eval(e.right, env, cache))
    elif t is Unary:
        v = _UNARY_FN[e.op](_eval(e.arg, env, cache))
    else:
        raise TypeError(f"cannot evaluate unresolved {t.__name__} node")
    if not math.isfinite(v):
        raise DomainError(getattr(e, "op", "value"), v)
    cache[k] = v
    return v


# --- structure queries --------------------------------------------------------

def params_of(expr: Expr) -> frozenset:
    """Ids of all parameters referenced by ``expr`` (cached per node)."""
    if expr._params is not None:
        return expr._params
    if type(expr) is ParamRef:
        out = frozenset((expr.param.id,))
    else:
        kids = expr.children()
        if not kids:
            out = frozenset()
        elif len(kids) == 1:
            out = params_of(kids[0])
        else:
            out = params_of(kids[0]) | params_of(kids[1])
    expr._params = out
    return out


def parameters(expr: Expr) -> list[Parameter]:
    """Parameters referenced by ``expr`` in first-visit order."""
    seen, out, stack = set(), [], [expr]
    visited = set()
    while stack:
        e = stack.pop()
        if id(e) in visited:
            continue
        visited.add(id(e))
        if type(e) is ParamRef:
            if e.param.id not in seen:
                seen.add(e.param.id)
                out.append(e.param)
        stack.extend(reversed(e.children()))
    return out


def has_branches(expr: Expr) -> bool:
    if expr._branchy is not None:
        return expr._branchy
    out = getattr(expr, "op", None) in PIECEWISE_OPS or any(has_branches(c) for c in expr.children())
    expr._branchy = out
    return out


def iter_nodes(expr: Expr):
    """Each distinct node once, parents before children."""
    seen, stack = set(), [expr]
    while stack:
        e = stack.pop()
        if id(e) in seen:
            continue
        seen.add(id(e))
        yield e
        stack.extend(reversed(e.children()))


def structurally_equal(a: Expr, b: Expr) -> bool:
    if a is b:
        return True
    if type(a) is not type(b):
        return False
    if type(a) is Const:
        return a.value == b.value or (math.isnan(a.value) and math.isnan(b.value))
    if type(a) is ParamRef:
        return a.param is b.param
    if getattr(a, "op", None) != getattr(b, "op", None):
        return False
    ka, kb = a.children(), b.children()
    if not ka and not kb:
        return a == b
    return len(ka) == len(kb) and all(structurally_equal(x, y) for x, y in zip(ka, kb))


def substitute(expr: Expr, fn: Callable[[Expr], Optional[Expr]]) -> Expr:
    """Rebuild ``expr`` with every node for which ``fn`` returns an expression
    replaced by it.  Untouched subtrees are shared, not copied."""
    memo: dict[int, Expr] = {}

    def go(e):
        k = id(e)
        if k in memo:
            return memo[k]
        r = fn(e)
        if r is None:
            if type(e) is Unary:
                a = go(e.arg)
                r = e if a is e.arg else Unary(e.op, a)
            elif type(e) is Binary:
                l, rr = go(e.left), go(e.right)
                r = e if (l is e.left and rr is e.right) else Binary(e.op, l, rr)
            else:
                r = e
        memo[k] = r
        return r

    return go(expr)


# --- symbolic differentiation ------------------------------------------------
# The smart constructors fold constants so derivatives stay small.

def _c(e):
    return e.value if type(e) is Const else None


def _add(a, b):
    ca, cb = _c(a), _c(b)
    if ca == 0.0:
        return b
    if cb == 0.0:
        return a
    if ca is not None and cb is not None:
        return Const(ca + cb)
    return Binary("add", a, b)


def _sub(a, b):
    ca, cb = _c(a), _c(b)
    if cb == 0.0:
        return a
    if ca is not None and cb is not None:
        return Const(ca - cb)
    if ca == 0.0:
        return _neg(b)
    return Binary("sub", a, b)


def _mul(a, b):
    ca, cb = _c(a), _c(b)
    if ca == 0.0 or cb == 0.0:
        return ZERO
    if ca == 1.0:
        return b
    if cb == 1.0:
        return a
    if ca is not None and cb is not None:
        return Const(ca * cb)
    if cb is not None:
        return Binary("mul", b, a)
    return Binary("mul", a, b)


def _div_e(a, b):
    if _c(a) == 0.0:
        return ZERO
    if _c(b) == 1.0:
        return a
    return Binary("div", a, b)


def _neg(a):
    ca = _c(a)
    if ca is not None:
        return Const(-ca)
    if type(a) is Unary and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def differentiate(expr: Expr, wrt: Union[Parameter, int]) -> Expr:
    """Exact partial derivative of a branch-free expression."""
    if has_branches(expr):
        raise BranchyExpression("pin_branches must be applied before differentiating")
    pid = wrt.id if isinstance(wrt, Parameter) else wrt
    memo: dict[int, Expr] = {}

    def d(e):
        k = id(e)
        if k in memo:
            return memo[k]
        if pid not in params_of(e):
            r = ZERO
        elif type(e) is ParamRef:
            r = ONE
        elif type(e) is Unary:
            a, da, op = e.arg, d(e.arg), e.op
            if op == "neg":
                r = _neg(da)
            elif op == "sin":
                r = _mul(da, Unary("cos", a))
            elif op == "cos":
                r = _neg(_mul(da, Unary("sin", a)))
            elif op in ("arcsin", "arccos"):
                r = _div_e(da, Unary("sqrt", Binary("sub", ONE, Unary("square", a))))
                if op == "arccos":
                    r = _neg(r)
            elif op == "sqrt":
                r = _div_e(da, _mul(Const(2.0), e))
            elif op == "square":
                r = _mul(_mul(Const(2.0), a), da)
            else:  # pragma: no cover - excluded by has_branches
                raise BranchyExpression(op)
        else:
            a, b, op = e.left, e.right, e.op
            da, db = d(a), d(b)
            if op == "add":
                r = _add(da, db)
            elif op == "sub":
                r = _sub(da, db)
            elif op == "mul":
                r = _add(_mul(da, b), _mul(a, db))
            elif op == "div":
                r = _sub(_div_e(da, b), _div_e(_mul(a, db), Unary("square", b)))
            else:  # pragma: no cover
                raise BranchyExpression(op)
        memo[k] = r
        return r

    return d(expr)


# --- branch pinning ------------------------------------------------------------

def pin_branches(expr: Expr, env: Env = None) -> Expr:
    """Replace min/max/abs/norm by their active operand at ``env``."""
    return pin_with_pattern(expr, env)[0]


def pin_with_pattern(expr: Expr, env: Env = None) -> tuple[Expr, tuple]:
    """Like :func:`pin_branches` but also return the branch choices made,
    in a canonical traversal order, so callers can detect repeated patterns."""
    if not has_branches(expr):
        return expr, ()
    cache: dict[int, float] = {}
    memo: dict[int, Expr] = {}
    pattern: list = []

    def go(e):
        k = id(e)
        if k in memo:
            return memo[k]
        if not has_branches(e):
            r = e
        elif type(e) is Unary:
            if e.op in ("abs", "norm"):
                v = _eval(e.arg, env, cache)
                inner = go(e.arg)
                if v >= 0.0:
                    pattern.append(0)
                    r = inner
                else:
                    pattern.append(1)
                    r = Unary("neg", inner)
            else:
                a = go(e.arg)
                r = e if a is e.arg else Unary(e.op, a)
        else:
            if e.op in ("min", "max"):
                a = _eval(e.left, env, cache)
                b = _eval(e.right, env, cache)
                take_left = a <= b if e.op == "min" else a >= b
                pattern.append(0 if take_left else 1)
                r = go(e.left if take_left else e.right)
            else:
                l, rr = go(e.left), go(e.right)
                r = e if (l is e.left and rr is e.right) else Binary(e.op, l, rr)
        memo[k] = r
        return r

    out = go(expr)
    return out, tuple(pattern)


# --- printing -----------------------------------------------------------------

def format_number(v: float) -> str:
    """Shortest round-trip decimal; integral values lose the trailing '.0'."""
    v = float(v)
    if v == 0.0:
        return "0"
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_sexpr(expr: Expr) -> str:
    """Prefix form, e.g. ``(mul 2 (param "width"))``."""
    t = type(expr)
    if t is Const:
        return format_number(expr.value)
    if t is ParamRef:
        return f'(param "{expr.param.name}")'
    if t is Unary:
        return f"({expr.op} {to_sexpr(expr.arg)})"
    if t is Binary:
        return f"({expr.op} {to_sexpr(expr.left)} {to_sexpr(expr.right)})"
    return f"({t.__name__.lower()} {getattr(expr, 'describe', lambda: '?')()})"


class Residual:
    """An equality ``expr == 0``; inequalities never reach this type."""

    __slots__ = ("expr", "label")

    def __init__(self, expr: Expr, label: str = ""):
        self.expr = expr
        self.label = label

    def value(self, env: Env = None) -> float:
        return evaluate(self.expr, env)

    def satisfied(self, tol: float = TOL_RESIDUAL, env: Env = None) -> bool:
        return abs(evaluate(self.expr, env)) <= tol

    def __repr__(self) -> str:
        return f"Residual({to_sexpr(self.expr)})"

"""Closed-form expressions in ``x`` and ``y``: parsing, printing, evaluation
and exact first derivatives by forward-mode differentiation.

Grammar (highest precedence first)::

    atom   := NUMBER | 'x' | 'y' | 'pi' | NAME '(' expr ')' | '(' expr ')'
    power  := atom ['^' powrhs]          # right-associative
    powrhs := '-' powrhs | power
    unary  := '-' unary | power
    term   := unary (('*' | '/') unary)*
    expr   := term (('+' | '-') term)*

Functions: exp, ln, abs, sqrt, cbrt, sin, cos, atan, tanh.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Tuple

from .errors import DomainFault, ExprSyntaxError, NonDifferentiable

FUNCTIONS = ("exp", "ln", "abs", "sqrt", "cbrt", "sin", "cos", "atan", "tanh")
VARIABLES = ("x", "y")
_MAX_INT_POWER = 64

Triple = Tuple[float, float, float]


class Expr:
    """Base class of AST nodes.  Nodes are immutable and compare structurally."""

    def eval(self, x: float, y: float) -> float:
        return self.value_fn()(x, y)

    def dual(self, x: float, y: float) -> "DualValue":
        return DualValue(*self.dual_fn()(x, y))

    def grad(self, x: float, y: float) -> Tuple[float, float]:
        _, dx, dy = self.dual_fn()(x, y)
        return dx, dy

    def value_fn(self) -> Callable[[float, float], float]:
        fn = self.__dict__.get("_value_fn")
        if fn is None:
            fn = _compile_value(self)
            object.__setattr__(self, "_value_fn", fn)
        return fn

    def dual_fn(self) -> Callable[[float, float], Triple]:
        fn = self.__dict__.get("_dual_fn")
        if fn is None:
            fn = _compile_dual(self)
            object.__setattr__(self, "_dual_fn", fn)
        return fn

    def variables(self) -> frozenset:
        raise NotImplementedError

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float

    def variables(self):
        return frozenset()


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str

    def variables(self):
        return frozenset({self.name})


@dataclass(frozen=True, eq=True)
class Unary(Expr):
    op: str  # 'neg' or a function name
    arg: Expr

    def variables(self):
        return self.arg.variables()


@dataclass(frozen=True, eq=True)
class Binary(Expr):
    op: str  # one of + - * / ^
    left: Expr
    right: Expr

    def variables(self):
        return self.left.variables() | self.right.variables()


@dataclass(frozen=True)
class DualValue:
    """A value together with its partial derivatives in x and y."""

    value: float
    dx: float = 0.0
    dy: float = 0.0

    def __add__(self, other):
        o = _as_dual(other)
        return DualValue(self.value + o.value, self.dx + o.dx, self.dy + o.dy)

    __radd__ = __add__

    def __sub__(self, other):
        o = _as_dual(other)
        return DualValue(self.value - o.value, self.dx - o.dx, self.dy - o.dy)

    def __rsub__(self, other):
        return _as_dual(other) - self

    def __mul__(self, other):
        o = _as_dual(other)
        return DualValue(self.value * o.value,
                         self.dx * o.value + self.value * o.dx,
                         self.dy * o.value + self.value * o.dy)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _as_dual(other)
        if o.value == 0.0:
            raise DomainFault("division by zero")
        q = self.value / o.value
        return DualValue(q, (self.dx - q * o.dx) / o.value, (self.dy - q * o.dy) / o.value)

    def __rtruediv__(self, other):
        return _as_dual(other) / self

    def __neg__(self):
        return DualValue(-self.value, -self.dx, -self.dy)


def _as_dual(v) -> DualValue:
    return v if isinstance(v, DualValue) else DualValue(float(v))


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[start]!r}", _byte_offset(text, start),
                                  ("number", "name", "operator"))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), _byte_offset(text, start)))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(text, len(text))))
    return tokens


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


class _Parser:
    _OPERAND = ("number", "x", "y", "pi", "function", "(", "-")

    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected):
        kind, val, off = self.peek()
        what = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {what}", off, expected)

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail(("+", "-", "*", "/", "^", "end of input"))
        return e

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.powrhs())
        return base

    def powrhs(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Unary("neg", self.powrhs())
        return self.power()

    def atom(self):
        kind, val, off = self.peek()
        if kind == "num":
            self.take()
            return Num(float(val))
        if kind == "name":
            self.take()
            if val in VARIABLES:
                return Var(val)
            if val == "pi":
                return Num(math.pi)
            if val in FUNCTIONS:
                if not (self.peek()[0] == "op" and self.peek()[1] == "("):
                    self.fail(("(",))
                self.take()
                arg = self.expr()
                if not (self.peek()[0] == "op" and self.peek()[1] == ")"):
                    self.fail((")",))
                self.take()
                return Unary(val, arg)
            raise ExprSyntaxError(f"unknown name {val!r}", off, VARIABLES + FUNCTIONS + ("pi",))
        if kind == "op" and val == "(":
            self.take()
            inner = self.expr()
            if not (self.peek()[0] == "op" and self.peek()[1] == ")"):
                self.fail((")",))
            self.take()
            return inner
        self.fail(self._OPERAND)


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Raises :class:`ExprSyntaxError` carrying the byte offset of the offending
    token and the set of tokens that would have been accepted there.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return _Parser(text).parse()


# ---------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary) and e.op == "neg":
        return 3
    if isinstance(e, Num) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return 3
    return 5


def _wrap(e: Expr, min_prec: int) -> str:
    s = to_text(e)
    return f"({s})" if _prec(e) < min_prec else s


def to_text(e: Expr) -> str:
    """Render ``e`` so that ``parse(to_text(e)) == e`` for parsed trees."""
    if isinstance(e, Num):
        v = float(e.value)
        if v.is_integer() and abs(v) < 1e15:
            return str(int(v))
        return repr(v)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return "-" + _wrap(e.arg, 3)
        return f"{e.op}({to_text(e.arg)})"
    if isinstance(e, Binary):
        if e.op == "^":
            return f"{_wrap(e.left, 5)}^{_wrap(e.right, 3)}"
        p = _PREC[e.op]
        sep = f" {e.op} " if p == 1 else e.op
        return f"{_wrap(e.left, p)}{sep}{_wrap(e.right, p + 1)}"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------- evaluation

def _finite(v: float, node: Expr) -> float:
    if v != v or v in (math.inf, -math.inf):
        raise DomainFault("non-finite result", to_text(node))
    return v


def _int_exponent(c: float):
    if c == int(c) and abs(c) <= _MAX_INT_POWER:
        return int(c)
    return None


def _ipow(b: float, n: int) -> float:
    r = 1.0
    for _ in range(abs(n)):
        r *= b
    return r


def _compile_value(e: Expr) -> Callable[[float, float], float]:
    if isinstance(e, Num):
        c = float(e.value)
        return lambda x, y: c
    if isinstance(e, Var):
        return (lambda x, y: x) if e.name == "x" else (lambda x, y: y)
    if isinstance(e, Unary):
        a = _compile_value(e.arg)
        return _VALUE_UNARY[e.op](a, e)
    if isinstance(e, Binary):
        lf = _compile_value(e.left)
        if e.op == "^":
            return _value_pow(e, lf)
        rf = _compile_value(e.right)
        return _VALUE_BINARY[e.op](lf, rf, e)
    raise TypeError(f"not an expression node: {e!r}")


def _value_pow(e: Binary, lf):
    if "x" not in e.right.variables() and "y" not in e.right.variables():
        c = _compile_value(e.right)(0.0, 0.0)
        n = _int_exponent(c)
        if n is not None:
            if n >= 0:
                def f(x, y):
                    return _finite(_ipow(lf(x, y), n), e)
            else:
                def f(x, y):
                    p = _ipow(lf(x, y), n)
                    if p == 0.0:
                        raise DomainFault("zero to a negative power", to_text(e))
                    return _finite(1.0 / p, e)
            return f

        def f(x, y):
            b = lf(x, y)
            if b > 0.0:
                try:
                    return _finite(math.exp(c * math.log(b)), e)
                except OverflowError:
                    raise DomainFault("overflow", to_text(e)) from None
            if b == 0.0 and c > 0.0:
                return 0.0
            raise DomainFault("non-positive base to a fractional power", to_text(e))
        return f

    rf = _compile_value(e.right)

    def f(x, y):
        b = lf(x, y)
        if b <= 0.0:
            raise DomainFault("non-positive base to a variable power", to_text(e))
        try:
            return _finite(math.exp(rf(x, y) * math.log(b)), e)
        except OverflowError:
            raise DomainFault("overflow", to_text(e)) from None
    return f


def _v_neg(a, e):
    return lambda x, y: -a(x, y)


def _v_exp(a, e):
    def f(x, y):
        try:
            return math.exp(a(x, y))
        except OverflowError:
            raise DomainFault("overflow", to_text(e)) from None
    return f


def _v_ln(a, e):
    def f(x, y):
        v = a(x, y)
        if v <= 0.0:
            raise DomainFault("logarithm of a non-positive number", to_text(e))
        return math.log(v)
    return f


def _v_sqrt(a, e):
    def f(x, y):
        v = a(x, y)
        if v < 0.0:
            raise DomainFault("square root of a negative number", to_text(e))
        return math.sqrt(v)
    return f


def _cbrt(v: float) -> float:
    r = abs(v) ** (1.0 / 3.0)
    if r != 0.0:
        r -= (r * r * r - abs(v)) / (3.0 * r * r)  # one Newton polish
    return math.copysign(r, v)


def _plain(fn):
    def build(a, e):
        return lambda x, y: fn(a(x, y))
    return build


_VALUE_UNARY = {
    "neg": _v_neg,
    "exp": _v_exp,
    "ln": _v_ln,
    "abs": _plain(abs),
    "sqrt": _v_sqrt,
    "cbrt": _plain(_cbrt),
    "sin": _plain(math.sin),
    "cos": _plain(math.cos),
    "atan": _plain(math.atan),
    "tanh": _plain(math.tanh),
}


def _v_div(lf, rf, e):
    def f(x, y):
        d = rf(x, y)
        if d == 0.0:
            raise DomainFault("division by zero", to_text(e))
        return _finite(lf(x, y) / d, e)
    return f


_VALUE_BINARY = {
    "+": lambda lf, rf, e: (lambda x, y: _finite(lf(x, y) + rf(x, y), e)),
    "-": lambda lf, rf, e: (lambda x, y: _finite(lf(x, y) - rf(x, y), e)),
    "*": lambda lf, rf, e: (lambda x, y: _finite(lf(x, y) * rf(x, y), e)),
    "/": _v_div,
}


# ---------------------------------------------------------------- forward mode

def _compile_dual(e: Expr) -> Callable[[float, float], Triple]:
    if isinstance(e, Num):
        t = (float(e.value), 0.0, 0.0)
        return lambda x, y: t
    if isinstance(e, Var):
        if e.name == "x":
            return lambda x, y: (x, 1.0, 0.0)
        return lambda x, y: (y, 0.0, 1.0)
    if isinstance(e, Unary):
        return _DUAL_UNARY[e.op](_compile_dual(e.arg), e)
    if isinstance(e, Binary):
        lf = _compile_dual(e.left)
        if e.op == "^":
            return _dual_pow(e, lf)
        rf = _compile_dual(e.right)
        return _DUAL_BINARY[e.op](lf, rf, e)
    raise TypeError(f"not an expression node: {e!r}")


def _dual_pow(e: Binary, lf):
    if "x" not in e.right.variables() and "y" not in e.right.variables():
        c = _compile_value(e.right)(0.0, 0.0)
        n = _int_exponent(c)
        if n is not None:
            def f(x, y):
                b, bx, by = lf(x, y)
                if n == 0:
                    return (1.0, 0.0, 0.0)
                if n > 0:
                    v = _finite(_ipow(b, n), e)
                    k = n * _ipow(b, n - 1)
                    return (v, k * bx, k * by)
                p = _ipow(b, n)
                if p == 0.0:
                    raise DomainFault("zero to a negative power", to_text(e))
                v = _finite(1.0 / p, e)
                k = n * v / b
                return (v, k * bx, k * by)
            return f

        def f(x, y):
            b, bx, by = lf(x, y)
            if b > 0.0:
                try:
                    v = _finite(math.exp(c * math.log(b)), e)
                except OverflowError:
                    raise DomainFault("overflow", to_text(e)) from None
                k = c * v / b
                return (v, k * bx, k * by)
            if b == 0.0 and c > 0.0:
                if c > 1.0:
                    return (0.0, 0.0, 0.0)
                raise NonDifferentiable("fractional power at zero", to_text(e))
            raise DomainFault("non-positive base to a fractional power", to_text(e))
        return f

    rf = _compile_dual(e.right)

    def f(x, y):
        b, bx, by = lf(x, y)
        p, px, py = rf(x, y)
        if b <= 0.0:
            raise DomainFault("non-positive base to a variable power", to_text(e))
        lb = math.log(b)
        try:
            v = _finite(math.exp(p * lb), e)
        except OverflowError:
            raise DomainFault("overflow", to_text(e)) from None
        return (v, v * (px * lb + p * bx / b), v * (py * lb + p * by / b))
    return f


def _d_chain(value, deriv, check=None, kink=None, msg=""):
    def build(a, e):
        def f(x, y):
            v, vx, vy = a(x, y)
            if check is not None and not check(v):
                raise DomainFault(msg, to_text(e))
            if kink is not None and v == kink:
                raise NonDifferentiable(f"{e.op} is not differentiable at {kink}", to_text(e))
            try:
                r = value(v)
            except OverflowError:
                raise DomainFault("overflow", to_text(e)) from None
            k = deriv(v, r)
            return (r, k * vx, k * vy)
        return f
    return build


def _d_neg(a, e):
    def f(x, y):
        v, vx, vy = a(x, y)
        return (-v, -vx, -vy)
    return f


_DUAL_UNARY = {
    "neg": _d_neg,
    "exp": _d_chain(math.exp, lambda v, r: r),
    "ln": _d_chain(math.log, lambda v, r: 1.0 / v, check=lambda v: v > 0.0,
                   msg="logarithm of a non-positive number"),
    "abs": _d_chain(abs, lambda v, r: 1.0 if v > 0 else -1.0, kink=0.0),
    "sqrt": _d_chain(math.sqrt, lambda v, r: 0.5 / r, check=lambda v: v >= 0.0, kink=0.0,
                     msg="square root of a negative number"),
    "cbrt": _d_chain(_cbrt, lambda v, r: 1.0 / (3.0 * r * r), kink=0.0),
    "sin": _d_chain(math.sin, lambda v, r: math.cos(v)),
    "cos": _d_chain(math.cos, lambda v, r: -math.sin(v)),
    "atan": _d_chain(math.atan, lambda v, r: 1.0 / (1.0 + v * v)),
    "tanh": _d_chain(math.tanh, lambda v, r: 1.0 - r * r),
}


def _d_add(lf, rf, e):
    def f(x, y):
        a, ax, ay = lf(x, y)
        b, bx, by = rf(x, y)
        return (_finite(a + b, e), ax + bx, ay + by)
    return f


def _d_sub(lf, rf, e):
    def f(x, y):
        a, ax, ay = lf(x, y)
        b, bx, by = rf(x, y)
        return (_finite(a - b, e), ax - bx, ay - by)
    return f


def _d_mul(lf, rf, e):
    def f(x, y):
        a, ax, ay = lf(x, y)
        b, bx, by = rf(x, y)
        return (_finite(a * b, e), ax * b + a * bx, ay * b + a * by)
    return f


def _d_div(lf, rf, e):
    def f(x, y):
        a, ax, ay = lf(x, y)
        b, bx, by = rf(x, y)
        if b == 0.0:
            raise DomainFault("division by zero", to_text(e))
        q = _finite(a / b, e)
        return (q, (ax - q * bx) / b, (ay - q * by) / b)
    return f


_DUAL_BINARY = {"+": _d_add, "-": _d_sub, "*": _d_mul, "/": _d_div}


# ---------------------------------------------------------------- module API

def evaluate(e: Expr, x: float, y: float) -> float:
    return e.eval(x, y)


def grad(e: Expr, x: float, y: float) -> Tuple[float, float]:
    """Exact partial derivatives of ``e`` at ``(x, y)``."""
    return e.grad(x, y)


def as_expr(e) -> Expr:
    return e if isinstance(e, Expr) else parse(str(e))

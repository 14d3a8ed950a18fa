"""Expression trees for coefficient functions of a coordinate chart.

Expressions are immutable trees built from constants, coordinate variables,
the four arithmetic operators, integer powers and a handful of elementary
functions.  They can be parsed from text, printed back, evaluated (one point
or a batch of points at once), differentiated exactly and lightly simplified.

Evaluation uses numpy float64 arithmetic throughout.  Constant folding in
:func:`simplify` goes through the same kernels, so folded constants are
bit-identical to what evaluation of the unfolded subtree would produce.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Add", "Sub", "Mul", "Div", "Pow", "Neg", "Func",
    "FUNCTIONS", "ExprSyntaxError", "DomainError",
    "const", "var", "add", "sub", "mul", "div", "power", "neg", "func",
    "parse", "to_text", "evaluate", "evaluate_batch", "diff", "simplify",
    "variables", "ZERO", "ONE",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ExprSyntaxError(ValueError):
    """Malformed expression text.  ``offset`` is a byte offset into the UTF-8 input."""

    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at offset {offset}")


class DomainError(ArithmeticError):
    """Evaluation produced a non-finite value.

    ``subtree`` is the innermost offending expression, or None when the value
    came from an opaque callable.
    """

    def __init__(self, subtree: "Expr | None", point: Sequence[float]):
        self.subtree = subtree
        self.point = tuple(float(x) for x in point)
        what = "function" if subtree is None else to_text(subtree)
        super().__init__(f"non-finite value of {what} at point {self.point}")


# ---------------------------------------------------------------- nodes

class Expr:
    __slots__ = ("_hash",)
    precedence = 100

    def _key(self) -> tuple:
        raise NotImplementedError

    def children(self) -> tuple["Expr", ...]:
        return ()

    def __hash__(self) -> int:
        try:
            return self._hash
        except AttributeError:
            h = hash((type(self).__name__,) + self._key())
            object.__setattr__(self, "_hash", h)
            return h

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if type(self) is not type(other) or hash(self) != hash(other):
            return False
        return self._key() == other._key()

    def __setattr__(self, name, value):
        raise AttributeError("expressions are immutable")

    def __repr__(self) -> str:
        return f"{type(self).__name__}({to_text(self)!r})"

    def __str__(self) -> str:
        return to_text(self)

    # Operators build simplified nodes so that programmatic construction
    # does not accumulate 0*x and 1*x clutter.
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent: int):
        if not isinstance(exponent, (int, np.integer)) or isinstance(exponent, bool):
            raise TypeError("only integer exponents are supported")
        return power(self, int(exponent))


def _set(obj, **fields):
    for k, v in fields.items():
        object.__setattr__(obj, k, v)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"non-finite constant {value!r}")
        _set(self, value=value)

    def _key(self):
        # float.hex keeps 0.0 and -0.0 apart
        return (self.value.hex(),)


class Var(Expr):
    __slots__ = ("index", "name")

    def __init__(self, index: int, name: str | None = None):
        if index < 0:
            raise ValueError("variable index must be non-negative")
        _set(self, index=int(index), name=name or f"x{index}")

    def _key(self):
        return (self.index,)


class _Binary(Expr):
    __slots__ = ("left", "right")
    symbol = "?"

    def __init__(self, left: Expr, right: Expr):
        _set(self, left=left, right=right)

    def _key(self):
        return (self.left, self.right)

    def children(self):
        return (self.left, self.right)


class Add(_Binary):
    __slots__ = ()
    symbol = "+"
    precedence = 10


class Sub(_Binary):
    __slots__ = ()
    symbol = "-"
    precedence = 10


class Mul(_Binary):
    __slots__ = ()
    symbol = "*"
    precedence = 20


class Div(_Binary):
    __slots__ = ()
    symbol = "/"
    precedence = 20


class Neg(Expr):
    __slots__ = ("arg",)
    precedence = 30

    def __init__(self, arg: Expr):
        _set(self, arg=arg)

    def _key(self):
        return (self.arg,)

    def children(self):
        return (self.arg,)


class Pow(Expr):
    __slots__ = ("base", "exponent")
    precedence = 40

    def __init__(self, base: Expr, exponent: int):
        _set(self, base=base, exponent=int(exponent))

    def _key(self):
        return (self.base, self.exponent)

    def children(self):
        return (self.base,)


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        _set(self, name=name, arg=arg)

    def _key(self):
        return (self.name, self.arg)

    def children(self):
        return (self.arg,)


ZERO = Const(0.0)
ONE = Const(1.0)


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)) and not isinstance(value, bool):
        return Const(float(value))
    return NotImplemented


def const(value: float) -> Const:
    return Const(value)


def var(index: int, name: str | None = None) -> Var:
    return Var(index, name)


# ---------------------------------------------------------------- kernels

_UNARY = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}


def _apply(node: Expr, args: list[np.ndarray]) -> np.ndarray:
    if isinstance(node, Add):
        return args[0] + args[1]
    if isinstance(node, Sub):
        return args[0] - args[1]
    if isinstance(node, Mul):
        return args[0] * args[1]
    if isinstance(node, Div):
        return args[0] / args[1]
    if isinstance(node, Neg):
        return -args[0]
    if isinstance(node, Pow):
        if node.exponent < 0:
            return 1.0 / args[0] ** (-node.exponent)
        return args[0] ** node.exponent
    if isinstance(node, Func):
        return _UNARY[node.name](args[0])
    raise TypeError(f"cannot apply {type(node).__name__}")


def _fold(node: Expr, values: list[float]) -> Const | None:
    with np.errstate(all="ignore"):
        out = _apply(node, [np.array([v]) for v in values])[0]
    if not np.isfinite(out):
        return None
    return _const(float(out))


def _const(value: float) -> Const:
    # -0.0 and 0.0 are different Const nodes; folded zeros are always +0.0
    return ZERO if value == 0.0 else Const(value)


# ---------------------------------------------------- smart constructors

def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return _fold(Add(a, b), [a.value, b.value]) or Add(a, b)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return _fold(Sub(a, b), [a.value, b.value]) or Sub(a, b)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.arg)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return _fold(Mul(a, b), [a.value, b.value]) or Mul(a, b)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return _fold(Div(a, b), [a.value, b.value]) or Div(a, b)
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return Div(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return _const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if _is_const(a):
        return _fold(Pow(a, n), [a.value]) or Pow(a, n)
    return Pow(a, n)


def func(name: str, a: Expr) -> Expr:
    node = Func(name, a)
    if _is_const(a):
        return _fold(node, [a.value]) or node
    return node


# ---------------------------------------------------------------- printing

def to_text(e: Expr) -> str:
    """Render ``e`` in the input grammar; ``parse(to_text(e))`` evaluates identically."""
    text = _text(e)
    if isinstance(e, (Neg, Const)) and text.startswith("("):
        return text[1:-1]
    return text


def _text(e: Expr) -> str:
    if isinstance(e, Const):
        v = e.value
        text = str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
        return f"({text})" if v < 0 or text.startswith("-") else text
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_text(e.arg)})"
    if isinstance(e, Neg):
        return f"(-{_wrap(e.arg, Neg.precedence)})"
    if isinstance(e, Pow):
        return f"{_wrap(e.base, Pow.precedence + 1)}^{e.exponent}"
    if isinstance(e, _Binary):
        left = _wrap(e.left, e.precedence)
        # Sub and Div are left-associative: an equal-precedence right operand needs parens
        right = _wrap(e.right, e.precedence + 1)
        return f"{left} {e.symbol} {right}"
    raise TypeError(type(e).__name__)


def _wrap(e: Expr, min_prec: int) -> str:
    text = _text(e)
    if isinstance(e, (Add, Sub, Mul, Div, Pow)) and e.precedence < min_prec:
        return f"({text})"
    return text


# ---------------------------------------------------------------- parsing

class _Parser:
    def __init__(self, text: str, names: Sequence[str]):
        self.text = text
        self.pos = 0
        self.names = {name: i for i, name in enumerate(names)}
        for name in names:
            if name in FUNCTIONS:
                raise ValueError(f"coordinate name {name!r} shadows a function")
            if not (name[:1].isalpha() or name[:1] == "_") or not name.replace("_", "").isalnum():
                raise ValueError(f"invalid coordinate name {name!r}")

    def error(self, message: str, pos: int | None = None):
        pos = self.pos if pos is None else pos
        offset = len(self.text[:pos].encode("utf-8"))
        raise ExprSyntaxError(message, offset, self.text)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            found = self.peek() or "end of input"
            self.error(f"expected {ch!r}, found {found!r}")
        self.pos += 1

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek():
            self.error(f"unexpected {self.peek()!r}")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            right = self.term()
            left = Add(left, right) if op == "+" else Sub(left, right)
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self.peek() in ("*", "/"):
            op = self.text[self.pos]
            self.pos += 1
            right = self.factor()
            left = Mul(left, right) if op == "*" else Div(left, right)
        return left

    def factor(self) -> Expr:
        if self.peek() == "-":
            self.pos += 1
            return Neg(self.factor())
        base = self.base()
        if self.peek() == "^":
            self.pos += 1
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> int:
        # right-associative integer tower: u^2^3 == u^8
        sign = 1
        if self.peek() == "-":
            self.pos += 1
            sign = -1
        self.skip()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if start == self.pos:
            self.error("expected integer exponent")
        if self.pos < len(self.text) and self.text[self.pos] in ".eE":
            self.error("exponent must be an integer")
        value = sign * int(self.text[start:self.pos])
        if self.peek() == "^":
            self.pos += 1
            rest = self.exponent()
            if rest < 0:
                self.error("integer tower with negative exponent", start)
            value = value ** rest
        return value

    def base(self) -> Expr:
        ch = self.peek()
        if not ch:
            self.error("unexpected end of input")
        if ch == "(":
            self.pos += 1
            e = self.expr()
            self.expect(")")
            return e
        if ch.isdigit() or ch == ".":
            return self.number()
        if ch.isalpha() or ch == "_":
            return self.identifier()
        self.error(f"unexpected {ch!r}")

    def number(self) -> Const:
        start = self.pos
        text = self.text
        while self.pos < len(text) and (text[self.pos].isdigit() or text[self.pos] == "."):
            self.pos += 1
        if self.pos < len(text) and text[self.pos] in "eE":
            save = self.pos
            self.pos += 1
            if self.pos < len(text) and text[self.pos] in "+-":
                self.pos += 1
            if self.pos < len(text) and text[self.pos].isdigit():
                while self.pos < len(text) and text[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = save
        literal = text[start:self.pos]
        try:
            value = float(literal)
        except ValueError:
            self.error(f"malformed number {literal!r}", start)
        if not math.isfinite(value):
            self.error(f"number out of range {literal!r}", start)
        return Const(value)

    def identifier(self) -> Expr:
        start = self.pos
        text = self.text
        while self.pos < len(text) and (text[self.pos].isalnum() or text[self.pos] == "_"):
            self.pos += 1
        name = text[start:self.pos]
        if name in FUNCTIONS:
            if self.peek() != "(":
                self.error(f"function {name!r} expects 1 argument, got 0", start)
            self.pos += 1
            arg = self.expr()
            if self.peek() == ",":
                self.error(f"function {name!r} expects 1 argument", self.pos)
            self.expect(")")
            return Func(name, arg)
        if name not in self.names:
            self.error(f"unknown identifier {name!r}", start)
        if self.peek() == "(":
            self.error(f"coordinate {name!r} is not a function", self.pos)
        return Var(self.names[name], name)


def parse(text: str, coordinate_names: Sequence[str]) -> Expr:
    """Parse ``text`` against an explicit list of coordinate names.

    Grammar (standard precedence, ``^`` takes an integer exponent)::

        expr   := term (('+'|'-') term)*
        term   := factor (('*'|'/') factor)*
        factor := '-' factor | base ('^' integer)?
        base   := number | ident | ident '(' expr ')' | '(' expr ')'

    Raises :class:`ExprSyntaxError` with a byte offset on malformed input,
    unknown identifiers and function arity mismatches.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return _Parser(text, list(coordinate_names)).parse()


# ---------------------------------------------------------------- evaluation

def variables(e: Expr) -> set[int]:
    found: set[int] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            found.add(node.index)
        stack.extend(node.children())
    return found


def evaluate_batch(e: Expr, points, *, check: bool = True,
                   cache: dict | None = None) -> np.ndarray:
    """Evaluate ``e`` at every row of ``points`` (shape ``(m, dim)``).

    With ``check`` set, the first node that turns finite inputs into a
    non-finite value raises :class:`DomainError` naming that subtree and the
    offending point.  ``cache`` may be shared across calls on the same points
    so common subtrees are evaluated once.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-d array")
    if cache is None:
        cache = {}
    with np.errstate(all="ignore"):
        return _eval(e, pts, check, cache)


def _eval(node: Expr, pts: np.ndarray, check: bool, cache: dict) -> np.ndarray:
    hit = cache.get(node)
    if hit is not None:
        return hit
    if isinstance(node, Const):
        out = np.full(pts.shape[0], node.value)
    elif isinstance(node, Var):
        if node.index >= pts.shape[1]:
            raise IndexError(
                f"variable {node.name} (index {node.index}) outside a "
                f"{pts.shape[1]}-dimensional point")
        out = pts[:, node.index].copy()
    else:
        args = [_eval(c, pts, check, cache) for c in node.children()]
        out = _apply(node, args)
        if check:
            bad = ~np.isfinite(out)
            if bad.any():
                raise DomainError(node, pts[int(np.argmax(bad))])
    cache[node] = out
    return out


def evaluate(e: Expr, point: Sequence[float]) -> float:
    """Evaluate ``e`` at a single point; the point length must cover every variable."""
    pts = np.asarray(point, dtype=np.float64).reshape(1, -1)
    return float(evaluate_batch(e, pts)[0])


# ---------------------------------------------------------------- calculus

@lru_cache(maxsize=None)
def diff(e: Expr, index: int) -> Expr:
    """Exact partial derivative of ``e`` with respect to variable ``index``."""
    if index < 0:
        raise IndexError("variable index must be non-negative")
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == index else ZERO
    if isinstance(e, Add):
        return add(diff(e.left, index), diff(e.right, index))
    if isinstance(e, Sub):
        return sub(diff(e.left, index), diff(e.right, index))
    if isinstance(e, Neg):
        return neg(diff(e.arg, index))
    if isinstance(e, Mul):
        a, b = e.left, e.right
        return add(mul(diff(a, index), b), mul(a, diff(b, index)))
    if isinstance(e, Div):
        a, b = e.left, e.right
        da, db = diff(a, index), diff(b, index)
        if _is_const(db, 0.0):
            return div(da, b)
        return div(sub(mul(da, b), mul(a, db)), power(b, 2))
    if isinstance(e, Pow):
        db = diff(e.base, index)
        return mul(mul(Const(e.exponent), power(e.base, e.exponent - 1)), db)
    if isinstance(e, Func):
        a = e.arg
        da = diff(a, index)
        if _is_const(da, 0.0):
            return ZERO
        if e.name == "sin":
            outer = func("cos", a)
        elif e.name == "cos":
            outer = neg(func("sin", a))
        elif e.name == "exp":
            outer = e
        elif e.name == "log":
            return div(da, a)
        else:  # sqrt
            return div(da, mul(Const(2.0), e))
        return mul(outer, da)
    raise TypeError(type(e).__name__)


_REBUILD = {Add: add, Sub: sub, Mul: mul, Div: div}


def simplify(e: Expr) -> Expr:
    """Constant folding plus 0/1 identity elimination, applied bottom-up.

    No algebraic canonicalization is attempted.  The result is a fixed point:
    ``simplify(simplify(e)) == simplify(e)``.
    """
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, _Binary):
        return _REBUILD[type(e)](simplify(e.left), simplify(e.right))
    if isinstance(e, Neg):
        return neg(simplify(e.arg))
    if isinstance(e, Pow):
        return power(simplify(e.base), e.exponent)
    if isinstance(e, Func):
        return func(e.name, simplify(e.arg))
    raise TypeError(type(e).__name__)


def linear_combination(terms: Iterable[tuple[float | Expr, Expr]]) -> Expr:
    out: Expr = ZERO
    for coeff, e in terms:
        out = add(out, mul(_coerce(coeff), e))
    return out

"""Scalar expression trees over named variables.

Single entry point for user-defined vector fields and target functions.
Grammar is infix with the usual precedence, unary minus, function-call
syntax for sin/cos/exp/ln/sqrt, and integer-only exponents; ``^`` binds
tighter than unary minus, so ``-x^2`` parses as ``-(x^2)``.

The rule-based derivative here is deliberately independent of the jet
arithmetic in :mod:`stla.jets`; tests use it as the oracle for every
Taylor-coefficient computation downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, ExprSyntaxError, UnknownVariableError

FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt")


class Expr:
    """Base node. Instances are immutable and hashable."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, _as_expr(other))

    def __radd__(self, other):
        return add(_as_expr(other), self)

    def __sub__(self, other):
        return sub(self, _as_expr(other))

    def __rsub__(self, other):
        return sub(_as_expr(other), self)

    def __mul__(self, other):
        return mul(self, _as_expr(other))

    def __rmul__(self, other):
        return mul(_as_expr(other), self)

    def __neg__(self):
        return neg(self)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: object  # int (exact path) or float

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str
    index: int

    def __repr__(self):
        return f"Var({self.name})"


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class BinOp(Expr):
    op: str  # '+', '-', '*', '/'
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True, slots=True)
class Call(Expr):
    func: str
    arg: Expr


def _as_expr(v):
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float)):
        return Const(v)
    raise TypeError(f"cannot treat {v!r} as an expression")


ZERO = Const(0)
ONE = Const(1)


def _is_const(e, value=None):
    return isinstance(e, Const) and (value is None or e.value == value)


def add(a, b):
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return BinOp("+", a, b)


def sub(a, b):
    if _is_const(b, 0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is_const(a, 0):
        return neg(b)
    return BinOp("-", a, b)


def mul(a, b):
    if _is_const(a, 0) or _is_const(b, 0):
        return ZERO
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return BinOp("*", a, b)


def div(a, b):
    if _is_const(a, 0):
        return ZERO
    if _is_const(b, 1):
        return a
    return BinOp("/", a, b)


def neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def pow_int(a, n):
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Const):
        if a.value == 0 and n < 0:
            raise DomainError("0 raised to a negative power")
        return Const(a.value**n)
    return Pow(a, n)


# ---------------------------------------------------------------------------
# tokenizer / parser

_TOKEN_KINDS = ("num", "name", "op", "lpar", "rpar", "end")


def _tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_dot = False
            seen_exp = False
            while j < n:
                c = text[j]
                if c.isdigit():
                    j += 1
                elif c == "." and not seen_dot and not seen_exp:
                    seen_dot = True
                    j += 1
                elif c in "eE" and not seen_exp and j > i:
                    if j + 1 < n and (text[j + 1].isdigit() or text[j + 1] in "+-"):
                        seen_exp = True
                        j += 2 if text[j + 1] in "+-" else 1
                    else:
                        break
                else:
                    break
            lit = text[i:j]
            if seen_dot or seen_exp:
                tokens.append(("num", float(lit), i))
            else:
                tokens.append(("num", int(lit), i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        if ch in "+-*/^":
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch == "(":
            tokens.append(("lpar", ch, i))
            i += 1
            continue
        if ch == ")":
            tokens.append(("rpar", ch, i))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("end", None, n))
    return tokens


class _Parser:
    def __init__(self, text, variables):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.vars = {name: i for i, name in enumerate(variables)}

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, what):
        tok = self.advance()
        if tok[0] != kind:
            raise ExprSyntaxError(f"expected {what}", tok[2])
        return tok

    def parse(self):
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError("trailing input", tok[2])
        return e

    def expr(self):
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                rhs = self.term()
                e = add(e, rhs) if val == "+" else sub(e, rhs)
            else:
                return e

    def term(self):
        e = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                rhs = self.factor()
                e = mul(e, rhs) if val == "*" else div(e, rhs)
            else:
                return e

    def factor(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return neg(self.factor())
        if kind == "op" and val == "+":
            self.advance()
            return self.factor()
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, off = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            n = self.exponent()
            return pow_int(base, n)
        return base

    def exponent(self):
        # integer literal, optionally negated or parenthesized
        kind, val, off = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return -self.exponent()
        if kind == "lpar":
            self.advance()
            n = self.exponent()
            self.expect("rpar", "')'")
            return n
        if kind == "num":
            self.advance()
            if not isinstance(val, int):
                raise ExprSyntaxError("exponent must be an integer literal", off)
            return val
        raise ExprSyntaxError("exponent must be an integer literal", off)

    def atom(self):
        kind, val, off = self.advance()
        if kind == "num":
            return Const(val)
        if kind == "name":
            nxt = self.peek()
            if nxt[0] == "lpar":
                if val not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function '{val}'", off)
                self.advance()
                arg = self.expr()
                self.expect("rpar", "')'")
                return Call(val, arg)
            if val not in self.vars:
                raise UnknownVariableError(val, off)
            return Var(val, self.vars[val])
        if kind == "lpar":
            e = self.expr()
            self.expect("rpar", "')'")
            return e
        raise ExprSyntaxError("expected a value", off)


def parse(text, variables):
    """Parse ``text`` over the declared variable names into an Expr tree."""
    return _Parser(text, list(variables)).parse()


# ---------------------------------------------------------------------------
# printing

def to_string(e):
    """Render with explicit parentheses; parse(to_string(e)) == e structurally
    up to the constant folding the builders already apply."""
    if isinstance(e, Const):
        v = e.value
        if isinstance(v, float) or (isinstance(v, int) and v >= 0):
            return repr(v)
        return f"({v!r})"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_string(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_string(e.left)}{e.op}{to_string(e.right)})"
    if isinstance(e, Pow):
        exp = e.exponent if e.exponent >= 0 else f"({e.exponent})"
        return f"({to_string(e.base)}^{exp})"
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg)})"
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# evaluation

def eval_point(e, x):
    """Evaluate at a point (sequence ordered like the declared variables)."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return x[e.index]
    if isinstance(e, Neg):
        return -eval_point(e.arg, x)
    if isinstance(e, BinOp):
        a = eval_point(e.left, x)
        b = eval_point(e.right, x)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0:
            raise DomainError("division by zero")
        return a / b
    if isinstance(e, Pow):
        base = eval_point(e.base, x)
        if e.exponent < 0 and base == 0:
            raise DomainError("zero base with negative exponent")
        return base**e.exponent
    if isinstance(e, Call):
        v = eval_point(e.arg, x)
        if e.func == "sin":
            return math.sin(v)
        if e.func == "cos":
            return math.cos(v)
        if e.func == "exp":
            return math.exp(v)
        if e.func == "ln":
            if v <= 0:
                raise DomainError(f"ln of non-positive value {v}")
            return math.log(v)
        if e.func == "sqrt":
            if v < 0:
                raise DomainError(f"sqrt of negative value {v}")
            return math.sqrt(v)
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# rule-based differentiation

def symbolic_partial(e, index):
    """Exact derivative with respect to the variable at ``index``.

    Only constant folding is applied; no deeper simplification.
    """
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == index else ZERO
    if isinstance(e, Neg):
        return neg(symbolic_partial(e.arg, index))
    if isinstance(e, BinOp):
        da = symbolic_partial(e.left, index)
        db = symbolic_partial(e.right, index)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, e.right), mul(e.left, db))
        # quotient rule
        num = sub(mul(da, e.right), mul(e.left, db))
        return div(num, pow_int(e.right, 2))
    if isinstance(e, Pow):
        dbase = symbolic_partial(e.base, index)
        return mul(mul(Const(e.exponent), pow_int(e.base, e.exponent - 1)), dbase)
    if isinstance(e, Call):
        darg = symbolic_partial(e.arg, index)
        if e.func == "sin":
            outer = Call("cos", e.arg)
        elif e.func == "cos":
            outer = neg(Call("sin", e.arg))
        elif e.func == "exp":
            outer = e
        elif e.func == "ln":
            outer = div(ONE, e.arg)
        else:  # sqrt
            outer = div(Const(0.5), Call("sqrt", e.arg))
        return mul(outer, darg)
    raise TypeError(f"not an Expr: {e!r}")


def gradient(e, n_vars):
    return [symbolic_partial(e, i) for i in range(n_vars)]


# ---------------------------------------------------------------------------
# compilation to a plain Python callable (hot path for simulation)

_MATH_NAMES = {"sin": "math.sin", "cos": "math.cos", "exp": "math.exp",
               "ln": "math.log", "sqrt": "math.sqrt"}


def to_python_source(e, var_names):
    if isinstance(e, Const):
        return repr(float(e.value)) if isinstance(e.value, float) else repr(e.value)
    if isinstance(e, Var):
        return var_names[e.index]
    if isinstance(e, Neg):
        return f"(-{to_python_source(e.arg, var_names)})"
    if isinstance(e, BinOp):
        op = e.op if e.op != "/" else "/"
        return (f"({to_python_source(e.left, var_names)}{op}"
                f"{to_python_source(e.right, var_names)})")
    if isinstance(e, Pow):
        return f"({to_python_source(e.base, var_names)}**({e.exponent}))"
    if isinstance(e, Call):
        return f"{_MATH_NAMES[e.func]}({to_python_source(e.arg, var_names)})"
    raise TypeError(f"not an Expr: {e!r}")


def compile_scalar(e, variables):
    """Compile to a fast callable(point tuple) -> float."""
    names = [f"v{i}" for i in range(len(variables))]
    src = f"def _fn({', '.join(names)}):\n    return {to_python_source(e, names)}\n"
    ns = {"math": math}
    exec(src, ns)  # source is generated from our own AST only
    fn = ns["_fn"]

    def call(point, _fn=fn):
        return _fn(*point)

    return call

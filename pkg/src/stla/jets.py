"""Truncated multivariate Taylor arithmetic at a base point.

A :class:`TruncatedPoly` stores the coefficients of a Taylor germ in
displacement coordinates, keyed by exponent multi-index, up to a total
degree cap. The cap doubles as regularity bookkeeping: every formal
partial derivative lowers it by one, and running it down to zero and
asking for another derivative raises ``InsufficientOrderError``. That
makes the smoothness hypotheses of the operator calculus (fields lifted
to degree k-1, targets to degree k for an order-k coefficient)
checkable at runtime instead of silently truncating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DimensionMismatchError, DomainError, InsufficientOrderError
from . import expr as ex


class TruncatedPoly:
    __slots__ = ("n", "cap", "c")

    def __init__(self, n, cap, coeffs=None):
        if cap < 0:
            raise InsufficientOrderError("degree cap below zero")
        self.n = n
        self.cap = cap
        self.c = coeffs if coeffs is not None else {}

    @classmethod
    def constant(cls, n, cap, value):
        coeffs = {(0,) * n: float(value)} if value != 0 else {}
        return cls(n, cap, coeffs)

    @classmethod
    def variable(cls, n, cap, i, base_value):
        coeffs = {}
        if base_value != 0:
            coeffs[(0,) * n] = float(base_value)
        if cap >= 1:
            key = tuple(1 if j == i else 0 for j in range(n))
            coeffs[key] = 1.0
        return cls(n, cap, coeffs)

    def _check(self, other):
        if self.n != other.n:
            raise DimensionMismatchError(
                f"germs over {self.n} and {other.n} variables")

    def __add__(self, other):
        self._check(other)
        cap = min(self.cap, other.cap)
        out = {k: v for k, v in self.c.items() if sum(k) <= cap}
        for k, v in other.c.items():
            if sum(k) <= cap:
                w = out.get(k, 0.0) + v
                if w == 0.0:
                    out.pop(k, None)
                else:
                    out[k] = w
        return TruncatedPoly(self.n, cap, out)

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def scale(self, a):
        if a == 0:
            return TruncatedPoly(self.n, self.cap, {})
        return TruncatedPoly(self.n, self.cap, {k: a * v for k, v in self.c.items()})

    def __mul__(self, other):
        self._check(other)
        cap = min(self.cap, other.cap)
        out = {}
        for ka, va in self.c.items():
            da = sum(ka)
            if da > cap:
                continue
            for kb, vb in other.c.items():
                if da + sum(kb) > cap:
                    continue
                key = tuple(a + b for a, b in zip(ka, kb))
                w = out.get(key, 0.0) + va * vb
                if w == 0.0:
                    out.pop(key, None)
                else:
                    out[key] = w
        return TruncatedPoly(self.n, cap, out)

    def partial(self, i):
        if self.cap < 1:
            raise InsufficientOrderError(
                "derivative requested on a germ with exhausted degree cap")
        out = {}
        for k, v in self.c.items():
            e = k[i]
            if e == 0:
                continue
            key = k[:i] + (e - 1,) + k[i + 1:]
            out[key] = v * e
        return TruncatedPoly(self.n, self.cap - 1, out)

    def value(self):
        return self.c.get((0,) * self.n, 0.0)

    def max_abs_coeff(self):
        return max((abs(v) for v in self.c.values()), default=0.0)

    def truncate(self, cap):
        if cap >= self.cap:
            return TruncatedPoly(self.n, cap if cap < self.cap else self.cap, dict(self.c))
        return TruncatedPoly(self.n, cap,
                             {k: v for k, v in self.c.items() if sum(k) <= cap})

    def __repr__(self):
        terms = sorted(self.c.items(), key=lambda kv: (sum(kv[0]), kv[0]))
        body = " + ".join(f"{v:g}*x^{k}" for k, v in terms) or "0"
        return f"<jet n={self.n} cap={self.cap}: {body}>"


@dataclass(frozen=True)
class ScalarGerm:
    point: tuple
    poly: TruncatedPoly

    @property
    def cap(self):
        return self.poly.cap

    def value(self):
        return self.poly.value()


@dataclass(frozen=True)
class VectorGerm:
    point: tuple
    comps: tuple  # of TruncatedPoly

    @property
    def cap(self):
        return min(p.cap for p in self.comps)

    def values(self):
        return [p.value() for p in self.comps]

    def max_abs_coeff(self):
        return max(p.max_abs_coeff() for p in self.comps)


# ---------------------------------------------------------------------------
# univariate series composition for the elementary functions

def _series_coeffs(func, c, order):
    """Taylor coefficients a_j = f^(j)(c)/j! for j = 0..order."""
    if func == "exp":
        e = math.exp(c)
        return [e / math.factorial(j) for j in range(order + 1)]
    if func == "sin":
        cycle = [math.sin(c), math.cos(c), -math.sin(c), -math.cos(c)]
        return [cycle[j % 4] / math.factorial(j) for j in range(order + 1)]
    if func == "cos":
        cycle = [math.cos(c), -math.sin(c), -math.cos(c), math.sin(c)]
        return [cycle[j % 4] / math.factorial(j) for j in range(order + 1)]
    if func == "ln":
        if c <= 0:
            raise DomainError(f"ln of non-positive value {c}")
        out = [math.log(c)]
        for j in range(1, order + 1):
            out.append((-1.0) ** (j - 1) / (j * c**j))
        return out
    if func == "sqrt":
        if c <= 0:
            raise DomainError(f"sqrt not smooth at {c}")
        out = [math.sqrt(c)]
        coef = 0.5
        for j in range(1, order + 1):
            out.append(coef * c ** (0.5 - j))
            coef *= (0.5 - j) / (j + 1)
        return out
    if func == "recip":
        if c == 0:
            raise DomainError("division by a germ vanishing at the base point")
        return [(-1.0) ** j / c ** (j + 1) for j in range(order + 1)]
    raise ValueError(f"unknown series {func!r}")


def _compose(coeffs, small):
    """sum_j coeffs[j] * small^j by Horner; small has zero constant term."""
    n, cap = small.n, small.cap
    acc = TruncatedPoly.constant(n, cap, coeffs[-1])
    for a in reversed(coeffs[:-1]):
        acc = acc * small
        if a != 0:
            acc = acc + TruncatedPoly.constant(n, cap, a)
    return acc


def _apply_series(func, p):
    c = p.value()
    small = TruncatedPoly(p.n, p.cap,
                          {k: v for k, v in p.c.items() if sum(k) > 0})
    return _compose(_series_coeffs(func, c, p.cap), small)


def _pow_int(p, k):
    if k == 0:
        return TruncatedPoly.constant(p.n, p.cap, 1.0)
    if k < 0:
        return _pow_int(_apply_series("recip", p), -k)
    acc = p
    for _ in range(k - 1):
        acc = acc * p
    return acc


# ---------------------------------------------------------------------------
# lifting expressions to germs

def _lift_poly(e, x0, cap):
    n = len(x0)
    if isinstance(e, ex.Const):
        return TruncatedPoly.constant(n, cap, e.value)
    if isinstance(e, ex.Var):
        return TruncatedPoly.variable(n, cap, e.index, x0[e.index])
    if isinstance(e, ex.Neg):
        return _lift_poly(e.arg, x0, cap).scale(-1.0)
    if isinstance(e, ex.BinOp):
        a = _lift_poly(e.left, x0, cap)
        b = _lift_poly(e.right, x0, cap)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return a * _apply_series("recip", b)
    if isinstance(e, ex.Pow):
        return _pow_int(_lift_poly(e.base, x0, cap), e.exponent)
    if isinstance(e, ex.Call):
        return _apply_series(e.func, _lift_poly(e.arg, x0, cap))
    raise TypeError(f"not an Expr: {e!r}")


def lift(e, x0, degree):
    """Taylor germ of an expression at ``x0`` with total degree cap ``degree``."""
    x0 = tuple(float(v) for v in x0)
    return ScalarGerm(x0, _lift_poly(e, x0, degree))


def lift_vector(components, x0, degree):
    x0 = tuple(float(v) for v in x0)
    return VectorGerm(x0, tuple(_lift_poly(c, x0, degree) for c in components))


def identity_germ(x0, degree):
    """Germ of the identity map, one coordinate germ per variable."""
    x0 = tuple(float(v) for v in x0)
    n = len(x0)
    return VectorGerm(
        x0, tuple(TruncatedPoly.variable(n, degree, i, x0[i]) for i in range(n)))


def coordinate_germ(x0, degree, i):
    x0 = tuple(float(v) for v in x0)
    return ScalarGerm(x0, TruncatedPoly.variable(len(x0), degree, i, x0[i]))

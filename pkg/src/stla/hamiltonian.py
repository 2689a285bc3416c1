"""Higher-order Hamiltonian operator calculus on Taylor germs.

Conventions, fixed once for the whole toolkit:

* ``boxplus_power(fields, u, k)`` takes the fields ordered as they are
  used along the balanced switched trajectory, first leg first. The
  first-used field acts as the OUTERMOST operator in every composition:
  for two fields the order-k coefficient is
  ``sum_i C(k,i) H_f^(k-i) (H_g^(i) u)``. An asymmetric pair where
  reversing the order flips the answer pins this down in the tests.

* All outputs are RAW Taylor coefficients, i.e. ``k!`` times the t^k
  coefficient of ``u`` along the trajectory. Factorial normalization is
  applied exactly once, by the certification layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientOrderError
from .jets import ScalarGerm, TruncatedPoly, VectorGerm, identity_germ

_BINOM_CACHE = {}


def _binom(n, k):
    key = (n, k)
    if key not in _BINOM_CACHE:
        _BINOM_CACHE[key] = math.comb(n, k)
    return _BINOM_CACHE[key]


def lie_derivative(f: VectorGerm, u: ScalarGerm) -> ScalarGerm:
    """H_f u = f . grad u as a germ; degree cap drops by one."""
    acc = None
    for i, fi in enumerate(f.comps):
        term = fi * u.poly.partial(i)
        acc = term if acc is None else acc + term
    return ScalarGerm(u.point, acc)


def _lie_poly(f: VectorGerm, p: TruncatedPoly) -> TruncatedPoly:
    acc = None
    for i, fi in enumerate(f.comps):
        term = fi * p.partial(i)
        acc = term if acc is None else acc + term
    return acc


def ham_power_germ(f: VectorGerm, u: ScalarGerm, k: int) -> ScalarGerm:
    g = u
    for _ in range(k):
        g = lie_derivative(f, g)
    return g


def ham_power(f: VectorGerm, u: ScalarGerm, k: int) -> float:
    """Value of the k-fold iterated Hamiltonian H^(k)_f u at the base point."""
    return ham_power_germ(f, u, k).value()


def _require(fields, u, k):
    if not fields:
        raise ValueError("at least one vector field is required")
    if u.cap < k:
        raise InsufficientOrderError(
            f"target germ has degree {u.cap}, order-{k} coefficient needs {k}")
    for f in fields:
        if k >= 1 and f.cap < k - 1:
            raise InsufficientOrderError(
                f"field germ has degree {f.cap}, order-{k} coefficient needs {k - 1}")


def _germ_table(fields, u, K):
    """Germs of (H_{f_j} boxplus ... boxplus H_{f_m})^i u for i = 0..K,
    folding the field list from the last-used (innermost) to the first."""
    table = [u.poly]
    last = fields[-1]
    for i in range(1, K + 1):
        table.append(_lie_poly(last, table[-1]))
    for f in reversed(fields[:-1]):
        iters = [table]  # iters[c][i]: H_f^(c) applied to table entry i
        # only H_f^(c) of entries that a later binomial sum will read
        for c in range(1, K + 1):
            prev = iters[-1]
            iters.append([_lie_poly(f, prev[i]) for i in range(K + 1 - c)])
        table = [
            _sum_polys(
                iters[c][k - c].scale(_binom(k, c))
                for c in range(k + 1)
            )
            for k in range(K + 1)
        ]
    return table


def _sum_polys(polys):
    acc = None
    for p in polys:
        acc = p if acc is None else acc + p
    return acc


def boxplus_power(fields, u, k, method="recursive"):
    """Value of (H_{f_1} boxplus ... boxplus H_{f_m})^k u at the base point.

    ``method="recursive"`` folds the binomial recursion of the power of a
    sum; ``method="multinomial"`` evaluates the explicit multinomial sum
    of composed iterated Hamiltonians. They agree and the tests hold them
    to that.
    """
    _require(fields, u, k)
    if method == "recursive":
        return _germ_table(fields, u, k)[k].value()
    if method == "multinomial":
        return _multinomial_value(fields, u, k)
    raise ValueError(f"unknown method {method!r}")


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _multinomial_value(fields, u, k):
    m = len(fields)
    total = 0.0
    for comp in _compositions(k, m):
        coef = math.factorial(k)
        for c in comp:
            coef //= math.factorial(c)
        g = u
        for f, c in zip(reversed(fields), reversed(comp)):
            g = ham_power_germ(f, g, c)
        total += coef * g.value()
    return total


@dataclass
class HamCoeffs:
    """Coefficient ladder (H_{f_1} boxplus ... boxplus H_{f_m})^i u, i = 1..K."""

    orders: list  # floats for scalar u, 1-d arrays for vector u
    normalization: str = "raw"
    scale: float = 1.0
    group: tuple = field(default_factory=tuple)

    def factorial_normalized(self):
        if self.normalization == "factorial":
            return self
        out = [v / math.factorial(i + 1) for i, v in enumerate(self.orders)]
        return HamCoeffs(out, "factorial", self.scale, self.group)


def boxplus_sequence(fields, u, K, group=()):
    """All orders 1..K in one pass, reusing the intermediate germs."""
    _require(fields, u, K)
    table = _germ_table(fields, u, K)
    scale = max([u.poly.max_abs_coeff()] + [f.max_abs_coeff() for f in fields])
    return HamCoeffs([table[i].value() for i in range(1, K + 1)],
                     "raw", scale, tuple(group))


def boxplus_vector(fields, us, k):
    """Componentwise boxplus power for a vector-valued target."""
    return np.array([boxplus_power(fields, u, k) for u in us])


def boxplus_vector_sequence(fields, us, K, group=()):
    """Orders 1..K of a vector-valued target; entries are arrays in R^h."""
    per_comp = []
    scale = 0.0
    for u in us:
        _require(fields, u, K)
        table = _germ_table(fields, u, K)
        per_comp.append([table[i].value() for i in range(1, K + 1)])
        scale = max(scale, u.poly.max_abs_coeff())
    scale = max([scale] + [f.max_abs_coeff() for f in fields])
    orders = [np.array([per_comp[c][i] for c in range(len(us))])
              for i in range(K)]
    return HamCoeffs(orders, "raw", scale, tuple(group))


def trajectory_coeffs(fields, K, x0=None, degree=None):
    """Raw coefficients of the balanced trajectory itself (target = identity)."""
    if x0 is None:
        x0 = fields[0].point
    n = len(x0)
    degree = K if degree is None else degree
    ident = identity_germ(x0, degree)
    us = [ScalarGerm(ident.point, p) for p in ident.comps]
    return boxplus_vector_sequence(fields, us, K).orders


def lie_bracket(f: VectorGerm, g: VectorGerm) -> VectorGerm:
    """[f,g] = Dg f - Df g, componentwise; degree cap drops by one."""
    comps = tuple(_lie_poly(f, gi) - _lie_poly(g, fi)
                  for fi, gi in zip(f.comps, g.comps))
    return VectorGerm(f.point, comps)


def ad_power(g: VectorGerm, f: VectorGerm, k: int) -> VectorGerm:
    """ad^k_g f: ad^0 = f, ad^{j+1}_g f = [g, ad^j_g f]."""
    out = f
    for _ in range(k):
        out = lie_bracket(g, out)
    return out


def scale_field(f: VectorGerm, a: float) -> VectorGerm:
    return VectorGerm(f.point, tuple(p.scale(a) for p in f.comps))


def add_fields(f: VectorGerm, g: VectorGerm) -> VectorGerm:
    return VectorGerm(f.point, tuple(a + b for a, b in zip(f.comps, g.comps)))

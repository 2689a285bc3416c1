"""Algebraic identities of the operator calculus, packaged as checks.

Each check returns the absolute gap between two independently assembled
sides, normalized by the magnitude of what was compared. The CLI
`identities` task runs them on a configured system's palette; the test
suite drives them over hundreds of randomized polynomial instances.

Two checks need more than raw fields and are exercised on constructed
inputs: the balanced-pair reduction to iterated brackets requires the
field sum to vanish to order k at the base point (with a first-order-only
balance a Hessian correction term survives), and the linear-constraint
recursion requires the second field to be affine (its proof substitutes
a first-order operator for a higher-order one, which is exact on affine
components only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hamiltonian import (ad_power, add_fields, boxplus_power,
                          boxplus_vector_sequence, ham_power, ham_power_germ,
                          lie_bracket, lie_derivative, scale_field,
                          trajectory_coeffs)
from .jets import ScalarGerm, VectorGerm, identity_germ


def _rel(gap, scale):
    return gap / max(1.0, scale)


@dataclass
class IdentityResult:
    name: str
    gap: float
    tol: float

    @property
    def ok(self):
        return self.gap <= self.tol

    def to_dict(self):
        return {"name": self.name, "gap": float(self.gap),
                "tol": float(self.tol), "ok": bool(self.ok)}


def method_agreement_gap(fields, u, k):
    """multinomial vs recursive assembly of the same power."""
    a = boxplus_power(fields, u, k, method="recursive")
    b = boxplus_power(fields, u, k, method="multinomial")
    return _rel(abs(a - b), max(abs(a), abs(b)))


def second_order_gap(f, g, u):
    """(H_f [+] H_g)^2 u = H^(2)_{f+g} u + [f,g].grad u."""
    lhs = boxplus_power([f, g], u, 2)
    rhs = ham_power(add_fields(f, g), u, 2) \
        + lie_derivative(lie_bracket(f, g), u).value()
    return _rel(abs(lhs - rhs), max(abs(lhs), abs(rhs)))


def multi_second_order_gap(fields, u):
    """m-field version with the pairwise bracket sum."""
    lhs = boxplus_power(fields, u, 2)
    total = fields[0]
    for f in fields[1:]:
        total = add_fields(total, f)
    rhs = ham_power(total, u, 2)
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            rhs += lie_derivative(lie_bracket(fields[i], fields[j]), u).value()
    return _rel(abs(lhs - rhs), max(abs(lhs), abs(rhs)))


def homogeneity_gap(f, g, u, k, lam):
    lhs = boxplus_power([scale_field(f, lam), scale_field(g, lam)], u, k)
    rhs = lam**k * boxplus_power([f, g], u, k)
    return _rel(abs(lhs - rhs), max(abs(lhs), abs(rhs)))


def negation_sign_gap(f, g, u, k):
    """(H_{-f} [+] H_{-g})^k u = (-1)^k (H_f [+] H_g)^k u."""
    lhs = boxplus_power([scale_field(f, -1.0), scale_field(g, -1.0)], u, k)
    rhs = (-1.0)**k * boxplus_power([f, g], u, k)
    return _rel(abs(lhs - rhs), max(abs(lhs), abs(rhs)))


def doubling_gap(f, u, k):
    """(H_f [+] H_f)^k u = 2^k H^(k)_f u."""
    lhs = boxplus_power([f, f], u, k)
    rhs = 2.0**k * ham_power(f, u, k)
    return _rel(abs(lhs - rhs), max(abs(lhs), abs(rhs)))


def symmetric_quadruple_gap(f, g, u):
    """Order 1 vanishes and order 2 equals 2 [f,g].grad u on (f,g,-f,-g)."""
    quad = [f, g, scale_field(f, -1.0), scale_field(g, -1.0)]
    o1 = boxplus_power(quad, u, 1)
    o2 = boxplus_power(quad, u, 2)
    rhs = 2.0 * lie_derivative(lie_bracket(f, g), u).value()
    scale = max(abs(o2), abs(rhs))
    return max(_rel(abs(o1), scale), _rel(abs(o2 - rhs), scale))


def ten_tuple_gap(f, g, h):
    """Orders 1-2 vanish and order 3 equals 6 [[f,g],h] on the ten-field
    symmetric word, applied to the identity."""
    mf, mg, mh = (scale_field(w, -1.0) for w in (f, g, h))
    word = [f, g, mf, mg, h, g, f, mg, mf, mh]
    orders = trajectory_coeffs(word, 3)
    rhs = np.array(lie_bracket(lie_bracket(f, g), h).values())
    scale = max(np.linalg.norm(orders[2], np.inf), np.linalg.norm(rhs, np.inf))
    worst = max(np.linalg.norm(orders[0], np.inf),
                np.linalg.norm(orders[1], np.inf),
                np.linalg.norm(orders[2] - 6.0 * rhs, np.inf))
    return _rel(worst, scale)


def balanced_ad_gap(f, g, u, k):
    """(H_f [+] H_g)^{k+1} u(x0) = (-1)^k ad^k_g f . grad u(x0), valid when
    f+g vanishes to order k at the base point (caller's responsibility)."""
    lhs = boxplus_power([f, g], u, k + 1)
    rhs = (-1.0)**k * lie_derivative(ad_power(g, f, k), u).value()
    return _rel(abs(lhs - rhs), max(abs(lhs), abs(rhs)))


def affine_quadruple_gap(fo, f1, eps, x0, degree):
    """(f,g,g,f) with f = fo + eps f1, g = fo - eps f1 and fo(x0) = 0:
    orders 1-2 vanish, order 3 = 12 eps ad^2_fo f1 + 4 eps^2 ad^2_f1 fo."""
    f = add_fields(fo, scale_field(f1, eps))
    g = add_fields(fo, scale_field(f1, -eps))
    orders = trajectory_coeffs([f, g, g, f], 3)
    t1 = np.array(ad_power(fo, f1, 2).values())
    t2 = np.array(ad_power(f1, fo, 2).values())
    rhs = 12.0 * eps * t1 + 4.0 * eps**2 * t2
    scale = max(np.linalg.norm(orders[2], np.inf), np.linalg.norm(rhs, np.inf))
    worst = max(np.linalg.norm(orders[0], np.inf),
                np.linalg.norm(orders[1], np.inf),
                np.linalg.norm(orders[2] - rhs, np.inf))
    return _rel(worst, scale)


def linear_constraint_gap(f, g, k):
    """(H_f [+] H_g)^k I = F_k with F_2 = D(f+g)(f+g) + [f,g] and
    F_{j+1} = DF_j (f+g) + [F_j, g]; exact for affine g."""
    s = add_fields(f, g)
    Fk = add_fields(
        VectorGerm(s.point, tuple(lie_derivative(
            s, ScalarGerm(s.point, c)).poly for c in s.comps)),
        lie_bracket(f, g))
    for _ in range(k - 2):
        dfs = VectorGerm(Fk.point, tuple(lie_derivative(
            s, ScalarGerm(Fk.point, c)).poly for c in Fk.comps))
        Fk = add_fields(dfs, lie_bracket(Fk, g))
    lhs = np.array(trajectory_coeffs([f, g], k)[k - 1])
    rhs = np.array(Fk.values())
    scale = max(np.linalg.norm(lhs, np.inf), np.linalg.norm(rhs, np.inf))
    return _rel(np.linalg.norm(lhs - rhs, np.inf), scale)


def bch_third_gap(f, g):
    """(1/3!) (H_f [+] H_g)^3 I decomposes into the flow of f+g, the
    mixed bracket transport terms, and the two iterated brackets."""
    s = add_fields(f, g)
    br = lie_bracket(f, g)
    lhs = np.array(trajectory_coeffs([f, g], 3)[2]) / 6.0

    def hvec(a, b):
        # H_a applied to the components of b, i.e. Db a
        return np.array([lie_derivative(a, ScalarGerm(b.point, c)).value()
                         for c in b.comps])

    ident = identity_germ(s.point, 3)
    h3 = np.array([ham_power(s, ScalarGerm(ident.point, p), 3)
                   for p in ident.comps]) / 6.0
    mixed = 0.25 * (hvec(s, br) + hvec(br, s))
    ads = (np.array(ad_power(f, g, 2).values())
           + np.array(ad_power(g, f, 2).values())) / 12.0
    rhs = h3 + mixed + ads
    scale = max(np.linalg.norm(lhs, np.inf), np.linalg.norm(rhs, np.inf))
    return _rel(np.linalg.norm(lhs - rhs, np.inf), scale)


# ---------------------------------------------------------------------------
# randomized drivers

def random_poly_expr(rng, n, degree=3, terms=4):
    """Random polynomial with small integer coefficients."""
    from . import expr as ex
    acc = ex.ZERO
    for _ in range(terms):
        c = int(rng.integers(-3, 4))
        if c == 0:
            continue
        term = ex.Const(c)
        budget = degree
        for i in range(n):
            p = int(rng.integers(0, budget + 1))
            if p:
                term = ex.mul(term, ex.pow_int(ex.Var(f"x{i}", i), p))
                budget -= p
        acc = ex.add(acc, term)
    return acc


def random_instance(rng, n_max=4, degree=3, u_degree=3, cap=4):
    """Random fields f, g, h and scalar u lifted at a random point."""
    from .jets import lift, lift_vector
    n = int(rng.integers(2, n_max + 1))
    x0 = tuple(rng.uniform(-1.0, 1.0, n))
    mk = lambda: [random_poly_expr(rng, n, degree) for _ in range(n)]
    f = lift_vector(mk(), x0, cap)
    g = lift_vector(mk(), x0, cap)
    h = lift_vector(mk(), x0, cap)
    u = lift(random_poly_expr(rng, n, u_degree, terms=5), x0, cap + 1)
    return f, g, h, u


def balanced_pair(rng, k, n=3, degree=2, cap=7):
    """f and g with f+g vanishing to order k at the base point."""
    from . import expr as ex
    from .jets import lift_vector
    x0 = tuple(rng.uniform(-1.0, 1.0, n))
    f_exprs = [random_poly_expr(rng, n, degree) for _ in range(n)]
    shifted = [ex.sub(ex.Var(f"x{i}", i), ex.Const(float(x0[i])))
               for i in range(n)]
    w_exprs = []
    for _ in range(n):
        acc = ex.ZERO
        for _ in range(2):
            term = random_poly_expr(rng, n, 1, terms=2)
            for _ in range(k):
                term = ex.mul(term, shifted[int(rng.integers(0, n))])
            acc = ex.add(acc, term)
        w_exprs.append(acc)
    g_exprs = [ex.sub(w, fe) for w, fe in zip(w_exprs, f_exprs)]
    return (lift_vector(f_exprs, x0, cap), lift_vector(g_exprs, x0, cap), x0)


def affine_field(rng, n, x0, cap):
    from . import expr as ex
    from .jets import lift_vector
    comps = []
    for _ in range(n):
        acc = ex.Const(int(rng.integers(-3, 4)))
        for i in range(n):
            c = int(rng.integers(-2, 3))
            if c:
                acc = ex.add(acc, ex.mul(ex.Const(c), ex.Var(f"x{i}", i)))
        comps.append(acc)
    return lift_vector(comps, x0, cap)


def run_identity_suite(rng, n_instances=200, tol=1e-9, n_max=4, degree=3):
    """Randomized identity suite; returns per-family worst-gap results."""
    worst = {}

    def note(name, gap):
        worst[name] = max(worst.get(name, 0.0), gap)

    for _ in range(n_instances):
        f, g, h, u = random_instance(rng, n_max=n_max, degree=degree)
        k = int(rng.integers(2, 5))
        note("method-agreement", method_agreement_gap([f, g], u, k))
        m3 = int(rng.integers(2, 4))
        note("method-agreement-multi",
             method_agreement_gap([f, g, h][:m3], u, min(k, 3)))
        note("second-order", second_order_gap(f, g, u))
        note("multi-second-order", multi_second_order_gap([f, g, h], u))
        lam = float(rng.uniform(0.25, 3.0))
        note("homogeneity", homogeneity_gap(f, g, u, k, lam))
        note("negation-sign", negation_sign_gap(f, g, u, k))
        note("doubling", doubling_gap(f, u, k))
        note("symmetric-quadruple", symmetric_quadruple_gap(f, g, u))
        note("ten-tuple", ten_tuple_gap(f, g, h))
        note("bch-third", bch_third_gap(f, g))
        kb = int(rng.integers(1, 4))
        fb, gb, _ = balanced_pair(rng, kb)
        from .jets import lift
        ub = lift(random_poly_expr(rng, 3, 3, terms=5), fb.point, kb + 2)
        note(f"balanced-ad-k{kb}", balanced_ad_gap(fb, gb, ub, kb))
        ka = int(rng.integers(2, 5))
        ga = affine_field(rng, len(f.point), f.point, ka)
        note(f"linear-constraint-k{ka}", linear_constraint_gap(f, ga, ka))
    return [IdentityResult(name, gap, tol) for name, gap in sorted(worst.items())]


def system_identity_report(system, x_o, *, seed=0, tol=1e-9, k_max=3):
    """Identity families on a configured system's palette at one point."""
    from .jets import lift, lift_vector
    rng = np.random.default_rng(seed)
    names = list(system.palette().keys())
    cap = k_max + 3
    germs = {nm: lift_vector(system.palette_field(nm).components,
                             tuple(map(float, x_o)), cap) for nm in names}
    n = system.dim
    u = lift(random_poly_expr(rng, n, 3, terms=5), tuple(map(float, x_o)),
             cap + 1)
    fs = [germs[nm] for nm in names]
    f = fs[0]
    g = fs[1 % len(fs)]
    h = fs[2 % len(fs)]
    results = []
    for k in range(2, k_max + 1):
        results.append(IdentityResult(
            f"method-agreement-k{k}", method_agreement_gap([f, g], u, k), tol))
    results.append(IdentityResult("second-order", second_order_gap(f, g, u), tol))
    results.append(IdentityResult(
        "multi-second-order", multi_second_order_gap(fs[:3], u), tol))
    results.append(IdentityResult(
        "homogeneity", homogeneity_gap(f, g, u, 2, 1.7), tol))
    results.append(IdentityResult(
        "negation-sign", negation_sign_gap(f, g, u, 3), tol))
    results.append(IdentityResult("doubling", doubling_gap(f, u, 3), tol))
    results.append(IdentityResult(
        "symmetric-quadruple", symmetric_quadruple_gap(f, g, u), tol))
    results.append(IdentityResult("ten-tuple", ten_tuple_gap(f, g, h), tol))
    results.append(IdentityResult("bch-third", bch_third_gap(f, g), tol))
    return results

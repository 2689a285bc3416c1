"""Certification engine: group checking, spanning conditions, certificates.

Normalization convention: the operator layer returns raw coefficients;
this module divides the order-k column of group i by k_i! exactly once
when assembling the condition matrix. Group field lists are ordered
first-used-first, matching the operator convention.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .errors import (DegenerateInputError, GradientVanishesError,
                     NoGroupQualifiesError, NotPositiveBasisError,
                     OrderClaimFailedError, RankDeficientJacobianError,
                     SideConditionFailedError)
from .hamiltonian import boxplus_vector_sequence
from .jets import ScalarGerm, identity_germ, lift_vector
from .posbasis import SpanCertificate, check_boundary, is_positive_basis
from .sampling import ball_mesh
from .petrov import null_witness, select_invertible_block

DEFAULT_ZERO_TOL = 1e-9


@dataclass(frozen=True)
class VectorFieldDef:
    name: str
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def dim(self):
        return len(self.components)


@dataclass(frozen=True)
class TargetDef:
    kind: str                      # fat | point | manifold | manifold-with-boundary
    equations: tuple = ()
    inequalities: tuple = ()       # fat: u_i <= u_i(x_o); boundary: u_{h+1} >= u_{h+1}(x_o)
    comparison: object = None      # smooth comparison function for nonsmooth fat targets

    def __post_init__(self):
        object.__setattr__(self, "equations", tuple(self.equations))
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        if self.kind == "fat":
            if self.equations or not self.inequalities:
                raise DegenerateInputError(
                    "fat target takes inequalities only (at least one)")
        elif self.kind == "point":
            if self.equations or self.inequalities:
                raise DegenerateInputError("point target takes no functions")
        elif self.kind == "manifold":
            if not self.equations or self.inequalities:
                raise DegenerateInputError("manifold target takes equations only")
        elif self.kind == "manifold-with-boundary":
            if not self.equations or len(self.inequalities) != 1:
                raise DegenerateInputError(
                    "manifold-with-boundary takes equations plus one inequality")
        else:
            raise DegenerateInputError(f"unknown target kind {self.kind!r}")

    @property
    def h(self):
        return len(self.equations)


@dataclass(frozen=True)
class Structure:
    kind: str = "general"          # general | convex | symmetric | affine
    drift: str | None = None
    controls: tuple = ()
    levels: tuple = (-1.0, 0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))
        object.__setattr__(self, "levels", tuple(self.levels))


def _combo_name(parts):
    out = ""
    for coeff, name in parts:
        if coeff == 0:
            continue
        if coeff == 1:
            out += f"+{name}" if out else name
        elif coeff == -1:
            out += f"-{name}"
        else:
            mag = f"{abs(coeff):g}*{name}"
            out += ("-" if coeff < 0 else ("+" if out else "")) + mag
    return out or "0"


def _combine(parts, dim):
    comps = []
    for i in range(dim):
        acc = ex.ZERO
        for coeff, fdef in parts:
            if coeff == 0:
                continue
            term = fdef.components[i]
            if coeff != 1:
                term = ex.mul(ex.Const(coeff), term)
            acc = ex.add(acc, term)
        comps.append(acc)
    return tuple(comps)


@dataclass
class ControlSystem:
    variables: list
    fields: dict                   # name -> VectorFieldDef (declared)
    structure: Structure = field(default_factory=Structure)
    radius: float = 1.0

    def __post_init__(self):
        self.variables = list(self.variables)
        n = len(self.variables)
        for name, fdef in self.fields.items():
            if fdef.dim != n:
                raise DegenerateInputError(
                    f"field '{name}' has {fdef.dim} components, expected {n}")
        self._palette = None

    @property
    def dim(self):
        return len(self.variables)

    def palette(self):
        """Available fields after structure expansion, in deterministic order."""
        if self._palette is not None:
            return self._palette
        out = {}
        n = self.dim
        st = self.structure
        if st.kind == "affine":
            drift = self.fields[st.drift] if st.drift else None
            ctrl = [self.fields[c] for c in st.controls]
            for coeffs in itertools.product(st.levels, repeat=len(ctrl)):
                parts = []
                if drift is not None:
                    parts.append((1.0, drift))
                parts += [(c, f) for c, f in zip(coeffs, ctrl)]
                name = _combo_name(
                    [(c, f.name) for c, f in parts])
                if name == "0" or name in out:
                    continue
                out[name] = VectorFieldDef(name, _combine(parts, n))
        else:
            for name, fdef in self.fields.items():
                out[name] = fdef
            if st.kind == "symmetric":
                for name, fdef in list(out.items()):
                    neg = f"-{name}"
                    if neg not in out:
                        out[neg] = VectorFieldDef(
                            neg, tuple(ex.neg(c) for c in fdef.components))
        self._palette = out
        return out

    def palette_field(self, name):
        pal = self.palette()
        if name not in pal:
            raise DegenerateInputError(f"'{name}' is not in the field palette")
        return pal[name]


@dataclass
class SystemBounds:
    R: float
    L: float
    M: float
    sigma: float

    def to_dict(self):
        return {"R": self.R, "L": self.L, "M": self.M, "sigma": self.sigma}


def estimate_bounds(system, x_o, radius=None, n_points=512, safety=1.25, seed=0):
    """Sampled locality constants: sup |F|, Lipschitz estimate, horizon sigma."""
    R = float(radius if radius is not None else system.radius)
    x_o = tuple(float(v) for v in x_o)
    mesh = ball_mesh(np.asarray(x_o), R, n_points, seed=seed)
    mesh = np.vstack([mesh, np.asarray(x_o)])
    n = system.dim
    M = 0.0
    L = 0.0
    for fdef in system.palette().values():
        comp_fns = [ex.compile_scalar(c, system.variables) for c in fdef.components]
        jac_fns = [[ex.compile_scalar(ex.symbolic_partial(c, j), system.variables)
                    for j in range(n)] for c in fdef.components]
        for x in mesh:
            pt = tuple(x)
            vals = np.array([fn(pt) for fn in comp_fns])
            M = max(M, float(np.linalg.norm(vals)))
            J = np.array([[fn(pt) for fn in row] for row in jac_fns])
            L = max(L, float(np.linalg.norm(J, 2)))
    M *= safety
    L *= safety
    sigma = R / (2.0 * M) if M > 0 else float("inf")
    return SystemBounds(R, L, M, sigma)


# ---------------------------------------------------------------------------
# jet cache

class JetCache:
    """Lifted germs per (field, degree) at a fixed base point."""

    def __init__(self, system, x_o):
        self.system = system
        self.x_o = tuple(float(v) for v in x_o)
        self._fields = {}
        self._scalars = {}

    def field(self, name, degree):
        key = (name, degree)
        if key not in self._fields:
            fdef = self.system.palette_field(name)
            self._fields[key] = lift_vector(fdef.components, self.x_o, degree)
        return self._fields[key]

    def scalar(self, key, e, degree):
        k = (key, degree)
        if k not in self._scalars:
            from .jets import lift
            self._scalars[k] = lift(e, self.x_o, degree)
        return self._scalars[k]


# ---------------------------------------------------------------------------
# groups

@dataclass(frozen=True)
class GroupSpec:
    fields: tuple                  # palette names, first-used first
    order: int

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        if self.order < 1:
            raise DegenerateInputError("group order must be >= 1")
        if self.order == 1 and len(self.fields) != 1:
            raise DegenerateInputError(
                "first-order groups consist of a single field")

    @property
    def legs(self):
        return len(self.fields)

    def key(self):
        return (self.order, len(self.fields), self.fields)


@dataclass
class GroupCheck:
    group: GroupSpec
    ok: bool
    failed_order: int | None = None
    failed_value: object = None
    raw_orders: list = field(default_factory=list)
    column: object = None          # A^o_i = raw/k!; vector or scalar
    s_entry: float | None = None
    vanish_margin: float = 0.0     # worst |coefficient| among orders < k
    scale: float = 1.0

    def to_dict(self):
        col = self.column
        if isinstance(col, np.ndarray):
            col = [float(v) for v in col]
        elif col is not None:
            col = float(col)
        return {
            "fields": list(self.group.fields),
            "order": self.group.order,
            "ok": bool(self.ok),
            "failed_order": self.failed_order,
            "column": col,
            "s_entry": None if self.s_entry is None else float(self.s_entry),
            "vanish_margin": float(self.vanish_margin),
        }


def _target_germs(system, target, x_o, degree, cache=None):
    """Germs of the functions defining the target, in row order."""
    if target is None or target.kind == "point":
        ident = identity_germ(x_o, degree)
        return [ScalarGerm(ident.point, p) for p in ident.comps]
    exprs = list(target.equations)
    if target.kind == "manifold-with-boundary":
        exprs += list(target.inequalities)
    elif target.kind == "fat":
        exprs = list(target.inequalities)
    if cache is not None:
        return [cache.scalar(("target", i), e, degree) for i, e in enumerate(exprs)]
    from .jets import lift
    return [lift(e, x_o, degree) for e in exprs]


def check_group(system, x_o, group, target=None, *, cache=None,
                tol=DEFAULT_ZERO_TOL, strict=False):
    """Verify the claimed order of one group against the target functions.

    Orders 1..k-1 must vanish (within the relative tolerance) for every
    target row and the order-k vector must be nonzero; the returned
    column is the order-k coefficient divided by k!.
    """
    cache = cache or JetCache(system, x_o)
    k = group.order
    fields = [cache.field(name, max(k - 1, 1)) for name in group.fields]
    boundary = target is not None and target.kind == "manifold-with-boundary"
    us = _target_germs(system, target, cache.x_o, k, cache)
    seq = boxplus_vector_sequence(fields, us, k, group=group.fields)
    tol_abs = tol * max(1.0, seq.scale)

    worst = 0.0
    for r in range(1, k):
        v = np.linalg.norm(np.atleast_1d(seq.orders[r - 1]), np.inf)
        worst = max(worst, float(v))
        if v > tol_abs:
            res = GroupCheck(group, False, failed_order=r,
                             failed_value=seq.orders[r - 1],
                             raw_orders=seq.orders, vanish_margin=worst,
                             scale=seq.scale)
            if strict:
                raise OrderClaimFailedError(r, seq.orders[r - 1])
            return res

    top = np.atleast_1d(seq.orders[k - 1]).astype(float)
    if np.linalg.norm(top, np.inf) <= tol_abs:
        res = GroupCheck(group, False, failed_order=k, failed_value=0.0,
                         raw_orders=seq.orders, vanish_margin=worst,
                         scale=seq.scale)
        if strict:
            raise OrderClaimFailedError(k, 0.0)
        return res

    norm = top / math.factorial(k)
    s_entry = None
    if boundary:
        s_entry = float(norm[-1])
        column = norm[:-1]
    elif target is not None and target.kind == "fat" and len(us) == 1:
        column = float(norm[0])
    else:
        column = norm
    return GroupCheck(group, True, raw_orders=seq.orders, column=column,
                      s_entry=s_entry, vanish_margin=worst, scale=seq.scale)


# ---------------------------------------------------------------------------
# certificates

@dataclass
class StlaCertificate:
    theorem: str
    point: tuple
    groups: list
    k_bar: int
    exponent: float
    A: np.ndarray | None = None
    s: np.ndarray | None = None
    span: SpanCertificate | None = None
    diagnostics: dict = field(default_factory=dict)
    side_conditions: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "theorem": self.theorem,
            "point": [float(v) for v in self.point],
            "groups": [g.to_dict() for g in self.groups],
            "k_bar": int(self.k_bar),
            "exponent": float(self.exponent),
            "A": None if self.A is None else [[float(v) for v in row] for row in self.A],
            "s": None if self.s is None else [float(v) for v in self.s],
            "span": None if self.span is None else self.span.to_dict(),
            "diagnostics": self.diagnostics,
            "side_conditions": self.side_conditions,
        }


def _gradient_at(e, x_o, n):
    return np.array([ex.eval_point(ex.symbolic_partial(e, j), x_o)
                     for j in range(n)], dtype=float)


def _fat_diagnostics(system, x_o, best, bounds):
    if bounds is None:
        return {}
    k = best["k_bar"]
    m = max(len(g.group.fields) for g in best["checks"])
    c_o = abs(best["worst_rate"]) / 2.0
    C = max(1.0, bounds.M) * math.exp(bounds.L * m * bounds.sigma)
    delta = bounds.sigma
    Km = (C * math.factorial(k) / c_o) ** (1.0 / k) if c_o > 0 else float("inf")
    delta_prime = min(bounds.R / 2.0,
                      c_o / (C * math.factorial(k)) * delta**k) if c_o > 0 else 0.0
    return {"bounds": bounds.to_dict(), "c_o": c_o, "K": Km,
            "delta": delta, "delta_prime": delta_prime}


def certify_fat(system, target, x_o, groups, *, bounds=None,
                tol=DEFAULT_ZERO_TOL, sampled_check=0, seed=0):
    """Decrease-rate certificate for a target locally given by inequalities.

    Every listed inequality must admit its own decrease order along one
    common group of fields; with a comparison function, the rate is
    certified on the comparison function and the local-maximum premise is
    recorded as a caller assertion (optionally spot-checked by sampling).
    """
    x_o = tuple(float(v) for v in x_o)
    n = system.dim
    side = {}
    if target.comparison is not None:
        us_exprs = [target.comparison]
        side["comparison_premise"] = "asserted by caller"
        if sampled_check:
            pts = ball_mesh(np.asarray(x_o), system.radius, sampled_check, seed=seed)
            base = (ex.eval_point(target.inequalities[0], x_o)
                    - ex.eval_point(target.comparison, x_o))
            bad = sum(
                1 for p in pts
                if ex.eval_point(target.inequalities[0], tuple(p))
                - ex.eval_point(target.comparison, tuple(p)) > base + 1e-9)
            side["comparison_premise"] = (
                f"sampled check: {bad} of {sampled_check} points violate the "
                "local-maximum premise")
            if bad:
                raise SideConditionFailedError(
                    "comparison function is not a local majorant on samples")
    else:
        us_exprs = list(target.inequalities)

    for e in us_exprs:
        g = _gradient_at(e, x_o, n)
        if np.linalg.norm(g) <= tol:
            raise GradientVanishesError(
                f"gradient of a target function vanishes at {x_o}")

    cache = JetCache(system, x_o)
    best = None
    for spec in groups:
        k_cap = spec.order
        fields = [cache.field(name, max(k_cap - 1, 1)) for name in spec.fields]
        per_u = []
        ok = True
        for idx, e in enumerate(us_exprs):
            u = cache.scalar(("fat", idx), e, k_cap)
            seq = boxplus_vector_sequence(fields, [u], k_cap, group=spec.fields)
            tol_abs = tol * max(1.0, seq.scale)
            r_found = None
            for r in range(1, k_cap + 1):
                v = float(np.atleast_1d(seq.orders[r - 1])[0])
                if abs(v) > tol_abs:
                    r_found = (r, v)
                    break
            if r_found is None or r_found[1] >= 0:
                ok = False
                break
            per_u.append((r_found[0], r_found[1], seq))
        if not ok:
            continue
        k_bar = max(r for r, _, _ in per_u)
        checks = []
        for (r, v, seq), e in zip(per_u, us_exprs):
            gs = GroupSpec(spec.fields, r) if (r == 1 and len(spec.fields) == 1) \
                or r > 1 else GroupSpec(spec.fields[:1], 1)
            checks.append(GroupCheck(gs if r > 1 or len(spec.fields) == 1 else gs,
                                     True, raw_orders=seq.orders[:r],
                                     column=v / math.factorial(r),
                                     scale=seq.scale))
        cand = {"spec": spec, "k_bar": k_bar, "checks": checks,
                "worst_rate": max(v for _, v, _ in per_u)}
        if best is None or cand["k_bar"] < best["k_bar"]:
            best = cand
    if best is None:
        raise NoGroupQualifiesError(
            "no group provides a decrease rate for every target inequality")

    theorem = "fat"
    if target.comparison is not None:
        theorem = "fat-comparison"
    elif len(us_exprs) > 1:
        theorem = "fat-multi"
    diag = _fat_diagnostics(system, x_o, best, bounds)
    return StlaCertificate(theorem, x_o, best["checks"], best["k_bar"],
                           1.0 / best["k_bar"], diagnostics=diag,
                           side_conditions=side)


def _petrov_diagnostics(A, span, bounds):
    diag = {}
    try:
        block, det = select_invertible_block(A)
        M = float(np.linalg.norm(np.linalg.inv(A[:, block]), 2))
        bo = null_witness(A, M + 1.0)
        diag["A1_det"] = float(det)
        diag["K"] = float(np.linalg.norm(bo) + 1.0 + M)
        diag["b_o"] = [float(v) for v in bo]
        lam = span.witness
        if lam is not None and (lam > 0).all():
            from .posbasis import eccentricity
            diag["eccentricity"] = eccentricity(lam)
    except Exception as exc:  # diagnostics must never block certification
        diag["note"] = f"unavailable: {exc}"
    if bounds is not None:
        diag["bounds"] = bounds.to_dict()
        diag["delta"] = bounds.sigma
        if "K" in diag:
            diag["delta_prime"] = bounds.sigma / diag["K"]
    return diag


def certify_point(system, x_o, groups, *, bounds=None, tol=DEFAULT_ZERO_TOL):
    """Point-target certificate: verified directions must positively span R^n."""
    x_o = tuple(float(v) for v in x_o)
    cache = JetCache(system, x_o)
    checks = []
    for spec in groups:
        res = check_group(system, x_o, spec, None, cache=cache, tol=tol,
                          strict=True)
        checks.append(res)
    A = np.column_stack([np.asarray(c.column, dtype=float) for c in checks])
    span = is_positive_basis(A)
    if not span.verdict:
        raise NotPositiveBasisError(
            f"verified directions do not positively span R^{system.dim} "
            f"(rank {span.rank}, margin {span.margin:.3g})")
    k_bar = max(c.group.order for c in checks)
    diag = _petrov_diagnostics(A, span, bounds)
    return StlaCertificate("point", x_o, checks, k_bar, 1.0 / k_bar, A=A,
                           span=span, diagnostics=diag)


def _dependence_sparsity(system, x_o, exprs, allowed, tol, seed, n_samples=8,
                         degree=2):
    """Sampled structural check: germs of exprs at x_o plus sampled points
    carry no coefficient on monomials outside the allowed variables."""
    pts = [np.asarray(x_o, dtype=float)]
    pts += list(ball_mesh(np.asarray(x_o), system.radius, n_samples, seed=seed))
    from .jets import lift
    worst = 0.0
    for e in exprs:
        for p in pts:
            germ = lift(e, tuple(p), degree)
            scale = max(1.0, germ.poly.max_abs_coeff())
            for key, v in germ.poly.c.items():
                if any(key[j] > 0 for j in range(len(key)) if j not in allowed):
                    worst = max(worst, abs(v) / scale)
    return worst <= tol, worst


def _trajectory_vanishing(cache, spec, coords, tol):
    """(boxplus)^r I_j(x_o) = 0 for r < k and j in coords."""
    k = spec.order
    if k == 1:
        return True, 0.0
    fields = [cache.field(name, max(k - 2, 1)) for name in spec.fields]
    ident = identity_germ(cache.x_o, k - 1)
    us = [ScalarGerm(ident.point, ident.comps[j]) for j in coords]
    seq = boxplus_vector_sequence(fields, us, k - 1, group=spec.fields)
    tol_abs = tol * max(1.0, seq.scale)
    worst = max(float(np.linalg.norm(np.atleast_1d(v), np.inf))
                for v in seq.orders)
    return worst <= tol_abs, worst


def certify_manifold(system, target, x_o, groups, variant="strict-extra", *,
                     restricted=None, bounds=None, tol=DEFAULT_ZERO_TOL, seed=0):
    """Certificate for targets of intermediate dimension, three variants.

    strict-extra    : all trajectory coefficients below each group order vanish;
    restricted-vars : the target variation and the listed state components
                      depend only on the declared coordinates (sampled
                      structural check) and the trajectory coefficients of
                      those coordinates vanish below order;
    block-structure : leading Jacobian block invertible, trailing components
                      self-contained, trailing trajectory coefficients vanish.
    """
    x_o = tuple(float(v) for v in x_o)
    n = system.dim
    boundary = target.kind == "manifold-with-boundary"
    h = target.h
    rows = list(target.equations) + (list(target.inequalities) if boundary else [])
    J = np.array([_gradient_at(e, x_o, n) for e in rows])
    from .posbasis import matrix_rank
    if matrix_rank(J) < len(rows):
        raise RankDeficientJacobianError(
            f"target Jacobian rank {matrix_rank(J)} < {len(rows)} at {x_o}")

    cache = JetCache(system, x_o)
    checks = [check_group(system, x_o, spec, target, cache=cache, tol=tol,
                          strict=True) for spec in groups]
    A = np.column_stack([np.asarray(c.column, dtype=float).reshape(-1)
                         for c in checks])
    s = np.array([c.s_entry for c in checks]) if boundary else None

    side = {"variant": variant}
    if variant == "strict-extra":
        for c in checks:
            ok, worst = _trajectory_vanishing(cache, c.group, range(n), tol)
            if not ok:
                raise SideConditionFailedError(
                    f"group {c.group.fields} moves at low order: "
                    f"|coeff| = {worst:.3g}")
        side["trajectory_vanishing"] = "orders < k_i vanish for all coordinates"
    elif variant == "restricted-vars":
        if not restricted:
            raise DegenerateInputError(
                "restricted-vars variant needs the coordinate list")
        allowed = set(restricted)
        du_rows = []
        for e in target.equations:
            for fdef in system.palette().values():
                acc = ex.ZERO
                for j in range(n):
                    acc = ex.add(acc, ex.mul(fdef.components[j],
                                             ex.symbolic_partial(e, j)))
                du_rows.append(acc)
        comp_exprs = [fdef.components[j] for fdef in system.palette().values()
                      for j in allowed]
        ok1, w1 = _dependence_sparsity(system, x_o, du_rows, allowed, tol, seed)
        ok2, w2 = _dependence_sparsity(system, x_o, comp_exprs, allowed, tol,
                                       seed + 1)
        if not ok1:
            raise SideConditionFailedError(
                f"target variation depends on undeclared coordinates "
                f"(worst coefficient {w1:.3g})")
        if not ok2:
            raise SideConditionFailedError(
                f"restricted components depend on undeclared coordinates "
                f"(worst coefficient {w2:.3g})")
        for c in checks:
            ok, worst = _trajectory_vanishing(cache, c.group, sorted(allowed), tol)
            if not ok:
                raise SideConditionFailedError(
                    f"group {c.group.fields}: restricted coordinates move at "
                    f"low order (|coeff| = {worst:.3g})")
        side["structural_check"] = (
            "sampled structural check at x_o plus 8 ball points")
        side["restricted"] = sorted(allowed)
    elif variant == "block-structure":
        j = 1 if boundary else 0
        lead = J[:, :h + j]
        if abs(np.linalg.det(lead)) <= tol * max(1.0, np.linalg.norm(J)):
            raise SideConditionFailedError(
                "leading Jacobian block is singular")
        trailing = list(range(h + j, n))
        comp_exprs = [fdef.components[l]
                      for fdef in system.palette().values() for l in trailing]
        ok, w = _dependence_sparsity(system, x_o, comp_exprs, set(trailing),
                                     tol, seed)
        if not ok:
            raise SideConditionFailedError(
                f"trailing components depend on leading coordinates "
                f"(worst coefficient {w:.3g})")
        for c in checks:
            ok, worst = _trajectory_vanishing(cache, c.group, trailing, tol)
            if not ok:
                raise SideConditionFailedError(
                    f"group {c.group.fields}: trailing coordinates move at "
                    f"low order (|coeff| = {worst:.3g})")
        side["structural_check"] = (
            "sampled structural check at x_o plus 8 ball points")
    else:
        raise DegenerateInputError(f"unknown variant {variant!r}")

    span = check_boundary(A, s) if boundary else is_positive_basis(A)
    if not span.verdict:
        raise NotPositiveBasisError(
            f"columns do not {'satisfy the boundary condition' if boundary else 'positively span'} "
            f"(rank {span.rank}, margin {span.margin:.3g})")
    k_bar = max(c.group.order for c in checks)
    theorem = {"strict-extra": "manifold",
               "restricted-vars": "manifold-restricted",
               "block-structure": "manifold-block"}[variant]
    if boundary:
        theorem += "-boundary"
    diag = _petrov_diagnostics(A, span, bounds)
    diag["uniformity"] = "per-point certificate; constants not uniform in x_o"
    return StlaCertificate(theorem, x_o, checks, k_bar, 1.0 / k_bar, A=A, s=s,
                           span=span, diagnostics=diag, side_conditions=side)


# ---------------------------------------------------------------------------
# group search

@dataclass
class SearchResult:
    groups: list
    evaluated: int
    budget_exhausted: bool = False


def search_groups(system, x_o, target=None, *, k_max=4, length_max=4,
                  budget=100000, tol=DEFAULT_ZERO_TOL, fat=False,
                  dedupe_cos=0.999):
    """Enumerate ordered field tuples and keep those with a clean order.

    Deterministic: tuples are tried in palette order by increasing length
    and results sorted by canonical key; near-duplicate directions of the
    same order are dropped (cosine similarity above the threshold).
    """
    x_o = tuple(float(v) for v in x_o)
    cache = JetCache(system, x_o)
    names = list(system.palette().keys())
    found = []
    evaluated = 0
    exhausted = False
    for length in range(1, length_max + 1):
        for combo in itertools.product(names, repeat=length):
            if evaluated >= budget:
                exhausted = True
                break
            evaluated += 1
            fields = [cache.field(nm, max(k_max - 1, 1)) for nm in combo]
            us = _target_germs(system, target, cache.x_o, k_max, cache)
            try:
                seq = boxplus_vector_sequence(fields, us, k_max, group=combo)
            except Exception:
                continue
            tol_abs = tol * max(1.0, seq.scale)
            first = None
            for r in range(1, k_max + 1):
                v = np.atleast_1d(seq.orders[r - 1]).astype(float)
                if np.linalg.norm(v, np.inf) > tol_abs:
                    first = (r, v)
                    break
            if first is None:
                continue
            r, v = first
            if r == 1 and length > 1:
                continue  # first-order groups are single fields by convention
            if fat and float(v[0]) >= 0:
                continue
            direction = v / math.factorial(r)
            found.append((GroupSpec(combo, r), direction))
        if exhausted:
            break

    kept = []
    for spec, direction in found:
        dup = False
        for kspec, kdir in kept:
            if kspec.order != spec.order:
                continue
            na, nb = np.linalg.norm(direction), np.linalg.norm(kdir)
            if na == 0 or nb == 0:
                continue
            if float(direction @ kdir) / (na * nb) > dedupe_cos:
                dup = True
                break
        if not dup:
            kept.append((spec, direction))
    kept.sort(key=lambda sd: sd[0].key())
    return SearchResult([s for s, _ in kept], evaluated, exhausted)

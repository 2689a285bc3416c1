"""Positive-basis decisions with constructive witnesses.

A family of columns is a positive basis of R^h iff it has full rank h and
admits a strictly positive null combination; the margin LP below decides
that with a quantified margin rather than a bare feasibility bit.

Boundary variant. The certification layer needs the condition "for all
p in R^h and r >= 0 there is lambda >= 0 with A lambda = p and
s.lambda >= r". We decide it as three LP-checkable parts:

1. the stacked matrix [A; s] has rank h+1,
2. the columns of A are a positive basis of R^h,
3. there is mu >= 0 with A mu = 0 and s.mu = 1.

Equivalence: given (2) pick lambda_p >= 0 with A lambda_p = p, then
lambda = lambda_p + c mu with c = max(0, r - s.lambda_p) satisfies both
requirements by superposition, since A mu = 0. Conversely the quantified
condition at p = 0, r = 1 yields mu' >= 0 with A mu' = 0, s.mu' >= 1,
and mu = mu'/(s.mu') is the witness of (3); taking r = 0 gives (2); the
rank condition is part of the original statement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegenerateInputError, NumericalBreakdownError

RANK_TOL = 1e-9
MARGIN_TOL = 1e-9


# ---------------------------------------------------------------------------
# dense two-phase simplex, Bland's rule

@dataclass
class SimplexResult:
    status: str          # "optimal" | "infeasible"
    x: np.ndarray | None
    objective: float | None
    pivots: int = 0


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]
    basis[row] = col


def _simplex_core(T, basis, costs, tol, max_pivots, pivots_done):
    """Minimize costs.x on the dictionary T = B^-1 [A | b]; Bland's rule."""
    p, qb = T.shape
    q = qb - 1
    pivots = pivots_done
    while True:
        cb = costs[basis]
        reduced = costs[:q] - cb @ T[:, :q]
        entering = -1
        for j in range(q):
            if reduced[j] < -tol:
                entering = j
                break
        if entering < 0:
            obj = float(cb @ T[:, -1])
            return obj, pivots
        ratios = []
        for r in range(p):
            a = T[r, entering]
            if a > tol:
                ratios.append((T[r, -1] / a, basis[r], r))
        if not ratios:
            # unbounded; callers pose bounded problems, treat as breakdown
            raise NumericalBreakdownError("simplex detected an unbounded ray")
        theta = min(t for t, _, _ in ratios)
        # Bland tie-break: smallest basis variable index among the minimizers
        row = min((bi, r) for t, bi, r in ratios if t <= theta + tol)[1]
        _pivot(T, basis, row, entering)
        pivots += 1
        if pivots > max_pivots:
            raise NumericalBreakdownError(
                f"simplex exceeded {max_pivots} pivots")


def simplex_min(c, A, b, tol=MARGIN_TOL, max_pivots=10000):
    """min c.x subject to A x = b, x >= 0 (dense, small).

    Two phases with artificial variables; returns a vertex solution.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    p, q = A.shape
    A = A.copy()
    for r in range(p):
        if b[r] < 0:
            A[r] *= -1.0
            b[r] *= -1.0

    # phase 1
    T = np.hstack([A, np.eye(p), b.reshape(-1, 1)])
    basis = list(range(q, q + p))
    costs1 = np.concatenate([np.zeros(q), np.ones(p)])
    obj1, pivots = _simplex_core(T, basis, costs1, tol, max_pivots, 0)
    if obj1 > tol:
        return SimplexResult("infeasible", None, None, pivots)

    # drive artificials out of the basis, drop redundant rows
    keep = []
    for r in range(len(basis)):
        if basis[r] >= q:
            col = next((j for j in range(q) if abs(T[r, j]) > tol), None)
            if col is None:
                continue  # redundant constraint
            _pivot(T, basis, r, col)
            pivots += 1
        keep.append(r)
    T = T[keep][:, list(range(q)) + [q + p]]
    basis = [basis[r] for r in keep]

    obj, pivots = _simplex_core(T, basis, c, tol, max_pivots, pivots)
    x = np.zeros(q)
    for r, j in enumerate(basis):
        x[j] = T[r, -1]
    return SimplexResult("optimal", x, obj, pivots)


def lp_feasible(A_eq, b_eq, lower=None, tol=MARGIN_TOL):
    """A witness x with A_eq x = b_eq and x >= lower (default 0), or None.

    The witness is a vertex of the shifted feasible polytope.
    """
    A_eq = np.asarray(A_eq, dtype=float)
    b_eq = np.asarray(b_eq, dtype=float)
    m = A_eq.shape[1]
    if lower is None:
        lower = np.zeros(m)
    lower = np.asarray(lower, dtype=float)
    res = simplex_min(np.zeros(m), A_eq, b_eq - A_eq @ lower, tol=tol)
    if res.status != "optimal":
        return None
    return res.x + lower


def lp_minimize(c, A_eq, b_eq, lower=None, tol=MARGIN_TOL):
    """Minimize c.x under A_eq x = b_eq, x >= lower; None when infeasible."""
    A_eq = np.asarray(A_eq, dtype=float)
    b_eq = np.asarray(b_eq, dtype=float)
    m = A_eq.shape[1]
    if lower is None:
        lower = np.zeros(m)
    lower = np.asarray(lower, dtype=float)
    res = simplex_min(np.asarray(c, float), A_eq, b_eq - A_eq @ lower, tol=tol)
    if res.status != "optimal":
        return None
    return res.x + lower


# ---------------------------------------------------------------------------
# positive basis certificates

@dataclass
class SpanCertificate:
    verdict: bool
    rank: int
    witness: np.ndarray | None = None       # lambda >= 0, A lambda = 0, sum = 1
    margin: float = float("-inf")           # optimal min_i lambda_i
    residual: float = float("inf")
    boundary_witness: np.ndarray | None = None  # mu >= 0, A mu = 0, s.mu = 1
    boundary_residual: float | None = None
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "verdict": bool(self.verdict),
            "rank": int(self.rank),
            "witness": None if self.witness is None else [float(v) for v in self.witness],
            "margin": float(self.margin),
            "residual": float(self.residual),
            "boundary_witness": None if self.boundary_witness is None
            else [float(v) for v in self.boundary_witness],
            "boundary_residual": None if self.boundary_residual is None
            else float(self.boundary_residual),
            "notes": self.notes,
        }


def _validate_columns(A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        raise DegenerateInputError("empty matrix")
    norms = np.linalg.norm(A, axis=0)
    scale = max(norms.max(), 1e-300)
    if (norms <= 1e-12 * scale).any():
        raise DegenerateInputError("matrix has a zero column")
    return A


def matrix_rank(A, tol_factor=RANK_TOL):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    _, R, _ = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    thresh = tol_factor * max(np.linalg.norm(A, 2), 1e-300)
    return int((diag > thresh).sum())


def is_positive_basis(A) -> SpanCertificate:
    """Decide whether the columns of A positively span R^h.

    Verdict is true iff rank(A) = h and the margin LP
    ``max t : A lambda = 0, sum lambda = 1, lambda_i >= t`` has a
    strictly positive optimum; the certificate carries the optimal
    lambda with sum 1.
    """
    A = _validate_columns(A)
    h, m = A.shape
    rank = matrix_rank(A)

    # variables: mu (m) >= 0, tp >= 0, tn >= 0 with lambda = mu + (tp - tn)
    ones = np.ones((m, 1))
    A1 = A @ ones
    eq = np.zeros((h + 1, m + 2))
    eq[:h, :m] = A
    eq[:h, m] = A1[:, 0]
    eq[:h, m + 1] = -A1[:, 0]
    eq[h, :m] = 1.0
    eq[h, m] = m
    eq[h, m + 1] = -m
    rhs = np.zeros(h + 1)
    rhs[h] = 1.0
    cost = np.zeros(m + 2)
    cost[m] = -1.0
    cost[m + 1] = 1.0
    res = simplex_min(cost, eq, rhs)

    if res.status != "optimal":
        return SpanCertificate(False, rank, None, float("-inf"), float("inf"),
                               notes={"lp": "infeasible"})
    t = res.x[m] - res.x[m + 1]
    lam = res.x[:m] + t
    residual = float(np.linalg.norm(A @ lam))
    verdict = rank == h and t > MARGIN_TOL
    return SpanCertificate(verdict, rank, lam, float(t), residual)


def check_boundary(A, s) -> SpanCertificate:
    """Boundary-variant spanning test for a target with one inequality.

    See the module docstring for the three-part decomposition and its
    equivalence with the quantified condition.
    """
    A = _validate_columns(A)
    h, m = A.shape
    s = np.asarray(s, dtype=float).reshape(-1)
    if s.shape[0] != m:
        raise DegenerateInputError(f"s has length {s.shape[0]}, expected {m}")
    stacked = np.vstack([A, s])
    rank = matrix_rank(stacked)
    interior = is_positive_basis(A)

    target = np.zeros(h + 1)
    target[h] = 1.0
    mu = lp_feasible(stacked, target)
    boundary_residual = None if mu is None else float(
        np.linalg.norm(stacked @ mu - target))

    verdict = (rank == h + 1) and interior.verdict and mu is not None
    return SpanCertificate(
        verdict, rank, interior.witness, interior.margin, interior.residual,
        boundary_witness=mu, boundary_residual=boundary_residual,
        notes={"interior_verdict": bool(interior.verdict)})


def eccentricity(lam):
    """min over max component of a strictly positive null combination."""
    lam = np.asarray(lam, dtype=float)
    if lam.size == 0 or (lam <= 0).any():
        raise DegenerateInputError("eccentricity needs a strictly positive witness")
    return float(lam.min() / lam.max())

"""Constructive solver for the perturbed positive-basis equation.

Given a matrix A_o whose columns positively span R^h, a small matrix
perturbation gamma(tau) and a right-hand side rho(tau), find tau >= 0 in
the box {tau >= 0, |tau| <= delta} with

    (A_o + gamma(tau)) tau = rho(tau).

The solver runs the fixed-point map of the existence proof: a null
witness b_o with floor M+1 absorbs the perturbation, an invertible
column block A_1 steers in any unit direction X via
beta(tau, X) = b_o + b_#(tau) + (A_1(tau)^{-1} X, 0...0), and
Phi(tau) = |rho(tau)| beta(tau, rho/|rho|) maps the nonnegative part of
the delta-ball to itself. Iteration is damped on stall and clipped to
the domain; a derivative-free residual minimizer over the box is the
fallback when Phi-iteration stalls. Every returned solution is verified
against the equation residual and the bound |tau| <= K sup|rho| with
K = |b_o| + 1 + M.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import (BudgetExceededError, InfeasibleWitnessError,
                     NoConvergenceError, RankDeficientError)
from .posbasis import SpanCertificate, is_positive_basis, lp_minimize, matrix_rank


@dataclass
class PetrovProblem:
    A: np.ndarray                      # h x m, columns a positive basis of R^h
    gamma: object                      # callable tau -> (h x m) perturbation
    rho: object                        # callable tau -> vector in R^h
    delta: float = 0.5                 # box radius for tau
    s: np.ndarray | None = None        # extra row for the boundary variant
    tol: float = 1e-10
    max_iters: int = 10000
    certificate: SpanCertificate | None = None

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if self.s is not None:
            self.s = np.asarray(self.s, dtype=float).reshape(-1)


@dataclass
class PetrovSolution:
    tau: np.ndarray
    residual: float
    iterations: int
    K: float
    sup_rho: float
    bound_ok: bool
    branch: str                        # "fixed-point" | "minimizer" | "trivial"
    clip_count: int = 0
    slack: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "tau": [float(v) for v in self.tau],
            "residual": float(self.residual),
            "iterations": int(self.iterations),
            "K": float(self.K),
            "sup_rho": float(self.sup_rho),
            "bound_ok": bool(self.bound_ok),
            "branch": self.branch,
            "clip_count": int(self.clip_count),
            "slack": None if self.slack is None else float(self.slack),
        }


def select_invertible_block(A):
    """Columns of a well-conditioned h x h block, by column-pivoted QR.

    Returns (block column indices, |det| of the block).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    h, m = A.shape
    if matrix_rank(A) < h:
        raise RankDeficientError(f"matrix rank below {h}")
    _, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    block = np.sort(piv[:h])
    det = abs(np.linalg.det(A[:, block]))
    return block, det


def null_witness(A, floor):
    """b with A b = 0 and b_i >= floor, of minimal component sum."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m = A.shape[1]
    lower = np.full(m, float(floor))
    b = lp_minimize(np.ones(m), A, np.zeros(A.shape[0]), lower=lower)
    if b is None:
        raise InfeasibleWitnessError(
            "no positive null combination with the requested floor")
    return b


def _box_samples(m, delta, levels=(0.0, 1.0), extra_center=True):
    pts = [np.array(p) * delta for p in itertools.product(levels, repeat=m)]
    if extra_center:
        pts.append(np.full(m, delta / 2.0))
    return pts


def _estimate_block_bound(problem, block, samples):
    """1.5 x max over box samples of ||A_1(tau)^{-1}||."""
    worst = 0.0
    for tau in samples:
        A1 = (problem.A + problem.gamma(tau))[:, block]
        det = abs(np.linalg.det(A1))
        if det < 1e-14:
            raise BudgetExceededError(
                "perturbed column block loses invertibility on the box")
        worst = max(worst, np.linalg.norm(np.linalg.inv(A1), 2))
    return 1.5 * worst


def _check_budget(problem, block, bo, samples):
    for tau in samples:
        g = problem.gamma(tau)
        A1 = (problem.A + g)[:, block]
        lift = np.linalg.solve(A1, g @ bo)
        if np.linalg.norm(lift, np.inf) > 1.0 + 1e-9:
            raise BudgetExceededError(
                "perturbation exceeds what the null witness can absorb "
                f"(|A_1^-1 gamma b_o| = {np.linalg.norm(lift, np.inf):.3g} > 1)")


def _sup_rho(problem, samples):
    return max(float(np.linalg.norm(problem.rho(tau))) for tau in samples)


def _phi(problem, block, bo, tau):
    r = np.asarray(problem.rho(tau), dtype=float)
    nr = np.linalg.norm(r)
    m = problem.A.shape[1]
    if nr == 0.0:
        return np.zeros(m)
    g = problem.gamma(tau)
    A1 = (problem.A + g)[:, block]
    b = bo.copy()
    b[block] -= np.linalg.solve(A1, g @ bo)
    beta = b.copy()
    beta[block] += np.linalg.solve(A1, r / nr)
    return nr * beta


def _residual(problem, tau):
    return float(np.linalg.norm((problem.A + problem.gamma(tau)) @ tau
                                - problem.rho(tau)))


def _clip(tau, delta):
    clipped = np.maximum(tau, 0.0)
    changed = not np.array_equal(clipped, tau)
    norm = np.linalg.norm(clipped)
    if norm > delta:
        clipped = clipped * (delta / norm)
        changed = True
    return clipped, changed


def solve(problem: PetrovProblem) -> PetrovSolution:
    """Find tau >= 0 with (A_o + gamma(tau)) tau = rho(tau) in the box."""
    A = problem.A
    h, m = A.shape
    cert = problem.certificate or is_positive_basis(A)
    if not cert.verdict:
        raise RankDeficientError("columns are not a positive basis of R^h")

    block, _ = select_invertible_block(A)
    corner_dims = min(m, 10)  # corner sampling saturates quickly
    samples = _box_samples(m, problem.delta) if m <= corner_dims else \
        _box_samples(m, problem.delta, levels=(0.0, 0.5, 1.0)[:2])
    M = _estimate_block_bound(problem, block, samples)
    bo = null_witness(A, M + 1.0)
    K = float(np.linalg.norm(bo) + 1.0 + M)
    _check_budget(problem, block, bo, samples)
    sup_rho = _sup_rho(problem, samples)
    if sup_rho > problem.delta / K * (1.0 + 1e-9):
        raise BudgetExceededError(
            f"sup|rho| = {sup_rho:.3g} exceeds delta/K = {problem.delta / K:.3g}")

    tau = np.zeros(m)
    best_tau, best_res = tau, _residual(problem, tau)
    clip_count = 0
    omega = 1.0
    stall = 0
    iters = 0
    if best_res <= problem.tol:
        return PetrovSolution(tau, best_res, 0, K, sup_rho, True, "trivial")

    for iters in range(1, problem.max_iters + 1):
        target = _phi(problem, block, bo, tau)
        tau_new = tau + omega * (target - tau)
        tau_new, changed = _clip(tau_new, problem.delta)
        clip_count += changed
        res = _residual(problem, tau_new)
        if res < best_res - 1e-16:
            best_res, best_tau = res, tau_new
            stall = 0
        else:
            stall += 1
            if stall >= 5:
                omega = max(omega * 0.5, 1e-3)
                stall = 0
        tau = tau_new
        if res <= problem.tol:
            best_res, best_tau = res, tau
            break
        if omega <= 1e-3 and iters > 50:
            break

    branch = "fixed-point"
    if best_res > problem.tol:
        branch = "minimizer"
        out = scipy.optimize.minimize(
            lambda t: _residual(problem, np.asarray(t)) ** 2,
            best_tau, method="Nelder-Mead",
            bounds=[(0.0, problem.delta)] * m,
            options={"maxiter": 4000, "xatol": 1e-14, "fatol": 1e-26})
        cand, _ = _clip(np.asarray(out.x), problem.delta)
        res = _residual(problem, cand)
        if res < best_res:
            best_res, best_tau = res, cand
    if best_res > problem.tol:
        raise NoConvergenceError(
            f"residual {best_res:.3g} above tolerance {problem.tol:.3g}",
            best_residual=best_res)

    bound_ok = float(np.linalg.norm(best_tau)) <= K * sup_rho * (1.0 + 1e-6) + 1e-12
    return PetrovSolution(best_tau, best_res, iters, K, sup_rho, bound_ok,
                          branch, clip_count)


def solve_boundary(problem: PetrovProblem) -> PetrovSolution:
    """Boundary variant: equality in the first h rows, surplus allowed in the
    last; returns tau >= 0 and the nonnegative slack of the extra row."""
    if problem.s is None:
        raise ValueError("boundary solve needs the extra row s")
    A, s = problem.A, problem.s
    h, m = A.shape
    from .posbasis import check_boundary

    cert = problem.certificate
    if cert is None or cert.boundary_witness is None:
        cert = check_boundary(A, s)
    if not cert.verdict:
        raise BudgetExceededError("boundary spanning condition fails")
    mu = cert.boundary_witness

    gamma_full, rho_full = problem.gamma, problem.rho
    interior = PetrovProblem(
        A, lambda t: gamma_full(t)[:h], lambda t: rho_full(t)[:h],
        delta=problem.delta, tol=problem.tol, max_iters=problem.max_iters)

    block, _ = select_invertible_block(A)
    samples = _box_samples(m, problem.delta) if m <= 10 else \
        _box_samples(m, problem.delta, levels=(0.0, 1.0))
    M = _estimate_block_bound(interior, block, samples)
    bo = null_witness(A, M + 1.0)
    K = float(np.linalg.norm(bo) + 1.0 + M)
    _check_budget(interior, block, bo, samples)
    sup_rho = max(float(np.linalg.norm(rho_full(t))) for t in samples)
    if sup_rho > problem.delta / K * (1.0 + 1e-9):
        raise BudgetExceededError(
            f"sup|rho| = {sup_rho:.3g} exceeds delta/K = {problem.delta / K:.3g}")

    def last_row_shortfall(tau):
        full = (np.vstack([A, s]) + gamma_full(tau)) @ tau - rho_full(tau)
        return -float(full[h])

    def combined_residual(tau):
        full = (np.vstack([A, s]) + gamma_full(tau)) @ tau - rho_full(tau)
        eq = np.linalg.norm(full[:h])
        return float(np.hypot(eq, max(0.0, -full[h])))

    tau = np.zeros(m)
    best_tau, best_res = tau, combined_residual(tau)
    clip_count = 0
    iters = 0
    for iters in range(1, problem.max_iters + 1):
        target = _phi(interior, block, bo, tau)
        short = last_row_shortfall(target)
        if short > 0:
            target = target + short * mu
        tau_new, changed = _clip(target, problem.delta)
        clip_count += changed
        res = combined_residual(tau_new)
        if res < best_res:
            best_res, best_tau = res, tau_new
        tau = tau_new
        if res <= problem.tol:
            break

    branch = "fixed-point"
    if best_res > problem.tol:
        branch = "minimizer"
        out = scipy.optimize.minimize(
            lambda t: combined_residual(np.asarray(t)) ** 2,
            best_tau, method="Nelder-Mead",
            bounds=[(0.0, problem.delta)] * m,
            options={"maxiter": 4000, "xatol": 1e-14, "fatol": 1e-26})
        cand, _ = _clip(np.asarray(out.x), problem.delta)
        res = combined_residual(cand)
        if res < best_res:
            best_res, best_tau = res, cand
    if best_res > problem.tol:
        raise NoConvergenceError(
            f"residual {best_res:.3g} above tolerance {problem.tol:.3g}",
            best_residual=best_res)

    full = (np.vstack([A, s]) + gamma_full(best_tau)) @ best_tau - rho_full(best_tau)
    slack = max(0.0, float(full[h]))
    bound_ok = float(np.linalg.norm(best_tau)) <= K * sup_rho * (1.0 + 1e-6) + 1e-12
    return PetrovSolution(best_tau, best_res, iters, K, sup_rho, bound_ok,
                          branch, clip_count, slack=slack)

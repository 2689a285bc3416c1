"""Balanced switched trajectories: simulation, reach construction, fits.

The reach construction follows the sufficiency proofs, so every time it
reports is an upper bound on the true minimum time; the empirical Holder
fit therefore validates the inequality direction of the regularity
estimate, nothing stronger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .errors import (BudgetExceededError, InsufficientSamplesError,
                     NoConvergenceError, NotInBasinError, StepUnderflowError)
from .hamiltonian import boxplus_vector_sequence
from .engine import JetCache, _target_germs
from .petrov import PetrovProblem, solve, solve_boundary
from .sampling import circle_directions, unit_directions


def compile_field(fdef, variables):
    """Fast tuple-in/tuple-out callable for one vector field."""
    names = [f"v{i}" for i in range(len(variables))]
    body = ", ".join(ex.to_python_source(c, names) for c in fdef.components)
    src = f"def _f({', '.join(names)}):\n    return ({body},)\n"
    ns = {"math": math}
    exec(src, ns)
    fn = ns["_f"]

    def call(x, _fn=fn):
        return _fn(*x)

    return call


class FieldRuntime:
    """Compiled palette fields of one system, built lazily."""

    def __init__(self, system):
        self.system = system
        self._fns = {}

    def __call__(self, name):
        if name not in self._fns:
            self._fns[name] = compile_field(
                self.system.palette_field(name), self.system.variables)
        return self._fns[name]


def _rk4_leg(f, x, duration, steps, record=None, t0=0.0):
    if duration == 0.0:
        return x
    if duration / steps < 1e-15:
        raise StepUnderflowError(
            f"leg duration {duration:g} over {steps} steps underflows")
    h = duration / steps
    h2 = 0.5 * h
    h6 = h / 6.0
    t = t0
    for _ in range(steps):
        k1 = f(x)
        k2 = f(tuple(xi + h2 * ki for xi, ki in zip(x, k1)))
        k3 = f(tuple(xi + h2 * ki for xi, ki in zip(x, k2)))
        k4 = f(tuple(xi + h * ki for xi, ki in zip(x, k3)))
        x = tuple(xi + h6 * (a + 2.0 * (b + c) + d)
                  for xi, a, b, c, d in zip(x, k1, k2, k3, k4))
        t += h
        if record is not None:
            record.append((t,) + x)
    return x


@dataclass(frozen=True)
class SwitchSchedule:
    legs: tuple                    # (field name, duration) pairs

    def __post_init__(self):
        object.__setattr__(self, "legs", tuple(self.legs))
        if any(d < 0 for _, d in self.legs):
            raise ValueError("leg durations must be nonnegative")

    @classmethod
    def balanced(cls, names, t):
        return cls(tuple((nm, float(t)) for nm in names))

    @classmethod
    def from_groups(cls, specs, tau):
        """Reference schedule: group i contributes legs of tau_i^(1/k_i)."""
        legs = []
        for spec, ti in zip(specs, tau):
            dur = float(ti) ** (1.0 / spec.order) if ti > 0 else 0.0
            legs += [(nm, dur) for nm in spec.fields]
        return cls(tuple(legs))

    @property
    def total_time(self):
        return sum(d for _, d in self.legs)

    def checkpoints(self):
        out, t = [], 0.0
        for _, d in self.legs:
            t += d
            out.append(t)
        return out


@dataclass
class SimResult:
    samples: np.ndarray            # rows (t, x_1..x_n)
    end_state: tuple
    steps_total: int
    err_estimate: float | None = None
    exited_locality: bool = False


def _simulate(runtime, schedule, x0, steps_per_leg):
    x = tuple(float(v) for v in x0)
    for name, dur in schedule.legs:
        if dur == 0.0:
            continue
        x = _rk4_leg(runtime(name), x, dur, steps_per_leg)
    return x


def integrate_switched(system, schedule, x0, *, steps_per_leg=1000,
                       runtime=None, x_center=None, radius=None,
                       richardson=True):
    """Fixed-step RK4 over the switching schedule, exact at leg boundaries."""
    runtime = runtime or FieldRuntime(system)
    x = tuple(float(v) for v in x0)
    rows = [(0.0,) + x]
    t0 = 0.0
    for name, dur in schedule.legs:
        if dur == 0.0:
            continue
        x = _rk4_leg(runtime(name), x, dur, steps_per_leg, record=rows, t0=t0)
        t0 += dur
    samples = np.array(rows)
    err = None
    if richardson and steps_per_leg >= 2:
        half = _simulate(runtime, schedule, x0, max(1, steps_per_leg // 2))
        err = float(np.linalg.norm(np.array(x) - np.array(half))) / 15.0
    exited = False
    if x_center is not None and radius is not None:
        d = np.linalg.norm(samples[:, 1:] - np.asarray(x_center), axis=1)
        exited = bool((d > radius).any())
    steps = sum(steps_per_leg for _, d in schedule.legs if d > 0.0)
    return SimResult(samples, x, steps, err, exited)


# ---------------------------------------------------------------------------
# expansion validation

@dataclass
class ResidualFit:
    slope: float | None
    table: list                    # (t, residual)
    degenerate: bool = False
    note: str = ""


def expansion_residual_order(system, field_names, u, x_o, k, *,
                             t_grid=None, steps_per_leg=1000, tol_floor=1e-13):
    """Fit the log-log rate of the truncated-series residual along the
    balanced trajectory of the listed fields.

    For analytic data the residual is O(t^{k+1}); residuals at the
    rounding floor are dropped, and if too few points survive the fit is
    reported as degenerate rather than failed.
    """
    x_o = tuple(float(v) for v in x_o)
    if t_grid is None:
        t_grid = np.geomspace(1e-3, 1e-1, 12)
    cache = JetCache(system, x_o)
    fields = [cache.field(nm, max(k - 1, 1)) for nm in field_names]
    u_germ = cache.scalar(("resid", 0), u, k)
    seq = boxplus_vector_sequence(fields, [u_germ], k, group=tuple(field_names))
    coeffs = [float(np.atleast_1d(v)[0]) for v in seq.orders]
    u_fn = ex.compile_scalar(u, system.variables)
    u0 = u_fn(x_o)
    runtime = FieldRuntime(system)
    rows = []
    for t in t_grid:
        end = _simulate(runtime, SwitchSchedule.balanced(field_names, t),
                        x_o, steps_per_leg)
        series = u0 + sum(c * t**(i + 1) / math.factorial(i + 1)
                          for i, c in enumerate(coeffs))
        rows.append((float(t), abs(u_fn(end) - series)))
    floor = tol_floor * max(1.0, seq.scale)
    usable = [(t, r) for t, r in rows if r > floor]
    if len(usable) < 3:
        return ResidualFit(None, rows, degenerate=True,
                           note="residuals at rounding floor")
    logs = np.log(np.array(usable))
    slope = float(np.polyfit(logs[:, 0], logs[:, 1], 1)[0])
    return ResidualFit(slope, rows)


# ---------------------------------------------------------------------------
# reach construction

@dataclass
class MinTimeEstimate:
    start: tuple
    reached: bool
    T_est: float
    residual: float
    tau: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "start": [float(v) for v in self.start],
            "reached": bool(self.reached),
            "T_est": float(self.T_est),
            "residual": float(self.residual),
            "tau": None if self.tau is None else [float(v) for v in self.tau],
            "diagnostics": self.diagnostics,
        }


def _reach_fat(system, target, x_o, certificate, start, sigma, *,
               reach_tol, steps_per_leg, runtime, scan=60, max_bisect=200):
    names = certificate.groups[0].group.fields
    m = len(names)
    if target.comparison is not None:
        u_fns = [ex.compile_scalar(target.comparison, system.variables)]
    else:
        u_fns = [ex.compile_scalar(u, system.variables) for u in target.inequalities]
    base = [fn(tuple(x_o)) for fn in u_fns]

    def gap(t):
        if t == 0.0:
            end = tuple(start)
        else:
            end = _simulate(runtime, SwitchSchedule.balanced(names, t),
                            start, steps_per_leg)
        return max(fn(end) - b for fn, b in zip(u_fns, base))

    g0 = gap(0.0)
    if g0 <= 0.0:
        return MinTimeEstimate(tuple(start), True, 0.0, 0.0,
                               diagnostics={"branch": "inside"})
    lo, hi = 0.0, None
    for t in np.geomspace(1e-5 * sigma, sigma, scan):
        if gap(t) <= 0.0:
            hi = t
            break
        lo = t
    if hi is None:
        raise NotInBasinError(
            f"no admissible switching time up to sigma = {sigma:g}")
    g_hi = gap(hi)
    for _ in range(max_bisect):
        if -g_hi <= reach_tol or hi - lo <= 1e-16 * sigma:
            break
        mid = 0.5 * (lo + hi)
        g_mid = gap(mid)
        if g_mid <= 0.0:
            hi, g_hi = mid, g_mid
        else:
            lo = mid
    return MinTimeEstimate(tuple(start), True, m * hi, abs(g_hi),
                           tau=np.array([hi]),
                           diagnostics={"branch": "bisection", "t_leg": hi})


def _reach_petrov(system, target, x_o, certificate, start, sigma, *,
                  reach_tol, steps_per_leg, runtime):
    specs = [c.group for c in certificate.groups]
    A = np.asarray(certificate.A, dtype=float)
    boundary = certificate.s is not None
    h, m = A.shape
    x_o = tuple(float(v) for v in x_o)

    if target is None or target.kind == "point":
        def u_of(state):
            return np.asarray(state, dtype=float) - np.asarray(x_o)
        u_rows = None
    else:
        exprs = list(target.equations)
        if boundary:
            exprs += list(target.inequalities)
        u_rows = [ex.compile_scalar(e, system.variables) for e in exprs]
        u_base = np.array([fn(x_o) for fn in u_rows])

        def u_of(state):
            return np.array([fn(tuple(state)) for fn in u_rows]) - u_base

    J = sum(s.legs for s in specs)
    ratio = sigma / max(J, 1)
    delta = min(1.0, min(ratio**s.order for s in specs))

    sim_cache = {}

    def endpoints(tau):
        key = tuple(np.round(tau, 15))
        if key not in sim_cache:
            sched = SwitchSchedule.from_groups(specs, tau)
            ref = _simulate(runtime, sched, x_o, steps_per_leg)
            act = _simulate(runtime, sched, start, steps_per_leg)
            sim_cache[key] = (ref, act)
        return sim_cache[key]

    rows = h + 1 if boundary else h
    full = np.vstack([A, certificate.s]) if boundary else A

    def gamma(tau):
        tau = np.asarray(tau, dtype=float)
        ref, _ = endpoints(tau)
        total = float(tau.sum())
        resid = u_of(ref) - full @ tau
        if total <= 0.0:
            return np.zeros((rows, m))
        return np.outer(resid / total, np.ones(m))

    def rho(tau):
        ref, act = endpoints(np.asarray(tau, dtype=float))
        return u_of(ref) - u_of(act)

    problem = PetrovProblem(A, gamma, rho, delta=delta, tol=reach_tol,
                            s=certificate.s if boundary else None,
                            certificate=certificate.span)
    try:
        sol = solve_boundary(problem) if boundary else solve(problem)
    except BudgetExceededError as exc:
        raise NotInBasinError(str(exc)) from exc
    except NoConvergenceError as exc:
        return MinTimeEstimate(tuple(start), False, float("nan"),
                               exc.best_residual or float("nan"),
                               diagnostics={"branch": "petrov-failed"})

    tau = sol.tau
    T_est = sum(s.legs * float(t) ** (1.0 / s.order) if t > 0 else 0.0
                for s, t in zip(specs, tau))
    _, act = endpoints(tau)
    final = u_of(act)
    if boundary:
        residual = float(np.linalg.norm(final[:h]))
        slack_ok = final[h] >= -reach_tol
        reached = residual <= reach_tol * 10 and slack_ok
    else:
        residual = float(np.linalg.norm(final))
        reached = residual <= reach_tol * 10
    return MinTimeEstimate(tuple(start), reached, T_est, residual, tau=tau,
                           diagnostics={"branch": sol.branch,
                                        "petrov": sol.to_dict()})


def reach_target(system, target, x_o, certificate, start, *, bounds=None,
                 reach_tol=1e-6, steps_per_leg=1000, runtime=None, sigma=None):
    """Drive one start point to the target along the certificate's groups."""
    runtime = runtime or FieldRuntime(system)
    if sigma is None:
        if bounds is not None:
            sigma = bounds.sigma
        else:
            from .engine import estimate_bounds
            sigma = estimate_bounds(system, x_o, n_points=64).sigma
    sigma = min(sigma, 1e6)
    if certificate.theorem.startswith("fat"):
        return _reach_fat(system, target, x_o, certificate, start, sigma,
                          reach_tol=reach_tol, steps_per_leg=steps_per_leg,
                          runtime=runtime)
    return _reach_petrov(system, target, x_o, certificate, start, sigma,
                         reach_tol=reach_tol, steps_per_leg=steps_per_leg,
                         runtime=runtime)


# ---------------------------------------------------------------------------
# Holder exponent fit

@dataclass
class HolderFit:
    exponent: float
    constant: float
    table: list                    # (radius, direction index, T_est)
    n_reached: int
    envelope: list                 # (radius, max T_est)

    def to_dict(self):
        return {
            "exponent": float(self.exponent),
            "constant": float(self.constant),
            "n_reached": int(self.n_reached),
            "envelope": [[float(a), float(b)] for a, b in self.envelope],
        }


def holder_fit(system, target, x_o, certificate, *, radii=None, n_dirs=16,
               r_min=1e-4, r_max=1e-2, bounds=None, reach_tol=1e-6,
               steps_per_leg=200, seed=0):
    """Sample starts on shells around x_o, reach the target, and fit
    log T against log |x - x_o| on the per-radius upper envelope."""
    x_o = np.asarray(x_o, dtype=float)
    n = x_o.shape[0]
    if radii is None:
        radii = np.geomspace(r_min, r_max, 8)
    dirs = circle_directions(n_dirs) if n == 2 else unit_directions(n_dirs, n, seed=seed)
    runtime = FieldRuntime(system)
    if bounds is None:
        from .engine import estimate_bounds
        bounds = estimate_bounds(system, tuple(x_o), n_points=64)

    table = []
    envelope = []
    reached_count = 0
    for r in radii:
        best = 0.0
        any_reached = False
        for di, d in enumerate(dirs):
            start = tuple(x_o + r * d)
            try:
                est = reach_target(system, target, tuple(x_o), certificate,
                                   start, bounds=bounds, reach_tol=reach_tol,
                                   steps_per_leg=steps_per_leg, runtime=runtime)
            except NotInBasinError:
                continue
            if est.reached:
                reached_count += 1
                any_reached = True
                best = max(best, est.T_est)
                table.append((float(r), di, float(est.T_est)))
        if any_reached and best > 0.0:
            envelope.append((float(r), best))
    if len(envelope) < 4:
        raise InsufficientSamplesError(
            f"only {len(envelope)} radii produced reaching trajectories")
    logs = np.log(np.array(envelope))
    slope, intercept = np.polyfit(logs[:, 0], logs[:, 1], 1)
    return HolderFit(float(slope), float(math.exp(intercept)), table,
                     reached_count, envelope)


# ---------------------------------------------------------------------------
# CSV artifacts

def write_trajectory_csv(path, sim):
    n = sim.samples.shape[1] - 1
    header = "t," + ",".join(f"x{i + 1}" for i in range(n))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in sim.samples:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def write_holder_csv(path, fit):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("radius,direction,T_est\n")
        for r, d, t in fit.table:
            fh.write(f"{r:.17g},{d},{t:.17g}\n")


def write_residual_csv(path, fit):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,residual\n")
        for t, r in fit.table:
            fh.write(f"{t:.17g},{r:.17g}\n")

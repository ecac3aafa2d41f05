"""Outer solvers for penalized recovery over the box-and-ball constraint set.

Three forward-backward variants minimize the lp-over-lq penalty:

* tr_vmfb_solve: trust-region variable-metric forward-backward. Each outer
  iteration tries a decreasing schedule of lq-ball-complement radii; the
  first inexact metric prox that lands inside the trusted region is kept.
* vmfb_solve: the single-trial special case (radius fixed at zero).
* fb_solve: fixed metric L I built from the global gradient Lipschitz bound.

Baselines: primal_dual_solve (Chambolle-Pock splitting; used for l1/l0/
SCAD/CEL0 whose constrained proxes are computed exactly by piecewise
candidate enumeration) and vmfb_halfquadratic_solve (variable metric from
the half-quadratic curvature; used for Cauchy/Welsch). warm_start_l1 runs a
fixed number of primal-dual l1 iterations from zero, the common
initializer of every benchmark run.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .operators import (
    Problem,
    kappa_bound,
    operator_norm_estimate,
    phi_value,
    project_ball,
    prox_metric_phi,
)
from .penalties import (
    PenaltySpec,
    SpoqParams,
    baseline_curvature,
    baseline_gradient,
    baseline_value,
    chi_curvature,
    in_lq_region,
    lq_norm,
    penalty_elementwise,
    spoq_gradient,
    spoq_lipschitz,
    spoq_metric_base,
    spoq_metric_bounds,
    spoq_value,
)

__all__ = [
    "SolverConfig",
    "IterateTrace",
    "InitializationError",
    "radius_schedule",
    "tr_vmfb_solve",
    "vmfb_solve",
    "fb_solve",
    "vmfb_halfquadratic_solve",
    "primal_dual_solve",
    "warm_start_l1",
]

logger = logging.getLogger(__name__)

_GAMMA_MIN = 1e-3
_GAMMA_MAX = 2.0 - 1e-3


class InitializationError(RuntimeError):
    """The starting point could not be brought into the feasible set."""


@dataclass(frozen=True)
class SolverConfig:
    """Shared solver settings.

    theta is the radius shrink factor, trials the number of radius attempts
    per outer iteration (the trust-region 'B'), gamma the relaxation step
    (clamped into (0, 2) with a margin), eps_stop the relative step-norm
    stopping tolerance. kappa of None selects the structural bound
    gamma^{-1} sqrt(nu_hi) automatically.
    """

    theta: float = 0.5
    trials: int = 10
    gamma: float = 1.9
    eps_stop: float = 1e-4
    max_outer: int = 1000
    max_inner: int = 5000
    kappa: float | None = None
    init_pd_iters: int = 10
    check_every: int = 10
    require_feasible_init: bool = True

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.eps_stop < 0.0:
            raise ValueError("eps_stop must be >= 0")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be >= 1")
        if not _GAMMA_MIN <= self.gamma <= _GAMMA_MAX:
            clamped = min(max(self.gamma, _GAMMA_MIN), _GAMMA_MAX)
            logger.warning("gamma=%g outside (%g, %g); clamped to %g", self.gamma, _GAMMA_MIN, _GAMMA_MAX, clamped)
            object.__setattr__(self, "gamma", clamped)


@dataclass
class IterateTrace:
    """Per-iteration record of one solver run.

    Row 0 is the (feasible) starting point; row k >= 1 the accepted iterate
    of outer iteration k. snr_db entries are NaN when no ground truth was
    supplied.
    """

    solver_id: str = ""
    objective: list[float] = field(default_factory=list)
    step_norm: list[float] = field(default_factory=list)
    radius: list[float] = field(default_factory=list)
    radius_index: list[int] = field(default_factory=list)
    inner_iterations: list[int] = field(default_factory=list)
    gamma_used: list[float] = field(default_factory=list)
    descent_margin: list[float] = field(default_factory=list)
    wall_time: list[float] = field(default_factory=list)
    snr_db: list[float] = field(default_factory=list)
    iterates: list[np.ndarray] | None = None
    warnings: list[str] = field(default_factory=list)
    converged: bool = False
    stop_reason: str = "max_outer"

    def __len__(self) -> int:
        return len(self.objective)

    @property
    def iterations(self) -> int:
        """Number of accepted outer iterations (row 0 excluded)."""
        return max(len(self.objective) - 1, 0)

    def append(self, *, objective, step_norm, radius, radius_index, inner_iterations,
               gamma_used, descent_margin, wall_time, snr_db, iterate=None):
        self.objective.append(float(objective))
        self.step_norm.append(float(step_norm))
        self.radius.append(float(radius))
        self.radius_index.append(int(radius_index))
        self.inner_iterations.append(int(inner_iterations))
        self.gamma_used.append(float(gamma_used))
        self.descent_margin.append(float(descent_margin))
        self.wall_time.append(float(wall_time))
        self.snr_db.append(float(snr_db))
        if self.iterates is not None and iterate is not None:
            self.iterates.append(np.array(iterate, copy=True))

    CSV_FIELDS = (
        "iteration",
        "wall_time_s",
        "objective",
        "step_norm",
        "radius",
        "radius_index",
        "inner_iterations",
        "gamma",
        "descent_margin",
        "snr_db",
    )

    def rows(self):
        for k in range(len(self.objective)):
            yield (
                k,
                self.wall_time[k],
                self.objective[k],
                self.step_norm[k],
                self.radius[k],
                self.radius_index[k],
                self.inner_iterations[k],
                self.gamma_used[k],
                self.descent_margin[k],
                self.snr_db[k],
            )


def radius_schedule(x, q: float, theta: float, trials: int) -> np.ndarray:
    """Decreasing trust-region radii for one outer iteration.

    Starts at the (rooted) lq norm of the iterate, shrinks by theta, and
    always ends with radius 0 so the final trial is unconstrained:
    trials = 1 gives (0,); x = 0 gives an all-zero schedule.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if trials == 1:
        return np.zeros(1)
    rho1 = lq_norm(x, q)
    radii = rho1 * theta ** np.arange(trials - 1, dtype=float)
    return np.concatenate([radii, [0.0]])


def descent_constant(nu_lo: float, gamma_max: float) -> float:
    """Guaranteed descent constant mu = nu_lo * (2 - gamma_max) / gamma_max.

    Every accepted outer step decreases the objective by at least
    (mu/2) * ||step||^2: condition (a) plus the quadratic majorant give a
    margin of (1/gamma - 1/2) * ||step||^2 in the metric norm, and the
    metric is bounded below by nu_lo. nu_lo is the curvature floor at the
    largest radius used (for the quadratic-majorant solvers) or the
    gradient Lipschitz constant (for the fixed-metric solver); gamma_max
    upper-bounds the step sizes actually used.
    """
    if not 0.0 < gamma_max < 2.0:
        raise ValueError("gamma_max must lie in (0, 2)")
    if nu_lo <= 0.0:
        raise ValueError("nu_lo must be positive")
    return nu_lo * (2.0 - gamma_max) / gamma_max


def _raw_snr(x_true, x) -> float:
    err = float(np.linalg.norm(np.asarray(x_true) - x))
    if err == 0.0:
        return math.inf
    return 20.0 * math.log10(float(np.linalg.norm(x_true)) / err)


def _feasibility_polish(problem: Problem, x0, op2: float, budget: int):
    """Project an infeasible start onto the constraint set (identity metric)."""
    zeros = np.zeros(problem.n)
    res = prox_metric_phi(
        x0, np.ones(problem.n), 1.0, problem, budget, kappa_bound(1.0, 1.0),
        anchor=x0, grad_at_anchor=zeros, op_norm_sq=op2, check_every=20,
    )
    return res.z, res.cond_a_satisfied and problem.is_feasible(res.z)


def _metric_engine(problem, config, x0, *, solver_id, value_fn, grad_fn, metric_prep,
                   radii_fn, nu_hi, region_q, x_true, keep_iterates):
    """Shared outer loop of the forward-backward family.

    metric_prep(x) returns a callable rho -> metric diagonal; radii_fn(x)
    yields the radius trials (a single zero for the non-trust-region
    solvers). Acceptance of an iterate requires inner conditions (a) and
    (b) plus trusted-region membership; on an exhausted inner budget the
    whole radius pass is retried once at gamma/2, after which a candidate
    satisfying (a) is accepted with a logged warning ((a) is never waived).
    """
    t0 = time.perf_counter()
    x = np.clip(np.asarray(x0, dtype=float), 0.0, problem.x_max)
    op2 = operator_norm_estimate(problem.D) ** 2
    if not problem.is_feasible(x):
        x, ok = _feasibility_polish(problem, x, op2, budget=max(5 * config.max_inner, 25000))
        if not ok and config.require_feasible_init:
            raise InitializationError(
                "starting point could not be projected onto the constraint set; "
                f"residual {problem.residual_norm(x):.6g} vs allowed {problem.xi_tol:.6g} "
                "(the feasible set may be empty)"
            )

    trace = IterateTrace(solver_id=solver_id, iterates=[] if keep_iterates else None)
    obj = value_fn(x) + phi_value(x, problem)
    snr0 = _raw_snr(x_true, x) if x_true is not None else math.nan
    trace.append(objective=obj, step_norm=0.0, radius=0.0, radius_index=0,
                 inner_iterations=0, gamma_used=config.gamma, descent_margin=0.0,
                 wall_time=time.perf_counter() - t0, snr_db=snr0, iterate=x)

    u_warm = None
    for _ in range(config.max_outer):
        g = grad_fn(x)
        radii = radii_fn(x)
        diag_for = metric_prep(x)
        accepted = None
        fallback = None
        for gamma_try in (config.gamma, config.gamma / 2.0):
            for i, rho in enumerate(radii, start=1):
                diag = diag_for(rho)
                kappa = config.kappa if config.kappa is not None else kappa_bound(gamma_try, nu_hi)
                xbar = x - gamma_try * (g / diag)
                res = prox_metric_phi(
                    xbar, diag, gamma_try, problem, config.max_inner, kappa,
                    anchor=x, grad_at_anchor=g, u0=u_warm, op_norm_sq=op2,
                    check_every=config.check_every,
                )
                if res.dual is not None:
                    u_warm = res.dual
                member = rho == 0.0 or in_lq_region(res.z, region_q, rho)
                if res.cond_a_satisfied and res.cond_b_satisfied and member:
                    accepted = (res, rho, i, gamma_try)
                    break
                if res.cond_a_satisfied and member and fallback is None:
                    fallback = (res, rho, i, gamma_try)
            if accepted is not None:
                break
        if accepted is None and fallback is not None:
            trace.warnings.append(
                "inner solver exhausted its budget; accepted an iterate satisfying "
                "condition (a) but not (b)"
            )
            logger.warning("%s: %s", solver_id, trace.warnings[-1])
            accepted = fallback
        if accepted is None:
            trace.warnings.append(
                "inner solver could not certify condition (a) even after the gamma/2 "
                "retry; iterate left unchanged"
            )
            logger.warning("%s: %s", solver_id, trace.warnings[-1])
            trace.converged = False
            trace.stop_reason = "inner_failure"
            return x, trace

        res, rho, i, gamma_try = accepted
        x_new = res.z
        step = float(np.linalg.norm(x_new - x))
        obj_new = value_fn(x_new) + phi_value(x_new, problem)
        snr_k = _raw_snr(x_true, x_new) if x_true is not None else math.nan
        trace.append(objective=obj_new, step_norm=step, radius=rho, radius_index=i,
                     inner_iterations=res.iterations_used, gamma_used=gamma_try,
                     descent_margin=obj - obj_new, wall_time=time.perf_counter() - t0,
                     snr_db=snr_k, iterate=x_new)
        stop = step <= config.eps_stop * float(np.linalg.norm(x))
        x, obj = x_new, obj_new
        if stop:
            trace.converged = True
            trace.stop_reason = "step_tolerance"
            return x, trace
    trace.stop_reason = "max_outer"
    return x, trace


def tr_vmfb_solve(problem: Problem, params: SpoqParams, config: SolverConfig | None = None,
                  x0=None, *, x_true=None, keep_iterates: bool = False):
    """Trust-region variable-metric forward-backward on the lp-over-lq penalty.

    Returns (x, trace). x0 of None starts from warm_start_l1 with the
    configured number of primal-dual iterations.
    """
    config = config or SolverConfig()
    if x0 is None:
        x0 = warm_start_l1(problem, config.init_pd_iters)
    _, nu_hi = spoq_metric_bounds(params)

    def metric_prep(x):
        base = spoq_metric_base(x, params)
        return lambda rho: chi_curvature(params.q, params.eta, rho) + base

    return _metric_engine(
        problem, config, x0,
        solver_id="trvmfb",
        value_fn=lambda x: spoq_value(x, params),
        grad_fn=lambda x: spoq_gradient(x, params),
        metric_prep=metric_prep,
        radii_fn=lambda x: radius_schedule(x, params.q, config.theta, config.trials),
        nu_hi=nu_hi,
        region_q=params.q,
        x_true=x_true,
        keep_iterates=keep_iterates,
    )


def vmfb_solve(problem: Problem, params: SpoqParams, config: SolverConfig | None = None,
               x0=None, *, x_true=None, keep_iterates: bool = False):
    """Variable-metric forward-backward: the single-radius (trials = 1) case."""
    config = replace(config or SolverConfig(), trials=1)
    x, trace = tr_vmfb_solve(problem, params, config, x0, x_true=x_true, keep_iterates=keep_iterates)
    trace.solver_id = "vmfb"
    return x, trace


def fb_solve(problem: Problem, params: SpoqParams, config: SolverConfig | None = None,
             x0=None, *, x_true=None, keep_iterates: bool = False):
    """Forward-backward with the constant metric L I from the Lipschitz bound."""
    config = config or SolverConfig()
    if x0 is None:
        x0 = warm_start_l1(problem, config.init_pd_iters)
    lip = spoq_lipschitz(params, problem.n)
    ones = np.ones(problem.n)

    return _metric_engine(
        problem, config, x0,
        solver_id="fb",
        value_fn=lambda x: spoq_value(x, params),
        grad_fn=lambda x: spoq_gradient(x, params),
        metric_prep=lambda x: (lambda rho: lip * ones),
        radii_fn=lambda x: np.zeros(1),
        nu_hi=lip,
        region_q=params.q,
        x_true=x_true,
        keep_iterates=keep_iterates,
    )


def vmfb_halfquadratic_solve(problem: Problem, spec: PenaltySpec,
                             config: SolverConfig | None = None, x0=None, *,
                             x_true=None, keep_iterates: bool = False):
    """Variable-metric forward-backward for the smooth baselines.

    The metric is the diagonal half-quadratic curvature of the penalty
    (Cauchy or Welsch), floored at 1e-12 times its maximum 2/delta^2 so it
    stays positive definite; raising a curvature preserves majorization.
    """
    if spec.kind not in ("cauchy", "welsch"):
        raise ValueError("half-quadratic solver applies to cauchy or welsch penalties")
    config = config or SolverConfig()
    if x0 is None:
        x0 = warm_start_l1(problem, config.init_pd_iters)
    peak = 2.0 / (spec.delta * spec.delta)
    floor = 1e-12 * peak

    def metric_prep(x):
        diag = np.maximum(baseline_curvature(x, spec), floor)
        return lambda rho: diag

    x, trace = _metric_engine(
        problem, config, x0,
        solver_id="hq",
        value_fn=lambda x: baseline_value(x, spec),
        grad_fn=lambda x: baseline_gradient(x, spec),
        metric_prep=metric_prep,
        radii_fn=lambda x: np.zeros(1),
        nu_hi=peak,
        region_q=2.0,
        x_true=x_true,
        keep_iterates=keep_iterates,
    )
    return x, trace


# ---------------------------------------------------------------------------
# Primal-dual baseline


def _prox_penalty_box(v, tau: float, spec: PenaltySpec, x_max: float, column_norms=None) -> np.ndarray:
    """Exact prox of tau * penalty + box indicator on [0, x_max], per entry.

    Closed form for l1; piecewise-quadratic candidate enumeration for the
    nonconvex l0/SCAD/CEL0 (all clamped stationary points plus the piece
    endpoints are compared, which is exact for any tau).
    """
    v = np.asarray(v, dtype=float)
    kind = spec.kind
    if kind == "l1":
        return np.minimum(np.maximum(v - tau, 0.0), x_max)
    if kind == "l0":
        zc = np.clip(v, 0.0, x_max)
        keep = 0.5 * (zc - v) ** 2 + tau * (zc > 0.0)
        kill = 0.5 * v * v
        return np.where(keep < kill, zc, 0.0)

    def best(cands):
        z = np.stack([np.broadcast_to(c, v.shape) for c in cands])
        cost = 0.5 * (z - v) ** 2 + tau * penalty_elementwise(z, spec, column_norms)
        return z[np.argmin(cost, axis=0), np.arange(v.size)]

    if kind == "scad":
        d, a = spec.delta, spec.a
        e1, e2 = min(d, x_max), min(a * d, x_max)
        z1 = np.clip(v - tau * d, 0.0, e1)
        den = a - 1.0 - tau
        if den != 0.0:
            z2 = np.clip((v * (a - 1.0) - tau * a * d) / den, e1, e2)
        else:
            z2 = np.full_like(v, e1)
        z3 = np.clip(v, e2, x_max)
        return best([np.zeros_like(v), z1, np.full_like(v, e1), z2, np.full_like(v, e2), z3, np.full_like(v, x_max)])
    if kind == "cel0":
        norms = np.ones_like(v) if column_norms is None else np.asarray(column_norms, dtype=float)
        c2 = norms * norms
        s = np.minimum(np.sqrt(2.0 * spec.delta) / norms, x_max)
        den = 1.0 - tau * c2
        z1 = np.where(den > 0.0, (v - tau * c2 * s) / den, 0.0)
        z1 = np.clip(z1, 0.0, s)
        z2 = np.clip(v, s, x_max)
        return best([np.zeros_like(v), z1, s, z2, np.full_like(v, x_max)])
    raise ValueError(f"no constrained prox available for penalty kind {spec.kind!r}")


def _pd_run(problem: Problem, spec: PenaltySpec, x0, u0,
            max_iters: int, eps_stop: float | None, *, solver_id: str, x_true, keep_iterates):
    """Chambolle-Pock loop shared by primal_dual_solve and warm_start_l1."""
    t0 = time.perf_counter()
    D, y = problem.D, problem.y
    col_norms = np.linalg.norm(D, axis=0) if spec.kind == "cel0" else None
    op = operator_norm_estimate(D)
    tau = sigma = 0.99 / op
    x = np.zeros(problem.n) if x0 is None else np.clip(np.asarray(x0, dtype=float), 0.0, problem.x_max)
    u = np.zeros(problem.m) if u0 is None else np.asarray(u0, dtype=float).copy()
    x_prev = x.copy()

    trace = IterateTrace(solver_id=solver_id, iterates=[] if keep_iterates else None)

    def objective(z):
        return baseline_value(z, spec, col_norms) + phi_value(z, problem)

    obj = objective(x)
    snr0 = _raw_snr(x_true, x) if x_true is not None else math.nan
    trace.append(objective=obj, step_norm=0.0, radius=0.0, radius_index=0,
                 inner_iterations=0, gamma_used=tau, descent_margin=0.0,
                 wall_time=time.perf_counter() - t0, snr_db=snr0, iterate=x)

    for _ in range(max_iters):
        xbar = 2.0 * x - x_prev
        v = u + sigma * (D @ xbar)
        u = v - sigma * project_ball(v / sigma, y, problem.xi)
        x_prev = x
        x = _prox_penalty_box(x_prev - tau * (D.T @ u), tau, spec, problem.x_max, col_norms)
        step = float(np.linalg.norm(x - x_prev))
        obj_new = objective(x)
        snr_k = _raw_snr(x_true, x) if x_true is not None else math.nan
        trace.append(objective=obj_new, step_norm=step, radius=0.0, radius_index=0,
                     inner_iterations=0, gamma_used=tau, descent_margin=obj - obj_new,
                     wall_time=time.perf_counter() - t0, snr_db=snr_k, iterate=x)
        obj = obj_new
        if eps_stop is not None and step <= eps_stop * float(np.linalg.norm(x_prev)):
            trace.converged = True
            trace.stop_reason = "step_tolerance"
            return x, u, trace
    trace.stop_reason = "max_outer" if eps_stop is not None else "fixed_iterations"
    return x, u, trace


def primal_dual_solve(problem: Problem, spec: PenaltySpec, config: SolverConfig | None = None,
                      x0=None, *, u0=None, x_true=None, keep_iterates: bool = False):
    """Chambolle-Pock splitting for penalties with an exact constrained prox.

    Handles l1 (convex) and l0/SCAD/CEL0 (nonconvex proxes; the iteration
    cap is then the only guarantee). tau = sigma = 0.99/||D|| keeps
    tau sigma ||D||^2 < 1.
    """
    config = config or SolverConfig()
    x, _, trace = _pd_run(problem, spec, x0, u0, config.max_outer,
                          config.eps_stop, solver_id="pd", x_true=x_true,
                          keep_iterates=keep_iterates)
    return x, trace


def warm_start_l1(problem: Problem, iters: int, *, return_dual: bool = False):
    """Fixed number of primal-dual l1 iterations from zero.

    The shared initializer of all benchmark solvers; iters = 0 returns the
    zero vector.
    """
    if iters < 0:
        raise ValueError("iters must be >= 0")
    x, u, _ = _pd_run(problem, PenaltySpec.l1(), None, None, iters, None,
                      solver_id="warm", x_true=None, keep_iterates=False)
    return (x, u) if return_dual else x

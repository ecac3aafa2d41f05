"""Constraint set, projections and the variable-metric prox inner solver.

The recovery problem minimizes a penalty over

    C = [0, x_max]^N  intersected with  {x : ||D x - y|| <= xi},

written Phi = i_C + i_ball(D .). The forward-backward outer solvers need,
at each step, the prox of Phi in a diagonal metric gamma^{-1} A:

    prox(xbar) = argmin_z  Phi(z) + (1/(2 gamma)) ||z - xbar||_A^2.

prox_metric_phi solves this with FISTA on the Fenchel dual of the ball
block; the box block stays in the primal because the metric-weighted box
projection of a diagonal metric is a plain clamp. The accepted iterate is
certified by the two inexactness conditions

    (a)  Phi(z) + <z - x_k, g> + gamma^{-1} ||z - x_k||_A^2  <=  Phi(x_k)
    (b)  ||g + r|| <= kappa ||z - x_k||_A,   r in dPhi(z)

with g the outer gradient at the anchor x_k and r the certificate
r = -g + gamma^{-1} A (x_k - z) implied by exact optimality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Problem",
    "InnerSolveResult",
    "project_box",
    "project_ball",
    "phi_value",
    "operator_norm_estimate",
    "kappa_bound",
    "condition_a_slack",
    "check_inner_conditions",
    "prox_metric_phi",
]

# Ball feasibility tolerance for accepted inner iterates, relative to xi.
BALL_FEAS_RTOL = 1e-6


@dataclass(frozen=True)
class Problem:
    """Observation model and constraint set of one recovery instance.

    Parameters
    ----------
    D : ndarray, shape (m, n)
        Dictionary whose nonnegative combinations model the observation.
    y : ndarray, shape (m,)
        Observed signal.
    xi : float
        Radius of the residual ball ||D x - y|| <= xi; positive.
    x_max : float
        Upper box bound; the feasible set is [0, x_max]^n.
    sigma : float or None
        Noise level the radius was derived from (metadata only).
    """

    D: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    xi: float
    x_max: float = 1e5
    sigma: float | None = None

    def __post_init__(self):
        D = np.asarray(self.D, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if D.ndim != 2 or y.ndim != 1 or D.shape[0] != y.shape[0]:
            raise ValueError("D must be (m, n) and y must be (m,) with matching m")
        if not self.xi > 0.0:
            raise ValueError("xi must be positive")
        if not self.x_max > 0.0:
            raise ValueError("x_max must be positive")
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.D.shape[1]

    @property
    def m(self) -> int:
        return self.D.shape[0]

    @property
    def xi_tol(self) -> float:
        """Ball radius inflated by the feasibility tolerance."""
        return self.xi * (1.0 + BALL_FEAS_RTOL)

    @classmethod
    def from_sigma(cls, D, y, sigma: float, x_max: float = 1e5) -> "Problem":
        """Build a problem with the radius rule xi = sqrt(n) * sigma."""
        D = np.asarray(D, dtype=float)
        if sigma <= 0.0:
            raise ValueError("sigma must be positive to derive a ball radius")
        return cls(D=D, y=y, xi=math.sqrt(D.shape[1]) * sigma, x_max=x_max, sigma=sigma)

    def residual_norm(self, x) -> float:
        return float(np.linalg.norm(self.D @ x - self.y))

    def in_box(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return x.min(initial=0.0) >= 0.0 and x.max(initial=0.0) <= self.x_max

    def is_feasible(self, x) -> bool:
        return self.in_box(x) and self.residual_norm(x) <= self.xi_tol


def project_box(u, lo: float, hi: float) -> np.ndarray:
    """Euclidean projection onto [lo, hi]^n."""
    if lo > hi:
        raise ValueError("lo must not exceed hi")
    return np.clip(np.asarray(u, dtype=float), lo, hi)


def project_ball(v, center, radius: float) -> np.ndarray:
    """Euclidean projection onto the ball of given center and radius."""
    if radius < 0.0:
        raise ValueError("radius must be >= 0")
    v = np.asarray(v, dtype=float)
    r = v - center
    nr = float(np.linalg.norm(r))
    if nr <= radius:
        return v.copy()
    return center + r * (radius / nr)


def phi_value(x, problem: Problem) -> float:
    """Feasibility-tolerant indicator of the constraint set: 0.0 or +inf."""
    return 0.0 if problem.is_feasible(x) else math.inf


def operator_norm_estimate(D, iters: int = 50, seed: int = 0, safety: float = 1.01) -> float:
    """Spectral norm of D by fixed-seed power iteration, inflated by safety."""
    D = np.asarray(D, dtype=float)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(D.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = D.T @ (D @ v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return math.sqrt(lam) * safety


def kappa_bound(gamma_lo: float, nu_hi: float) -> float:
    """Smallest kappa for which exact proxes satisfy condition (b).

    kappa = gamma_lo^{-1} sqrt(nu_hi), with gamma_lo the smallest step size
    and nu_hi an upper bound on the metric diagonal.
    """
    if gamma_lo <= 0.0 or nu_hi <= 0.0:
        raise ValueError("gamma_lo and nu_hi must be positive")
    return math.sqrt(nu_hi) / gamma_lo


def condition_a_slack(inner_term: float, quad_term: float) -> float:
    """Rounding slack for condition (a).

    (a) is tight at a prox fixed point, so an inexact iterate can violate it
    by floating-point noise; the slack scales with the magnitude of both
    terms and is used identically by the solver and by recomputation.
    """
    return 1e-10 * (1.0 + abs(inner_term) + abs(quad_term))


@dataclass(frozen=True)
class InnerSolveResult:
    """Outcome of one metric-prox inner solve."""

    z: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    cond_a_satisfied: bool
    cond_b_satisfied: bool
    iterations_used: int
    dual: np.ndarray | None = field(default=None, repr=False)
    pulled: bool = False


def check_inner_conditions(z, r, anchor, grad_at_anchor, metric_diag, gamma, problem: Problem, kappa):
    """Independent recomputation of conditions (a) and (b) at (z, r)."""
    z = np.asarray(z, dtype=float)
    anchor = np.asarray(anchor, dtype=float)
    diag = np.asarray(metric_diag, dtype=float)
    g = np.asarray(grad_at_anchor, dtype=float)
    d = z - anchor
    if not problem.is_feasible(z):
        a_ok = False
    elif not problem.is_feasible(anchor):
        # Infeasible anchor (only possible at initialization): Phi(x_k) = +inf
        # and (a) reduces to requiring a feasible z.
        a_ok = True
    else:
        inner_term = float(d @ g)
        quad_term = float(d @ (diag * d)) / gamma
        a_ok = inner_term + quad_term <= condition_a_slack(inner_term, quad_term)
    lhs = float(np.linalg.norm(g + np.asarray(r, dtype=float)))
    rhs = kappa * math.sqrt(float(d @ (diag * d)))
    b_ok = lhs <= rhs * (1.0 + 1e-10) + 1e-12 * (1.0 + float(np.linalg.norm(g)))
    return a_ok, b_ok


def prox_metric_phi(
    xbar,
    metric_diag,
    gamma: float,
    problem: Problem,
    max_inner: int,
    kappa: float,
    *,
    anchor,
    grad_at_anchor=None,
    u0=None,
    op_norm_sq: float | None = None,
    check_every: int = 10,
    pull_t_max: float = 0.05,
) -> InnerSolveResult:
    """Prox of Phi in the metric gamma^{-1} Diag(metric_diag) at xbar.

    Runs FISTA with gradient-based restart on the dual of the ball block and
    stops as soon as the primal iterate satisfies conditions (a) and (b)
    against the outer anchor; the certificate is
    r = -grad_at_anchor + gamma^{-1} A (anchor - z). When grad_at_anchor is
    omitted it is recovered from xbar = anchor - gamma A^{-1} grad.

    An iterate that still overshoots the ball slightly may be pulled along
    the segment toward the (feasible) anchor until exactly ball-feasible;
    that pull scales the left side of (a) by factors below one, so the
    conditions are preserved. It is applied only when the pull is short
    (t <= pull_t_max) or the iteration budget is nearly exhausted, so it
    rescues near-converged iterates instead of replacing the prox.

    Returns the last iterate with its condition flags (possibly unset when
    max_inner is exhausted); the caller owns the fallback policy.
    """
    xbar = np.asarray(xbar, dtype=float)
    anchor = np.asarray(anchor, dtype=float)
    diag = np.asarray(metric_diag, dtype=float)
    if np.any(diag <= 0.0):
        raise ValueError("metric diagonal must be positive")
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    W = diag / gamma
    Winv = 1.0 / W
    if grad_at_anchor is None:
        grad_at_anchor = W * (anchor - xbar)
    else:
        grad_at_anchor = np.asarray(grad_at_anchor, dtype=float)
    D, y = problem.D, problem.y
    xi_tol = problem.xi_tol
    if op_norm_sq is None:
        op_norm_sq = operator_norm_estimate(D) ** 2
    sigma = 1.0 / (op_norm_sq * float(np.max(Winv)))

    res_anchor = D @ anchor - y
    nres_anchor = float(np.linalg.norm(res_anchor))
    anchor_feasible = problem.in_box(anchor) and nres_anchor <= xi_tol
    # Pull target keeps half the tolerance band as margin so pulled iterates
    # can themselves anchor later pulls.
    pull_radius = max(problem.xi * (1.0 + 0.5 * BALL_FEAS_RTOL), nres_anchor)

    def evaluate(z, res_z, allow_any_pull):
        """Try to certify z; returns (z, r, a_ok, b_ok, pulled) or None."""
        nres = float(np.linalg.norm(res_z))
        pulled = False
        if nres > xi_tol:
            if not anchor_feasible:
                return None
            dr = res_anchor - res_z
            a2 = float(dr @ dr)
            if a2 == 0.0:
                return None
            b2 = 2.0 * float(res_z @ dr)
            c2 = nres * nres - pull_radius * pull_radius
            disc = b2 * b2 - 4.0 * a2 * c2
            if disc < 0.0:
                return None
            t = (-b2 - math.sqrt(disc)) / (2.0 * a2)
            t = min(1.0, max(t, 0.0) * (1.0 + 1e-12) + 1e-15)
            if t > pull_t_max and not allow_any_pull:
                return None
            if float(np.linalg.norm(res_z + t * dr)) > xi_tol:
                return None
            z = z + t * (anchor - z)
            pulled = True
        d = z - anchor
        if anchor_feasible:
            inner_term = float(d @ grad_at_anchor)
            quad_term = float(d @ (diag * d)) / gamma
            a_ok = inner_term + quad_term <= condition_a_slack(inner_term, quad_term)
        else:
            a_ok = True
        r = -grad_at_anchor + W * (anchor - z)
        lhs = float(np.linalg.norm(grad_at_anchor + r))
        rhs = kappa * math.sqrt(float(d @ (diag * d)))
        b_ok = lhs <= rhs * (1.0 + 1e-10) + 1e-12 * (1.0 + float(np.linalg.norm(grad_at_anchor)))
        return z, r, a_ok, b_ok, pulled

    u = np.zeros(problem.m) if u0 is None else np.asarray(u0, dtype=float).copy()
    u_prev = u.copy()
    t_mom = 1.0
    best = None

    z = np.clip(xbar - Winv * (D.T @ u), 0.0, problem.x_max)
    out = evaluate(z, D @ z - y, allow_any_pull=False)
    if out is not None:
        best = (*out, 0)
        if out[2] and out[3] and not out[4]:
            # Already feasible and certified without a pull: done.
            z, r, a_ok, b_ok, pulled = out
            return InnerSolveResult(z, r, True, True, 0, dual=u, pulled=False)

    next_check = 1
    for it in range(1, max_inner + 1):
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
        uhat = u + ((t_mom - 1.0) / t_next) * (u - u_prev)
        z = np.clip(xbar - Winv * (D.T @ uhat), 0.0, problem.x_max)
        v = uhat + sigma * (D @ z)
        u_new = v - sigma * project_ball(v / sigma, y, problem.xi)
        # Gradient-based restart keeps FISTA monotone on ill-conditioned duals.
        if float((uhat - u_new) @ (u_new - u)) > 0.0:
            t_next = 1.0
        u_prev, u, t_mom = u, u_new, t_next
        if it >= next_check or it == max_inner:
            next_check = min(it * 2, it + check_every)
            zc = np.clip(xbar - Winv * (D.T @ u), 0.0, problem.x_max)
            out = evaluate(zc, D @ zc - y, allow_any_pull=it >= 0.8 * max_inner)
            if out is not None:
                best = (*out, it)
                zc, r, a_ok, b_ok, pulled = out
                if a_ok and b_ok:
                    return InnerSolveResult(zc, r, True, True, it, dual=u, pulled=pulled)

    if best is None:
        # Never even reached a feasible candidate: report the raw iterate.
        zc = np.clip(xbar - Winv * (D.T @ u), 0.0, problem.x_max)
        r = -grad_at_anchor + W * (anchor - zc)
        return InnerSolveResult(zc, r, False, False, max_inner, dual=u, pulled=False)
    zb, rb, a_ok, b_ok, pulled, _ = best
    return InnerSolveResult(zb, rb, a_ok, b_ok, max_inner, dual=u, pulled=pulled)

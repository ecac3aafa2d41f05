"""Sparsity-promoting penalties and their local models.

The central object is the smoothed lp-over-lq ratio penalty

    psi(x) = log( (l_{p,alpha}^p(x) + beta^p)^{1/p} / l_{q,eta}(x) )

with the smoothed quasi-norm l_{p,alpha}^p(x) = sum_n ((x_n^2+alpha^2)^{p/2}
- alpha^p) and the smoothed norm l_{q,eta}(x) = (eta^q + sum_n |x_n|^q)^{1/q},
for 0 < p < 2, q >= 2 and positive smoothing constants alpha, beta, eta.
The (p, q) = (1, 2) member is the smoothed l1-over-l2 penalty.

Alongside the value/gradient/curvature machinery the module provides the
classical baseline penalties (l0, l1, SCAD, Cauchy, Welsch, CEL0) used for
benchmark comparisons, plus the half-quadratic curvature of the smooth ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpoqParams",
    "PenaltySpec",
    "MajorantMetric",
    "smooth_lp_power",
    "smooth_lq_power",
    "lq_norm",
    "in_lq_region",
    "spoq_value",
    "spoq_gradient",
    "spoq_hessian_parts",
    "spoq_lipschitz",
    "chi_curvature",
    "spoq_metric_base",
    "spoq_majorant_metric",
    "spoq_majorant_gap",
    "spoq_metric_bounds",
    "check_zero_minimizer",
    "exact_ratio",
    "penalty_elementwise",
    "baseline_value",
    "baseline_gradient",
    "baseline_curvature",
    "DEFAULT_SPOQ",
]


@dataclass(frozen=True)
class SpoqParams:
    """Exponents and smoothing constants of the lp-over-lq penalty.

    Parameters
    ----------
    p : float
        Quasi-norm exponent, 0 < p < 2.
    q : float
        Norm exponent, q >= 2.
    alpha, beta, eta : float
        Positive smoothing constants for the numerator (alpha, beta) and
        the denominator (eta).
    """

    p: float
    q: float
    alpha: float
    beta: float
    eta: float

    def __post_init__(self):
        if not 0.0 < self.p < 2.0:
            raise ValueError(f"p must lie in (0, 2), got {self.p}")
        if self.q < 2.0:
            raise ValueError(f"q must be >= 2, got {self.q}")
        for name in ("alpha", "beta", "eta"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    def is_global_min_at_zero(self) -> bool:
        """Whether the origin is certified as a global minimizer."""
        return check_zero_minimizer(self) == "global"


# Hyperparameters used throughout the benchmark presets (p and q are swept
# separately; these are the smoothing constants tuned for the mass-spec data).
DEFAULT_SPOQ = SpoqParams(p=0.75, q=2.0, alpha=7e-7, beta=3e-3, eta=1e-1)


def smooth_lp_power(x, p: float, alpha: float):
    """sum_n ((x_n^2 + alpha^2)^{p/2} - alpha^p) along the last axis.

    Evaluated as alpha^p * expm1((p/2) * log1p((x/alpha)^2)) per entry so the
    subtraction never cancels when |x_n| << alpha.
    """
    x = np.asarray(x, dtype=float)
    t = np.square(x / alpha)
    s = np.sum(np.expm1((p / 2.0) * np.log1p(t)), axis=-1)
    return alpha**p * s


def smooth_lq_power(x, q: float, eta: float):
    """eta^q + sum_n |x_n|^q along the last axis."""
    x = np.asarray(x, dtype=float)
    return eta**q + np.sum(np.abs(x) ** q, axis=-1)


def lq_norm(x, q: float) -> float:
    """(sum_n |x_n|^q)^{1/q}, scaled so large entries do not overflow."""
    ax = np.abs(np.asarray(x, dtype=float))
    m = float(ax.max(initial=0.0))
    if m == 0.0:
        return 0.0
    return m * float(np.sum((ax / m) ** q)) ** (1.0 / q)


def in_lq_region(x, q: float, rho: float) -> bool:
    """Membership in the lq-ball complement {x : sum |x_n|^q >= rho^q}."""
    return lq_norm(x, q) >= rho


def _lp_state(x, params):
    """Shared pieces: (x^2+alpha^2, lp-power + beta^p, lq-power)."""
    s = x * x + params.alpha * params.alpha
    num = float(smooth_lp_power(x, params.p, params.alpha)) + params.beta**params.p
    den = float(smooth_lq_power(x, params.q, params.eta))
    return s, num, den


def spoq_value(x, params: SpoqParams):
    """Penalty value log((l_{p,alpha}^p + beta^p)^{1/p} / l_{q,eta}).

    Accepts a 1-D point or a batch with points along the last axis.
    """
    lp = smooth_lp_power(x, params.p, params.alpha)
    lq = smooth_lq_power(x, params.q, params.eta)
    val = np.log(lp + params.beta**params.p) / params.p - np.log(lq) / params.q
    return float(val) if np.ndim(val) == 0 else val


def spoq_gradient(x, params: SpoqParams) -> np.ndarray:
    """Gradient of the penalty at a 1-D point.

    grad = (x_n (x_n^2+alpha^2)^{p/2-1}) / (l_{p,alpha}^p + beta^p)
         - (sign(x_n) |x_n|^{q-1}) / l_{q,eta}^q
    """
    x = np.asarray(x, dtype=float)
    s, num, den = _lp_state(x, params)
    g1 = x * s ** (params.p / 2.0 - 1.0) / num
    ax = np.abs(x)
    g2 = np.sign(x) * ax ** (params.q - 1.0) / den
    return g1 - g2


def spoq_hessian_parts(x, params: SpoqParams):
    """Structured Hessian pieces (d1, u1, d2, u2).

    The Hessian decomposes as Diag(d1) - u1 u1^T - Diag(d2) + u2 u2^T;
    dense assembly from these pieces is intended for tests only.
    """
    x = np.asarray(x, dtype=float)
    p, q = params.p, params.q
    s, num, den = _lp_state(x, params)
    d1 = ((p - 1.0) * x * x + params.alpha**2) * s ** (p / 2.0 - 2.0) / num
    u1 = math.sqrt(p) * x * s ** (p / 2.0 - 1.0) / num
    ax = np.abs(x)
    # 0^0 = 1 at q = 2 so the diagonal stays correct at the origin
    d2 = (q - 1.0) * ax ** (q - 2.0) / den
    u2 = math.sqrt(q) * np.sign(x) * ax ** (q - 1.0) / den
    return d1, u1, d2, u2


def spoq_lipschitz(params: SpoqParams, n: int) -> float:
    """Global Lipschitz bound for the penalty gradient in dimension n.

    L = p alpha^{p-2} / beta^p
      + (p / (2 alpha^2)) max{1, (n alpha^p / beta^p)^2}
      + (q - 1) / eta^2
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    p, q = params.p, params.q
    alpha, beta, eta = params.alpha, params.beta, params.eta
    bp = beta**p
    t1 = p * alpha ** (p - 2.0) / bp
    t2 = (p / (2.0 * alpha * alpha)) * max(1.0, (n * alpha**p / bp)) ** 2
    t3 = (q - 1.0) / (eta * eta)
    return t1 + t2 + t3


def chi_curvature(q: float, eta: float, rho: float) -> float:
    """Denominator curvature bound (q - 1) / (eta^q + rho^q)^{2/q}."""
    if rho < 0.0:
        raise ValueError("rho must be >= 0")
    m = max(eta, rho)
    return (q - 1.0) / (m * m * ((eta / m) ** q + (rho / m) ** q) ** (2.0 / q))


@dataclass(frozen=True)
class MajorantMetric:
    """Diagonal metric of a quadratic tangent majorant.

    chi is the scalar curvature floor, diag the full diagonal and rho the
    lq-ball-complement radius on which the majorization is valid.
    """

    chi: float
    diag: np.ndarray = field(repr=False)
    rho: float

    @property
    def nu_lo(self) -> float:
        return float(np.min(self.diag))

    @property
    def nu_hi(self) -> float:
        return float(np.max(self.diag))


def spoq_metric_base(x, params: SpoqParams) -> np.ndarray:
    """Radius-independent part of the majorant metric diagonal.

    Diag((x_n^2+alpha^2)^{p/2-1}) / (l_{p,alpha}^p + beta^p); adding
    chi_{q,rho} to it yields the full metric for any radius rho.
    """
    x = np.asarray(x, dtype=float)
    s, num, _ = _lp_state(x, params)
    return s ** (params.p / 2.0 - 1.0) / num


def spoq_majorant_metric(x, rho: float, params: SpoqParams) -> MajorantMetric:
    """Trust-region majorant metric at x, valid on {z : sum |z_n|^q >= rho^q}.

    A = chi_{q,rho} I + Diag((x_n^2+alpha^2)^{p/2-1}) / (l_{p,alpha}^p + beta^p).
    Every diagonal entry lies in [chi, chi + alpha^{p-2}/beta^p].
    """
    chi = chi_curvature(params.q, params.eta, rho)
    diag = chi + spoq_metric_base(x, params)
    return MajorantMetric(chi=chi, diag=diag, rho=rho)


def spoq_metric_bounds(params: SpoqParams, rho_max: float = 0.0):
    """(nu_lo, nu_hi) bounds on majorant metrics with radii in [0, rho_max].

    nu_hi = chi_{q,0} + beta^{-p} alpha^{p-2} bounds every diagonal entry
    from above; nu_lo = chi_{q,rho_max} bounds them from below.
    """
    nu_hi = chi_curvature(params.q, params.eta, 0.0) + (
        params.beta ** (-params.p) * params.alpha ** (params.p - 2.0)
    )
    nu_lo = chi_curvature(params.q, params.eta, rho_max)
    return nu_lo, nu_hi


def spoq_majorant_gap(x, x_prime, rho: float, params: SpoqParams) -> float:
    """Majorant value at x_prime minus penalty value at x_prime.

    Both points must lie in the lq-ball complement of radius rho; the gap is
    nonnegative there up to rounding.
    """
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    if not (in_lq_region(x, params.q, rho) and in_lq_region(x_prime, params.q, rho)):
        raise ValueError("both points must lie in the lq-ball complement")
    metric = spoq_majorant_metric(x, rho, params)
    d = x_prime - x
    major = (
        spoq_value(x, params)
        + float(d @ spoq_gradient(x, params))
        + 0.5 * float(d @ (metric.diag * d))
    )
    return major - spoq_value(x_prime, params)


def check_zero_minimizer(params: SpoqParams) -> str:
    """Classify the origin: 'global', 'local' or 'none'.

    'local' requires q > 2, or q = 2 together with eta^2 alpha^{p-2} > beta^p.
    'global' additionally requires
    eta^2 >= beta^2 max{8 alpha^{2-p} / (p (2+p) beta^{2-p}),
                        (2^{p/2} - 1)^{-2/p}}.
    """
    p, q = params.p, params.q
    alpha, beta, eta = params.alpha, params.beta, params.eta
    local = q > 2.0 or eta * eta * alpha ** (p - 2.0) > beta**p
    if not local:
        return "none"
    bound = beta * beta * max(
        8.0 * alpha ** (2.0 - p) / (p * (2.0 + p) * beta ** (2.0 - p)),
        (2.0 ** (p / 2.0) - 1.0) ** (-2.0 / p),
    )
    return "global" if eta * eta >= bound else "local"


def exact_ratio(x, p: float, q: float) -> float:
    """Unsmoothed ratio (sum |x_n|^p)^{1/p} / (sum |x_n|^q)^{1/q} at x != 0.

    Scale-invariant; bounded between 1 and (number of nonzeros)^{1/p - 1/q}.
    """
    ax = np.abs(np.asarray(x, dtype=float))
    m = float(ax.max(initial=0.0))
    if m == 0.0:
        raise ValueError("exact ratio is undefined at the origin")
    ax = ax / m
    return float(np.sum(ax**p)) ** (1.0 / p) / float(np.sum(ax**q)) ** (1.0 / q)


# ---------------------------------------------------------------------------
# Baseline penalties


_KINDS = ("spoq", "l0", "l1", "scad", "cauchy", "welsch", "cel0")


@dataclass(frozen=True)
class PenaltySpec:
    """Tagged selection of a penalty and its hyperparameters.

    kind is one of 'spoq', 'l0', 'l1', 'scad', 'cauchy', 'welsch', 'cel0'.
    SPOQ carries a SpoqParams; SCAD carries (delta, a) with a > 2; Cauchy,
    Welsch and CEL0 carry a scale delta > 0.
    """

    kind: str
    params: SpoqParams | None = None
    delta: float | None = None
    a: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if self.kind == "spoq" and self.params is None:
            raise ValueError("spoq penalty needs SpoqParams")
        if self.kind in ("scad", "cauchy", "welsch", "cel0"):
            if self.delta is None or self.delta <= 0.0:
                raise ValueError(f"{self.kind} needs delta > 0")
        if self.kind == "scad" and (self.a is None or self.a <= 2.0):
            raise ValueError("scad needs a > 2")

    @classmethod
    def for_spoq(cls, params: SpoqParams) -> "PenaltySpec":
        return cls("spoq", params=params)

    @classmethod
    def l0(cls) -> "PenaltySpec":
        return cls("l0")

    @classmethod
    def l1(cls) -> "PenaltySpec":
        return cls("l1")

    @classmethod
    def scad(cls, delta: float, a: float) -> "PenaltySpec":
        return cls("scad", delta=delta, a=a)

    @classmethod
    def cauchy(cls, delta: float) -> "PenaltySpec":
        return cls("cauchy", delta=delta)

    @classmethod
    def welsch(cls, delta: float) -> "PenaltySpec":
        return cls("welsch", delta=delta)

    @classmethod
    def cel0(cls, delta: float) -> "PenaltySpec":
        return cls("cel0", delta=delta)

    @property
    def penalty_id(self) -> str:
        """Compact identifier used in CSV output."""
        if self.kind == "spoq":
            pp = self.params
            return f"spoq-p{pp.p:g}-q{pp.q:g}"
        if self.kind == "scad":
            return f"scad-d{self.delta:g}-a{self.a:g}"
        if self.kind in ("cauchy", "welsch", "cel0"):
            return f"{self.kind}-d{self.delta:g}"
        return self.kind


def penalty_elementwise(x, spec: PenaltySpec, column_norms=None) -> np.ndarray:
    """Per-entry values of a separable penalty (everything except SPOQ).

    column_norms supplies ||d_n|| for CEL0; unit norms are assumed when
    omitted.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    kind = spec.kind
    if kind == "l0":
        return (x != 0.0).astype(float)
    if kind == "l1":
        return ax
    delta = spec.delta
    if kind == "scad":
        a = spec.a
        mid = (2.0 * a * delta * ax - ax * ax - delta * delta) / (2.0 * (a - 1.0))
        return np.where(ax < delta, delta * ax, np.where(ax < a * delta, mid, (a + 1.0) * delta * delta / 2.0))
    if kind == "cauchy":
        return np.log1p((ax / delta) ** 2)
    if kind == "welsch":
        return -np.expm1(-((ax / delta) ** 2))
    if kind == "cel0":
        norms = np.ones_like(x) if column_norms is None else np.asarray(column_norms, dtype=float)
        s = math.sqrt(2.0 * delta) / norms
        return delta - 0.5 * norms**2 * (ax - s) ** 2 * (ax < s)
    raise ValueError(f"no elementwise formula for kind {kind!r}")


def baseline_value(x, spec: PenaltySpec, column_norms=None) -> float:
    """Value of a baseline penalty (or SPOQ, for uniformity) at x."""
    if spec.kind == "spoq":
        return float(spoq_value(np.asarray(x, dtype=float), spec.params))
    return float(np.sum(penalty_elementwise(x, spec, column_norms)))


def baseline_gradient(x, spec: PenaltySpec) -> np.ndarray:
    """Gradient of a smooth penalty (cauchy or welsch)."""
    x = np.asarray(x, dtype=float)
    delta = spec.delta
    if spec.kind == "cauchy":
        return 2.0 * x / (delta * delta + x * x)
    if spec.kind == "welsch":
        return (2.0 * x / (delta * delta)) * np.exp(-((x / delta) ** 2))
    raise ValueError(f"{spec.kind} has no smooth gradient")


def baseline_curvature(x, spec: PenaltySpec) -> np.ndarray:
    """Half-quadratic curvature omega(x_n) = psi'(x_n)/x_n, continuous at 0.

    Cauchy: 2 / (delta^2 + x_n^2); Welsch: (2/delta^2) exp(-x_n^2/delta^2).
    The quadratic psi(x) + psi'(x)(t - x) + omega(x)(t - x)^2/2 majorizes
    psi(t) everywhere for both penalties.
    """
    x = np.asarray(x, dtype=float)
    delta = spec.delta
    if spec.kind == "cauchy":
        return 2.0 / (delta * delta + x * x)
    if spec.kind == "welsch":
        return (2.0 / (delta * delta)) * np.exp(-((x / delta) ** 2))
    raise ValueError(f"{spec.kind} has no half-quadratic curvature")

"""Penalty layer: values, derivatives, bounds, classification, baselines."""

import math

import numpy as np
import pytest

from spoq.penalties import (
    DEFAULT_SPOQ,
    PenaltySpec,
    SpoqParams,
    baseline_curvature,
    baseline_gradient,
    baseline_value,
    check_zero_minimizer,
    chi_curvature,
    exact_ratio,
    in_lq_region,
    lq_norm,
    penalty_elementwise,
    smooth_lp_power,
    smooth_lq_power,
    spoq_gradient,
    spoq_hessian_parts,
    spoq_lipschitz,
    spoq_majorant_gap,
    spoq_majorant_metric,
    spoq_metric_base,
    spoq_metric_bounds,
    spoq_value,
)

UNIT = SpoqParams(p=1.0, q=2.0, alpha=1.0, beta=1.0, eta=1.0)
MODERATE = SpoqParams(p=0.75, q=2.0, alpha=0.05, beta=0.1, eta=0.5)


# ---------------------------------------------------------------------------
# parameter validation


def test_params_validation():
    with pytest.raises(ValueError):
        SpoqParams(p=0.0, q=2, alpha=1, beta=1, eta=1)
    with pytest.raises(ValueError):
        SpoqParams(p=2.0, q=2, alpha=1, beta=1, eta=1)
    with pytest.raises(ValueError):
        SpoqParams(p=1.0, q=1.5, alpha=1, beta=1, eta=1)
    for field in ("alpha", "beta", "eta"):
        kwargs = dict(p=1.0, q=2.0, alpha=1.0, beta=1.0, eta=1.0)
        kwargs[field] = 0.0
        with pytest.raises(ValueError):
            SpoqParams(**kwargs)


def test_default_parameters():
    assert (DEFAULT_SPOQ.p, DEFAULT_SPOQ.q) == (0.75, 2.0)
    assert (DEFAULT_SPOQ.alpha, DEFAULT_SPOQ.beta, DEFAULT_SPOQ.eta) == (
        7e-7, 3e-3, 1e-1)


# ---------------------------------------------------------------------------
# value


def test_value_at_unit_basis_vector_is_zero():
    # (1/p) log(lp^p + beta^p) - (1/q) log(lq^q) with p=q-normalizing params
    # collapses to log(sqrt(2)+1-1+... ) == log parity at this point:
    # lp^p = sqrt(2)-1, +beta^p = sqrt(2); lq^q = 1+1 = 2 -> log cancels.
    x = np.array([1.0, 0.0])
    assert abs(spoq_value(x, UNIT)) < 1e-14


def test_value_penalizes_spread_relative_to_concentration():
    concentrated = np.array([2.0, 0.0, 0.0, 0.0])
    spread = np.full(4, 1.0)  # same l2 norm
    assert spoq_value(concentrated, MODERATE) < spoq_value(spread, MODERATE)


def test_value_batch_matches_scalar_loop():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 7))
    batch = spoq_value(X, MODERATE)
    single = np.array([spoq_value(x, MODERATE) for x in X])
    assert np.allclose(batch, single, rtol=0, atol=1e-14)


def test_value_against_mpmath_oracle():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 50
    rng = np.random.default_rng(1)
    for params in (UNIT, MODERATE, DEFAULT_SPOQ):
        for _ in range(5):
            x = rng.normal(scale=2.0, size=6)
            lp = mp.mpf(0)
            lq = mp.mpf(params.eta) ** params.q
            for xn in x:
                xm = mp.mpf(float(xn))
                lp += (xm**2 + mp.mpf(params.alpha) ** 2) ** (params.p / 2.0) \
                    - mp.mpf(params.alpha) ** params.p
                lq += abs(xm) ** params.q
            want = mp.log(lp + mp.mpf(params.beta) ** params.p) / params.p \
                - mp.log(lq) / params.q
            got = spoq_value(x, params)
            assert abs(got - float(want)) <= 1e-12 * (1.0 + abs(float(want)))


def test_smooth_lp_power_stable_for_tiny_entries():
    # naive (x^2+a^2)^{p/2} - a^p cancels catastrophically for |x| << alpha
    x = np.full(3, 1e-12)
    alpha, p = 7e-7, 0.75
    got = smooth_lp_power(x, p, alpha)
    want = 3 * (p / 2.0) * (1e-12 / alpha) ** 2 * alpha**p  # leading order
    assert got > 0
    assert abs(got - want) <= 1e-6 * want


def test_smooth_lq_power_formula():
    x = np.array([1.0, -2.0])
    assert smooth_lq_power(x, 2.0, 0.5) == pytest.approx(0.25 + 5.0)
    assert smooth_lq_power(x, 3.0, 1.0) == pytest.approx(1.0 + 1.0 + 8.0)


def test_lq_norm_overflow_safe():
    x = np.array([1e200, 1e200])
    assert np.isfinite(lq_norm(x, 2.0))
    assert lq_norm(x, 2.0) == pytest.approx(math.sqrt(2.0) * 1e200)
    assert lq_norm(np.zeros(4), 2.0) == 0.0


def test_in_lq_region_boundary_inclusive():
    x = np.array([3.0, 4.0])
    assert in_lq_region(x, 2.0, 5.0)
    assert not in_lq_region(x, 2.0, 5.0 + 1e-9)


# ---------------------------------------------------------------------------
# derivatives


def _fd_gradient(x, params, h=1e-6):
    n = x.size
    steps = np.maximum(1.0, np.abs(x)) * h
    plus = x[None, :] + np.diag(steps)
    minus = x[None, :] - np.diag(steps)
    return (spoq_value(plus, params) - spoq_value(minus, params)) / (2 * steps)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    for params in (UNIT, MODERATE):
        for _ in range(25):
            x = rng.normal(scale=3.0, size=8)
            g = spoq_gradient(x, params)
            fd = _fd_gradient(x, params)
            assert np.linalg.norm(g - fd) <= 1e-6 * (1.0 + np.linalg.norm(fd))


def test_gradient_zero_at_origin():
    assert np.allclose(spoq_gradient(np.zeros(5), MODERATE), 0.0)


def test_hessian_parts_match_finite_difference_hessian():
    rng = np.random.default_rng(3)
    for params in (UNIT, MODERATE, SpoqParams(p=1.25, q=3, alpha=0.3, beta=0.4, eta=0.8)):
        for _ in range(6):
            x = rng.normal(scale=2.0, size=5)
            d1, u1, d2, u2 = spoq_hessian_parts(x, params)
            H = np.diag(d1) - np.outer(u1, u1) - np.diag(d2) + np.outer(u2, u2)
            h = 1e-5
            fd = np.empty((5, 5))
            for j in range(5):
                e = np.zeros(5)
                e[j] = h * max(1.0, abs(x[j]))
                fd[:, j] = (spoq_gradient(x + e, params)
                            - spoq_gradient(x - e, params)) / (2 * e[j])
            assert np.linalg.norm(H - fd) <= 5e-5 * (1.0 + np.linalg.norm(fd))


def test_hessian_parts_defined_at_zero_for_q2():
    # |x|^{q-2} at q=2 uses the 0^0 = 1 convention
    d1, u1, d2, u2 = spoq_hessian_parts(np.zeros(3), UNIT)
    assert np.all(np.isfinite(d1)) and np.all(np.isfinite(d2))
    assert np.allclose(u1, 0.0) and np.allclose(u2, 0.0)


# ---------------------------------------------------------------------------
# Lipschitz bound


def test_lipschitz_unit_examples():
    assert spoq_lipschitz(UNIT, 2) == pytest.approx(4.0)
    assert spoq_lipschitz(UNIT, 1) == pytest.approx(2.5)


def test_lipschitz_benchmark_order_of_magnitude():
    params = SpoqParams(p=1.0, q=2.0, alpha=7e-7, beta=3e-3, eta=1e-1)
    L = spoq_lipschitz(params, 1000)
    assert L == pytest.approx(1.021e12, rel=1e-3)


def test_gradient_lipschitz_property_sampled():
    rng = np.random.default_rng(4)
    n = 10
    for params in (UNIT, MODERATE):
        L = spoq_lipschitz(params, n)
        X = rng.normal(scale=2.0, size=(500, n))
        Y = rng.normal(scale=2.0, size=(500, n))
        for x, y in zip(X, Y):
            lhs = np.linalg.norm(spoq_gradient(x, params) - spoq_gradient(y, params))
            assert lhs <= L * np.linalg.norm(x - y) * (1.0 + 1e-12)


# ---------------------------------------------------------------------------
# majorant and metric


def test_chi_curvature_example_and_monotonicity():
    assert chi_curvature(2.0, 1.0, 0.0) == pytest.approx(1.0)
    rhos = [0.0, 0.5, 1.0, 4.0]
    vals = [chi_curvature(2.0, 0.5, r) for r in rhos]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_chi_curvature_overflow_safe():
    assert chi_curvature(10.0, 1e-3, 1e40) > 0.0
    assert np.isfinite(chi_curvature(10.0, 1e-3, 1e40))


def test_majorant_metric_sandwich():
    rng = np.random.default_rng(5)
    for params in (UNIT, MODERATE):
        for _ in range(50):
            x = rng.normal(scale=2.0, size=6)
            rho = rng.uniform(0.0, 0.9) * lq_norm(x, params.q)
            metric = spoq_majorant_metric(x, rho, params)
            nu_lo, nu_hi = spoq_metric_bounds(params, rho_max=rho)
            assert metric.diag.min() >= nu_lo - 1e-12 * nu_lo
            assert metric.diag.max() <= nu_hi * (1.0 + 1e-12)
            base = spoq_metric_base(x, params)
            assert np.allclose(metric.diag, metric.chi + base)


def test_majorant_dominates_in_region():
    rng = np.random.default_rng(6)
    for params in (UNIT, MODERATE):
        checked = 0
        while checked < 200:
            x = rng.normal(scale=2.0, size=5)
            x_prime = x + rng.normal(scale=1.0, size=5)
            rho = 0.8 * min(lq_norm(x, params.q), lq_norm(x_prime, params.q))
            if rho <= 0.0:
                continue
            gap = spoq_majorant_gap(x, x_prime, rho, params)
            assert gap >= -1e-10 * (1.0 + abs(gap))
            checked += 1


def test_majorant_tangent_at_anchor():
    rng = np.random.default_rng(7)
    for _ in range(20):
        x = rng.normal(scale=2.0, size=5)
        rho = 0.5 * lq_norm(x, 2.0)
        assert abs(spoq_majorant_gap(x, x, rho, MODERATE)) <= 1e-12


def test_majorant_gap_rejects_points_outside_region():
    x = np.array([1.0, 1.0])
    with pytest.raises(ValueError):
        spoq_majorant_gap(x, np.zeros(2), rho=1.0, params=UNIT)


# ---------------------------------------------------------------------------
# zero-minimizer classification and exact ratio


def test_zero_minimizer_examples():
    assert check_zero_minimizer(SpoqParams(1.0, 2.0, 1.0, 1.0, 10.0)) == "global"
    # q = 2 with eta^2 alpha^{p-2} <= beta^p: no local minimizer at zero
    assert check_zero_minimizer(SpoqParams(1.0, 2.0, 1.0, 4.0, 1.0)) == "none"
    # q > 2 is always at least local
    assert check_zero_minimizer(SpoqParams(1.0, 3.0, 1.0, 4.0, 1e-3)) in (
        "local", "global")
    # local but not global: eta barely above the q=2 threshold
    assert check_zero_minimizer(SpoqParams(1.0, 2.0, 1.0, 1.0, 1.01)) == "local"


def test_global_minimizer_holds_on_samples():
    params = SpoqParams(1.0, 2.0, 1.0, 1.0, 10.0)
    rng = np.random.default_rng(8)
    X = rng.normal(scale=3.0, size=(2000, 6))
    v0 = spoq_value(np.zeros(6), params)
    assert np.all(spoq_value(X, params) >= v0 - 1e-12)


def test_exact_ratio_example_bounds_and_scale_invariance():
    x = np.array([3.0, 4.0])
    assert exact_ratio(x, 1.0, 2.0) == pytest.approx(1.4)
    assert exact_ratio(137.0 * x, 1.0, 2.0) == pytest.approx(1.4)
    rng = np.random.default_rng(9)
    for _ in range(100):
        n = rng.integers(2, 9)
        y = rng.normal(size=n)
        p, q = sorted(rng.uniform(0.3, 3.0, size=2))
        if q < 2.0:
            q = 2.0
        r = exact_ratio(y, p, q)
        nnz = np.count_nonzero(y)
        assert 1.0 - 1e-12 <= r <= nnz ** (1.0 / p - 1.0 / q) + 1e-12
    with pytest.raises(ValueError):
        exact_ratio(np.zeros(3), 1.0, 2.0)


# ---------------------------------------------------------------------------
# baseline penalties


def test_penalty_spec_validation_and_ids():
    assert PenaltySpec.l1().penalty_id == "l1"
    assert PenaltySpec.scad(1.0, 2.25).penalty_id == "scad-d1-a2.25"
    assert PenaltySpec.for_spoq(DEFAULT_SPOQ).penalty_id == "spoq-p0.75-q2"
    with pytest.raises(ValueError):
        PenaltySpec.scad(1.0, 2.0)  # a must exceed 2
    with pytest.raises(ValueError):
        PenaltySpec.cauchy(0.0)


def test_l0_l1_values():
    x = np.array([0.0, -2.0, 3.0, 0.0])
    assert baseline_value(x, PenaltySpec.l0()) == 2.0
    assert baseline_value(x, PenaltySpec.l1()) == 5.0


def test_scad_branch_values():
    spec = PenaltySpec.scad(1.0, 3.0)
    vals = penalty_elementwise(np.array([0.5, 2.0, 10.0]), spec)
    assert vals[0] == pytest.approx(0.5)  # linear branch: delta * |x|
    # quadratic branch at |x| = 2, delta = 1, a = 3:
    # (2 a delta |x| - x^2 - delta^2)/(2(a-1)) = (12 - 4 - 1)/4
    assert vals[1] == pytest.approx(7.0 / 4.0)
    assert vals[2] == pytest.approx((3.0 + 1.0) / 2.0)  # plateau (a+1) d^2/2


def test_cauchy_welsch_values_and_gradients():
    x = np.array([-1.0, 0.0, 2.0])
    c = PenaltySpec.cauchy(2.0)
    w = PenaltySpec.welsch(2.0)
    assert baseline_value(x, c) == pytest.approx(
        math.log(1.25) + 0.0 + math.log(2.0))
    assert baseline_value(x, w) == pytest.approx(
        (1 - math.exp(-0.25)) + 0.0 + (1 - math.exp(-1.0)))
    h = 1e-7
    for spec in (c, w):
        g = baseline_gradient(x, spec)
        fd = (penalty_elementwise(x + h, spec) - penalty_elementwise(x - h, spec)) / (2 * h)
        assert np.allclose(g, fd, atol=1e-6)


def test_cel0_value_with_column_norms():
    spec = PenaltySpec.cel0(0.5)
    norms = np.array([1.0, 2.0])
    s = math.sqrt(2.0 * 0.5) / norms  # threshold sqrt(2 delta)/||d_n||
    x = np.array([2.0, 0.1])
    vals = penalty_elementwise(x, spec, column_norms=norms)
    assert vals[0] == pytest.approx(0.5)  # beyond threshold: constant delta
    want = 0.5 - 0.5 * norms[1] ** 2 * (abs(x[1]) - s[1]) ** 2
    assert vals[1] == pytest.approx(want)


def test_half_quadratic_curvature_majorizes_globally():
    ts = np.linspace(-30.0, 30.0, 2001)
    for spec in (PenaltySpec.cauchy(1.3), PenaltySpec.welsch(0.7)):
        for s in (-4.0, -0.3, 0.0, 0.9, 7.5):
            sv = np.array([s])
            phi_s = penalty_elementwise(sv, spec)[0]
            grad_s = baseline_gradient(sv, spec)[0]
            omega = baseline_curvature(sv, spec)[0]
            quad = phi_s + grad_s * (ts - s) + 0.5 * omega * (ts - s) ** 2
            phi_t = penalty_elementwise(ts, spec)
            assert np.all(quad - phi_t >= -1e-12)


def test_half_quadratic_curvature_at_zero():
    assert baseline_curvature(np.zeros(1), PenaltySpec.cauchy(1.0))[0] == 2.0
    assert baseline_curvature(np.zeros(1), PenaltySpec.welsch(1.0))[0] == 2.0

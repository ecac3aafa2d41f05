"""Recovery metrics: SNR variants, sparsity, debiasing, report record."""

import math

import numpy as np
import pytest

from spoq.metrics import (
    SPARSITY_THRESHOLD,
    RunReport,
    debias_least_squares,
    snr,
    sparsity_degree,
    support_indices,
    tsnr,
)
from spoq.operators import Problem


def test_snr_examples():
    x = np.array([3.0, 4.0])
    assert snr(x, x) == math.inf
    assert snr(x, np.zeros(2)) == pytest.approx(0.0)  # error equals signal
    assert snr(x, np.array([3.0, 4.1])) == pytest.approx(20 * math.log10(5.0 / 0.1))
    with pytest.raises(ValueError):
        snr(np.zeros(2), x)


def test_snr_scale_covariance():
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.normal(size=6)
        e = rng.normal(size=6)
        base = snr(x, x + e)
        scaled = snr(10.0 * x, 10.0 * (x + e))
        assert scaled == pytest.approx(base)


def test_tsnr_restricts_to_true_support():
    x_true = np.array([0.0, 2.0, 0.0, 1.0])
    x_est = np.array([5.0, 2.0, -7.0, 1.0])  # perfect on the support
    assert tsnr(x_true, x_est) == math.inf
    assert snr(x_true, x_est) < 0.0  # off-support junk destroys plain snr
    x_est2 = np.array([0.0, 2.1, 0.0, 1.0])
    want = 20 * math.log10(np.linalg.norm([2.0, 1.0]) / 0.1)
    assert tsnr(x_true, x_est2) == pytest.approx(want)
    with pytest.raises(ValueError):
        tsnr(np.zeros(3), np.ones(3))


def test_sparsity_threshold_is_strict():
    x = np.array([0.0, SPARSITY_THRESHOLD, 2 * SPARSITY_THRESHOLD, -1.0])
    assert sparsity_degree(x) == 2  # the entry at the threshold stays out
    assert np.array_equal(support_indices(x), [2, 3])
    assert sparsity_degree(x, threshold=0.5) == 1


def _lsq_problem():
    rng = np.random.default_rng(1)
    D = np.abs(rng.normal(size=(20, 12)))
    D /= D.max(axis=0)
    x_true = np.zeros(12)
    x_true[[2, 5, 9]] = [3.0, 1.5, 7.0]
    y = D @ x_true
    return Problem(D=D, y=y, xi=1e-6), x_true


def test_debias_recovers_exact_amplitudes_on_true_support():
    prob, x_true = _lsq_problem()
    # biased estimate with the right support
    x_est = np.where(x_true > 0, x_true * 0.7, 0.0)
    x_deb = debias_least_squares(prob, x_est)
    assert np.allclose(x_deb, x_true, atol=1e-8)
    assert snr(x_true, x_deb) > snr(x_true, x_est)


def test_debias_clamps_negative_refits():
    prob, x_true = _lsq_problem()
    x_est = x_true.copy()
    x_est[0] = 1e-3  # spurious atom can draw a negative coefficient
    x_deb, info = debias_least_squares(prob, x_est, return_info=True)
    assert np.all(x_deb >= 0.0)
    assert set(info["support"]) == {0, 2, 5, 9}
    assert np.all(x_deb[info["unclamped"] >= 0] == info["unclamped"][info["unclamped"] >= 0])


def test_debias_empty_support_and_rank_deficiency():
    prob, _ = _lsq_problem()
    x_deb, info = debias_least_squares(prob, np.zeros(12), return_info=True)
    assert np.array_equal(x_deb, np.zeros(12))
    assert info["rank"] == 0 and not info["rank_deficient"]

    # duplicated column makes the support rank deficient
    D = np.ones((4, 2))
    prob2 = Problem(D=D, y=np.ones(4), xi=1.0)
    x_deb2, info2 = debias_least_squares(prob2, np.array([1.0, 1.0]), return_info=True)
    assert info2["rank_deficient"]
    assert np.all(np.isfinite(x_deb2))


def test_run_report_round_trip():
    rep = RunReport(
        penalty_id="l1", solver_id="pd", dataset="small", noise_percent=0.1,
        seed=3, snr_db=12.5, snr_raw_db=10.0, tsnr_db=14.0, sparsity_estimate=9,
        support_precision=0.9, support_recall=0.8, iterations=100,
        converged=True, wall_time_s=1.25, config_hash="abc123")
    fields = RunReport.csv_fields()
    row = rep.as_row()
    assert len(fields) == len(row) == 15
    assert fields[0] == "penalty_id" and fields[-1] == "config_hash"
    assert dict(zip(fields, row))["snr_db"] == 12.5

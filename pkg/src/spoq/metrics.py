"""Recovery quality metrics and the per-run report record."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .operators import Problem

__all__ = [
    "SPARSITY_THRESHOLD",
    "snr",
    "tsnr",
    "sparsity_degree",
    "support_indices",
    "debias_least_squares",
    "RunReport",
]

# Entries with magnitude above this count toward the estimated support.
SPARSITY_THRESHOLD = 1e-4


def snr(x_true, x_est) -> float:
    """Signal-to-noise ratio 20 log10(||x|| / ||x - x_est||) in dB.

    Exact recovery returns +inf; a zero ground truth is a domain error.
    """
    x_true = np.asarray(x_true, dtype=float)
    x_est = np.asarray(x_est, dtype=float)
    ref = float(np.linalg.norm(x_true))
    if ref == 0.0:
        raise ValueError("snr is undefined for a zero ground truth")
    err = float(np.linalg.norm(x_true - x_est))
    if err == 0.0:
        return math.inf
    return 20.0 * math.log10(ref / err)


def tsnr(x_true, x_est) -> float:
    """SNR restricted to the true support (exact nonzeros of x_true)."""
    x_true = np.asarray(x_true, dtype=float)
    x_est = np.asarray(x_est, dtype=float)
    s = x_true != 0.0
    if not s.any():
        raise ValueError("tsnr is undefined for a zero ground truth")
    return snr(x_true[s], x_est[s])


def sparsity_degree(x, threshold: float = SPARSITY_THRESHOLD) -> int:
    """Number of entries with |x_n| > threshold."""
    return int(np.count_nonzero(np.abs(np.asarray(x, dtype=float)) > threshold))


def support_indices(x, threshold: float = SPARSITY_THRESHOLD) -> np.ndarray:
    """Indices of entries with |x_n| > threshold."""
    return np.flatnonzero(np.abs(np.asarray(x, dtype=float)) > threshold)


def debias_least_squares(problem: Problem, x_est, threshold: float = SPARSITY_THRESHOLD,
                         *, return_info: bool = False):
    """Least-squares amplitude refit on the estimated support.

    Solves min ||D_S c - y|| over the columns S = {n : |x_est_n| > threshold}
    (minimum-norm solution when D_S is rank deficient), clamps negative
    refit amplitudes to zero, and returns the refit embedded in the full
    coordinates. With return_info=True also returns a dict holding the
    support, the matrix rank and the unclamped refit.
    """
    x_est = np.asarray(x_est, dtype=float)
    s = support_indices(x_est, threshold)
    x_deb = np.zeros_like(x_est)
    if s.size == 0:
        info = {"support": s, "rank": 0, "unclamped": x_deb.copy(), "rank_deficient": False}
        return (x_deb, info) if return_info else x_deb
    coef, _, rank, _ = np.linalg.lstsq(problem.D[:, s], problem.y, rcond=None)
    unclamped = np.zeros_like(x_est)
    unclamped[s] = coef
    x_deb[s] = np.maximum(coef, 0.0)
    info = {"support": s, "rank": int(rank), "unclamped": unclamped,
            "rank_deficient": int(rank) < s.size}
    return (x_deb, info) if return_info else x_deb


@dataclass(frozen=True)
class RunReport:
    """Flat summary of one solver run, ready for CSV serialization.

    snr_db/tsnr_db/sparsity_estimate are measured on the debiased estimate;
    snr_raw_db on the raw solver output. Infinite SNRs serialize as 'inf'.
    """

    penalty_id: str
    solver_id: str
    dataset: str
    noise_percent: float
    seed: int
    snr_db: float
    snr_raw_db: float
    tsnr_db: float
    sparsity_estimate: int
    support_precision: float
    support_recall: float
    iterations: int
    converged: bool
    wall_time_s: float
    config_hash: str

    @classmethod
    def csv_fields(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_row(self) -> list:
        return [getattr(self, f.name) for f in fields(self)]

"""Figure rendering for traces, sweeps, and grid searches.

Figures are written next to the delimited output of the reporting paths;
every function takes data plus a target path, renders with the Agg
backend, and returns the path written.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

_DPI = 130


def _finish(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_trace_figure(trace, path, *, title: str | None = None) -> Path:
    """Objective vs iteration and SNR vs wall time for a single run."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    its = np.arange(len(trace.objective))
    ax1.plot(its, trace.objective, marker=".", lw=1)
    ax1.set_xlabel("outer iteration")
    ax1.set_ylabel("objective")
    ax1.set_title(title or trace.solver_id)
    snrs = np.asarray(trace.snr_db, dtype=float)
    if np.isfinite(snrs).any():
        ax2.plot(trace.wall_time, snrs, marker=".", lw=1)
        ax2.set_ylabel("SNR (dB)")
    else:
        ax2.plot(trace.wall_time, trace.step_norm, marker=".", lw=1)
        ax2.set_yscale("log")
        ax2.set_ylabel("step norm")
    ax2.set_xlabel("wall time (s)")
    return _finish(fig, path)


def save_convergence_figure(traces, path) -> Path:
    """SNR vs wall time for several solvers on the same instance.

    `traces` is an iterable of (label, IterateTrace) pairs.
    """
    fig, ax = plt.subplots(figsize=(6, 3.8))
    for label, trace in traces:
        snrs = np.asarray(trace.snr_db, dtype=float)
        y = snrs if np.isfinite(snrs).any() else np.asarray(trace.objective)
        ax.plot(trace.wall_time, y, marker=".", lw=1.2, label=label)
    ax.set_xlabel("wall time (s)")
    ax.set_ylabel("SNR (dB)")
    ax.legend()
    ax.set_title("convergence by solver")
    return _finish(fig, path)


def save_noise_sweep_figure(rows, path) -> Path:
    """Mean SNR vs noise level, one line per penalty.

    `rows` are noise_sweep.csv rows: [noise, penalty_id, solver_id, n,
    snr_mean, snr_std, ...].
    """
    by_penalty: dict[str, list[tuple[float, float, float]]] = {}
    for row in rows:
        noise, penalty_id = float(row[0]), str(row[1])
        snr_m, snr_s = float(row[4]), float(row[5])
        by_penalty.setdefault(penalty_id, []).append((noise, snr_m, snr_s))
    fig, ax = plt.subplots(figsize=(6, 3.8))
    for penalty_id in sorted(by_penalty):
        pts = sorted(by_penalty[penalty_id])
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        es = [p[2] for p in pts]
        ax.errorbar(xs, ys, yerr=es, marker="o", lw=1.2, capsize=2,
                    label=penalty_id)
    ax.set_xlabel("noise level (percent of peak)")
    ax.set_ylabel("mean SNR (dB)")
    ax.legend(fontsize=7)
    ax.set_title("noise sweep")
    return _finish(fig, path)


def save_sparsity_sweep_figure(rows, path) -> Path:
    """Estimated vs true sparsity, one line per p, plus the diagonal.

    `rows` are sparsity_sweep.csv rows: [true_sparsity, p, q, n,
    sparsity_mean, sparsity_std, snr_mean, snr_std].
    """
    by_p: dict[float, list[tuple[int, float, float]]] = {}
    for row in rows:
        P, p = int(row[0]), float(row[1])
        sp_m, sp_s = float(row[4]), float(row[5])
        by_p.setdefault(p, []).append((P, sp_m, sp_s))
    fig, ax = plt.subplots(figsize=(6, 3.8))
    all_P = sorted({pt[0] for pts in by_p.values() for pt in pts})
    if all_P:
        ax.plot(all_P, all_P, color="0.6", ls="--", lw=1, label="true")
    for p in sorted(by_p):
        pts = sorted(by_p[p])
        ax.errorbar([t[0] for t in pts], [t[1] for t in pts],
                    yerr=[t[2] for t in pts], marker="o", lw=1.2, capsize=2,
                    label=f"p={p:g}")
    ax.set_xlabel("true sparsity")
    ax.set_ylabel("estimated sparsity")
    ax.legend(fontsize=8)
    ax.set_title("sparsity sweep (q=2)")
    return _finish(fig, path)


def save_table_figure(table_rows, noise_percent: float, path) -> Path:
    """Bar chart of mean SNR (with std bars) per penalty for one noise level.

    `table_rows` are aggregate rows: [penalty_id, solver_id, n, snr_mean,
    snr_std, ...].
    """
    labels = [str(r[0]) for r in table_rows]
    means = [float(r[3]) for r in table_rows]
    stds = [float(r[4]) for r in table_rows]
    fig, ax = plt.subplots(figsize=(max(5, 0.9 * len(labels) + 2), 3.8))
    xs = np.arange(len(labels))
    ax.bar(xs, means, yerr=stds, capsize=3)
    ax.set_xticks(xs)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("mean SNR (dB)")
    ax.set_title(f"noise {noise_percent:g}%")
    return _finish(fig, path)


def save_heatmap_figure(xvals, yvals, Z, xlabel: str, ylabel: str, path, *,
                        logx: bool = True, logy: bool = True,
                        title: str | None = None) -> Path:
    """SNR heatmap over a 2-D hyperparameter grid; Z[i, j] = (x_i, y_j)."""
    xvals = np.asarray(xvals, dtype=float)
    yvals = np.asarray(yvals, dtype=float)
    Z = np.asarray(Z, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.8))
    finite = Z[np.isfinite(Z)]
    vmin = finite.min() if finite.size else 0.0
    masked = np.where(np.isfinite(Z), Z, vmin)
    mesh = ax.pcolormesh(xvals, yvals, masked.T, shading="nearest")
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.colorbar(mesh, ax=ax, label="SNR (dB)")
    return _finish(fig, path)


def save_delta_curve_figure(deltas, snrs, label: str, path) -> Path:
    """SNR vs delta for the one-hyperparameter penalties."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(deltas, snrs, marker="o", lw=1.2)
    ax.set_xscale("log")
    ax.set_xlabel("delta")
    ax.set_ylabel("SNR (dB)")
    ax.set_title(label)
    return _finish(fig, path)


def save_spoq_sensitivity_figures(rows, axis, best_combo, out_dir) -> dict[str, Path]:
    """Pairwise (alpha, beta, eta) sensitivity heatmaps at the best slice.

    `rows` are gridsearch.csv rows [alpha, beta, eta, snr, sparsity] on the
    full 3-D product of `axis`; for each parameter pair the third parameter
    is fixed at its best value and the SNR slice is rendered.
    """
    axis = np.asarray(axis, dtype=float)
    n = len(axis)
    snr = np.full((n, n, n), -np.inf)
    index = {v: i for i, v in enumerate(axis)}
    for a, b, e, s, _sp in rows:
        snr[index[a], index[b], index[e]] = s
    names = ("alpha", "beta", "eta")
    best_idx = tuple(index[v] for v in best_combo)
    paths: dict[str, Path] = {}
    pairs = ((0, 1), (0, 2), (1, 2))
    for i, j in pairs:
        k = 3 - i - j
        slicer: list = [slice(None)] * 3
        slicer[k] = best_idx[k]
        Z = snr[tuple(slicer)]  # remaining axes are (names[i], names[j])
        name = f"sensitivity_{names[i]}_{names[j]}"
        title = f"{names[k]} = {axis[best_idx[k]]:.3g}"
        paths[name] = save_heatmap_figure(
            axis, axis, Z, names[i], names[j],
            Path(out_dir) / f"{name}.png", title=title)
    return paths

"""Batch experiment protocol: plans, benchmark grids, and grid search.

This module turns the library pieces into the benchmark the command line
exposes: named dataset presets, a penalty grid with per-noise hyperparameter
presets, seeded noise realizations, and deterministic CSV emission. Every
run row carries provenance (seed, config hash, solver id) so a rerun from
the same plan reproduces identical files up to wall-time columns.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .metrics import (
    RunReport,
    debias_least_squares,
    snr,
    sparsity_degree,
    support_indices,
    tsnr,
)
from .msdata import DATASET_SPARSITY, Instance, load_instance, make_instance
from .operators import Problem
from .penalties import DEFAULT_SPOQ, PenaltySpec, SpoqParams
from .solvers import (
    IterateTrace,
    SolverConfig,
    fb_solve,
    primal_dual_solve,
    tr_vmfb_solve,
    vmfb_halfquadratic_solve,
    vmfb_solve,
    warm_start_l1,
)

logger = logging.getLogger(__name__)

SOLVER_IDS = ("trvmfb", "vmfb", "fb", "pd", "hq")

# Hyperparameters that won each baseline's grid search, per (dataset, noise
# percent). Penalties not listed here take these values as their defaults.
TABLE_PRESETS: dict[tuple[str, float], dict[str, dict[str, float]]] = {
    ("A", 0.1): {"scad": {"delta": 1.0, "a": 2.25}, "cauchy": {"delta": 100.0},
                 "welsch": {"delta": 2.0}, "cel0": {"delta": 0.5}},
    ("A", 0.2): {"scad": {"delta": 1.25, "a": 2.75}, "cauchy": {"delta": 2.0},
                 "welsch": {"delta": 2.0}, "cel0": {"delta": 0.5}},
    ("B", 0.1): {"scad": {"delta": 2.75, "a": 3.75}, "cauchy": {"delta": 100.0},
                 "welsch": {"delta": 5.0}, "cel0": {"delta": 0.5}},
    ("B", 0.2): {"scad": {"delta": 1.25, "a": 2.75}, "cauchy": {"delta": 90.0},
                 "welsch": {"delta": 5.0}, "cel0": {"delta": 0.5}},
}

# Sparsity-sweep grids (true spike counts) for the full and small presets.
SWEEP_TRUE_SPARSITY = (10, 20, 48, 94, 182, 256, 323, 388)
SWEEP_TRUE_SPARSITY_SMALL = (5, 10, 20, 40)
SWEEP_P_VALUES = (0.25, 0.75, 1.0)

_FLOAT_FMT = "%.10g"


def _fmt(value) -> str:
    """Deterministic CSV cell formatting (floats via %.10g)."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return _FLOAT_FMT % value
    return str(value)


def default_solver_for(spec: PenaltySpec) -> str:
    """Solver used for a penalty when none is requested explicitly."""
    if spec.kind == "spoq":
        return "trvmfb"
    if spec.kind in ("cauchy", "welsch"):
        return "hq"
    return "pd"


def preset_penalty(kind: str, dataset: str, noise_percent: float) -> PenaltySpec:
    """Penalty with the grid-searched hyperparameters of a named benchmark."""
    table = TABLE_PRESETS.get((dataset, noise_percent))
    if table is None:
        # unlisted combinations reuse the closest listed noise level
        candidates = [k for k in TABLE_PRESETS if k[0] == dataset]
        if not candidates:
            candidates = [k for k in TABLE_PRESETS if k[0] == "A"]
        key = min(candidates, key=lambda k: abs(k[1] - noise_percent))
        table = TABLE_PRESETS[key]
    params = table.get(kind, {})
    if kind == "spoq":
        return PenaltySpec.for_spoq(DEFAULT_SPOQ)
    if kind == "l0":
        return PenaltySpec.l0()
    if kind == "l1":
        return PenaltySpec.l1()
    if kind == "scad":
        return PenaltySpec.scad(params["delta"], params["a"])
    if kind == "cauchy":
        return PenaltySpec.cauchy(params["delta"])
    if kind == "welsch":
        return PenaltySpec.welsch(params["delta"])
    if kind == "cel0":
        return PenaltySpec.cel0(params["delta"])
    raise ValueError(f"unknown penalty kind {kind!r}")


def default_penalties(dataset: str, noise_percent: float) -> tuple[tuple[PenaltySpec, str], ...]:
    """The seven benchmark penalties with preset hyperparameters."""
    kinds = ("spoq", "l0", "l1", "scad", "cauchy", "welsch", "cel0")
    out = []
    for kind in kinds:
        spec = preset_penalty(kind, dataset, noise_percent)
        out.append((spec, default_solver_for(spec)))
    return tuple(out)


@dataclass(frozen=True)
class ExperimentPlan:
    """Declarative description of one benchmark campaign.

    An empty `penalties` tuple means "the seven benchmark penalties with
    per-(dataset, noise) preset hyperparameters". Every (penalty, noise,
    seed) triple produces exactly one row in runs.csv.
    """

    dataset: str = "A"
    noise_percents: tuple[float, ...] = (0.1, 0.2)
    penalties: tuple[tuple[PenaltySpec, str], ...] = ()
    penalty_kinds: tuple[str, ...] = ()
    seed_count: int = 10
    solver: SolverConfig = field(default_factory=SolverConfig)
    include_convergence: bool = True
    include_sweep: bool = True
    sweep_seed_count: int = 1
    sweep_p_values: tuple[float, ...] = SWEEP_P_VALUES

    def __post_init__(self):
        if self.dataset not in DATASET_SPARSITY:
            raise ValueError(f"unknown dataset preset {self.dataset!r}; "
                             f"choose from {sorted(DATASET_SPARSITY)}")
        if self.seed_count < 0 or self.sweep_seed_count < 0:
            raise ValueError("seed counts must be >= 0")

    @property
    def seeds(self) -> tuple[int, ...]:
        return tuple(range(self.seed_count))

    @property
    def sweep_true_sparsity(self) -> tuple[int, ...]:
        if self.dataset == "small":
            return SWEEP_TRUE_SPARSITY_SMALL
        return SWEEP_TRUE_SPARSITY

    def penalties_for(self, noise_percent: float) -> tuple[tuple[PenaltySpec, str], ...]:
        if self.penalties:
            return self.penalties
        grid = default_penalties(self.dataset, noise_percent)
        if self.penalty_kinds:
            unknown = set(self.penalty_kinds) - {s.kind for s, _ in grid}
            if unknown:
                raise ValueError(f"unknown penalty kinds {sorted(unknown)}")
            grid = tuple((s, sid) for s, sid in grid if s.kind in self.penalty_kinds)
        return grid


def config_hash(spec: PenaltySpec, solver_id: str, config: SolverConfig,
                dataset: str, noise_percent: float, seed: int) -> str:
    """Stable 12-hex-digit digest of everything that determines a run."""
    parts = [spec.penalty_id, solver_id, dataset, _FLOAT_FMT % noise_percent,
             str(seed)]
    for f in dataclasses.fields(config):
        parts.append(f"{f.name}={getattr(config, f.name)!r}")
    if spec.kind == "spoq":
        p = spec.params
        parts.append(f"spoq={p.p!r},{p.q!r},{p.alpha!r},{p.beta!r},{p.eta!r}")
    return hashlib.sha1("|".join(parts).encode()).hexdigest()[:12]


def _dispatch_solver(problem: Problem, spec: PenaltySpec, solver_id: str,
                     config: SolverConfig, x0, *, x_true=None,
                     keep_iterates: bool = False):
    if solver_id in ("trvmfb", "vmfb", "fb"):
        if spec.kind != "spoq":
            raise ValueError(f"solver {solver_id!r} requires the spoq penalty, "
                             f"got {spec.penalty_id!r}")
        fn = {"trvmfb": tr_vmfb_solve, "vmfb": vmfb_solve, "fb": fb_solve}[solver_id]
        return fn(problem, spec.params, config, x0=x0, x_true=x_true,
                  keep_iterates=keep_iterates)
    if solver_id == "hq":
        if spec.kind not in ("cauchy", "welsch"):
            raise ValueError("solver 'hq' requires the cauchy or welsch penalty, "
                             f"got {spec.penalty_id!r}")
        return vmfb_halfquadratic_solve(problem, spec, config, x0=x0,
                                        x_true=x_true, keep_iterates=keep_iterates)
    if solver_id == "pd":
        if spec.kind not in ("l0", "l1", "scad", "cel0"):
            raise ValueError("solver 'pd' requires a penalty with an exact "
                             f"constrained prox, got {spec.penalty_id!r}")
        return primal_dual_solve(problem, spec, config, x0=x0, x_true=x_true,
                                 keep_iterates=keep_iterates)
    raise ValueError(f"unknown solver {solver_id!r}; choose from {SOLVER_IDS}")


def run_single(instance: Instance, spec: PenaltySpec, solver_id: str | None = None,
               config: SolverConfig | None = None, *, x0=None,
               keep_iterates: bool = False):
    """Warm start, solve, debias, and report one (instance, penalty) cell.

    Returns (x, x_debiased, trace, report). `x0` lets callers share one
    warm start across several penalties on the same instance.
    """
    config = config or SolverConfig()
    solver_id = solver_id or default_solver_for(spec)
    problem = Problem.from_sigma(instance.D, instance.y, instance.sigma)
    t0 = time.perf_counter()
    if x0 is None:
        x0 = warm_start_l1(problem, config.init_pd_iters)
    x, trace = _dispatch_solver(problem, spec, solver_id, config, x0,
                                x_true=instance.x_true,
                                keep_iterates=keep_iterates)
    wall = time.perf_counter() - t0
    xd = debias_least_squares(problem, x)
    true_support = set(support_indices(instance.x_true).tolist())
    est_support = set(support_indices(xd).tolist())
    overlap = len(true_support & est_support)
    report = RunReport(
        penalty_id=spec.penalty_id,
        solver_id=trace.solver_id,
        dataset=instance.dataset,
        noise_percent=instance.noise_percent,
        seed=instance.noise_seed,
        snr_db=snr(instance.x_true, xd),
        snr_raw_db=snr(instance.x_true, x),
        tsnr_db=tsnr(instance.x_true, xd),
        sparsity_estimate=sparsity_degree(xd),
        support_precision=overlap / len(est_support) if est_support else 0.0,
        support_recall=overlap / len(true_support) if true_support else 1.0,
        iterations=trace.iterations,
        converged=trace.converged,
        wall_time_s=wall,
        config_hash=config_hash(spec, solver_id, config, instance.dataset,
                                instance.noise_percent, instance.noise_seed),
    )
    return x, xd, trace, report


# ---------------------------------------------------------------------------
# benchmark campaign


def _run_noise_seed_group(args):
    """Worker task: all penalties on one (noise, seed) instance.

    Returns (key, [(penalty_id, report_or_None, status), ...]). A failing
    penalty is recorded and does not abort the group.
    """
    dataset, noise_percent, seed, penalties, config = args
    instance = make_instance(dataset, noise_percent=noise_percent, noise_seed=seed)
    problem = Problem.from_sigma(instance.D, instance.y, instance.sigma)
    x0 = warm_start_l1(problem, config.init_pd_iters)
    rows = []
    for spec, solver_id in penalties:
        try:
            _, _, _, report = run_single(instance, spec, solver_id, config, x0=x0)
            rows.append((spec.penalty_id, report, "ok"))
        except Exception as exc:  # recorded per cell; the campaign continues
            logger.warning("cell failed: %s/%s noise=%g seed=%d: %s",
                           spec.penalty_id, solver_id, noise_percent, seed, exc)
            rows.append((spec.penalty_id, None, f"failed:{type(exc).__name__}"))
    return (noise_percent, seed), rows


def _run_sweep_cell(args):
    """Worker task: the sparsity sweep solves for one (P, seed) instance."""
    dataset, true_sparsity, seed, p_values, config = args
    instance = make_instance(dataset, noise_percent=0.1, noise_seed=seed,
                             p_nonzero=true_sparsity)
    problem = Problem.from_sigma(instance.D, instance.y, instance.sigma)
    x0 = warm_start_l1(problem, config.init_pd_iters)
    rows = []
    for p in p_values:
        params = dataclasses.replace(DEFAULT_SPOQ, p=p)
        spec = PenaltySpec.for_spoq(params)
        try:
            _, _, _, report = run_single(instance, spec, "trvmfb", config, x0=x0)
            rows.append((p, report, "ok"))
        except Exception as exc:
            logger.warning("sweep cell failed: P=%d p=%g seed=%d: %s",
                           true_sparsity, p, seed, exc)
            rows.append((p, None, f"failed:{type(exc).__name__}"))
    return (true_sparsity, seed), rows


def _pool_map(fn, tasks, jobs: int):
    """Bounded worker pool; jobs == 1 degrades to in-process execution."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _mean_std(values) -> tuple[float, float]:
    """Arithmetic mean/std in dB space; any infinity propagates to the mean."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return float("nan"), float("nan")
    if np.isinf(arr).any():
        finite = arr[np.isfinite(arr)]
        return float("inf"), float(np.std(finite)) if finite.size else 0.0
    return float(np.mean(arr)), float(np.std(arr))


def run_benchmark(plan: ExperimentPlan, out_dir, *, jobs: int = 1,
                  plots: bool = True, progress=None) -> dict[str, Path]:
    """Execute a campaign and write its CSV tables (and figures) to out_dir.

    Emits runs.csv (one row per penalty/noise/seed cell plus a status
    column), one aggregate table per noise level, noise_sweep.csv,
    convergence.csv (solver traces on one seed), and sparsity_sweep.csv.
    Returns {artifact name: path}.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    say = progress or (lambda msg: None)
    written: dict[str, Path] = {}

    tasks = [(plan.dataset, noise, seed, plan.penalties_for(noise), plan.solver)
             for noise in plan.noise_percents for seed in plan.seeds]
    say(f"benchmark: {len(tasks)} instances x "
        f"{len(plan.penalties_for(plan.noise_percents[0])) if plan.noise_percents else 0} penalties")
    results = _pool_map(_run_noise_seed_group, tasks, jobs)

    # one row per cell, deterministically ordered
    cells = []
    for (noise, seed), rows in results:
        for penalty_id, report, status in rows:
            cells.append((noise, penalty_id, seed, report, status))
    cells.sort(key=lambda c: (c[0], c[1], c[2]))

    run_header = RunReport.csv_fields() + ["status"]
    run_rows = []
    for noise, penalty_id, seed, report, status in cells:
        if report is None:
            row = ["" for _ in RunReport.csv_fields()]
            row[0], row[3], row[4] = penalty_id, _fmt(noise), str(seed)
            run_rows.append(row + [status])
        else:
            run_rows.append(report.as_row() + [status])
    written["runs"] = _write_csv(out / "runs.csv", run_header, run_rows)

    # aggregate tables: one per noise level, one stacked noise sweep
    agg_header = ["penalty_id", "solver_id", "n_runs",
                  "snr_mean_db", "snr_std_db", "tsnr_mean_db", "tsnr_std_db",
                  "sparsity_mean", "sparsity_std",
                  "support_precision_mean", "support_recall_mean"]
    sweep_rows_by_noise: dict[float, list[list]] = {}
    for noise in plan.noise_percents:
        table_rows = []
        for spec, solver_id in plan.penalties_for(noise):
            reports = [r for (n, pid, _s, r, st) in cells
                       if n == noise and pid == spec.penalty_id and r is not None]
            if not reports:
                continue
            snr_m, snr_s = _mean_std([r.snr_db for r in reports])
            tsnr_m, tsnr_s = _mean_std([r.tsnr_db for r in reports])
            sp_m, sp_s = _mean_std([r.sparsity_estimate for r in reports])
            prec_m, _ = _mean_std([r.support_precision for r in reports])
            rec_m, _ = _mean_std([r.support_recall for r in reports])
            table_rows.append([spec.penalty_id, solver_id, len(reports),
                               snr_m, snr_s, tsnr_m, tsnr_s, sp_m, sp_s,
                               prec_m, rec_m])
        name = f"table_{_FLOAT_FMT % noise}pct"
        written[name] = _write_csv(out / f"{name}.csv", agg_header, table_rows)
        sweep_rows_by_noise[noise] = table_rows

    noise_header = ["noise_percent"] + agg_header
    noise_rows = [[noise] + row for noise in plan.noise_percents
                  for row in sweep_rows_by_noise[noise]]
    written["noise_sweep"] = _write_csv(out / "noise_sweep.csv", noise_header,
                                        noise_rows)

    # convergence traces: the three forward-backward variants on one seed
    conv_rows = []
    conv_traces = []
    if plan.include_convergence and plan.noise_percents and plan.seeds:
        noise, seed = plan.noise_percents[0], plan.seeds[0]
        say(f"convergence traces: noise={noise} seed={seed}")
        instance = make_instance(plan.dataset, noise_percent=noise, noise_seed=seed)
        problem = Problem.from_sigma(instance.D, instance.y, instance.sigma)
        x0 = warm_start_l1(problem, plan.solver.init_pd_iters)
        spec = PenaltySpec.for_spoq(DEFAULT_SPOQ)
        for solver_id in ("trvmfb", "vmfb", "fb"):
            _, _, trace, _ = run_single(instance, spec, solver_id, plan.solver,
                                        x0=x0.copy())
            conv_traces.append((solver_id, trace))
            for row in trace.rows():
                conv_rows.append([solver_id, spec.penalty_id, seed] + list(row))
    conv_header = ["solver_id", "penalty_id", "seed"] + list(IterateTrace.CSV_FIELDS)
    written["convergence"] = _write_csv(out / "convergence.csv", conv_header,
                                        conv_rows)

    # sparsity sweep: estimated vs true spike count across p
    sweep_header = ["true_sparsity", "p", "q", "n_runs",
                    "sparsity_mean", "sparsity_std", "snr_mean_db", "snr_std_db"]
    sweep_rows = []
    if plan.include_sweep and plan.sweep_seed_count > 0:
        sweep_tasks = [(plan.dataset, P, seed, plan.sweep_p_values, plan.solver)
                       for P in plan.sweep_true_sparsity
                       for seed in range(plan.sweep_seed_count)]
        say(f"sparsity sweep: {len(sweep_tasks)} instances x "
            f"{len(plan.sweep_p_values)} p values")
        sweep_results = _pool_map(_run_sweep_cell, sweep_tasks, jobs)
        by_cell: dict[tuple[int, float], list[RunReport]] = {}
        for (P, _seed), rows in sweep_results:
            for p, report, _status in rows:
                if report is not None:
                    by_cell.setdefault((P, p), []).append(report)
        for (P, p) in sorted(by_cell):
            reports = by_cell[(P, p)]
            sp_m, sp_s = _mean_std([r.sparsity_estimate for r in reports])
            snr_m, snr_s = _mean_std([r.snr_db for r in reports])
            sweep_rows.append([P, p, DEFAULT_SPOQ.q, len(reports),
                               sp_m, sp_s, snr_m, snr_s])
    written["sparsity_sweep"] = _write_csv(out / "sparsity_sweep.csv",
                                           sweep_header, sweep_rows)

    if plots:
        from . import plots as _plots
        if conv_traces:
            written["convergence_png"] = _plots.save_convergence_figure(
                conv_traces, out / "convergence.png")
        if noise_rows:
            written["noise_sweep_png"] = _plots.save_noise_sweep_figure(
                noise_rows, out / "noise_sweep.png")
        if sweep_rows:
            written["sparsity_sweep_png"] = _plots.save_sparsity_sweep_figure(
                sweep_rows, out / "sparsity_sweep.png")
        for noise in plan.noise_percents:
            rows = sweep_rows_by_noise.get(noise)
            if rows:
                name = f"table_{_FLOAT_FMT % noise}pct"
                written[name + "_png"] = _plots.save_table_figure(
                    rows, noise, out / f"{name}.png")
    return written


# ---------------------------------------------------------------------------
# hyperparameter grid search

GRID_AXIS_LO, GRID_AXIS_HI = 1e-7, 1e2  # log-spaced (alpha, beta, eta) axes
DELTA_AXIS_LO, DELTA_AXIS_HI = 1e-2, 1e2
SCAD_A_LO, SCAD_A_HI = 2.1, 3.9


def run_gridsearch(instance: Instance, kind: str, out_dir, *,
                   grid_points: int = 4, solver_id: str | None = None,
                   config: SolverConfig | None = None,
                   base_spoq: SpoqParams | None = None,
                   plots: bool = True, progress=None) -> dict:
    """Grid-search a penalty family's hyperparameters on one instance.

    spoq: log grid over (alpha, beta, eta); scad: (delta, a); cauchy,
    welsch, cel0: delta. Writes gridsearch.csv (one row per grid point),
    best.ini (the argmax configuration), and sensitivity figures. Returns
    {"best": PenaltySpec, "best_snr_db": float, "rows": list, "paths": dict}.
    """
    config = config or SolverConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    say = progress or (lambda msg: None)
    problem = Problem.from_sigma(instance.D, instance.y, instance.sigma)
    x0 = warm_start_l1(problem, config.init_pd_iters)

    if kind == "spoq":
        base = base_spoq or DEFAULT_SPOQ
        axis = np.logspace(np.log10(GRID_AXIS_LO), np.log10(GRID_AXIS_HI),
                           grid_points)
        combos = [(a, b, e) for a in axis for b in axis for e in axis]
        header = ["alpha", "beta", "eta", "snr_db", "sparsity_estimate"]
        make_spec = lambda c: PenaltySpec.for_spoq(dataclasses.replace(
            base, alpha=c[0], beta=c[1], eta=c[2]))
    elif kind == "scad":
        deltas = np.logspace(np.log10(DELTA_AXIS_LO), np.log10(DELTA_AXIS_HI),
                             grid_points)
        avals = np.linspace(SCAD_A_LO, SCAD_A_HI, grid_points)
        combos = [(d, a) for d in deltas for a in avals]
        header = ["delta", "a", "snr_db", "sparsity_estimate"]
        make_spec = lambda c: PenaltySpec.scad(c[0], c[1])
    elif kind in ("cauchy", "welsch", "cel0"):
        deltas = np.logspace(np.log10(DELTA_AXIS_LO), np.log10(DELTA_AXIS_HI),
                             max(grid_points, grid_points * grid_points // 2))
        combos = [(d,) for d in deltas]
        header = ["delta", "snr_db", "sparsity_estimate"]
        ctor = {"cauchy": PenaltySpec.cauchy, "welsch": PenaltySpec.welsch,
                "cel0": PenaltySpec.cel0}[kind]
        make_spec = lambda c: ctor(c[0])
    else:
        raise ValueError(f"penalty {kind!r} has no hyperparameters to search "
                         "(choose from spoq, scad, cauchy, welsch, cel0)")

    say(f"gridsearch {kind}: {len(combos)} grid points")
    rows = []
    best = (float("-inf"), None, None)  # (snr, combo, spec)
    for combo in combos:
        spec = make_spec(combo)
        sid = solver_id or default_solver_for(spec)
        try:
            _, _, _, report = run_single(instance, spec, sid, config, x0=x0)
            value, sparsity = report.snr_db, report.sparsity_estimate
        except Exception as exc:
            logger.warning("grid point %s failed: %s", combo, exc)
            value, sparsity = float("-inf"), -1
        rows.append(list(combo) + [value, sparsity])
        if value > best[0]:
            best = (value, combo, spec)

    paths = {"csv": _write_csv(out / "gridsearch.csv", header, rows)}

    best_snr, best_combo, best_spec = best
    ini = configparser.ConfigParser()
    section = f"penalty:{kind}"
    ini[section] = {}
    if kind == "spoq":
        base = base_spoq or DEFAULT_SPOQ
        ini[section]["p"] = _FLOAT_FMT % base.p
        ini[section]["q"] = _FLOAT_FMT % base.q
        for name, v in zip(("alpha", "beta", "eta"), best_combo):
            ini[section][name] = _FLOAT_FMT % v
    elif kind == "scad":
        ini[section]["delta"] = _FLOAT_FMT % best_combo[0]
        ini[section]["a"] = _FLOAT_FMT % best_combo[1]
    else:
        ini[section]["delta"] = _FLOAT_FMT % best_combo[0]
    ini[section]["snr_db"] = _FLOAT_FMT % best_snr
    buf = io.StringIO()
    ini.write(buf)
    best_path = out / "best.ini"
    best_path.write_text(buf.getvalue(), encoding="utf-8")
    paths["best"] = best_path

    if plots:
        from . import plots as _plots
        if kind == "spoq":
            paths.update(_plots.save_spoq_sensitivity_figures(
                rows, axis, best_combo, out))
        elif kind == "scad":
            paths["heatmap"] = _plots.save_heatmap_figure(
                deltas, avals,
                np.array([r[2] for r in rows]).reshape(len(deltas), len(avals)),
                "delta", "a", out / "gridsearch_heatmap.png", logy=False)
        else:
            paths["curve"] = _plots.save_delta_curve_figure(
                [r[0] for r in rows], [r[1] for r in rows],
                kind, out / "gridsearch_curve.png")
    return {"best": best_spec, "best_snr_db": best_snr, "best_combo": best_combo,
            "rows": rows, "paths": paths}


# ---------------------------------------------------------------------------
# plan files (flat key-value text with typed sections)


def _plan_to_ini(plan: ExperimentPlan) -> configparser.ConfigParser:
    ini = configparser.ConfigParser()
    ini["plan"] = {
        "dataset": plan.dataset,
        "noise_percents": ", ".join(_FLOAT_FMT % n for n in plan.noise_percents),
        "seed_count": str(plan.seed_count),
        "include_convergence": str(plan.include_convergence).lower(),
        "include_sweep": str(plan.include_sweep).lower(),
        "sweep_seed_count": str(plan.sweep_seed_count),
        "sweep_p_values": ", ".join(_FLOAT_FMT % p for p in plan.sweep_p_values),
    }
    if plan.penalty_kinds:
        ini["plan"]["penalty_kinds"] = ", ".join(plan.penalty_kinds)
    c = plan.solver
    ini["solver"] = {
        "theta": _FLOAT_FMT % c.theta,
        "trials": str(c.trials),
        "gamma": _FLOAT_FMT % c.gamma,
        "eps_stop": _FLOAT_FMT % c.eps_stop,
        "max_outer": str(c.max_outer),
        "max_inner": str(c.max_inner),
        "init_pd_iters": str(c.init_pd_iters),
    }
    for i, (spec, solver_id) in enumerate(plan.penalties):
        section = f"penalty:{spec.kind}" if len(plan.penalties) == 1 else \
            f"penalty:{spec.kind}.{i}"
        ini[section] = {}
        if spec.kind == "spoq":
            p = spec.params
            for name in ("p", "q", "alpha", "beta", "eta"):
                ini[section][name] = _FLOAT_FMT % getattr(p, name)
        else:
            if spec.delta is not None:
                ini[section]["delta"] = _FLOAT_FMT % spec.delta
            if spec.a is not None:
                ini[section]["a"] = _FLOAT_FMT % spec.a
        ini[section]["solver"] = solver_id
    return ini


def plan_to_text(plan: ExperimentPlan) -> str:
    buf = io.StringIO()
    _plan_to_ini(plan).write(buf)
    return buf.getvalue()


def _parse_floats(text: str) -> tuple[float, ...]:
    items = [t for t in text.replace(",", " ").split() if t]
    return tuple(float(t) for t in items)


def _penalty_from_section(name: str, section) -> tuple[PenaltySpec, str]:
    kind = name.split(":", 1)[1].split(".", 1)[0].strip().lower()
    if kind == "spoq":
        params = SpoqParams(
            p=section.getfloat("p", DEFAULT_SPOQ.p),
            q=section.getfloat("q", DEFAULT_SPOQ.q),
            alpha=section.getfloat("alpha", DEFAULT_SPOQ.alpha),
            beta=section.getfloat("beta", DEFAULT_SPOQ.beta),
            eta=section.getfloat("eta", DEFAULT_SPOQ.eta),
        )
        spec = PenaltySpec.for_spoq(params)
    elif kind == "l0":
        spec = PenaltySpec.l0()
    elif kind == "l1":
        spec = PenaltySpec.l1()
    elif kind == "scad":
        spec = PenaltySpec.scad(section.getfloat("delta", 1.0),
                                section.getfloat("a", 2.25))
    elif kind == "cauchy":
        spec = PenaltySpec.cauchy(section.getfloat("delta", 1.0))
    elif kind == "welsch":
        spec = PenaltySpec.welsch(section.getfloat("delta", 1.0))
    elif kind == "cel0":
        spec = PenaltySpec.cel0(section.getfloat("delta", 0.5))
    else:
        raise ValueError(f"unknown penalty kind {kind!r} in plan section [{name}]")
    solver_id = section.get("solver", default_solver_for(spec)).strip()
    if solver_id not in SOLVER_IDS:
        raise ValueError(f"unknown solver {solver_id!r} in plan section [{name}]")
    return spec, solver_id


def parse_plan(path) -> ExperimentPlan:
    """Read an ExperimentPlan from a flat key-value plan file."""
    ini = configparser.ConfigParser()
    read = ini.read(path)
    if not read:
        raise ValueError(f"plan file {path!r} not found or unreadable")
    kwargs = {}
    if ini.has_section("plan"):
        sec = ini["plan"]
        kwargs["dataset"] = sec.get("dataset", "A").strip()
        if "noise_percents" in sec:
            kwargs["noise_percents"] = _parse_floats(sec["noise_percents"])
        if "seed_count" in sec:
            kwargs["seed_count"] = sec.getint("seed_count")
        if "include_convergence" in sec:
            kwargs["include_convergence"] = sec.getboolean("include_convergence")
        if "include_sweep" in sec:
            kwargs["include_sweep"] = sec.getboolean("include_sweep")
        if "sweep_seed_count" in sec:
            kwargs["sweep_seed_count"] = sec.getint("sweep_seed_count")
        if "sweep_p_values" in sec:
            kwargs["sweep_p_values"] = _parse_floats(sec["sweep_p_values"])
        if "penalty_kinds" in sec:
            kwargs["penalty_kinds"] = tuple(
                t for t in sec["penalty_kinds"].replace(",", " ").split() if t)
    if ini.has_section("solver"):
        sec = ini["solver"]
        base = SolverConfig()
        kwargs["solver"] = dataclasses.replace(
            base,
            theta=sec.getfloat("theta", base.theta),
            trials=sec.getint("trials", base.trials),
            gamma=sec.getfloat("gamma", base.gamma),
            eps_stop=sec.getfloat("eps_stop", base.eps_stop),
            max_outer=sec.getint("max_outer", base.max_outer),
            max_inner=sec.getint("max_inner", base.max_inner),
            init_pd_iters=sec.getint("init_pd_iters", base.init_pd_iters),
        )
    penalties = []
    for name in ini.sections():
        if name.startswith("penalty:"):
            penalties.append(_penalty_from_section(name, ini[name]))
    if penalties:
        kwargs["penalties"] = tuple(penalties)
    return ExperimentPlan(**kwargs)


def load_instance_file(path) -> Instance:
    """Thin wrapper so the CLI only imports this module for plumbing."""
    return load_instance(path)

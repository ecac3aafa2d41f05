"""Command-line entry points: generate | solve | benchmark | gridsearch | defaults.

All outputs are files (CSV with header rows, JSON reports with stable key
ordering, PNG figures next to the delimited output); exit codes are the
only interactive contract: 0 success/converged, 2 input error, 3 solver
stopped on its iteration budget.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from .experiments import (
    ExperimentPlan,
    default_solver_for,
    parse_plan,
    plan_to_text,
    preset_penalty,
    run_benchmark,
    run_gridsearch,
    run_single,
)
from .msdata import DictionarySpec, load_instance, make_instance, save_instance
from .penalties import DEFAULT_SPOQ, PenaltySpec, SpoqParams
from .solvers import InitializationError, IterateTrace, SolverConfig

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_ITERATION_BUDGET = 3

PENALTY_KINDS = ("spoq", "l0", "l1", "scad", "cauchy", "welsch", "cel0")
SOLVER_CHOICES = ("trvmfb", "vmfb", "fb", "pd", "hq")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=float, default=None,
                   help="trust-region shrink factor in (0,1)")
    p.add_argument("--B", type=int, default=None, dest="trials",
                   help="radius trials per outer iteration (1 = plain VMFB)")
    p.add_argument("--gamma", type=float, default=None,
                   help="forward-backward step size")
    p.add_argument("--eps", type=float, default=None,
                   help="relative step-norm stopping tolerance")
    p.add_argument("--max-outer", type=int, default=None,
                   help="outer iteration budget")
    p.add_argument("--max-inner", type=int, default=None,
                   help="inner (prox) iteration budget")


def _add_penalty_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--penalty", choices=PENALTY_KINDS, default="spoq")
    p.add_argument("--p", type=float, default=None, help="lp exponent (spoq)")
    p.add_argument("--q", type=float, default=None, help="lq exponent (spoq)")
    p.add_argument("--alpha", type=float, default=None, help="lp smoothing (spoq)")
    p.add_argument("--beta", type=float, default=None, help="log offset (spoq)")
    p.add_argument("--eta", type=float, default=None, help="lq smoothing (spoq)")
    p.add_argument("--delta", type=float, default=None,
                   help="scale hyperparameter (scad/cauchy/welsch/cel0)")
    p.add_argument("--a", type=float, default=None,
                   help="shape hyperparameter (scad, > 2)")


def solver_config_from_args(args) -> SolverConfig:
    base = SolverConfig()
    updates = {}
    for flag, name in (("theta", "theta"), ("trials", "trials"),
                       ("gamma", "gamma"), ("eps", "eps_stop"),
                       ("max_outer", "max_outer"), ("max_inner", "max_inner")):
        value = getattr(args, flag, None)
        if value is not None:
            updates[name] = value
    return dataclasses.replace(base, **updates) if updates else base


def spoq_params_from_args(args) -> SpoqParams:
    return SpoqParams(
        p=args.p if args.p is not None else DEFAULT_SPOQ.p,
        q=args.q if args.q is not None else DEFAULT_SPOQ.q,
        alpha=args.alpha if args.alpha is not None else DEFAULT_SPOQ.alpha,
        beta=args.beta if args.beta is not None else DEFAULT_SPOQ.beta,
        eta=args.eta if args.eta is not None else DEFAULT_SPOQ.eta,
    )


def penalty_from_args(args, dataset: str, noise_percent: float) -> PenaltySpec:
    """Penalty from flags; unset hyperparameters fall back to the presets."""
    kind = args.penalty
    if kind == "spoq":
        return PenaltySpec.for_spoq(spoq_params_from_args(args))
    preset = preset_penalty(kind, dataset, noise_percent)
    delta = args.delta if args.delta is not None else preset.delta
    a = args.a if args.a is not None else preset.a
    if kind == "l0":
        return PenaltySpec.l0()
    if kind == "l1":
        return PenaltySpec.l1()
    if kind == "scad":
        return PenaltySpec.scad(delta, a)
    if kind == "cauchy":
        return PenaltySpec.cauchy(delta)
    if kind == "welsch":
        return PenaltySpec.welsch(delta)
    return PenaltySpec.cel0(delta)


def _resolve_out_file(out: str | None, default_name: str) -> Path:
    if out is None:
        return Path(default_name)
    path = Path(out)
    if path.is_dir() or str(out).endswith(("/", "\\")):
        path.mkdir(parents=True, exist_ok=True)
        return path / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def cmd_generate(args) -> int:
    dataset = "small" if args.small else args.dataset
    instance = make_instance(dataset, noise_percent=args.noise_percent,
                             noise_seed=args.noise_seed,
                             p_nonzero=args.p_nonzero)
    name = (f"instance_{dataset}_{args.noise_percent:g}pct_"
            f"seed{args.noise_seed}.txt")
    path = _resolve_out_file(args.out, name)
    save_instance(path, instance)
    print(f"wrote {path} (n={instance.spec.n_atoms} m={instance.spec.n_samples} "
          f"P={instance.p_nonzero} sigma={instance.sigma:.6g})")
    return EXIT_OK


def cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    spec = penalty_from_args(args, instance.dataset, instance.noise_percent)
    solver_id = args.solver or default_solver_for(spec)
    config = solver_config_from_args(args)
    x, xd, trace, report = run_single(instance, spec, solver_id, config)

    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{spec.penalty_id}_{trace.solver_id}"
    trace_path = out / f"{stem}_trace.csv"
    with open(trace_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(IterateTrace.CSV_FIELDS)
        writer.writerows(trace.rows())
    payload = dataclasses.asdict(report)
    payload.update(stop_reason=trace.stop_reason, warnings=trace.warnings,
                   instance=str(args.instance), trace_csv=str(trace_path))
    report_path = out / f"{stem}_report.json"
    report_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                           encoding="utf-8")
    artifacts = [report_path, trace_path]
    if not args.no_plots:
        from . import plots
        artifacts.append(plots.save_trace_figure(
            trace, out / f"{stem}_trace.png", title=stem))
    print(f"{stem}: snr={report.snr_db:.2f} dB sparsity={report.sparsity_estimate} "
          f"iterations={report.iterations} stop={trace.stop_reason}")
    for path in artifacts:
        print(f"wrote {path}")
    return EXIT_OK if trace.converged else EXIT_ITERATION_BUDGET


def cmd_benchmark(args) -> int:
    if args.plan:
        plan = parse_plan(args.plan)
        if args.small:
            plan = dataclasses.replace(plan, dataset="small")
        if args.seeds is not None:
            plan = dataclasses.replace(plan, seed_count=args.seeds)
    else:
        plan = ExperimentPlan(
            dataset="small" if args.small else args.dataset,
            noise_percents=tuple(args.noise_percent) if args.noise_percent
            else ExperimentPlan().noise_percents,
            penalty_kinds=tuple(args.penalty) if args.penalty else (),
            seed_count=args.seeds if args.seeds is not None else 10,
            solver=solver_config_from_args(args),
            include_convergence=not args.no_convergence,
            include_sweep=not args.no_sweep,
            sweep_seed_count=args.sweep_seeds,
        )
    out = args.out or "benchmark_out"
    written = run_benchmark(plan, out, jobs=args.jobs,
                            plots=not args.no_plots, progress=print)
    for name in sorted(written):
        print(f"wrote {written[name]}")
    return EXIT_OK


def cmd_gridsearch(args) -> int:
    instance = load_instance(args.instance)
    config = solver_config_from_args(args)
    base = spoq_params_from_args(args) if args.penalty == "spoq" else None
    result = run_gridsearch(instance, args.penalty, args.out or "gridsearch_out",
                            grid_points=args.grid_points, solver_id=args.solver,
                            config=config, base_spoq=base,
                            plots=not args.no_plots, progress=print)
    print(f"best {result['best'].penalty_id}: snr={result['best_snr_db']:.2f} dB")
    for name in sorted(result["paths"]):
        print(f"wrote {result['paths'][name]}")
    return EXIT_OK


def cmd_defaults(args) -> int:
    lines = [plan_to_text(ExperimentPlan())]
    spoq = DEFAULT_SPOQ
    lines.append("[spoq]")
    for name in ("p", "q", "alpha", "beta", "eta"):
        lines.append(f"{name} = {getattr(spoq, name):.10g}")
    lines.append("")
    lines.append("[dictionary]")
    for f in dataclasses.fields(DictionarySpec):
        lines.append(f"{f.name} = {getattr(DictionarySpec(), f.name)}")
    lines.append("")
    text = "\n".join(lines)
    if args.out:
        path = _resolve_out_file(args.out, "defaults.ini")
        path.write_text(text, encoding="utf-8")
        print(f"wrote {path}")
    else:
        print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spoq",
        description="Sparse recovery benchmark: smoothed lp-over-lq penalty, "
                    "trust-region variable-metric forward-backward solver, and "
                    "six baseline penalties on synthetic isotopic-pattern data.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize and save a benchmark instance")
    g.add_argument("--dataset", choices=("A", "B", "small"), default="A")
    g.add_argument("--small", action="store_true",
                   help="shorthand for --dataset small")
    g.add_argument("--noise-percent", type=float, default=0.1)
    g.add_argument("--noise-seed", type=int, default=0)
    g.add_argument("--p-nonzero", type=int, default=None,
                   help="override the preset spike count")
    g.add_argument("--out", default=None, help="output file or directory")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run one penalty/solver on a saved instance")
    s.add_argument("--instance", required=True)
    _add_penalty_flags(s)
    s.add_argument("--solver", choices=SOLVER_CHOICES, default=None,
                   help="default: trvmfb for spoq, hq for cauchy/welsch, else pd")
    _add_solver_flags(s)
    s.add_argument("--out", default=None, help="output directory")
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("benchmark", help="run a full benchmark campaign")
    b.add_argument("--plan", default=None, help="plan file (ini format)")
    b.add_argument("--dataset", choices=("A", "B", "small"), default="A")
    b.add_argument("--small", action="store_true",
                   help="desk-scale preset (n=200, P=10)")
    b.add_argument("--noise-percent", type=float, action="append", default=None,
                   help="repeatable; default 0.1 and 0.2")
    b.add_argument("--penalty", choices=PENALTY_KINDS, action="append",
                   default=None, help="repeatable; default all seven")
    b.add_argument("--seeds", type=int, default=None,
                   help="number of noise realizations (default 10)")
    _add_solver_flags(b)
    b.add_argument("--sweep-seeds", type=int, default=1,
                   help="noise realizations per sparsity-sweep point")
    b.add_argument("--no-convergence", action="store_true",
                   help="skip the solver-comparison traces")
    b.add_argument("--no-sweep", action="store_true",
                   help="skip the sparsity sweep")
    b.add_argument("--jobs", type=int, default=1, help="worker pool size")
    b.add_argument("--out", default=None, help="output directory")
    b.add_argument("--no-plots", action="store_true")
    b.set_defaults(func=cmd_benchmark)

    gs = sub.add_parser("gridsearch",
                        help="hyperparameter grid search on one instance")
    gs.add_argument("--instance", required=True)
    _add_penalty_flags(gs)
    gs.add_argument("--solver", choices=SOLVER_CHOICES, default=None)
    _add_solver_flags(gs)
    gs.add_argument("--grid-points", type=int, default=4,
                    help="grid resolution per axis")
    gs.add_argument("--out", default=None, help="output directory")
    gs.add_argument("--no-plots", action="store_true")
    gs.set_defaults(func=cmd_gridsearch)

    d = sub.add_parser("defaults", help="print all default settings (ini format)")
    d.add_argument("--out", default=None, help="write to file instead of stdout")
    d.set_defaults(func=cmd_defaults)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, InitializationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())

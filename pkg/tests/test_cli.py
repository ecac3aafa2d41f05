"""Command-line interface: subcommands, exit codes, artifacts, replay."""

import configparser
import csv
import json
from pathlib import Path

import pytest

from spoq.cli import EXIT_ITERATION_BUDGET, EXIT_OK, main
from spoq.experiments import ExperimentPlan, parse_plan, plan_to_text


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def _strip_wall_time(rows):
    """Drop columns whose header mentions wall time (the only nondeterminism)."""
    header = rows[0]
    keep = [i for i, name in enumerate(header) if "wall_time" not in name]
    return [[row[i] for i in keep] for row in rows]


@pytest.fixture(scope="module")
def instance_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("inst")
    rc = main(["generate", "--small", "--noise-percent", "0.1",
               "--noise-seed", "0", "--out", str(d)])
    assert rc == EXIT_OK
    path = d / "instance_small_0.1pct_seed0.txt"
    assert path.exists()
    return path


# ---------------------------------------------------------------------------
# generate


def test_generate_is_reproducible(tmp_path, instance_file):
    rc = main(["generate", "--small", "--noise-percent", "0.1",
               "--noise-seed", "0", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    again = tmp_path / "instance_small_0.1pct_seed0.txt"
    assert again.read_bytes() == instance_file.read_bytes()


def test_generate_rejects_bad_sparsity(tmp_path):
    rc = main(["generate", "--small", "--p-nonzero", "100000",
               "--out", str(tmp_path)])
    assert rc == 2


# ---------------------------------------------------------------------------
# solve


def test_solve_writes_reports_and_figures(tmp_path, instance_file):
    out = tmp_path / "solve"
    rc = main(["solve", "--instance", str(instance_file), "--out", str(out)])
    assert rc == EXIT_OK
    trace = out / "spoq-p0.75-q2_trvmfb_trace.csv"
    report = out / "spoq-p0.75-q2_trvmfb_report.json"
    figure = out / "spoq-p0.75-q2_trvmfb_trace.png"
    assert trace.exists() and report.exists() and figure.exists()
    rows = _read_csv(trace)
    assert rows[0][0] == "iteration" and len(rows) > 2
    payload = json.loads(report.read_text())
    assert payload["penalty_id"] == "spoq-p0.75-q2"
    assert payload["solver_id"] == "trvmfb"
    assert payload["converged"] is True
    assert payload["stop_reason"] == "step_tolerance"
    assert payload["snr_db"] > 0.0


def test_solve_no_plots_skips_figure(tmp_path, instance_file):
    out = tmp_path / "solve_np"
    rc = main(["solve", "--instance", str(instance_file), "--penalty", "l1",
               "--out", str(out), "--no-plots"])
    assert rc in (EXIT_OK, EXIT_ITERATION_BUDGET)
    assert (out / "l1_pd_report.json").exists()
    assert not list(out.glob("*.png"))


def test_solve_budget_exhaustion_exit_code(tmp_path, instance_file):
    out = tmp_path / "solve_budget"
    rc = main(["solve", "--instance", str(instance_file), "--max-outer", "1",
               "--eps", "1e-16", "--out", str(out), "--no-plots"])
    assert rc == EXIT_ITERATION_BUDGET
    payload = json.loads((out / "spoq-p0.75-q2_trvmfb_report.json").read_text())
    assert payload["converged"] is False
    assert payload["stop_reason"] == "max_outer"


def test_solve_missing_instance_is_input_error(tmp_path):
    rc = main(["solve", "--instance", str(tmp_path / "missing.txt")])
    assert rc == 2


def test_unknown_flag_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--instance", "x", "--frobnicate"])
    assert exc.value.code == 2


def test_incompatible_penalty_solver_pair(tmp_path, instance_file):
    rc = main(["solve", "--instance", str(instance_file), "--penalty", "l1",
               "--solver", "hq", "--out", str(tmp_path), "--no-plots"])
    assert rc == 2


# ---------------------------------------------------------------------------
# defaults and plan files


def test_defaults_output_is_parsable_ini(tmp_path):
    out = tmp_path / "defaults.ini"
    rc = main(["defaults", "--out", str(out)])
    assert rc == EXIT_OK
    cp = configparser.ConfigParser()
    cp.read(out)
    assert cp.getint("plan", "seed_count") == 10
    assert cp.getfloat("spoq", "p") == 0.75
    assert cp.getint("dictionary", "n_atoms") == 1000
    assert cp.getfloat("solver", "gamma") == 1.9


def test_plan_text_round_trip(tmp_path):
    plan = ExperimentPlan(dataset="small", noise_percents=(0.2,),
                          penalty_kinds=("spoq", "l1"), seed_count=3,
                          include_sweep=False)
    path = tmp_path / "plan.ini"
    path.write_text(plan_to_text(plan), encoding="utf-8")
    back = parse_plan(path)
    assert back.dataset == "small"
    assert back.noise_percents == (0.2,)
    assert back.seed_count == 3
    assert back.include_sweep is False
    assert back.penalty_kinds == ("spoq", "l1")
    assert back.solver == plan.solver


# ---------------------------------------------------------------------------
# benchmark


def test_benchmark_small_campaign_and_replay(tmp_path, instance_file):
    args = ["benchmark", "--small", "--seeds", "1",
            "--noise-percent", "0.1",
            "--penalty", "spoq", "--penalty", "l1",
            "--no-sweep", "--out", None, "--no-plots"]
    out1, out2 = tmp_path / "b1", tmp_path / "b2"
    for out in (out1, out2):
        args[-2] = str(out)
        assert main([a for a in args if a is not None]) == EXIT_OK
    for name in ("runs.csv", "table_0.1pct.csv", "noise_sweep.csv",
                 "convergence.csv"):
        f1, f2 = out1 / name, out2 / name
        assert f1.exists(), name
        assert _strip_wall_time(_read_csv(f1)) == _strip_wall_time(_read_csv(f2)), name
    runs = _read_csv(out1 / "runs.csv")
    header = runs[0]
    assert header[-1] == "status"
    by_penalty = {row[header.index("penalty_id")]: row for row in runs[1:]}
    assert set(by_penalty) == {"spoq-p0.75-q2", "l1"}
    snr_col = header.index("snr_db")
    assert float(by_penalty["spoq-p0.75-q2"][snr_col]) > 0.0
    assert all(row[-1] == "ok" for row in runs[1:])
    assert len(_read_csv(out1 / "sparsity_sweep.csv")) == 1  # header only
    assert not list(out1.glob("*.png"))


def test_benchmark_with_plots_renders_figures(tmp_path):
    out = tmp_path / "bp"
    rc = main(["benchmark", "--small", "--seeds", "1", "--noise-percent", "0.1",
               "--penalty", "spoq", "--penalty", "welsch", "--no-sweep",
               "--out", str(out)])
    assert rc == EXIT_OK
    pngs = {p.name for p in out.glob("*.png")}
    assert "convergence.png" in pngs
    assert "noise_sweep.png" in pngs
    assert "table_0.1pct.png" in pngs


def test_benchmark_zero_seeds_writes_headers_only(tmp_path):
    out = tmp_path / "b0"
    rc = main(["benchmark", "--small", "--seeds", "0", "--no-sweep",
               "--no-convergence", "--out", str(out), "--no-plots"])
    assert rc == EXIT_OK
    runs = _read_csv(out / "runs.csv")
    assert len(runs) == 1  # header only
    assert runs[0][0] == "penalty_id"


def test_benchmark_plan_file_with_overrides(tmp_path):
    plan = ExperimentPlan(dataset="A", noise_percents=(0.1,),
                          penalty_kinds=("l1",), seed_count=5,
                          include_convergence=False, include_sweep=False)
    plan_path = tmp_path / "plan.ini"
    plan_path.write_text(plan_to_text(plan), encoding="utf-8")
    out = tmp_path / "bplan"
    rc = main(["benchmark", "--plan", str(plan_path), "--small", "--seeds", "1",
               "--out", str(out), "--no-plots"])
    assert rc == EXIT_OK
    runs = _read_csv(out / "runs.csv")
    header, rows = runs[0], runs[1:]
    assert len(rows) == 1  # --seeds override applied
    assert rows[0][header.index("dataset")] == "small"  # --small override


# ---------------------------------------------------------------------------
# gridsearch


def test_gridsearch_cauchy_curve(tmp_path, instance_file):
    out = tmp_path / "gs"
    rc = main(["gridsearch", "--instance", str(instance_file),
               "--penalty", "cauchy", "--grid-points", "2",
               "--max-outer", "60", "--out", str(out)])
    assert rc == EXIT_OK
    table = _read_csv(out / "gridsearch.csv")
    assert len(table) == 3  # header + two delta values
    assert "snr_db" in table[0]
    cp = configparser.ConfigParser()
    cp.read(out / "best.ini")
    assert cp.has_section("penalty:cauchy")
    assert cp.getfloat("penalty:cauchy", "delta") > 0.0
    assert cp.has_option("penalty:cauchy", "snr_db")
    assert (out / "gridsearch_curve.png").exists()


def test_gridsearch_rejects_parameterless_penalties(tmp_path, instance_file):
    rc = main(["gridsearch", "--instance", str(instance_file),
               "--penalty", "l1", "--out", str(tmp_path)])
    assert rc == 2

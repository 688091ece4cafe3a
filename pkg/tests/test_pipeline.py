import json
import math
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from conftest import make_toy_spec
from fast_replan.approx import build_jacobian_grid
from fast_replan.errors import ConfigError
from fast_replan.gsa import screen
from fast_replan.hdsa import compute_sensitivity
from fast_replan.ocp import Controller, terminal_residuals
from fast_replan.optimizer import OptimizerConfig, minimize_objective
from fast_replan.pipeline import (
    EventLog,
    ExperimentConfig,
    NominalSolution,
    PipelineStage,
    ReplanContext,
    ReplanMethod,
    draw_thetas,
    fly,
    labels_for,
    load_config,
    run_report,
    run_sweep,
    simulate_change,
    unflatten,
)

TOY_NOMINAL_THETA = np.zeros(2)


def _toy_context(tmp_path: Path, **overrides) -> ReplanContext:
    cfg = ExperimentConfig(
        optimizer=OptimizerConfig(grad_tol=1e-8),
        t_change=1.5,
        homotopy_steps=4,
        sweep_size=3,
        output_dir=tmp_path,
        **overrides,
    )
    spec = make_toy_spec()
    u0 = Controller.constant(spec.controller_grid, 0.0)
    report = minimize_objective(spec, TOY_NOMINAL_THETA, u0, cfg.optimizer)
    states = spec.simulate(report.controller.coeffs, TOY_NOMINAL_THETA).states
    nominal = NominalSolution(
        controller=report.controller,
        report=report,
        scales=spec.scales,
        cost=report.cost,
        initial_cost=spec.evaluate(u0.coeffs, TOY_NOMINAL_THETA),
        terminal_residuals={f"x{i}": r for i, r in terminal_residuals(states, spec).items()},
        sensitivity=compute_sensitivity(report.controller, TOY_NOMINAL_THETA, spec, cfg.hdsa),
    )
    screening = screen([0.5, 0.0], 1.0, cfg.screening_threshold, parameter_names=["p0", "p1"], samples_used=8)
    grid = build_jacobian_grid(spec, screening, 3, nominal_u=nominal.controller)
    return ReplanContext(cfg=cfg, spec=spec, nominal=nominal, screening=screening, reduced_grid=grid)


def test_labels_and_stage_names() -> None:
    assert labels_for("reduced") == ["opt_r", "lin_r", "is_r"]
    assert labels_for("full") == ["opt_r", "lin_r", "is_r", "opt_f", "lin_f", "is_f"]
    assert labels_for("reduced", [ReplanMethod.INTERPOLATED]) == ["is_r"]
    assert [s.value for s in PipelineStage] == ["nominal", "screen", "precompute", "simulate", "sweep", "report"]


def test_no_change_leaves_every_method_at_the_nominal(tmp_path) -> None:
    ctx = _toy_context(tmp_path)

    record = simulate_change(ctx, [0.0, 0.0])

    assert record.errors == {}
    assert set(record.costs) == {"nom", "opt_r", "lin_r", "is_r"}
    for label in ("opt_r", "lin_r", "is_r"):
        assert record.costs[label] == pytest.approx(record.costs["nom"], abs=1e-12)
    assert all(value <= 1e-12 for value in record.norms.values())
    assert record.converged == {"opt_r": True}
    assert record.evaluations["is_r"] == 0
    assert record.evaluations["lin_r"] == 0
    assert record.evaluations["opt_r"] > 0


def test_methods_agree_on_the_linear_toy_problem(tmp_path) -> None:
    ctx = _toy_context(tmp_path)

    record = simulate_change(ctx, [0.5, 0.0], draw=7)

    assert record.draw == 7
    assert record.errors == {}
    # p0 = 0.2·(1 + 0.1·0.5)，最优控制平移到 0.31
    np.testing.assert_allclose(record.coeffs["opt_r"], 0.31, atol=1e-6)
    assert record.norms["opt_r:lin_r"] < 1e-4
    assert record.norms["opt_r:is_r"] < 1e-4
    assert record.norms["nom:opt_r"] == pytest.approx(0.02, abs=1e-5)
    assert record.costs["lin_r"] == pytest.approx(record.costs["opt_r"], abs=1e-4)
    assert record.costs["is_r"] == pytest.approx(record.costs["opt_r"], abs=1e-4)

    row = record.to_row(ctx.spec.param_names)
    assert row["theta_p0"] == 0.5
    assert row["failed"] == ""
    assert "norm_opt_r_vs_is_r" in row
    assert "time_opt_r" in record.timing_row()


def test_full_mode_without_full_grid_records_failure(tmp_path) -> None:
    ctx = _toy_context(tmp_path)
    full = ctx.model_copy(update={"cfg": ctx.cfg.with_overrides(mode="full")})

    record = simulate_change(full, [0.5, 0.0])

    assert "ShapeMismatch" in record.errors["is_f"]
    assert math.isnan(record.costs["is_f"])
    assert math.isnan(record.norms["opt_r:is_f"])
    assert math.isfinite(record.costs["lin_f"])
    assert record.norms["lin_r:lin_f"] < 1e-4


def test_simulate_rejects_theta_outside_the_box(tmp_path) -> None:
    ctx = _toy_context(tmp_path)
    with pytest.raises(ValueError):
        simulate_change(ctx, [1.5, 0.0])


def test_fly_at_the_horizon_edges() -> None:
    spec = make_toy_spec()
    nominal = Controller.constant(spec.controller_grid, 0.3)
    replan = Controller.constant(spec.controller_grid, 0.31)
    theta1 = np.array([0.5, 0.0])

    at_start = fly(spec, nominal, replan, TOY_NOMINAL_THETA, theta1, 0.0)
    np.testing.assert_allclose(at_start.states, spec.simulate(replan.coeffs, theta1).states, atol=1e-14)

    at_end = fly(spec, nominal, replan, TOY_NOMINAL_THETA, theta1, 3.0)
    np.testing.assert_allclose(at_end.states, spec.simulate(nominal.coeffs, TOY_NOMINAL_THETA).states, atol=1e-14)

    midway = fly(spec, nominal, replan, TOY_NOMINAL_THETA, theta1, 1.5)
    assert midway.states.shape == (7, 5)
    np.testing.assert_allclose(
        midway.states[:4], spec.simulate(nominal.coeffs, TOY_NOMINAL_THETA).states[:4], atol=1e-14
    )


def test_draw_thetas_is_reproducible_per_draw() -> None:
    thetas = draw_thetas(3, 5, 7, [1, 4])

    assert thetas.shape == (5, 7)
    np.testing.assert_array_equal(thetas[:, [0, 2, 3, 5, 6]], 0.0)
    assert np.all(np.abs(thetas) <= 1.0)
    np.testing.assert_array_equal(draw_thetas(3, 2, 7, [1, 4]), thetas[:2])
    assert not np.array_equal(draw_thetas(4, 5, 7, [1, 4]), thetas)


def test_sweep_outputs_are_reproducible(tmp_path) -> None:
    ctx = _toy_context(tmp_path)
    names = ["records.csv", "summary.json", "histogram.json"]

    summary = run_sweep(ctx.cfg, ctx)
    first = {name: (tmp_path / name).read_bytes() for name in names}
    run_sweep(ctx.cfg, ctx)

    for name in names:
        assert (tmp_path / name).read_bytes() == first[name]
    assert summary["draws"] == 3
    assert summary["failures"] == {"nom": 0, "opt_r": 0, "lin_r": 0, "is_r": 0}
    assert set(summary["cost_differences"]) == {"lin_r-opt_r", "is_r-opt_r", "nom-opt_r"}
    assert summary["below_threshold"]["opt_r:is_r"]["absolute"] == 1.0

    records = pd.read_csv(tmp_path / "records.csv")
    assert list(records["draw"]) == [0, 1, 2]
    np.testing.assert_array_equal(records["theta_p1"], 0.0)
    assert "time_opt_r" in pd.read_csv(tmp_path / "timings.csv").columns
    timings = json.loads((tmp_path / "timings.json").read_text(encoding="utf-8"))
    assert "opt_r/is_r" in timings["speedup"]


def test_sweep_records_do_not_depend_on_workers(tmp_path) -> None:
    sequential = _toy_context(tmp_path / "seq")
    parallel = _toy_context(tmp_path / "par", workers=2)

    run_sweep(sequential.cfg, sequential)
    run_sweep(parallel.cfg, parallel)

    assert (tmp_path / "seq" / "records.csv").read_bytes() == (tmp_path / "par" / "records.csv").read_bytes()


def test_report_and_nominal_round_trip(tmp_path) -> None:
    ctx = _toy_context(tmp_path)
    ctx.nominal.save(tmp_path / "nominal.json")
    (tmp_path / "screening.json").write_text(ctx.screening.to_json(), encoding="utf-8")
    run_sweep(ctx.cfg, ctx)

    loaded = NominalSolution.load(tmp_path / "nominal.json")
    np.testing.assert_array_equal(loaded.controller.coeffs, ctx.nominal.controller.coeffs)
    np.testing.assert_array_equal(loaded.sensitivity.d, ctx.nominal.sensitivity.d)
    assert loaded.cost == ctx.nominal.cost
    assert loaded.run_id == ctx.nominal.run_id and loaded.run_id.startswith("run_")

    text = run_report(ctx.cfg)
    assert (tmp_path / "report.md").read_text(encoding="utf-8") == text
    assert "## Nominal solution" in text
    assert "## Parameter screening" in text
    assert "## Realized costs" in text
    assert "Speedup opt_r/is_r" in text

    with pytest.raises(ConfigError):
        NominalSolution.load(tmp_path / "absent.json")


def test_report_with_no_artifacts(tmp_path) -> None:
    text = run_report(ExperimentConfig(output_dir=tmp_path))
    assert text.startswith("# Mid-course replanning report")
    assert "Realized costs" not in text


def test_config_loading(tmp_path) -> None:
    path = tmp_path / "run.env"
    path.write_text(
        "# 覆盖部分默认值\n"
        "PROBLEM__T_FINAL=3000\n"
        "problem__n_controls=10\n"
        "OPTIMIZER__GRAD_TOL=1e-7\n"
        "T_CHANGE=1000\n"
        "MODE=full\n"
        "PENALTY_RAMP=0.1, 1\n"
        f"OUTPUT_DIR={tmp_path / 'out'}\n",
        encoding="utf-8",
    )

    cfg = load_config(path)

    assert cfg.problem.t_final == 3000.0
    assert cfg.problem.n_controls == 10
    assert cfg.optimizer.grad_tol == 1e-7
    assert cfg.optimizer.max_step is None
    assert cfg.penalty_ramp == (0.1, 1.0)
    assert ExperimentConfig().optimizer.max_step == 0.1
    assert cfg.mode == "full"
    assert cfg.reduced_grid_path == tmp_path / "out" / "grid_reduced.rjgd"
    assert cfg.with_overrides(seed=5, workers=None).seed == 5
    assert load_config(None) == ExperimentConfig()
    assert load_config(ROOT / "configs" / "shuttle.env") == ExperimentConfig()


def test_config_errors(tmp_path) -> None:
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.env")

    bad = tmp_path / "bad.env"
    bad.write_text("T_CHANGE=5000\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(bad)

    with pytest.raises(ConfigError):
        ExperimentConfig().with_overrides(qmc_samples=1)
    for ramp in ("1,0.1", "0,1", "", "0.5,abc"):
        with pytest.raises(ConfigError):
            ExperimentConfig().with_overrides(penalty_ramp=ramp)
    with pytest.raises(ConfigError):
        unflatten({"PROBLEM": "1", "PROBLEM__T_FINAL": "2"})
    assert unflatten({"Problem__T_Final": "10", "SEED": None}) == {"problem": {"t_final": "10"}}


def test_event_log_writes_json_lines(tmp_path) -> None:
    spec = make_toy_spec()
    ctx_dir = tmp_path / "events"
    log = EventLog(ctx_dir / "log.jsonl", PipelineStage.PRECOMPUTE, run_id="run_test")
    u_star = Controller.constant(spec.controller_grid, 0.3)

    log.stage("started")
    build_jacobian_grid(spec, [0], 2, nominal_u=u_star, on_node=log.node)
    log.stage("finished", "ok")

    lines = [json.loads(line) for line in (ctx_dir / "log.jsonl").read_text(encoding="utf-8").splitlines()]
    assert [line["type"] for line in lines] == ["stage", "node_solved", "node_solved", "stage"]
    assert lines[0]["data"] == {"stage": "precompute", "status": "started", "detail": None}
    assert lines[1]["data"]["index"] == [0]
    assert lines[1]["id"].startswith("event_")
    assert lines[-1]["data"]["detail"] == "ok"
    assert [line["metadata"]["sequence"] for line in lines] == [0, 1, 2, 3]
    assert {line["metadata"]["run_id"] for line in lines} == {"run_test"}
    assert {line["metadata"]["stage"] for line in lines} == {"precompute"}

    fresh = EventLog(ctx_dir / "log.jsonl", PipelineStage.SCREEN)
    assert fresh.run_id.startswith("run_")
    fresh.sample_skipped(3, [0.5, -0.5], "NonFiniteState: diverged")
    skipped = json.loads((ctx_dir / "log.jsonl").read_text(encoding="utf-8"))
    assert skipped["type"] == "sample_skipped"
    assert skipped["data"] == {"index": 3, "theta": [0.5, -0.5], "reason": "NonFiniteState: diverged"}
    assert skipped["metadata"]["stage"] == "screen" and skipped["metadata"]["sequence"] == 0

    EventLog(ctx_dir / "log.jsonl", PipelineStage.SCREEN)
    assert (ctx_dir / "log.jsonl").read_text(encoding="utf-8") == ""

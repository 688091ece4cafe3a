"""
流水线前三个阶段：标称求解、参数筛选、灵敏度网格预计算
"""

from typing import List, Optional, Tuple
import logging
import numpy as np

from fast_replan.approx import GridBuildSettings, JacobianGrid, build_jacobian_grid, save_grid
from fast_replan.errors import NodeSolveFailure, OptimizationFailed, ReplanError, TooManyFailedSamples
from fast_replan.gsa import ScreeningReport, dgsm_estimate, qmc_samples, screen, trace_covariance
from fast_replan.hdsa import compute_sensitivity
from fast_replan.ocp import Controller, ProblemSpec, freeze_scales, terminal_residuals
from fast_replan.optimizer import minimize_objective
from fast_replan.runtime import run_jobs
from fast_replan.shuttle import STATE_NAMES, shuttle_problem
from .artifacts import (
    NOMINAL_FILE,
    PRECOMPUTE_LOG_FILE,
    SCREENING_FILE,
    SCREENING_LOG_FILE,
    NominalSolution,
    load_screening,
)
from .config import ExperimentConfig
from .events import EventLog
from .stage import PipelineStage

logger = logging.getLogger(__name__)


def _nominal_spec(cfg: ExperimentConfig, nominal: NominalSolution) -> ProblemSpec:
    return shuttle_problem(cfg.problem, scales=nominal.scales)


# ===== 标称求解 =====

def run_nominal(cfg: ExperimentConfig) -> NominalSolution:
    """
    求解 θ = 0 的标称问题并保存到 nominal.json

    过程：
    1. 归一化尺度取自常值初始猜测的轨迹，按 penalty_ramp 逐级放大罚权重，每级从上一级的解热启动
    2. 用最后一级的最优轨迹冻结尺度，在完整罚权重下热启动重新求解
    3. 在最优点计算全参数 HDSA

    require_converged_nominal 为 True 时，未收敛或任一终端相对残差超过 max_terminal_residual 都抛出 OptimizationFailed。
    """
    spec = shuttle_problem(cfg.problem)
    theta0 = np.zeros(spec.n_params)
    u0 = Controller.constant(spec.controller_grid, cfg.problem.initial_guess)

    logger.info("标称求解: N+1=%d, 积分步数=%d, 罚权重延拓=%s", spec.n_coeffs, spec.integration_grid.n_steps, cfg.penalty_ramp)
    controller = u0
    for factor in cfg.penalty_ramp:
        stage_spec = shuttle_problem(cfg.problem.with_penalty_scale(factor), scales=spec.scales)
        stage = minimize_objective(stage_spec, theta0, controller, cfg.optimizer)
        controller = stage.controller
        logger.info("罚权重 ×%g: status=%s, J=%.6e, 迭代=%d", factor, stage.status, stage.cost, stage.iterations)

    spec = freeze_scales(spec, spec.simulate(controller.coeffs, theta0))
    initial_cost = spec.evaluate(u0.coeffs, theta0)
    report = minimize_objective(spec, theta0, controller, cfg.optimizer)
    logger.info(
        "冻结尺度后求解: status=%s, J=%.6e, |g|=%.3e, 迭代=%d",
        report.status, report.cost, report.grad_norm, report.iterations,
    )

    trajectory = spec.simulate(report.controller.coeffs, theta0)
    residuals = {STATE_NAMES[i]: r for i, r in terminal_residuals(trajectory.states, spec).items()}
    missed = {name: r for name, r in residuals.items() if not r <= cfg.max_terminal_residual}
    if not report.converged or missed:
        detail = (
            f"status={report.status}, grad_norm={report.grad_norm:.3e} (tol {report.grad_tol:.1e}), "
            f"iterations={report.iterations}, residuals above {cfg.max_terminal_residual}: {missed}"
            + (f", {report.message}" if report.message else "")
        )
        if cfg.require_converged_nominal:
            raise OptimizationFailed(f"nominal solve failed the quality gate: {detail}")
        logger.warning("标称解未通过质量门限，继续执行: %s", detail)

    sensitivity = compute_sensitivity(report.controller, theta0, spec, cfg.hdsa)
    nominal = NominalSolution(
        controller=report.controller,
        report=report,
        scales=spec.scales,
        cost=report.cost,
        initial_cost=initial_cost,
        terminal_residuals=residuals,
        sensitivity=sensitivity,
    )
    nominal.save(cfg.output_dir / NOMINAL_FILE)
    logger.info("标称解已保存: J=%.6e (初始猜测 %.6e), 终端残差=%s", nominal.cost, nominal.initial_cost, nominal.terminal_residuals)
    return nominal


# ===== 参数筛选 =====

def run_screening(cfg: ExperimentConfig, nominal: Optional[NominalSolution] = None) -> ScreeningReport:
    """
    QMC 样本上的 优化 + HDSA 循环，估计 DGSM 并筛选重要参数，保存到 screening.json

    每个样本从 u* 热启动；抛出 ReplanError 的样本被跳过并写入 screening_log.jsonl，
    跳过比例超过 max_failed_fraction 时抛出 TooManyFailedSamples。
    """
    nominal = nominal or NominalSolution.load(cfg.output_dir / NOMINAL_FILE)
    spec = _nominal_spec(cfg, nominal)
    log = EventLog(cfg.output_dir / SCREENING_LOG_FILE, PipelineStage.SCREEN, nominal.run_id)
    log.stage("started")

    samples = qmc_samples(spec.n_params, cfg.qmc_samples)

    def solve(k: int) -> Tuple[int, Optional[np.ndarray], Optional[np.ndarray], Optional[str]]:
        theta = samples[k]
        try:
            report = minimize_objective(spec, theta, nominal.controller, cfg.optimizer)
            sens = compute_sensitivity(report.controller, theta, spec, cfg.hdsa)
        except ReplanError as e:
            return k, None, None, f"{type(e).__name__}: {e}"
        if not report.converged:
            logger.debug("样本 %d 未收敛 (%s)，仍参与估计", k, report.status)
        return k, report.controller.coeffs, sens.d, None

    controls: List[np.ndarray] = []
    jacobians: List[np.ndarray] = []
    skipped = 0
    for k, coeffs, d, reason in run_jobs(solve, range(len(samples)), cfg.workers):
        if reason is not None:
            skipped += 1
            logger.warning("QMC 样本 %d 被跳过: %s", k, reason)
            log.sample_skipped(k, samples[k].tolist(), reason)
            continue
        controls.append(coeffs)
        jacobians.append(d)

    if skipped > cfg.max_failed_fraction * len(samples) or len(controls) < 2:
        log.stage("failed", f"{skipped} of {len(samples)} samples failed")
        raise TooManyFailedSamples(
            f"{skipped} of {len(samples)} QMC samples failed (limit {cfg.max_failed_fraction:.0%})"
        )

    report = screen(
        dgsm_estimate(jacobians),
        trace_covariance(controls),
        threshold=cfg.screening_threshold,
        parameter_names=spec.param_names,
        samples_used=len(controls),
        samples_requested=len(samples),
    )
    path = cfg.output_dir / SCREENING_FILE
    path.write_text(report.to_json(), encoding="utf-8")
    log.stage("finished", f"important={report.important_names}")
    logger.info("参数筛选完成: 重要参数=%s, 使用样本 %d / %d", report.important_names, len(controls), len(samples))
    return report


# ===== 网格预计算 =====

def _build_and_save(
    cfg: ExperimentConfig,
    spec: ProblemSpec,
    nominal: NominalSolution,
    dims: List[int],
    m: int,
    path,
    log: EventLog,
) -> JacobianGrid:
    settings = GridBuildSettings(optimizer=cfg.optimizer, hdsa=cfg.hdsa, workers=cfg.workers)
    meta = {
        "beta0": spec.beta0,
        "nominal_params": spec.nominal_params.tolist(),
        "parameter_names": list(spec.param_names),
    }
    grid = build_jacobian_grid(spec, dims, m, settings, nominal.controller, on_node=log.node, meta=meta)
    save_grid(grid, path)
    logger.info("网格已保存到 %s: dims=%s, 节点=%d", path, dims, grid.n_nodes)
    return grid


def run_precompute(
    cfg: ExperimentConfig,
    screening: Optional[ScreeningReport] = None,
    nominal: Optional[NominalSolution] = None,
) -> Tuple[JacobianGrid, Optional[JacobianGrid]]:
    """
    在重要参数上构建灵敏度网格并保存；full 模式额外构建全参数网格

    返回值：
    - (降维网格, 全参数网格或 None)

    网格先保存，再检查缺失单元；存在不可用单元时抛出 NodeSolveFailure，
    失败节点的详情见 precompute_log.jsonl。
    """
    nominal = nominal or NominalSolution.load(cfg.output_dir / NOMINAL_FILE)
    screening = screening or load_screening(cfg.output_dir / SCREENING_FILE)
    spec = _nominal_spec(cfg, nominal)
    dims = screening.require_important()
    log = EventLog(cfg.output_dir / PRECOMPUTE_LOG_FILE, PipelineStage.PRECOMPUTE, nominal.run_id)
    log.stage("started")

    grids = [_build_and_save(cfg, spec, nominal, dims, cfg.grid_nodes, cfg.reduced_grid_path, log)]
    if cfg.mode == "full":
        all_dims = list(range(spec.n_params))
        grids.append(_build_and_save(cfg, spec, nominal, all_dims, cfg.full_grid_nodes, cfg.full_grid_path, log))

    unusable = [g.unusable_cells() for g in grids]
    if any(unusable):
        summary = ", ".join(
            f"dims {g.dims}: {n} cells, failed nodes {g.meta.get('failed_nodes')}"
            for g, n in zip(grids, unusable) if n
        )
        log.stage("failed", summary)
        raise NodeSolveFailure(f"grid cells with unsolved corners: {summary}")
    log.stage("finished")
    return grids[0], grids[1] if len(grids) > 1 else None

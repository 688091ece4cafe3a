"""
飞行中参数突变的模拟

t < t_change 时用标称控制 u* 和 θ0 飞行；在 t_change 处参数跳变为 θ1，
各方法给出的全时域控制在第一个不早于 t_change 的控制节点处与 u* 拼接，
再从 t_change 时刻的实际状态在 θ1 下积分到 T。代价在拼接后的实际轨迹上计算。

方法标签：
- opt_*: 在 θ1 下从 u* 热启动重新优化
- lin_*: 标称灵敏度的一阶 Taylor 近似
- is_*: 在网格插值灵敏度上做同伦（不做任何代价或动力学求值）
- 后缀 _r 表示只使用重要参数，_f 表示使用全部参数（仅 full 模式）
- nom: 不重新规划，继续使用 u*
"""

from enum import Enum
from itertools import combinations
from pydantic import BaseModel, ConfigDict, Field
from time import perf_counter
from typing import Callable, Dict, List, Optional, Sequence, Tuple
import logging
import numpy as np

from fast_replan.approx import (
    HomotopyConfig,
    JacobianGrid,
    JacobianSource,
    homotopy_approx,
    linear_approx,
)
from fast_replan.errors import ReplanError, ShapeMismatch
from fast_replan.hdsa import SensitivityMatrix
from fast_replan.ocp import Controller, ProblemSpec, trajectory_cost
from fast_replan.ode import Trajectory, count_evaluations
from fast_replan.optimizer import minimize_objective
from .artifacts import ReplanContext

logger = logging.getLogger(__name__)

NOMINAL_LABEL = "nom"
DOMINANCE_RTOL = 1e-6


class ReplanMethod(Enum):
    REOPT = "opt"
    LINEAR = "lin"
    INTERPOLATED = "is"


class SweepRecord(BaseModel):
    """
    SweepRecord 一次参数突变的结果，包含以下字段：

    - draw: 扰动序号
    - theta1: 突变后的 θ（完整 P 维）
    - costs: 每个标签在实际轨迹上的代价（失败为 NaN）
    - errors: 失败标签的错误信息
    - converged: 重新优化是否收敛
    - norms: 标签两两之间控制系数差的欧氏范数，键为 "a:b"
    - wall_times: 每个标签的重新规划耗时（秒，不含积分实际轨迹与文件读写）
    - evaluations: 重新规划期间的动力学/代价求值总数
    - dominance_ok: 收敛的重新优化是否不劣于同一参数空间的近似方法
    - dominance_violations: 违反上述性质的标签
    - coeffs: 每个标签的全时域控制系数（未拼接）
    """
    model_config = ConfigDict(ser_json_inf_nan="constants")

    draw: int = 0
    theta1: List[float]
    costs: Dict[str, float] = Field(default_factory=dict)
    errors: Dict[str, str] = Field(default_factory=dict)
    converged: Dict[str, bool] = Field(default_factory=dict)
    norms: Dict[str, float] = Field(default_factory=dict)
    wall_times: Dict[str, float] = Field(default_factory=dict)
    evaluations: Dict[str, int] = Field(default_factory=dict)
    dominance_ok: bool = True
    dominance_violations: List[str] = Field(default_factory=list)
    coeffs: Dict[str, List[float]] = Field(default_factory=dict)

    @property
    def labels(self) -> List[str]:
        return list(self.costs)

    def to_row(self, parameter_names: Sequence[str]) -> Dict[str, object]:
        """records.csv 的一行（与机器相关的耗时不在其中）"""
        row: Dict[str, object] = {"draw": self.draw}
        for name, value in zip(parameter_names, self.theta1):
            row[f"theta_{name}"] = value
        for label, value in self.costs.items():
            row[f"J_{label}"] = value
        for label, value in self.converged.items():
            row[f"converged_{label}"] = value
        for pair, value in self.norms.items():
            row[f"norm_{pair.replace(':', '_vs_')}"] = value
        row["dominance_ok"] = self.dominance_ok
        row["failed"] = ";".join(sorted(self.errors))
        return row

    def timing_row(self) -> Dict[str, object]:
        row: Dict[str, object] = {"draw": self.draw}
        for label, value in self.wall_times.items():
            row[f"time_{label}"] = value
        for label, value in self.evaluations.items():
            row[f"evaluations_{label}"] = value
        return row


def labels_for(mode: str, methods: Optional[Sequence[ReplanMethod]] = None) -> List[str]:
    methods = list(methods or ReplanMethod)
    spaces = ["r", "f"] if mode == "full" else ["r"]
    return [f"{m.value}_{s}" for s in spaces for m in methods]


def restrict(theta: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """只保留 dims 上的分量，其余置零"""
    out = np.zeros_like(theta)
    out[list(dims)] = theta[list(dims)]
    return out


# ===== 实际飞行 =====

def fly(
    spec: ProblemSpec,
    nominal: Controller,
    replan: Controller,
    theta0: np.ndarray,
    theta1: np.ndarray,
    t_change: float,
    head: Optional[Trajectory] = None,
) -> Trajectory:
    """
    拼接飞行：t_change 前 (u*, θ0)，之后 (拼接控制, θ1)

    head 为已积分的前半段（多个方法共享时复用）。
    """
    grid = spec.integration_grid
    k_change = grid.first_node_at_or_after(t_change)
    if k_change >= grid.n_steps:
        return head if head is not None else spec.simulate(nominal.coeffs, theta0)
    spliced = nominal.splice(replan, spec.controller_grid.first_node_at_or_after(t_change))
    if k_change == 0:
        return spec.simulate(spliced.coeffs, theta1)
    if head is None:
        head = spec.simulate(nominal.coeffs, theta0, grid=grid.sub_grid(0, k_change))
    tail = spec.simulate(spliced.coeffs, theta1, grid=grid.sub_grid(k_change), x0=head.final_state)
    return head.join(tail, grid)


def _head(spec: ProblemSpec, nominal: Controller, theta0: np.ndarray, t_change: float) -> Optional[Trajectory]:
    grid = spec.integration_grid
    k_change = grid.first_node_at_or_after(t_change)
    if k_change == 0:
        return None
    if k_change >= grid.n_steps:
        return spec.simulate(nominal.coeffs, theta0)
    return spec.simulate(nominal.coeffs, theta0, grid=grid.sub_grid(0, k_change))


# ===== 重新规划 =====

def _replanner(
    ctx: ReplanContext, method: ReplanMethod, space: str, theta1: np.ndarray
) -> Callable[[], Tuple[Controller, Optional[bool]]]:
    """返回执行一次重新规划的闭包（计时与计数只包住该闭包），闭包返回 (控制, 是否收敛)"""
    cfg, spec, nominal = ctx.cfg, ctx.spec, ctx.nominal
    u_star, theta0 = nominal.controller, ctx.theta0
    if space == "r":
        dims = ctx.important
        target = restrict(theta1, dims)
        grid: Optional[JacobianGrid] = ctx.reduced_grid
        d: SensitivityMatrix = nominal.sensitivity.select(dims)
    else:
        target = theta1
        grid = ctx.full_grid
        d = nominal.sensitivity
    bounds = cfg.optimizer.bounds

    if method == ReplanMethod.REOPT:
        def reoptimize() -> Tuple[Controller, Optional[bool]]:
            report = minimize_objective(spec, target, u_star, cfg.optimizer)
            return report.controller, report.converged
        return reoptimize
    if method == ReplanMethod.LINEAR:
        return lambda: (linear_approx(u_star, d, theta0, target, bounds), None)
    if grid is None:
        raise ShapeMismatch("full-space interpolated step needs the full grid (mode=full)")
    homotopy = HomotopyConfig(steps=cfg.homotopy_steps, source=JacobianSource.GRID)
    return lambda: (homotopy_approx(u_star, theta0, target, homotopy, bounds=bounds, grid=grid), None)


def simulate_change(
    ctx: ReplanContext,
    theta1,
    methods: Optional[Sequence[ReplanMethod]] = None,
    draw: int = 0,
) -> SweepRecord:
    """
    模拟一次 θ0 → θ1 的突变并比较各重新规划方法

    参数列表：
    - ctx: 已加载的产物
    - theta1: 突变后的 θ（完整 P 维，[-1, 1]）
    - methods: 要运行的方法，缺省为全部
    - draw: 扰动序号

    返回值：
    - SweepRecord；单个方法的失败记录在 errors 中，不会中断
    """
    spec, cfg = ctx.spec, ctx.cfg
    theta1 = spec.theta_vector(np.asarray(theta1, dtype=float)).theta
    theta0 = ctx.theta0
    u_star = ctx.nominal.controller
    record = SweepRecord(draw=draw, theta1=theta1.tolist())

    controllers: Dict[str, Controller] = {NOMINAL_LABEL: u_star}
    for label in labels_for(cfg.mode, methods):
        method, space = ReplanMethod(label.split("_")[0]), label.split("_")[1]
        try:
            replan = _replanner(ctx, method, space, theta1)
            with count_evaluations() as counter:
                start = perf_counter()
                controllers[label], converged = replan()
                record.wall_times[label] = perf_counter() - start
            record.evaluations[label] = counter.total
            if converged is not None:
                record.converged[label] = bool(converged)
        except ReplanError as e:
            logger.warning("扰动 %d: %s 重新规划失败: %s", draw, label, e)
            record.errors[label] = f"{type(e).__name__}: {e}"
            if method == ReplanMethod.REOPT:
                record.converged[label] = False

    head = None
    try:
        head = _head(spec, u_star, theta0, cfg.t_change)
    except ReplanError as e:
        logger.warning("扰动 %d: 标称前半段积分失败: %s", draw, e)
        record.errors["head"] = f"{type(e).__name__}: {e}"

    for label in [NOMINAL_LABEL] + labels_for(cfg.mode, methods):
        controller = controllers.get(label)
        if controller is None or "head" in record.errors:
            record.costs[label] = float("nan")
            continue
        try:
            trajectory = fly(spec, u_star, controller, theta0, theta1, cfg.t_change, head)
            record.costs[label] = trajectory_cost(trajectory.states, spec)
        except ReplanError as e:
            record.errors[label] = f"{type(e).__name__}: {e}"
            record.costs[label] = float("nan")

    labels = list(record.costs)
    for a, b in combinations(labels, 2):
        if a in controllers and b in controllers:
            record.norms[f"{a}:{b}"] = float(np.linalg.norm(controllers[a].coeffs - controllers[b].coeffs))
        else:
            record.norms[f"{a}:{b}"] = float("nan")
    record.coeffs = {label: c.coeffs.tolist() for label, c in controllers.items()}

    for opt_label, ok in record.converged.items():
        if not ok:
            continue
        space = opt_label.split("_")[1]
        j_opt = record.costs[opt_label]
        for method in (ReplanMethod.LINEAR, ReplanMethod.INTERPOLATED):
            other = f"{method.value}_{space}"
            j_other = record.costs.get(other, float("nan"))
            if np.isfinite(j_opt) and np.isfinite(j_other) and j_opt > j_other + DOMINANCE_RTOL * abs(j_opt):
                record.dominance_violations.append(other)
    record.dominance_ok = not record.dominance_violations
    return record

"""
罚函数代价与精确梯度

J = -x_obj(T)/x̄_obj
    + Σ_终端 β·((x_i(T) - target)/target)²
    + Σ_约束 β·Σ_k viol(x_i(t_k))⁴ / x̄_i⁴

约束求和遍历积分网格节点。x̄ 视为常数（由 freeze_scales 冻结），梯度中不含 ∂x̄/∂u 项。
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Dict
import numpy as np

from fast_replan.ode import Trajectory, record
from .controller import Controller
from .theta import ThetaVector

if TYPE_CHECKING:
    from .problem import ProblemSpec


def trajectory_cost(states: np.ndarray, spec: ProblemSpec) -> float:
    """在已积分的状态历史上计算代价（也用于拼接后的实际飞行轨迹）"""
    record("cost_evaluations")
    states = np.atleast_2d(states)
    scales = spec.scales
    final = states[-1]
    value = -final[spec.objective_index] / scales[spec.objective_index]
    for term in spec.terminal:
        value += term.weight * ((final[term.index] - term.target) / term.target) ** 2
    for bound in spec.state_bounds:
        viol = bound.violation(states[:, bound.index])
        value += bound.weight * np.sum(viol ** 4) / scales[bound.index] ** 4
    return float(value)


def trajectory_cost_gradient(states: np.ndarray, sens: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    """由灵敏度 ∂x(t_k)/∂u 按链式法则组装 ∂J/∂u"""
    scales = spec.scales
    final = states[-1]
    sens_final = sens[-1]
    grad = -sens_final[spec.objective_index] / scales[spec.objective_index]
    for term in spec.terminal:
        factor = 2.0 * term.weight * (final[term.index] - term.target) / term.target ** 2
        grad = grad + factor * sens_final[term.index]
    for bound in spec.state_bounds:
        viol = bound.violation(states[:, bound.index])
        if not np.any(viol > 0):
            continue
        factor = 4.0 * bound.weight * bound.sign / scales[bound.index] ** 4
        grad = grad + factor * (viol ** 3 @ sens[:, bound.index, :])
    return np.asarray(grad, dtype=float)


def cost(controller: Controller, theta: ThetaVector, spec: ProblemSpec) -> float:
    """积分轨迹并计算代价 J(u, θ)"""
    return spec.evaluate(controller.coeffs, theta.theta)


def cost_gradient(controller: Controller, theta: ThetaVector, spec: ProblemSpec) -> np.ndarray:
    """基于灵敏度方程的精确梯度 ∂J/∂u_i"""
    return spec.gradient(controller.coeffs, theta.theta)


def freeze_scales(spec: ProblemSpec, trajectory: Trajectory) -> ProblemSpec:
    """x̄_i = max_t |x_i(t)|（最大值为 0 时取 1），返回带冻结尺度的新问题"""
    scales = np.max(np.abs(trajectory.states), axis=0)
    scales = np.where(scales > 0.0, scales, 1.0)
    return spec.with_scales(scales)


def terminal_residuals(states: np.ndarray, spec: ProblemSpec) -> Dict[int, float]:
    """各终端目标的相对残差 |x_i(T) - target| / |target|"""
    final = np.atleast_2d(states)[-1]
    return {
        term.index: float(abs(final[term.index] - term.target) / abs(term.target))
        for term in spec.terminal
    }

"""
投影 BFGS 优化器

- 逆 Hessian 近似只作用在自由变量上（处于边界且梯度指向外侧的系数视为活跃）
- 回溯线搜索：Armijo 条件 + 显式单调下降，试探点投影回盒约束；max_step 限制首个试探步的最大分量
- 第一次更新前按 sᵀy / yᵀy 缩放初始逆 Hessian；曲率条件不满足时跳过更新
- 方向非下降或线搜索失败时重置为最速下降；最速下降仍失败则返回当前最优点
"""

from typing import Callable, Tuple
import logging
import time

import numpy as np

from fast_replan.errors import DegenerateVelocity, LineSearchFailure, NonFiniteCost, NonFiniteState
from fast_replan.ocp.controller import Controller
from fast_replan.ocp.objective import IObjective
from fast_replan.ode import record
from .config import OptimizerConfig, OptimReport

logger = logging.getLogger(__name__)

CostFn = Callable[[np.ndarray], float]
GradFn = Callable[[np.ndarray], np.ndarray]


def _active_set(x: np.ndarray, g: np.ndarray, bounds: Tuple[float, float]) -> np.ndarray:
    lower, upper = bounds
    return ((x <= lower) & (g > 0)) | ((x >= upper) & (g < 0))


def projected_gradient(x: np.ndarray, g: np.ndarray, bounds: Tuple[float, float]) -> np.ndarray:
    """活跃分量置零后的梯度"""
    return np.where(_active_set(x, g, bounds), 0.0, g)


class _Counted:
    """记录求值次数，并把试探点上的积分发散视为 +inf"""

    def __init__(self, cost_fn: CostFn, grad_fn: GradFn):
        self.cost_fn = cost_fn
        self.grad_fn = grad_fn
        self.cost_calls = 0
        self.grad_calls = 0

    def cost(self, x: np.ndarray) -> float:
        self.cost_calls += 1
        return float(self.cost_fn(x))

    def trial_cost(self, x: np.ndarray) -> float:
        try:
            value = self.cost(x)
        except (NonFiniteState, DegenerateVelocity) as e:
            logger.debug("线搜索试探点积分失败，按 +inf 处理: %s", e)
            return np.inf
        return value if np.isfinite(value) else np.inf

    def grad(self, x: np.ndarray) -> np.ndarray:
        self.grad_calls += 1
        return np.asarray(self.grad_fn(x), dtype=float)


def _line_search(
    fns: _Counted, x: np.ndarray, f: float, g: np.ndarray, d: np.ndarray, config: OptimizerConfig
) -> Tuple[np.ndarray, float]:
    lower, upper = config.bounds
    alpha = config.initial_step
    longest = float(np.max(np.abs(d))) if d.size else 0.0
    if config.max_step is not None and alpha * longest > config.max_step:
        alpha = config.max_step / longest
    for _ in range(config.max_backtracks):
        x_new = np.clip(x + alpha * d, lower, upper)
        step = x_new - x
        if not np.any(step):
            break
        f_new = fns.trial_cost(x_new)
        if f_new <= f + config.armijo_c1 * float(g @ step) and f_new <= f:
            return x_new, f_new
        alpha *= config.backtrack
    raise LineSearchFailure(f"no sufficient decrease after {config.max_backtracks} backtracks (f={f:.12g})")


def minimize(cost_fn: CostFn, grad_fn: GradFn, u0: Controller, config: OptimizerConfig) -> OptimReport:
    """
    投影拟牛顿最小化

    参数列表：
    - cost_fn: 系数向量 -> 代价
    - grad_fn: 系数向量 -> 梯度
    - u0: 初始控制器（先投影到盒约束内）
    - config: 优化器配置

    返回值：
    - OptimReport: 代价序列单调不增；线搜索失败时返回当前最优点且 converged=False
    """
    started = time.perf_counter()
    record("optimizer_runs")
    fns = _Counted(cost_fn, grad_fn)
    bounds = config.bounds

    x = np.clip(np.asarray(u0.coeffs, dtype=float), bounds[0], bounds[1])
    f = fns.cost(x)
    if not np.isfinite(f):
        raise NonFiniteCost(f"cost is not finite at the initial controller: {f}")
    g = fns.grad(x)
    if not np.all(np.isfinite(g)):
        raise NonFiniteCost("gradient is not finite at the initial controller")

    n = x.size
    h_inv = np.eye(n)
    scaled = False
    history = [f]
    status = "max_iters"
    message = None
    iterations = 0
    gnorm = float(np.linalg.norm(projected_gradient(x, g, bounds)))

    while True:
        if gnorm <= config.grad_tol:
            status = "converged"
            break
        if iterations >= config.max_iters:
            break

        free = ~_active_set(x, g, bounds)
        d = np.zeros(n)
        d[free] = -(h_inv[np.ix_(free, free)] @ g[free])
        steepest = False
        if not float(g @ d) < 0.0:
            d = -projected_gradient(x, g, bounds)
            h_inv = np.eye(n)
            steepest = True

        try:
            x_new, f_new = _line_search(fns, x, f, g, d, config)
        except LineSearchFailure as e:
            if steepest:
                status = "line_search_failure"
                message = str(e)
                logger.warning("线搜索失败，返回当前最优点: iter=%d, f=%.6g, |pg|=%.3e", iterations, f, gnorm)
                break
            logger.debug("拟牛顿方向线搜索失败，重置为最速下降: iter=%d", iterations)
            h_inv = np.eye(n)
            scaled = False
            d = -projected_gradient(x, g, bounds)
            try:
                x_new, f_new = _line_search(fns, x, f, g, d, config)
            except LineSearchFailure as e2:
                status = "line_search_failure"
                message = str(e2)
                logger.warning("线搜索失败，返回当前最优点: iter=%d, f=%.6g, |pg|=%.3e", iterations, f, gnorm)
                break

        g_new = fns.grad(x_new)
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > config.curvature_eps * np.linalg.norm(s) * np.linalg.norm(y):
            if not scaled:
                h_inv = (sy / float(y @ y)) * np.eye(n)
                scaled = True
            rho = 1.0 / sy
            v = np.eye(n) - rho * np.outer(s, y)
            h_inv = v @ h_inv @ v.T + rho * np.outer(s, s)

        x, f, g = x_new, f_new, g_new
        history.append(f)
        iterations += 1
        gnorm = float(np.linalg.norm(projected_gradient(x, g, bounds)))
        logger.debug("BFGS iter=%d f=%.12g |pg|=%.3e", iterations, f, gnorm)

    wall_time = time.perf_counter() - started
    converged = status == "converged"
    logger.info(
        "优化结束: status=%s, iterations=%d, cost=%.10g, |pg|=%.3e, 耗时 %.3fs",
        status, iterations, f, gnorm, wall_time,
    )
    return OptimReport(
        controller=u0.with_coeffs(x),
        cost=f,
        grad_norm=gnorm,
        grad_tol=config.grad_tol,
        iterations=iterations,
        converged=converged,
        status=status,
        message=message,
        wall_time=wall_time,
        cost_evaluations=fns.cost_calls,
        gradient_evaluations=fns.grad_calls,
        cost_history=history,
    )


def minimize_objective(
    objective: IObjective, theta: np.ndarray, u0: Controller, config: OptimizerConfig
) -> OptimReport:
    """在固定 θ（原始数组）下最小化 objective"""
    theta = np.asarray(theta, dtype=float)
    return minimize(
        lambda c: objective.evaluate(c, theta),
        lambda c: objective.gradient(c, theta),
        u0,
        config,
    )

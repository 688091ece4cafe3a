"""
前向 Euler 同伦

沿直线路径 θ(t) = θ0 + t·(θ1 - θ0), t ∈ [0, 1] 积分 du*/dt = D(u*, θ(t))·(θ1 - θ0)：

    u_{m+1} = u_m + h·D(u_m, θ(t_m))·(θ1 - θ0),  h = 1/M_h

D 由 IJacobianProvider 给出（直接 HDSA 或网格插值）；未显式传入时按 cfg.source 经
JacobianProviderFactory 构造（GRID 需要 grid，DIRECT 需要 objective）。
只在最后一步投影到盒约束，因此 M_h = 1 时与 linear_approx 逐位一致。
"""

from pydantic import BaseModel, ConfigDict, Field
from typing import List, Optional, Sequence, Tuple, Union
import logging
import numpy as np

from fast_replan.errors import ConfigError
from fast_replan.ocp import CONTROL_BOUNDS, Controller, IObjective, ThetaVector
from .grid import JacobianGrid
from .providers import IJacobianProvider, JacobianProviderFactory, JacobianSource
from .taylor import theta_step

logger = logging.getLogger(__name__)

ThetaLike = Union[ThetaVector, np.ndarray, Sequence[float]]


class HomotopyConfig(BaseModel):
    """
    HomotopyConfig 同伦配置

    - steps: Euler 步数 M_h ≥ 1
    - source: 未显式传入 provider 时使用的灵敏度来源（direct / grid）
    - reintegrate: 为 True 且提供 objective 时，记录每个迭代点的代价（诊断用）
    """
    model_config = ConfigDict(frozen=True)

    steps: int = Field(default=16, ge=1)
    source: JacobianSource = JacobianSource.GRID
    reintegrate: bool = False


class HomotopyTrace(BaseModel):
    """同伦路径：每步的 t、系数和（可选的）代价"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    controller: Controller
    times: List[float]
    iterates: List[List[float]]
    costs: Optional[List[float]] = None


def _as_array(theta: ThetaLike) -> np.ndarray:
    if isinstance(theta, ThetaVector):
        return theta.theta
    return np.asarray(theta, dtype=float).reshape(-1)


def make_provider(
    cfg: HomotopyConfig,
    grid: Optional[JacobianGrid] = None,
    objective: Optional[IObjective] = None,
) -> IJacobianProvider:
    """按 cfg.source 构造灵敏度来源"""
    if cfg.source == JacobianSource.GRID:
        if grid is None:
            raise ConfigError("grid-based homotopy needs a precomputed grid")
        return JacobianProviderFactory.create(cfg.source, grid=grid)
    if objective is None:
        raise ConfigError("direct homotopy needs an objective")
    return JacobianProviderFactory.create(cfg.source, objective=objective)


def homotopy_path(
    u_star: Controller,
    theta0: ThetaLike,
    theta1: ThetaLike,
    cfg: HomotopyConfig,
    jac_provider: Optional[IJacobianProvider] = None,
    objective: Optional[IObjective] = None,
    bounds: Tuple[float, float] = CONTROL_BOUNDS,
    grid: Optional[JacobianGrid] = None,
) -> HomotopyTrace:
    if jac_provider is None:
        jac_provider = make_provider(cfg, grid, objective)
    t0 = _as_array(theta0)
    t1 = _as_array(theta1)
    direction = t1 - t0
    h = 1.0 / cfg.steps
    u = u_star.coeffs.copy()
    record_costs = cfg.reintegrate and objective is not None

    times, iterates = [0.0], [u.tolist()]
    costs = [objective.evaluate(u, t0)] if record_costs else None
    for m in range(cfg.steps):
        t = m * h
        theta_m = t0 + t * direction
        d = jac_provider.jacobian(u, theta_m)
        u = u + h * (d.d @ theta_step(d, t0, t1))
        times.append((m + 1) * h)
        iterates.append(u.tolist())
        if record_costs:
            costs.append(objective.evaluate(u, t0 + (m + 1) * h * direction))
    logger.debug("同伦结束: steps=%d, provider=%s", cfg.steps, type(jac_provider).__name__)
    return HomotopyTrace(
        controller=u_star.with_coeffs(np.clip(u, bounds[0], bounds[1])),
        times=times,
        iterates=iterates,
        costs=costs,
    )


def homotopy_approx(
    u_star: Controller,
    theta0: ThetaLike,
    theta1: ThetaLike,
    cfg: HomotopyConfig,
    jac_provider: Optional[IJacobianProvider] = None,
    objective: Optional[IObjective] = None,
    bounds: Tuple[float, float] = CONTROL_BOUNDS,
    grid: Optional[JacobianGrid] = None,
) -> Controller:
    """
    前向 Euler 同伦近似 u*(θ1)

    参数列表：
    - u_star: θ0 处的最优控制
    - theta0 / theta1: 起点与终点（完整 P 维）
    - cfg: 同伦配置
    - jac_provider: 灵敏度来源；None 时由 make_provider(cfg, grid, objective) 构造
    - objective: cfg.reintegrate 时记录代价；source=DIRECT 时也用于构造来源
    - grid: source=GRID 且未传入 jac_provider 时使用的预计算网格
    """
    return homotopy_path(u_star, theta0, theta1, cfg, jac_provider, objective, bounds, grid).controller

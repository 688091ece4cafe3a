from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import List, Literal, Optional, Tuple

from fast_replan.ocp.controller import CONTROL_BOUNDS, Controller


class OptimizerConfig(BaseModel):
    """
    OptimizerConfig 投影 BFGS 的配置，包含以下字段：

    - 终止条件
        - max_iters: 最大迭代次数
        - grad_tol: 投影梯度范数阈值
    - 线搜索
        - initial_step: 初始步长
        - armijo_c1: Armijo 充分下降系数
        - backtrack: 回溯缩放因子
        - max_backtracks: 最大回溯次数
        - max_step: 首个试探步的最大分量（弧度），None 表示不限制
    - 拟牛顿更新
        - curvature_eps: 曲率条件 sᵀy > curvature_eps·‖s‖‖y‖ 时才更新逆 Hessian
    - bounds: 每个系数的盒约束（弧度）
    """
    model_config = ConfigDict(frozen=True)

    max_iters: int = Field(default=500, ge=1)
    grad_tol: float = Field(default=1e-6, gt=0.0)

    initial_step: float = Field(default=1.0, gt=0.0)
    armijo_c1: float = Field(default=1e-4, gt=0.0, lt=1.0)
    backtrack: float = Field(default=0.5, gt=0.0, lt=1.0)
    max_backtracks: int = Field(default=40, ge=1)
    max_step: Optional[float] = Field(default=None, gt=0.0)

    curvature_eps: float = Field(default=1e-10, ge=0.0)

    bounds: Tuple[float, float] = CONTROL_BOUNDS

    @model_validator(mode="after")
    def check_bounds(self):
        if not self.bounds[0] < self.bounds[1]:
            raise ValueError("OptimizerConfig: bounds lower must be < upper")
        return self


class OptimReport(BaseModel):
    """
    OptimReport 一次优化的结果，包含以下字段：

    - controller: 最终控制器
    - cost: 最终代价
    - grad_norm: 最终投影梯度范数
    - grad_tol: 使用的阈值
    - iterations: 迭代次数
    - converged: 是否收敛
    - status: "converged" / "max_iters" / "line_search_failure"
    - message: 失败原因（可选）
    - wall_time: 耗时（秒）
    - cost_evaluations / gradient_evaluations: 求值次数
    - cost_history: 每次接受迭代后的代价（单调不增）
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    controller: Controller
    cost: float
    grad_norm: float
    grad_tol: float
    iterations: int
    converged: bool
    status: Literal["converged", "max_iters", "line_search_failure"]
    message: Optional[str] = None
    wall_time: float = 0.0
    cost_evaluations: int = 0
    gradient_evaluations: int = 0
    cost_history: List[float] = []

    @model_validator(mode="after")
    def check_convergence(self):
        if self.converged and not self.grad_norm <= self.grad_tol:
            raise ValueError("OptimReport: converged report must satisfy grad_norm <= grad_tol")
        return self

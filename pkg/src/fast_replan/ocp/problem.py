"""
离散最优控制问题定义

ProblemSpec 把动力学、雅可比、初值、终端目标、状态约束罚项和归一化尺度打包成一个不可变对象，
并实现 IObjective：evaluate / gradient 都在原始 θ 数组上工作。
"""

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Callable, List, Literal, Optional, Tuple
import numpy as np

from fast_replan.errors import ShapeMismatch
from fast_replan.ode import TimeGrid, Trajectory, integrate, integrate_with_sensitivities
from .controller import CONTROL_BOUNDS, Controller
from .objective import IObjective
from .theta import ThetaVector, dimensionalize_array
from .cost import trajectory_cost, trajectory_cost_gradient


class TerminalTarget(BaseModel):
    """
    TerminalTarget 终端目标罚项 weight·((x_index(T) - target)/target)²

    - index: 状态分量下标
    - target: 目标值（不能为 0）
    - weight: 罚权重 β ≥ 0
    """
    model_config = ConfigDict(frozen=True)

    index: int
    target: float
    weight: float = Field(ge=0.0)

    @model_validator(mode="after")
    def check_target(self):
        if self.target == 0.0:
            raise ValueError("TerminalTarget: target must be nonzero (it normalizes the residual)")
        return self


class StateBound(BaseModel):
    """
    StateBound 单侧状态约束的四次罚项 weight·Σ_k viol_k⁴ / x̄_index⁴

    - index: 状态分量下标
    - bound: 约束边界
    - side: "lower" 表示 x ≥ bound，"upper" 表示 x ≤ bound
    - weight: 罚权重 β ≥ 0
    """
    model_config = ConfigDict(frozen=True)

    index: int
    bound: float
    side: Literal["lower", "upper"]
    weight: float = Field(ge=0.0)

    @property
    def sign(self) -> float:
        """∂viol/∂x"""
        return -1.0 if self.side == "lower" else 1.0

    def violation(self, values: np.ndarray) -> np.ndarray:
        if self.side == "lower":
            return np.maximum(self.bound - values, 0.0)
        return np.maximum(values - self.bound, 0.0)


class ProblemSpec(BaseModel, IObjective):
    """
    ProblemSpec 离散最优控制问题，包含以下字段：

    - 动力学
        - dynamics / jac_x / jac_u: f(t, x, u, p) 及其雅可比
        - x0: 初始状态
        - integration_grid: 积分网格
        - controller_grid: 控制器网格（N+1 个节点）
    - 参数
        - nominal_params: 标称参数 p̄（有量纲）
        - param_names: 参数名
        - beta0: 无量纲化尺度 β0
    - 代价
        - objective_index: 取最大值的终端状态分量（代价首项为 -x(T)/x̄）
        - terminal: 终端目标罚项
        - state_bounds: 状态约束罚项
        - scales: 归一化尺度 x̄（每个状态分量一个，> 0）
        - control_bounds: 控制系数的盒约束
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dynamics: Callable
    jac_x: Callable
    jac_u: Callable
    x0: np.ndarray
    integration_grid: TimeGrid
    controller_grid: TimeGrid

    nominal_params: np.ndarray
    param_names: Tuple[str, ...]
    beta0: float = 0.1

    objective_index: int
    terminal: List[TerminalTarget] = []
    state_bounds: List[StateBound] = []
    scales: np.ndarray
    control_bounds: Tuple[float, float] = CONTROL_BOUNDS

    @field_validator("x0", "nominal_params", "scales", mode="before")
    @classmethod
    def _as_vector(cls, value):
        return np.array(value, dtype=float).reshape(-1)

    @model_validator(mode="after")
    def check_problem(self):
        n = self.x0.size
        if self.scales.size != n:
            raise ShapeMismatch(f"ProblemSpec: {self.scales.size} scales for {n} states")
        if np.any(~np.isfinite(self.scales)) or np.any(self.scales <= 0):
            raise ValueError("ProblemSpec: all normalization scales must be > 0")
        if len(self.param_names) != self.nominal_params.size:
            raise ShapeMismatch("ProblemSpec: param_names and nominal_params lengths differ")
        if self.beta0 <= 0:
            raise ValueError("ProblemSpec: beta0 must be > 0")
        if not self.control_bounds[0] < self.control_bounds[1]:
            raise ValueError("ProblemSpec: control_bounds lower must be < upper")
        indices = [self.objective_index] + [t.index for t in self.terminal] + [b.index for b in self.state_bounds]
        if any(not 0 <= i < n for i in indices):
            raise ShapeMismatch(f"ProblemSpec: state index outside [0, {n})")
        grid = self.integration_grid
        span = self.controller_grid
        if abs(grid.t0 - span.t0) > 1e-9 or abs(grid.t_final - span.t_final) > 1e-9 * max(1.0, span.t_final):
            raise ValueError("ProblemSpec: controller and integration grids must span the same horizon")
        return self

    # ===== IObjective =====

    @property
    def n_coeffs(self) -> int:
        return self.controller_grid.n_nodes

    @property
    def n_params(self) -> int:
        return self.nominal_params.size

    @property
    def n_states(self) -> int:
        return self.x0.size

    def evaluate(self, coeffs: np.ndarray, theta: np.ndarray) -> float:
        return trajectory_cost(self.simulate(coeffs, theta).states, self)

    def gradient(self, coeffs: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return self.value_and_gradient(coeffs, theta)[1]

    def value_and_gradient(self, coeffs: np.ndarray, theta: np.ndarray) -> Tuple[float, np.ndarray]:
        trajectory = self.simulate(coeffs, theta, with_sensitivities=True)
        value = trajectory_cost(trajectory.states, self)
        return value, trajectory_cost_gradient(trajectory.states, trajectory.sens, self)

    # ===== 辅助方法 =====

    def controller(self, coeffs) -> Controller:
        return Controller(grid=self.controller_grid, coeffs=coeffs)

    def theta_vector(self, theta: Optional[np.ndarray] = None) -> ThetaVector:
        if theta is None:
            return ThetaVector.zeros(self.nominal_params, self.beta0)
        return ThetaVector(theta=theta, nominal=self.nominal_params, beta0=self.beta0)

    def params_for(self, theta: np.ndarray) -> np.ndarray:
        return dimensionalize_array(theta, self.nominal_params, self.beta0)

    def simulate(
        self,
        coeffs: np.ndarray,
        theta: np.ndarray,
        with_sensitivities: bool = False,
        grid: Optional[TimeGrid] = None,
        x0: Optional[np.ndarray] = None,
    ) -> Trajectory:
        """在给定 θ 下积分系数为 coeffs 的控制器；grid / x0 可指定子区间与该区间的初值"""
        controller = self.controller(coeffs)
        params = self.params_for(theta)
        grid = self.integration_grid if grid is None else grid
        x0 = self.x0 if x0 is None else x0
        if with_sensitivities:
            return integrate_with_sensitivities(self.dynamics, self.jac_x, self.jac_u, x0, grid, controller, params)
        return integrate(self.dynamics, x0, grid, controller, params)

    def with_scales(self, scales) -> "ProblemSpec":
        return self.model_copy(update={"scales": np.array(scales, dtype=float).reshape(-1)})

    def without_penalties(self) -> "ProblemSpec":
        """所有罚权重置零（纯目标最大化）"""
        return self.model_copy(update={
            "terminal": [t.model_copy(update={"weight": 0.0}) for t in self.terminal],
            "state_bounds": [b.model_copy(update={"weight": 0.0}) for b in self.state_bounds],
        })

from pydantic import BaseModel, ConfigDict, field_serializer, field_validator, model_validator
from typing import Tuple
import math
import numpy as np

from fast_replan.errors import IndexOutOfRange, ShapeMismatch
from fast_replan.ode.grid import TimeGrid

# 攻角约束 |u| <= π/2
CONTROL_BOUNDS: Tuple[float, float] = (-math.pi / 2.0, math.pi / 2.0)


def hat_basis_eval(i: int, t, grid: TimeGrid):
    """
    第 i 个帽函数 φ_i 在 t 处的取值

    参数列表：
    - i: 节点下标，0..N
    - t: 时间（标量或数组）
    - grid: 控制器时间网格

    返回值：
    - 与 t 同形的权重，[t_{i-1}, t_{i+1}] 之外为 0
    """
    if not 0 <= i <= grid.n_steps:
        raise IndexOutOfRange(f"hat basis index {i} outside [0, {grid.n_steps}]")
    unit = np.zeros(grid.n_nodes)
    unit[i] = 1.0
    value = np.interp(t, grid.nodes, unit, left=0.0, right=0.0)
    return float(value) if np.ndim(value) == 0 else value


class Controller(BaseModel):
    """
    Controller 帽函数展开的分段线性控制器，包含以下字段：

    - grid: 控制器时间网格（N+1 个节点）
    - coeffs: 节点系数 u_0..u_N（航天飞机问题中单位为弧度）
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: TimeGrid
    coeffs: np.ndarray

    @field_validator("coeffs", mode="before")
    @classmethod
    def _as_vector(cls, value):
        return np.array(value, dtype=float).reshape(-1)

    @field_serializer("coeffs")
    def _dump_coeffs(self, value: np.ndarray):
        return value.tolist()

    @model_validator(mode="after")
    def check_length(self):
        if self.coeffs.size != self.grid.n_nodes:
            raise ShapeMismatch(
                f"Controller: {self.coeffs.size} coefficients for {self.grid.n_nodes} grid nodes"
            )
        return self

    @classmethod
    def constant(cls, grid: TimeGrid, value: float) -> "Controller":
        return cls(grid=grid, coeffs=np.full(grid.n_nodes, float(value)))

    @property
    def n_coeffs(self) -> int:
        return self.coeffs.size

    def eval(self, t):
        """帽函数插值；在节点处精确返回对应系数"""
        value = np.interp(t, self.grid.nodes, self.coeffs)
        return float(value) if np.ndim(value) == 0 else value

    def basis_matrix(self, times) -> np.ndarray:
        """
        返回 (len(times), N+1) 的帽函数权重矩阵 W，满足 W @ coeffs == eval(times)
        """
        times = np.atleast_1d(np.asarray(times, dtype=float))
        nodes = self.grid.nodes
        eye = np.eye(self.grid.n_nodes)
        return np.stack([np.interp(times, nodes, eye[j]) for j in range(self.grid.n_nodes)], axis=1)

    def with_coeffs(self, coeffs) -> "Controller":
        return Controller(grid=self.grid, coeffs=coeffs)

    def clamp(self, bounds: Tuple[float, float] = CONTROL_BOUNDS) -> "Controller":
        return self.with_coeffs(np.clip(self.coeffs, bounds[0], bounds[1]))

    def splice(self, replacement: "Controller", start: int) -> "Controller":
        """前 start 个节点保留本控制器系数，其余节点取 replacement 的系数"""
        if replacement.grid != self.grid:
            raise ShapeMismatch("Controller.splice: controllers live on different grids")
        if not 0 <= start <= self.grid.n_steps:
            raise IndexOutOfRange(f"splice index {start} outside [0, {self.grid.n_steps}]")
        coeffs = self.coeffs.copy()
        coeffs[start:] = replacement.coeffs[start:]
        return self.with_coeffs(coeffs)

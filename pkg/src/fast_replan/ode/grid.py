from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from typing import Optional
import numpy as np

from fast_replan.errors import ShapeMismatch


class TimeGrid(BaseModel):
    """
    TimeGrid 均匀时间网格，包含以下字段：

    - t0: 起始时间（秒）
    - t_final: 终止时间 T（秒）
    - n_steps: 步数（节点数为 n_steps + 1）
    """
    model_config = ConfigDict(frozen=True)

    t0: float = 0.0
    t_final: float
    n_steps: int

    @model_validator(mode="after")
    def check_grid(self):
        if self.n_steps < 1:
            raise ValueError("TimeGrid: n_steps must be >= 1")
        if not self.t_final > self.t0:
            raise ValueError("TimeGrid: t_final must be greater than t0")
        return self

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.t0, self.t_final, self.n_steps + 1)

    @property
    def step(self) -> float:
        return (self.t_final - self.t0) / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    def first_node_at_or_after(self, t: float) -> int:
        """返回第一个时间不早于 t 的节点下标（容差为半个浮点步长量级）"""
        nodes = self.nodes
        tol = 1e-9 * max(1.0, abs(self.t_final))
        index = int(np.searchsorted(nodes, t - tol, side="left"))
        return min(index, self.n_steps)

    def sub_grid(self, start: int, stop: Optional[int] = None) -> "TimeGrid":
        """截取 [start, stop] 节点之间的子网格，步长保持不变"""
        stop = self.n_steps if stop is None else stop
        if not 0 <= start < stop <= self.n_steps:
            raise ValueError(f"TimeGrid: invalid sub-grid [{start}, {stop}] of {self.n_steps} steps")
        nodes = self.nodes
        return TimeGrid(t0=float(nodes[start]), t_final=float(nodes[stop]), n_steps=stop - start)


class Trajectory(BaseModel):
    """
    Trajectory 状态轨迹

    - grid: 积分网格
    - states: (节点数, n) 状态历史
    - sens: 可选，(节点数, n, N+1) 的 ∂x(t_k)/∂u_j
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: TimeGrid
    states: np.ndarray
    sens: Optional[np.ndarray] = None

    @field_validator("states", mode="before")
    @classmethod
    def _as_state_array(cls, value):
        return np.atleast_2d(np.asarray(value, dtype=float))

    @model_validator(mode="after")
    def check_shapes(self):
        if self.states.shape[0] != self.grid.n_nodes:
            raise ShapeMismatch(
                f"Trajectory: {self.states.shape[0]} states for {self.grid.n_nodes} grid nodes"
            )
        if self.sens is not None:
            if self.sens.ndim != 3 or self.sens.shape[:2] != self.states.shape:
                raise ShapeMismatch(
                    f"Trajectory: sensitivity shape {self.sens.shape} does not match states {self.states.shape}"
                )
        return self

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def n_states(self) -> int:
        return self.states.shape[1]

    def join(self, tail: "Trajectory", grid: TimeGrid) -> "Trajectory":
        """
        拼接两段共享边界节点的轨迹（tail 的首节点即本段末节点）。

        参数列表：
        - tail: 后半段轨迹
        - grid: 拼接后覆盖全时域的网格
        """
        states = np.vstack([self.states, tail.states[1:]])
        sens = None
        if self.sens is not None and tail.sens is not None:
            sens = np.concatenate([self.sens, tail.sens[1:]], axis=0)
        return Trajectory(grid=grid, states=states, sens=sens)

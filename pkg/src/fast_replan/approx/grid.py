"""
灵敏度网格

在降维后的 θ 超立方体上放置规则网格，每个节点存一个 (N+1)×|dims| 的灵敏度矩阵；
查询时对所在单元的 2^d 个角点做多线性插值。

构建顺序按到中心的切比雪夫距离分环：第 0 环从标称控制热启动，之后每个节点从更早环中
距离最近的已求解节点热启动（距离相同取行优先下标最小者）。同一环内的节点并发求解。
"""

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union
import itertools
import json
import logging

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from fast_replan.errors import (
    InvalidGrid,
    MissingCorner,
    NodeSolveFailure,
    OutOfGridBounds,
    ReplanError,
    ShapeMismatch,
)
from fast_replan.gsa import ScreeningReport
from fast_replan.hdsa import HdsaSettings, SensitivityMatrix, compute_sensitivity
from fast_replan.ocp import Controller, IObjective
from fast_replan.optimizer import OptimizerConfig, minimize_objective
from fast_replan.runtime import run_jobs

logger = logging.getLogger(__name__)

_BOUNDS_TOL = 1e-12


class JacobianGrid(BaseModel):
    """
    JacobianGrid 规则网格上的灵敏度矩阵，包含以下字段：

    - dims: 网格覆盖的参数下标
    - node_coords: 每维的节点坐标（严格递增，首尾为 -1 和 1）
    - payload: 形状 (m_1, ..., m_d, N+1, d)，缺失节点为 NaN
    - missing: 形状 (m_1, ..., m_d) 的缺失标记
    - nominal_u: θ = 0 处的标称控制
    - meta: β0、标称参数、构建配置等元数据（JSON 可序列化）
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dims: List[int]
    node_coords: List[np.ndarray]
    payload: np.ndarray
    missing: np.ndarray
    nominal_u: Controller
    meta: Dict[str, Any] = {}

    _interpolator: Optional[RegularGridInterpolator] = PrivateAttr(default=None)

    @field_validator("node_coords", mode="before")
    @classmethod
    def _as_coords(cls, value):
        return [np.array(c, dtype=float).reshape(-1) for c in value]

    @field_validator("missing", mode="before")
    @classmethod
    def _as_mask(cls, value):
        return np.asarray(value, dtype=bool)

    @model_validator(mode="after")
    def check_grid(self):
        if len(self.node_coords) != len(self.dims):
            raise ValueError("JacobianGrid: one coordinate array per dimension is required")
        for coords in self.node_coords:
            if coords.size < 2 or np.any(np.diff(coords) <= 0):
                raise ValueError("JacobianGrid: node coordinates must be strictly increasing with >= 2 nodes")
            if coords[0] != -1.0 or coords[-1] != 1.0:
                raise ValueError("JacobianGrid: node coordinates must include both endpoints -1 and 1")
        shape = self.shape + (self.nominal_u.n_coeffs, len(self.dims))
        if self.payload.shape != shape:
            raise ShapeMismatch(f"JacobianGrid: payload shape {self.payload.shape}, expected {shape}")
        if self.missing.shape != self.shape:
            raise ShapeMismatch(f"JacobianGrid: missing mask shape {self.missing.shape}, expected {self.shape}")
        if not np.all(np.isfinite(self.payload[~self.missing])):
            raise ValueError("JacobianGrid: solved nodes must have finite payloads")
        return self

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(c.size for c in self.node_coords)

    @property
    def nodes_per_dim(self) -> List[int]:
        return list(self.shape)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape)) if self.dims else 0

    @property
    def n_coeffs(self) -> int:
        return self.nominal_u.n_coeffs

    def node_theta(self, index: Tuple[int, ...]) -> np.ndarray:
        return np.array([c[i] for c, i in zip(self.node_coords, index)])

    def stored(self, index: Tuple[int, ...]) -> SensitivityMatrix:
        """节点处保存的灵敏度矩阵"""
        if self.missing[index]:
            raise MissingCorner(f"grid node {index} was not solved")
        return SensitivityMatrix(d=self.payload[index], theta_at=self.node_theta(index), columns=list(self.dims))

    def unusable_cells(self) -> int:
        """含缺失角点的单元个数"""
        if not self.dims:
            return 0
        count = 0
        for lo in np.ndindex(*(m - 1 for m in self.shape)):
            corners = [tuple(i + o for i, o in zip(lo, offs)) for offs in itertools.product((0, 1), repeat=len(lo))]
            if any(self.missing[c] for c in corners):
                count += 1
        return count

    def interpolator(self) -> RegularGridInterpolator:
        if self._interpolator is None:
            values = np.where(self.missing[..., None, None], 0.0, self.payload)
            self._interpolator = RegularGridInterpolator(
                tuple(self.node_coords), values, method="linear", bounds_error=False, fill_value=None
            )
        return self._interpolator

    def equals(self, other: "JacobianGrid") -> bool:
        """逐字段比较，矩阵要求逐位相等"""
        return (
            self.dims == other.dims
            and len(self.node_coords) == len(other.node_coords)
            and all(np.array_equal(a, b) for a, b in zip(self.node_coords, other.node_coords))
            and np.array_equal(self.missing, other.missing)
            and np.array_equal(self.payload, other.payload, equal_nan=True)
            and self.nominal_u.grid == other.nominal_u.grid
            and np.array_equal(self.nominal_u.coeffs, other.nominal_u.coeffs)
            and self.meta == other.meta
        )


def interpolate(grid: JacobianGrid, theta_reduced) -> SensitivityMatrix:
    """
    多线性插值

    参数列表：
    - grid: 灵敏度网格
    - theta_reduced: 网格维度上的 θ（长度 len(grid.dims)）

    返回值：
    - SensitivityMatrix，columns = grid.dims

    权重为正的角点中只要有一个缺失就抛出 MissingCorner。
    """
    if not grid.dims:
        raise InvalidGrid("cannot interpolate on a grid without dimensions")
    theta = np.asarray(theta_reduced, dtype=float).reshape(-1)
    if theta.size != len(grid.dims):
        raise ShapeMismatch(f"query has {theta.size} coordinates for a {len(grid.dims)}-dim grid")
    if not np.all(np.isfinite(theta)):
        raise OutOfGridBounds(f"query {theta} is not finite")
    for x, coords in zip(theta, grid.node_coords):
        if x < coords[0] - _BOUNDS_TOL or x > coords[-1] + _BOUNDS_TOL:
            raise OutOfGridBounds(f"query {theta} lies outside the grid box")
    theta = np.clip(theta, [c[0] for c in grid.node_coords], [c[-1] for c in grid.node_coords])

    lows, fracs = [], []
    for x, coords in zip(theta, grid.node_coords):
        lo = int(np.clip(np.searchsorted(coords, x, side="right") - 1, 0, coords.size - 2))
        lows.append(lo)
        fracs.append((x - coords[lo]) / (coords[lo + 1] - coords[lo]))
    for offsets in itertools.product((0, 1), repeat=len(lows)):
        weight = np.prod([f if o else 1.0 - f for f, o in zip(fracs, offsets)])
        corner = tuple(lo + o for lo, o in zip(lows, offsets))
        if weight > 0.0 and grid.missing[corner]:
            raise MissingCorner(f"interpolation cell around {theta} has a missing corner {corner}")

    d = grid.interpolator()(theta[None, :])[0]
    return SensitivityMatrix(d=d, theta_at=theta, columns=list(grid.dims))


# ===== 网格构建 =====

class GridBuildSettings(BaseModel):
    """
    GridBuildSettings 网格构建配置

    - optimizer: 节点优化器配置
    - hdsa: 节点 HDSA 配置
    - workers: 同一环内的并发数
    - require_converged: 未收敛的节点是否视为失败
    """
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    hdsa: HdsaSettings = Field(default_factory=HdsaSettings)
    workers: int = Field(default=1, ge=1)
    require_converged: bool = False


class NodeOutcome(BaseModel):
    """单个网格节点的求解结果（写入构建日志）"""
    index: Tuple[int, ...]
    flat_index: int
    ring: int
    theta: List[float]
    status: Literal["solved", "failed"]
    converged: bool = False
    iterations: int = 0
    cost: Optional[float] = None
    cond_h: Optional[float] = None
    regularized: bool = False
    warm_start: Optional[int] = None
    message: Optional[str] = None


def grid_coordinates(m: int) -> np.ndarray:
    """[-1, 1] 上 m 个等距节点"""
    if m < 2:
        raise ValueError(f"grid needs at least 2 nodes per dimension, got {m}")
    return np.linspace(-1.0, 1.0, m)


def ring_order(shape: Tuple[int, ...]) -> List[List[int]]:
    """按到中心的切比雪夫距离分环，返回每环的行优先扁平下标"""
    indices = list(np.ndindex(*shape))
    centre = [(m - 1) / 2.0 for m in shape]
    dist = [max(abs(i - c) for i, c in zip(idx, centre)) for idx in indices]
    return [[k for k, v in enumerate(dist) if v == level] for level in sorted(set(dist))]


def build_jacobian_grid(
    objective: IObjective,
    screening: Union[ScreeningReport, Sequence[int]],
    m: int,
    settings: Optional[GridBuildSettings] = None,
    nominal_u: Optional[Controller] = None,
    on_node: Optional[Callable[[NodeOutcome], None]] = None,
    meta: Optional[Dict[str, Any]] = None,
) -> JacobianGrid:
    """
    在重要参数子空间上构建灵敏度网格

    参数列表：
    - objective: 目标函数（通常为 ProblemSpec）
    - screening: 筛选结果（取 important）或直接给出参数下标
    - m: 每维节点数
    - settings: 构建配置
    - nominal_u: 标称最优控制（第 0 环的热启动点）
    - on_node: 每个节点完成后的回调
    - meta: 附加元数据

    返回值：
    - JacobianGrid；求解失败的节点记为缺失，全部失败时抛出 NodeSolveFailure
    """
    settings = settings or GridBuildSettings()
    if isinstance(screening, ScreeningReport):
        dims = screening.require_important()
    else:
        dims = list(screening)
    if not dims:
        raise InvalidGrid("grid needs at least one dimension")
    if nominal_u is None:
        raise ValueError("build_jacobian_grid: nominal_u is required as the warm start")

    coords = grid_coordinates(m)
    shape = (m,) * len(dims)
    indices = list(np.ndindex(*shape))
    thetas = [np.array([coords[i] for i in idx]) for idx in indices]
    n_coeffs = nominal_u.n_coeffs
    payload = np.full(shape + (n_coeffs, len(dims)), np.nan)
    missing = np.ones(shape, dtype=bool)
    solved: Dict[int, np.ndarray] = {}
    outcomes: List[NodeOutcome] = []

    def full_theta(k: int) -> np.ndarray:
        theta = np.zeros(objective.n_params)
        theta[dims] = thetas[k]
        return theta

    def warm_start(k: int) -> Tuple[Optional[int], Controller]:
        if not solved:
            return None, nominal_u
        best = min(solved, key=lambda j: (float(np.sum((thetas[j] - thetas[k]) ** 2)), j))
        return best, nominal_u.with_coeffs(solved[best])

    def solve(job: Tuple[int, int, Optional[int], Controller]):
        k, ring, source, u0 = job
        theta = full_theta(k)
        outcome = dict(index=indices[k], flat_index=k, ring=ring, theta=thetas[k].tolist(), warm_start=source)
        try:
            report = minimize_objective(objective, theta, u0, settings.optimizer)
            if settings.require_converged and not report.converged:
                raise NodeSolveFailure(f"optimizer did not converge ({report.status})")
            sens = compute_sensitivity(report.controller, theta, objective, settings.hdsa, dims)
        except ReplanError as e:
            logger.warning("网格节点 %s 求解失败: %s", indices[k], e)
            return NodeOutcome(status="failed", message=f"{type(e).__name__}: {e}", **outcome), None, None
        result = NodeOutcome(
            status="solved",
            converged=report.converged,
            iterations=report.iterations,
            cost=report.cost,
            cond_h=sens.cond_h,
            regularized=sens.regularized,
            **outcome,
        )
        return result, report.controller.coeffs, sens.d

    rings = ring_order(shape)
    logger.info("开始构建灵敏度网格: dims=%s, m=%d, 节点数=%d, 环数=%d", dims, m, len(indices), len(rings))
    for ring_index, ring in enumerate(rings):
        jobs = []
        for k in ring:
            source, u0 = (None, nominal_u) if ring_index == 0 else warm_start(k)
            jobs.append((k, ring_index, source, u0))
        for k, (outcome, coeffs, d) in zip(ring, run_jobs(solve, jobs, settings.workers)):
            outcomes.append(outcome)
            if outcome.status == "solved":
                solved[k] = coeffs
                payload[indices[k]] = d
                missing[indices[k]] = False
            if on_node is not None:
                on_node(outcome)

    failed = int(missing.sum())
    if failed == len(indices):
        raise NodeSolveFailure(f"all {failed} grid nodes failed to solve")
    logger.info("灵敏度网格构建完成: 成功 %d / %d", len(indices) - failed, len(indices))

    grid_meta = dict(meta or {})
    grid_meta.update({
        "grid_nodes": m,
        "n_params": objective.n_params,
        "failed_nodes": sorted(o.flat_index for o in outcomes if o.status == "failed"),
        "unconverged_nodes": sorted(o.flat_index for o in outcomes if o.status == "solved" and not o.converged),
        "regularized_nodes": sorted(o.flat_index for o in outcomes if o.regularized),
        "settings": json.loads(settings.model_dump_json()),
    })
    return JacobianGrid(
        dims=dims,
        node_coords=[coords.copy() for _ in dims],
        payload=payload,
        missing=missing,
        nominal_u=nominal_u,
        meta=grid_meta,
    )

"""
超微分灵敏度分析（HDSA）

在最优点 u*(θ) 处对一阶最优性条件 ∇_u J(u*, θ) = 0 做隐函数求导：

    H·D = -B，其中 H = ∂²J/∂u²，B = ∂²J/∂u∂θ，D = ∂u*/∂θ

H 与 B 都由精确梯度（灵敏度方程）的中心差分得到；各列相互独立，可并发计算。
"""

from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator
from typing import List, Optional, Sequence, Union
import logging
import warnings

import numpy as np
import scipy.linalg

from fast_replan.errors import NonFiniteEntry, SingularHessian
from fast_replan.ocp.controller import Controller
from fast_replan.ocp.objective import IObjective
from fast_replan.ocp.theta import ThetaVector
from fast_replan.runtime import run_jobs

logger = logging.getLogger(__name__)

ThetaLike = Union[ThetaVector, np.ndarray, Sequence[float]]


class HdsaSettings(BaseModel):
    """
    HdsaSettings 有限差分与求解配置

    - u_step: 控制系数方向的差分步长（弧度）
    - theta_step: θ 方向的差分步长
    - cond_ceiling: H 条件数上限，超过则视为奇异
    - tikhonov_scale: 回退正则 λ = tikhonov_scale·trace(H)/(N+1)
    - fallback: 是否启用 Tikhonov 回退
    - symmetrize: 是否以 (H + Hᵀ)/2 对称化
    - workers: 列计算的并发数
    """
    model_config = ConfigDict(frozen=True)

    u_step: float = Field(default=1e-5, gt=0.0)
    theta_step: float = Field(default=1e-4, gt=0.0)
    cond_ceiling: float = Field(default=1e12, gt=1.0)
    tikhonov_scale: float = Field(default=1e-8, gt=0.0)
    fallback: bool = True
    symmetrize: bool = True
    workers: int = Field(default=1, ge=1)


class SensitivityMatrix(BaseModel):
    """
    SensitivityMatrix 最优控制对参数的灵敏度，包含以下字段：

    - d: (N+1) × k 矩阵 ∂u*_i/∂θ_j（k 为所选参数列数）
    - theta_at: 计算点 θ（原始数组，长度 P）
    - cond_h: H 的条件数
    - regularized: 是否使用了 Tikhonov 回退
    - columns: d 各列对应的参数下标；None 表示全部 P 列
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True, ser_json_inf_nan="constants")

    d: np.ndarray
    theta_at: np.ndarray
    cond_h: float = float("nan")
    regularized: bool = False
    columns: Optional[List[int]] = None

    @field_validator("d", mode="before")
    @classmethod
    def _as_matrix(cls, value):
        return np.array(value, dtype=float, ndmin=2)

    @field_validator("theta_at", mode="before")
    @classmethod
    def _as_vector(cls, value):
        if isinstance(value, ThetaVector):
            value = value.theta
        return np.array(value, dtype=float).reshape(-1)

    @field_serializer("d", "theta_at")
    def _dump_array(self, value: np.ndarray):
        return value.tolist()

    @model_validator(mode="after")
    def check_matrix(self):
        if self.d.ndim != 2:
            raise ValueError(f"SensitivityMatrix: d must be 2-D, got shape {self.d.shape}")
        if not np.all(np.isfinite(self.d)):
            raise ValueError("SensitivityMatrix: all entries must be finite")
        if self.columns is not None and len(self.columns) != self.d.shape[1]:
            raise ValueError("SensitivityMatrix: columns length must match d's column count")
        return self

    @property
    def n_coeffs(self) -> int:
        return self.d.shape[0]

    @property
    def n_params(self) -> int:
        return self.d.shape[1]

    @property
    def column_indices(self) -> List[int]:
        return list(range(self.d.shape[1])) if self.columns is None else list(self.columns)

    def select(self, columns: Sequence[int]) -> "SensitivityMatrix":
        """按参数下标取子矩阵"""
        own = self.column_indices
        positions = [own.index(c) for c in columns]
        return self.model_copy(update={"d": self.d[:, positions], "columns": list(columns)})


def _theta_array(theta: ThetaLike) -> np.ndarray:
    if isinstance(theta, ThetaVector):
        return theta.theta
    return np.asarray(theta, dtype=float).reshape(-1)


def _coeffs_array(u_star: Union[Controller, np.ndarray]) -> np.ndarray:
    if isinstance(u_star, Controller):
        return u_star.coeffs
    return np.asarray(u_star, dtype=float).reshape(-1)


def hessian(
    u_star: Union[Controller, np.ndarray],
    theta: ThetaLike,
    objective: IObjective,
    settings: Optional[HdsaSettings] = None,
) -> np.ndarray:
    """
    H 的第 j 列 = (∇J(u + εe_j) - ∇J(u - εe_j)) / 2ε

    settings.symmetrize 为 True 时返回 (H + Hᵀ)/2。
    """
    settings = settings or HdsaSettings()
    u = _coeffs_array(u_star)
    theta_arr = _theta_array(theta)
    step = settings.u_step

    def column(j: int) -> np.ndarray:
        e = np.zeros_like(u)
        e[j] = step
        return (objective.gradient(u + e, theta_arr) - objective.gradient(u - e, theta_arr)) / (2.0 * step)

    h = np.column_stack(run_jobs(column, range(u.size), settings.workers))
    if not np.all(np.isfinite(h)):
        raise NonFiniteEntry("Hessian has non-finite entries")
    if settings.symmetrize:
        h = 0.5 * (h + h.T)
    return h


def mixed_partials(
    u_star: Union[Controller, np.ndarray],
    theta: ThetaLike,
    objective: IObjective,
    settings: Optional[HdsaSettings] = None,
    columns: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """B 的第 j 列 = (∇J(u, θ + δe_j) - ∇J(u, θ - δe_j)) / 2δ；columns 为 None 时计算全部 P 列"""
    settings = settings or HdsaSettings()
    u = _coeffs_array(u_star)
    theta_arr = _theta_array(theta)
    step = settings.theta_step
    columns = list(range(theta_arr.size)) if columns is None else list(columns)

    def column(j: int) -> np.ndarray:
        e = np.zeros_like(theta_arr)
        e[j] = step
        return (objective.gradient(u, theta_arr + e) - objective.gradient(u, theta_arr - e)) / (2.0 * step)

    if not columns:
        return np.zeros((u.size, 0))
    b = np.column_stack(run_jobs(column, columns, settings.workers))
    if not np.all(np.isfinite(b)):
        raise NonFiniteEntry("mixed partials matrix has non-finite entries")
    return b


def sensitivity_matrix(
    h: np.ndarray,
    b: np.ndarray,
    settings: Optional[HdsaSettings] = None,
    theta_at: Optional[ThetaLike] = None,
    columns: Optional[Sequence[int]] = None,
    regularized: bool = False,
) -> SensitivityMatrix:
    """稠密对称求解 H·D = -B，并记录条件数"""
    settings = settings or HdsaSettings()
    h = np.asarray(h, dtype=float)
    b = np.asarray(b, dtype=float).reshape(h.shape[0], -1)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(b))):
        raise NonFiniteEntry("H or B has non-finite entries")
    cond_h = float(np.linalg.cond(h))
    if not np.isfinite(cond_h) or cond_h > settings.cond_ceiling:
        raise SingularHessian(f"Hessian condition number {cond_h:.3e} exceeds ceiling {settings.cond_ceiling:.3e}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        d = scipy.linalg.solve(h, -b, assume_a="sym")
    if not np.all(np.isfinite(d)):
        raise NonFiniteEntry("sensitivity matrix has non-finite entries")
    theta_at = np.zeros(0) if theta_at is None else _theta_array(theta_at)
    return SensitivityMatrix(
        d=d,
        theta_at=theta_at,
        cond_h=cond_h,
        regularized=regularized,
        columns=None if columns is None else list(columns),
    )


def compute_sensitivity(
    u_star: Union[Controller, np.ndarray],
    theta: ThetaLike,
    objective: IObjective,
    settings: Optional[HdsaSettings] = None,
    columns: Optional[Sequence[int]] = None,
) -> SensitivityMatrix:
    """
    完整 HDSA：H、B、D = -H⁻¹B，H 奇异时按配置回退到 H + λI

    参数列表：
    - u_star: 最优控制（直接模式同伦中也可以是当前迭代点）
    - theta: 计算点
    - objective: 目标函数
    - settings: HDSA 配置
    - columns: 只计算这些参数列（降维后的网格只需重要参数）
    """
    settings = settings or HdsaSettings()
    h = hessian(u_star, theta, objective, settings)
    b = mixed_partials(u_star, theta, objective, settings, columns)
    try:
        return sensitivity_matrix(h, b, settings, theta_at=theta, columns=columns)
    except SingularHessian as e:
        if not settings.fallback:
            raise
        lam = settings.tikhonov_scale * abs(float(np.trace(h))) / h.shape[0]
        logger.warning("Hessian 病态（%s），使用 Tikhonov 正则 λ=%.3e", e, lam)
        return sensitivity_matrix(
            h + lam * np.eye(h.shape[0]), b, settings, theta_at=theta, columns=columns, regularized=True
        )

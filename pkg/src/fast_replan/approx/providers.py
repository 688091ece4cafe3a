from abc import ABC, abstractmethod
from enum import Enum
from typing import Dict, Optional, Sequence, Type
import numpy as np

from fast_replan.hdsa import HdsaSettings, SensitivityMatrix, compute_sensitivity
from fast_replan.ocp import IObjective
from .grid import JacobianGrid, interpolate


class JacobianSource(Enum):
    DIRECT = "direct"
    GRID = "grid"


class IJacobianProvider(ABC):
    """在路径上任意 (u, θ) 处给出灵敏度矩阵 D"""

    @abstractmethod
    def jacobian(self, coeffs: np.ndarray, theta: np.ndarray) -> SensitivityMatrix:
        """
        参数列表：
        - coeffs: 当前控制系数
        - theta: 完整的 P 维 θ

        返回值：
        - SensitivityMatrix，columns 标明对应的参数下标
        """
        pass


class DirectJacobianProvider(IJacobianProvider):
    """每次调用都在当前迭代点做一次完整 HDSA（不重新优化）"""

    def __init__(
        self,
        objective: IObjective,
        settings: Optional[HdsaSettings] = None,
        columns: Optional[Sequence[int]] = None,
    ):
        self.objective = objective
        self.settings = settings or HdsaSettings()
        self.columns = None if columns is None else list(columns)

    def jacobian(self, coeffs: np.ndarray, theta: np.ndarray) -> SensitivityMatrix:
        return compute_sensitivity(coeffs, theta, self.objective, self.settings, self.columns)


class GridJacobianProvider(IJacobianProvider):
    """在预计算网格上做多线性插值，不触发任何代价或动力学求值"""

    def __init__(self, grid: JacobianGrid):
        self.grid = grid

    def jacobian(self, coeffs: np.ndarray, theta: np.ndarray) -> SensitivityMatrix:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != len(self.grid.dims):
            theta = theta[list(self.grid.dims)]
        return interpolate(self.grid, theta)


class JacobianProviderFactory:
    """灵敏度来源工厂类"""
    _mapping: Dict[str, Type[IJacobianProvider]] = {
        JacobianSource.DIRECT.value: DirectJacobianProvider,
        JacobianSource.GRID.value: GridJacobianProvider,
    }

    @classmethod
    def register_provider_cls(cls, source: str, provider_cls: Type[IJacobianProvider]):
        """注册灵敏度来源类"""
        cls._mapping[source] = provider_cls

    @classmethod
    def get_provider_cls(cls, source: str) -> Type[IJacobianProvider]:
        """获取灵敏度来源类"""
        provider_cls = cls._mapping.get(source)
        if provider_cls is None:
            raise ValueError(f"No jacobian provider registered for source: {source}")
        return provider_cls

    @classmethod
    def create(cls, source: JacobianSource, **kwargs) -> IJacobianProvider:
        """按来源构造实例（DIRECT 需要 objective，GRID 需要 grid）"""
        return cls.get_provider_cls(JacobianSource(source).value)(**kwargs)

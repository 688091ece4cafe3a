from abc import ABC, abstractmethod
from typing import Tuple
import numpy as np


class IObjective(ABC):
    """
    目标函数接口

    优化器、HDSA 和近似模块只依赖该接口：系数向量 u 与原始 θ 数组（允许有限差分时越出 [-1, 1]）。
    """

    @property
    @abstractmethod
    def n_coeffs(self) -> int:
        """控制系数个数 N+1"""
        pass

    @property
    @abstractmethod
    def n_params(self) -> int:
        """参数个数 P"""
        pass

    @abstractmethod
    def evaluate(self, coeffs: np.ndarray, theta: np.ndarray) -> float:
        """代价 J(u, θ)"""
        pass

    @abstractmethod
    def gradient(self, coeffs: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """梯度 ∂J/∂u，长度 N+1"""
        pass

    def value_and_gradient(self, coeffs: np.ndarray, theta: np.ndarray) -> Tuple[float, np.ndarray]:
        """同时返回代价和梯度；实现类可覆盖以共用一次积分"""
        return self.evaluate(coeffs, theta), self.gradient(coeffs, theta)

"""
DGSM 与 Sobol 总指数上界

- dgsm_estimate: N_j = (1/M)·Σ_k Σ_i (∂u*_i/∂θ_j)²，在 QMC 样本上求平均
- trace_covariance: 最优控制样本协方差矩阵的迹（无偏，除以 M-1）
- sobol_upper_bound: 独立同分布均匀输入下 S_j^tot ≤ ((b-a)²/π²)·N_j / Tr(Γ)
"""

from typing import Sequence, Union
import math
import numpy as np

from fast_replan.errors import NonPositiveTrace, ShapeMismatch
from fast_replan.hdsa import SensitivityMatrix
from fast_replan.ocp import Controller


def _matrix(sample: Union[SensitivityMatrix, np.ndarray]) -> np.ndarray:
    return sample.d if isinstance(sample, SensitivityMatrix) else np.asarray(sample, dtype=float)


def dgsm_estimate(d_samples: Sequence[Union[SensitivityMatrix, np.ndarray]]) -> np.ndarray:
    if len(d_samples) < 1:
        raise ValueError("dgsm_estimate: at least one sample is required")
    matrices = [_matrix(s) for s in d_samples]
    shape = matrices[0].shape
    if any(m.shape != shape for m in matrices):
        raise ShapeMismatch(f"dgsm_estimate: sensitivity matrices must all have shape {shape}")
    stacked = np.stack(matrices)
    return np.sum(stacked ** 2, axis=(0, 1)) / len(matrices)


def trace_covariance(u_samples: Sequence[Union[Controller, np.ndarray]]) -> float:
    if len(u_samples) < 2:
        raise ValueError("trace_covariance: at least two samples are required")
    rows = np.stack([s.coeffs if isinstance(s, Controller) else np.asarray(s, dtype=float) for s in u_samples])
    return float(np.sum(np.var(rows, axis=0, ddof=1)))


def sobol_constant(a: float = -1.0, b: float = 1.0) -> float:
    return (b - a) ** 2 / math.pi ** 2


def sobol_upper_bound(dgsm: np.ndarray, trace_gamma: float, a: float = -1.0, b: float = 1.0) -> np.ndarray:
    if not trace_gamma > 0:
        raise NonPositiveTrace(f"trace of the covariance must be positive, got {trace_gamma}")
    if not b > a:
        raise ValueError("sobol_upper_bound: b must be greater than a")
    return sobol_constant(a, b) * np.asarray(dgsm, dtype=float) / trace_gamma

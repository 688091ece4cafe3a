from typing import Sequence, Tuple, Union
import numpy as np

from fast_replan.errors import ShapeMismatch
from fast_replan.hdsa import SensitivityMatrix
from fast_replan.ocp import CONTROL_BOUNDS, Controller, ThetaVector

ThetaLike = Union[ThetaVector, np.ndarray, Sequence[float]]


def theta_step(d: SensitivityMatrix, theta0: ThetaLike, theta1: ThetaLike) -> np.ndarray:
    """
    θ1 - θ0 限制到 d 的列上

    θ 可以是完整的 P 维向量（按 d.columns 取分量），也可以已经是 d 的列维数。
    """
    t0 = theta0.theta if isinstance(theta0, ThetaVector) else np.asarray(theta0, dtype=float).reshape(-1)
    t1 = theta1.theta if isinstance(theta1, ThetaVector) else np.asarray(theta1, dtype=float).reshape(-1)
    if t0.shape != t1.shape:
        raise ShapeMismatch(f"theta0 has shape {t0.shape}, theta1 has shape {t1.shape}")
    delta = t1 - t0
    if delta.size == d.n_params:
        return delta
    if d.columns is not None and delta.size > max(d.columns, default=-1):
        return delta[list(d.columns)]
    raise ShapeMismatch(f"theta step of size {delta.size} does not match {d.n_params} sensitivity columns")


def linear_approx(
    u_star: Controller,
    d: SensitivityMatrix,
    theta0: ThetaLike,
    theta1: ThetaLike,
    bounds: Tuple[float, float] = CONTROL_BOUNDS,
) -> Controller:
    """一阶 Taylor 近似 u = u* + D·(θ1 - θ0)，再投影到盒约束"""
    if d.n_coeffs != u_star.n_coeffs:
        raise ShapeMismatch(f"sensitivity has {d.n_coeffs} rows for {u_star.n_coeffs} coefficients")
    coeffs = u_star.coeffs + d.d @ theta_step(d, theta0, theta1)
    return u_star.with_coeffs(np.clip(coeffs, bounds[0], bounds[1]))

"""
定步长 RK4 积分模块

- integrate: 受控 ODE 的经典四阶 Runge-Kutta 积分
- integrate_with_sensitivities: 状态与 ∂x/∂u_j 组成增广系统，用同一 RK4 格式、同一步长一次积分

控制器只需提供 coeffs 与 basis_matrix(times)（帽函数权重矩阵），RK4 各阶段（含半步）的控制量
都由帽函数插值得到。
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, Callable, Tuple
import numpy as np

from fast_replan.errors import NonFiniteState, ShapeMismatch
from .grid import TimeGrid, Trajectory
from .instrument import record

if TYPE_CHECKING:
    from fast_replan.ocp.controller import Controller

Dynamics = Callable[[float, np.ndarray, float, Any], np.ndarray]
JacobianX = Callable[[float, np.ndarray, float, Any], np.ndarray]
JacobianU = Callable[[float, np.ndarray, float, Any], np.ndarray]


def _control_samples(controller: Controller, grid: TimeGrid) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """节点与半步时刻的帽函数权重及对应控制量"""
    t0, t_final = controller.grid.t0, controller.grid.t_final
    tol = 1e-9 * max(1.0, abs(t_final))
    if grid.t0 < t0 - tol or grid.t_final > t_final + tol:
        raise ValueError(
            f"controller grid [{t0}, {t_final}] does not span integration grid [{grid.t0}, {grid.t_final}]"
        )
    nodes = grid.nodes
    mids = nodes[:-1] + 0.5 * grid.step
    w_nodes = controller.basis_matrix(nodes)
    w_mids = controller.basis_matrix(mids)
    coeffs = np.asarray(controller.coeffs, dtype=float)
    return w_nodes, w_mids, w_nodes @ coeffs, w_mids @ coeffs


def _check_finite(x: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(x)):
        raise NonFiniteState(f"non-finite state at t={t:.6g}: {x}")


def integrate(
    dynamics: Dynamics,
    x0: np.ndarray,
    grid: TimeGrid,
    controller: Controller,
    params: Any,
) -> Trajectory:
    """
    经典 RK4 定步长积分

    参数列表：
    - dynamics: 向量场 f(t, x, u, p)
    - x0: 初始状态
    - grid: 积分网格
    - controller: 帽函数控制器（时间网格需覆盖积分区间）
    - params: 有量纲参数（原样传给 dynamics）

    返回值：
    - Trajectory: 每个网格节点上的状态
    """
    _, _, u_nodes, u_mids = _control_samples(controller, grid)
    nodes = grid.nodes
    h = grid.step

    x = np.array(x0, dtype=float)
    _check_finite(x, nodes[0])
    states = np.empty((grid.n_nodes, x.size))
    states[0] = x

    for k in range(grid.n_steps):
        t = nodes[k]
        t_mid = t + 0.5 * h
        k1 = dynamics(t, x, u_nodes[k], params)
        k2 = dynamics(t_mid, x + 0.5 * h * k1, u_mids[k], params)
        k3 = dynamics(t_mid, x + 0.5 * h * k2, u_mids[k], params)
        k4 = dynamics(nodes[k + 1], x + h * k3, u_nodes[k + 1], params)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_finite(x, nodes[k + 1])
        states[k + 1] = x

    record("integrations")
    record("dynamics_calls", 4 * grid.n_steps)
    return Trajectory(grid=grid, states=states)


def integrate_with_sensitivities(
    dynamics: Dynamics,
    jac_x: JacobianX,
    jac_u: JacobianU,
    x0: np.ndarray,
    grid: TimeGrid,
    controller: Controller,
    params: Any,
) -> Trajectory:
    """
    状态 + 灵敏度增广系统的 RK4 积分

    灵敏度方程：d/dt (∂x/∂u_j) = (∂f/∂x)(∂x/∂u_j) + (∂f/∂u)·φ_j(t)，初值为零（x0 与 u 无关）。
    jac_u 返回 ∂f/∂u（长度 n 的向量），与帽函数权重 φ(t) 的外积即为 ∂f/∂u_j。
    """
    w_nodes, w_mids, u_nodes, u_mids = _control_samples(controller, grid)
    nodes = grid.nodes
    h = grid.step

    x = np.array(x0, dtype=float)
    _check_finite(x, nodes[0])
    n = x.size
    n_coeffs = w_nodes.shape[1]

    def stage(t: float, xs: np.ndarray, sens: np.ndarray, u: float, w: np.ndarray):
        f = dynamics(t, xs, u, params)
        a = np.asarray(jac_x(t, xs, u, params), dtype=float)
        b = np.asarray(jac_u(t, xs, u, params), dtype=float)
        if a.shape != (n, n):
            raise ShapeMismatch(f"jac_x returned shape {a.shape}, expected {(n, n)}")
        if b.shape != (n,):
            raise ShapeMismatch(f"jac_u returned shape {b.shape}, expected {(n,)}")
        return f, a @ sens + np.outer(b, w)

    sens = np.zeros((n, n_coeffs))
    states = np.empty((grid.n_nodes, n))
    all_sens = np.empty((grid.n_nodes, n, n_coeffs))
    states[0] = x
    all_sens[0] = sens

    for k in range(grid.n_steps):
        t = nodes[k]
        t_mid = t + 0.5 * h
        k1, s1 = stage(t, x, sens, u_nodes[k], w_nodes[k])
        k2, s2 = stage(t_mid, x + 0.5 * h * k1, sens + 0.5 * h * s1, u_mids[k], w_mids[k])
        k3, s3 = stage(t_mid, x + 0.5 * h * k2, sens + 0.5 * h * s2, u_mids[k], w_mids[k])
        k4, s4 = stage(nodes[k + 1], x + h * k3, sens + h * s3, u_nodes[k + 1], w_nodes[k + 1])
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        sens = sens + (h / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
        _check_finite(x, nodes[k + 1])
        if not np.all(np.isfinite(sens)):
            raise NonFiniteState(f"non-finite state sensitivity at t={nodes[k + 1]:.6g}")
        states[k + 1] = x
        all_sens[k + 1] = sens

    record("integrations")
    record("dynamics_calls", 4 * grid.n_steps)
    return Trajectory(grid=grid, states=states, sens=all_sens)

"""
两自由度航天飞机再入动力学及其解析雅可比

    ḣ = v sinγ
    φ̇ = (v/r) cosγ
    v̇ = -D/m - g sinγ
    γ̇ = L/(m v) + cosγ (v/r - g/v)

ρ(h) = ρ0·exp(-h/hr)，r = Re + h，g = μ/r²，û = u·180/π，
D = ½ c_D S ρ v²，L = ½ c_L S ρ v²。参数 p 可以是 ShuttleParams 或按 PARAMETER_NAMES 排列的数组。
"""

from typing import Tuple, Union
import math
import numpy as np

from fast_replan.errors import DegenerateVelocity, NonFiniteState
from .params import HR, MU, RE, S_REF, V_FLOOR, ShuttleParams

RAD_TO_DEG = 180.0 / math.pi

Params = Union[ShuttleParams, np.ndarray]


def _unpack(p: Params) -> Tuple[float, ...]:
    if isinstance(p, ShuttleParams):
        return p.m, p.rho0, p.a0, p.a1, p.b0, p.b1, p.b2
    m, rho0, a0, a1, b0, b1, b2 = (float(v) for v in p)
    return m, rho0, a0, a1, b0, b1, b2


def _forces(x: np.ndarray, u: float, p: Params):
    h, _, v, gamma = float(x[0]), float(x[1]), float(x[2]), float(x[3])
    if not (math.isfinite(h) and math.isfinite(v) and math.isfinite(gamma) and math.isfinite(u)):
        raise NonFiniteState(f"non-finite shuttle state {x} or control {u}")
    if v < V_FLOOR:
        raise DegenerateVelocity(f"velocity {v!r} ft/s is below the floor {V_FLOOR}")
    m, rho0, a0, a1, b0, b1, b2 = _unpack(p)
    u_deg = u * RAD_TO_DEG
    rho = rho0 * math.exp(-h / HR)
    r = RE + h
    g = MU / r ** 2
    q = 0.5 * S_REF * rho * v * v
    drag = (b0 + b1 * u_deg + b2 * u_deg * u_deg) * q
    lift = (a0 + a1 * u_deg) * q
    return h, v, gamma, m, a1, b1, b2, u_deg, r, g, q, drag, lift


def shuttle_dynamics(t: float, x: np.ndarray, u: float, p: Params) -> np.ndarray:
    try:
        h, v, gamma, m, _, _, _, _, r, g, _, drag, lift = _forces(x, u, p)
    except OverflowError as e:
        raise NonFiniteState(f"shuttle dynamics overflow at t={t}: {e}") from e
    sin_g, cos_g = math.sin(gamma), math.cos(gamma)
    out = np.array([
        v * sin_g,
        v * cos_g / r,
        -drag / m - g * sin_g,
        lift / (m * v) + cos_g * (v / r - g / v),
    ])
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(f"shuttle dynamics are not finite at t={t}, x={x}")
    return out


def shuttle_jac_x(t: float, x: np.ndarray, u: float, p: Params) -> np.ndarray:
    """4×4 的 ∂f/∂x，列顺序 (h, φ, v, γ)；没有状态依赖 φ，第二列恒为零"""
    h, v, gamma, m, _, _, _, _, r, g, _, drag, lift = _forces(x, u, p)
    sin_g, cos_g = math.sin(gamma), math.cos(gamma)
    jac = np.zeros((4, 4))
    jac[0, 2] = sin_g
    jac[0, 3] = v * cos_g

    jac[1, 0] = -v * cos_g / r ** 2
    jac[1, 2] = cos_g / r
    jac[1, 3] = -v * sin_g / r

    # ∂ρ/∂h = -ρ/hr，∂g/∂h = -2g/r
    jac[2, 0] = drag / (m * HR) + 2.0 * g * sin_g / r
    jac[2, 2] = -2.0 * drag / (m * v)
    jac[2, 3] = -g * cos_g

    jac[3, 0] = -lift / (m * v * HR) + cos_g * (-v / r ** 2 + 2.0 * g / (r * v))
    jac[3, 2] = lift / (m * v * v) + cos_g * (1.0 / r + g / (v * v))
    jac[3, 3] = -sin_g * (v / r - g / v)
    return jac


def shuttle_jac_u(t: float, x: np.ndarray, u: float, p: Params) -> np.ndarray:
    """∂f/∂u（u 为弧度，链式法则带 180/π）"""
    _, v, _, m, a1, b1, b2, u_deg, _, _, q, _, _ = _forces(x, u, p)
    return np.array([
        0.0,
        0.0,
        -q * (b1 + 2.0 * b2 * u_deg) * RAD_TO_DEG / m,
        q * a1 * RAD_TO_DEG / (m * v),
    ])

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from typing import Dict, Optional
import logging
import numpy as np

from fast_replan.errors import ConfigError, ReplanError
from fast_replan.ocp import ProblemSpec, StateBound, TerminalTarget, freeze_scales
from fast_replan.ode import TimeGrid
from .dynamics import shuttle_dynamics, shuttle_jac_u, shuttle_jac_x
from .params import (
    GAMMA_FINAL,
    GAMMA_LIMIT,
    H_FINAL,
    H_MIN,
    PARAMETER_NAMES,
    V_FINAL,
    V_MIN,
    ShuttleParams,
    initial_state,
)

logger = logging.getLogger(__name__)

# 状态分量下标
H, PHI, V, GAMMA = 0, 1, 2, 3

PENALTY_FIELDS = ("beta1", "beta2", "beta3", "beta4", "beta5", "beta6", "beta7")


class ShuttleConfig(BaseModel):
    """
    ShuttleConfig 航天飞机问题配置，包含以下字段：

    - 时间离散
        - t_final: 终止时间 T（秒）
        - n_steps: RK4 积分步数
        - n_controls: 控制区间数 N（系数个数为 N+1）
    - 参数
        - beta0: 无量纲化尺度 β0
        - nominal: 标称参数覆盖（键为 m / rho0 / a0 / a1 / b0 / b1 / b2）
    - 罚权重
        - beta1..beta3: 终端 h / v / γ 的二次罚项
        - beta4..beta7: h ≥ 0、v ≥ 1、γ ≤ 89°、γ ≥ -89° 的四次罚项
    - initial_guess: 初始控制常值（弧度）
    """
    model_config = ConfigDict(frozen=True)

    t_final: float = Field(default=4000.0, gt=0.0)
    n_steps: int = Field(default=400, ge=1)
    n_controls: int = Field(default=20, ge=1)

    beta0: float = Field(default=0.1, gt=0.0)
    nominal: Dict[str, float] = {}

    beta1: float = Field(default=100.0, ge=0.0)
    beta2: float = Field(default=100.0, ge=0.0)
    beta3: float = Field(default=100.0, ge=0.0)
    beta4: float = Field(default=10.0, ge=0.0)
    beta5: float = Field(default=10.0, ge=0.0)
    beta6: float = Field(default=10.0, ge=0.0)
    beta7: float = Field(default=10.0, ge=0.0)

    initial_guess: float = 0.3

    @field_validator("nominal")
    @classmethod
    def check_nominal(cls, value: Dict[str, float]):
        unknown = sorted(set(value) - set(PARAMETER_NAMES))
        if unknown:
            raise ValueError(f"unknown shuttle parameters: {unknown}")
        return value

    def params(self) -> ShuttleParams:
        return ShuttleParams(**self.nominal)

    def with_penalty_scale(self, factor: float) -> "ShuttleConfig":
        """β1..β7 同乘 factor 的副本（罚权重延拓用）"""
        if not factor > 0.0:
            raise ValueError(f"penalty scale must be positive, got {factor}")
        return self.model_copy(update={
            name: getattr(self, name) * factor for name in PENALTY_FIELDS
        })


def _fallback_scales() -> np.ndarray:
    x0 = initial_state()
    targets = np.array([H_FINAL, 1.0, V_FINAL, GAMMA_FINAL])
    return np.maximum(np.abs(x0), np.abs(targets))


def shuttle_problem(config: Optional[ShuttleConfig] = None, scales: Optional[np.ndarray] = None) -> ProblemSpec:
    """
    组装航天飞机最优控制问题

    代价：-φ(T)/x̄_φ + β1..β3 终端二次罚项 + β4..β7 状态约束四次罚项。
    scales 缺省时由初始猜测控制的轨迹确定（积分失败则退回到初值与目标的量级）。
    """
    config = config or ShuttleConfig()
    try:
        params = config.params()
        spec = ProblemSpec(
            dynamics=shuttle_dynamics,
            jac_x=shuttle_jac_x,
            jac_u=shuttle_jac_u,
            x0=initial_state(),
            integration_grid=TimeGrid(t_final=config.t_final, n_steps=config.n_steps),
            controller_grid=TimeGrid(t_final=config.t_final, n_steps=config.n_controls),
            nominal_params=params.as_array(),
            param_names=PARAMETER_NAMES,
            beta0=config.beta0,
            objective_index=PHI,
            terminal=[
                TerminalTarget(index=H, target=H_FINAL, weight=config.beta1),
                TerminalTarget(index=V, target=V_FINAL, weight=config.beta2),
                TerminalTarget(index=GAMMA, target=GAMMA_FINAL, weight=config.beta3),
            ],
            state_bounds=[
                StateBound(index=H, bound=H_MIN, side="lower", weight=config.beta4),
                StateBound(index=V, bound=V_MIN, side="lower", weight=config.beta5),
                StateBound(index=GAMMA, bound=GAMMA_LIMIT, side="upper", weight=config.beta6),
                StateBound(index=GAMMA, bound=-GAMMA_LIMIT, side="lower", weight=config.beta7),
            ],
            scales=_fallback_scales() if scales is None else scales,
        )
    except (ValidationError, ValueError) as e:
        raise ConfigError(f"invalid shuttle configuration: {e}") from e

    if scales is None:
        guess = np.full(spec.n_coeffs, config.initial_guess)
        try:
            trajectory = spec.simulate(guess, np.zeros(spec.n_params))
            spec = freeze_scales(spec, trajectory)
        except ReplanError as e:
            logger.warning("初始猜测轨迹积分失败，使用初值/目标量级作为归一化尺度: %s", e)
    return spec

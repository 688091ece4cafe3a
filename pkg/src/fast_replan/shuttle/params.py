from pydantic import BaseModel, ConfigDict, model_validator
from typing import ClassVar, Tuple
import math
import numpy as np

# ======= 固定常数 =======
S_REF = 2690.0              # 气动参考面积 (ft^2)
HR = 23800.0                # 大气标高 (ft)
RE = 20902900.0             # 地球半径 (ft)
MU = 0.14076539e17          # 引力常数 (ft^3/s^2)
V_FLOOR = 1e-6              # 速度下限 (ft/s)

# ======= 初值与终端目标 =======
H0 = 260000.0
PHI0 = 0.0
V0 = 25600.0
GAMMA0 = -math.pi / 180.0

H_FINAL = 80000.0
V_FINAL = 2500.0
GAMMA_FINAL = -5.0 * math.pi / 180.0

GAMMA_LIMIT = 89.0 * math.pi / 180.0
V_MIN = 1.0
H_MIN = 0.0

# 可扰动参数的顺序（θ 的分量顺序与之一致）
PARAMETER_NAMES: Tuple[str, ...] = ("m", "rho0", "a0", "a1", "b0", "b1", "b2")
STATE_NAMES: Tuple[str, ...] = ("h", "phi", "v", "gamma")


class ShuttleParams(BaseModel):
    """
    ShuttleParams 七个可扰动参数（默认取标称值）

    - m: 质量 (slug)
    - rho0: 海平面大气密度 (slug/ft^3)
    - a0, a1: 升力系数 c_L = a0 + a1·û
    - b0, b1, b2: 阻力系数 c_D = b0 + b1·û + b2·û²（û 为角度制攻角）
    """
    model_config = ConfigDict(frozen=True)

    m: float = 20300.0 / 32.173
    rho0: float = 0.002378
    a0: float = -0.20704
    a1: float = 0.029244
    b0: float = 0.07854
    b1: float = -0.61592e-2
    b2: float = 0.621408e-3

    S: ClassVar[float] = S_REF
    hr: ClassVar[float] = HR
    Re: ClassVar[float] = RE
    mu_gm: ClassVar[float] = MU

    @model_validator(mode="after")
    def check_params(self):
        if not (self.m > 0 and self.rho0 > 0):
            raise ValueError("ShuttleParams: m and rho0 must be positive")
        if not all(math.isfinite(v) for v in self.as_array()):
            raise ValueError("ShuttleParams: all parameters must be finite")
        return self

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAMETER_NAMES])

    @classmethod
    def from_array(cls, values) -> "ShuttleParams":
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.size != len(PARAMETER_NAMES):
            raise ValueError(f"ShuttleParams: expected {len(PARAMETER_NAMES)} values, got {values.size}")
        return cls(**{name: float(v) for name, v in zip(PARAMETER_NAMES, values)})

    def lift_coefficient(self, u_deg: float) -> float:
        return self.a0 + self.a1 * u_deg

    def drag_coefficient(self, u_deg: float) -> float:
        return self.b0 + self.b1 * u_deg + self.b2 * u_deg ** 2


class ShuttleState(BaseModel):
    """
    ShuttleState 航天飞机状态

    - h: 高度 (ft)
    - phi: 经度 (rad)
    - v: 速度 (ft/s)
    - gamma: 航迹角 (rad)
    """
    model_config = ConfigDict(frozen=True)

    h: float
    phi: float
    v: float
    gamma: float

    @model_validator(mode="after")
    def check_state(self):
        if not all(math.isfinite(v) for v in (self.h, self.phi, self.v, self.gamma)):
            raise ValueError("ShuttleState: all components must be finite")
        if not self.v > 0:
            raise ValueError("ShuttleState: velocity must be positive")
        return self

    @property
    def phi_deg(self) -> float:
        return math.degrees(self.phi)

    def as_array(self) -> np.ndarray:
        return np.array([self.h, self.phi, self.v, self.gamma])

    @classmethod
    def from_array(cls, x) -> "ShuttleState":
        h, phi, v, gamma = (float(c) for c in np.asarray(x, dtype=float).reshape(-1))
        return cls(h=h, phi=phi, v=v, gamma=gamma)


def initial_state() -> np.ndarray:
    return np.array([H0, PHI0, V0, GAMMA0])

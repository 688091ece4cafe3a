from pydantic import BaseModel, ConfigDict, field_serializer, field_validator, model_validator
import numpy as np

from fast_replan.errors import ShapeMismatch


def dimensionalize_array(theta: np.ndarray, nominal: np.ndarray, beta0: float) -> np.ndarray:
    """p_i = (1 + β0·θ_i)·p̄_i；不检查 θ 是否在 [-1, 1] 内（有限差分步会略微越界）"""
    return (1.0 + beta0 * np.asarray(theta, dtype=float)) * np.asarray(nominal, dtype=float)


def nondimensionalize(p, nominal, beta0: float) -> np.ndarray:
    """dimensionalize 的逆映射：θ_i = (p_i / p̄_i - 1) / β0"""
    if beta0 <= 0:
        raise ValueError("nondimensionalize: beta0 must be > 0")
    p = np.asarray(p, dtype=float)
    nominal = np.asarray(nominal, dtype=float)
    if p.shape != nominal.shape:
        raise ShapeMismatch(f"nondimensionalize: shapes {p.shape} and {nominal.shape} differ")
    return (p / nominal - 1.0) / beta0


class ThetaVector(BaseModel):
    """
    ThetaVector 无量纲参数向量，包含以下字段：

    - theta: θ_1..θ_P，要求落在 [-1, 1]^P
    - nominal: 标称参数 p̄_1..p̄_P（问题单位）
    - beta0: 缩放系数 β0 > 0
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    theta: np.ndarray
    nominal: np.ndarray
    beta0: float = 0.1

    @field_validator("theta", "nominal", mode="before")
    @classmethod
    def _as_vector(cls, value):
        return np.array(value, dtype=float).reshape(-1)

    @field_serializer("theta", "nominal")
    def _dump_vector(self, value: np.ndarray):
        return value.tolist()

    @model_validator(mode="after")
    def check_theta(self):
        if self.beta0 <= 0:
            raise ValueError("ThetaVector: beta0 must be > 0")
        if self.theta.shape != self.nominal.shape:
            raise ShapeMismatch(
                f"ThetaVector: theta has {self.theta.size} entries, nominal has {self.nominal.size}"
            )
        if np.any(np.abs(self.theta) > 1.0):
            raise ValueError(f"ThetaVector: theta must lie in [-1, 1], got {self.theta}")
        return self

    @classmethod
    def zeros(cls, nominal, beta0: float = 0.1) -> "ThetaVector":
        nominal = np.array(nominal, dtype=float).reshape(-1)
        return cls(theta=np.zeros_like(nominal), nominal=nominal, beta0=beta0)

    @property
    def size(self) -> int:
        return self.theta.size

    def with_theta(self, theta) -> "ThetaVector":
        return ThetaVector(theta=theta, nominal=self.nominal, beta0=self.beta0)


def dimensionalize(theta: ThetaVector) -> np.ndarray:
    return dimensionalize_array(theta.theta, theta.nominal, theta.beta0)

"""
实验配置

配置文件是 dotenv 格式的键值文件，嵌套字段用 "__" 连接，键名大小写不敏感：

    PROBLEM__T_FINAL=4000
    OPTIMIZER__GRAD_TOL=1e-6
    QMC_SAMPLES=200
"""

from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Union
import logging

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from fast_replan.errors import ConfigError
from fast_replan.hdsa import HdsaSettings
from fast_replan.optimizer import OptimizerConfig
from fast_replan.shuttle import ShuttleConfig

logger = logging.getLogger(__name__)

# 航天飞机求解时单步控制改变量上限（弧度）
DEFAULT_MAX_STEP = 0.1


class ExperimentConfig(BaseModel):
    """
    ExperimentConfig 流水线配置，包含以下字段：

    - 问题与求解器
        - problem: 航天飞机问题配置（含 β0）
        - optimizer: 优化器配置
        - hdsa: HDSA 配置
    - 标称求解
        - penalty_ramp: 罚权重延拓的倍数序列，依次热启动求解（逗号分隔）
        - max_terminal_residual: 标称解各终端相对残差的上限
    - 筛选
        - qmc_samples: QMC 样本数 M
        - screening_threshold: Sobol 上界阈值
        - max_failed_fraction: 允许失败的样本比例
    - 网格与近似
        - grid_nodes: 降维网格每维节点数
        - full_grid_nodes: 全参数网格每维节点数（full 模式）
        - homotopy_steps: 同伦步数 M_h
    - 扫描
        - sweep_size: 随机扰动个数
        - seed: 随机种子
        - t_change: 参数突变时刻（秒）
        - mode: "reduced"（只扰动重要参数）或 "full"（扰动全部参数）
        - histogram_bins: 直方图分箱数
        - norm_threshold: 误差范数阈值（同时按绝对值和相对 ‖u*‖ 统计）
    - 运行
        - output_dir: 输出目录
        - grid_path: 降维网格文件路径（缺省为 output_dir/grid_reduced.rjgd）
        - workers: 并发数
        - require_converged_nominal: 标称求解未收敛或终端残差超限时是否中止
    """
    model_config = ConfigDict(frozen=True)

    problem: ShuttleConfig = Field(default_factory=ShuttleConfig)
    optimizer: OptimizerConfig = Field(default_factory=lambda: OptimizerConfig(max_step=DEFAULT_MAX_STEP))
    hdsa: HdsaSettings = Field(default_factory=HdsaSettings)

    penalty_ramp: Tuple[float, ...] = (0.01, 0.1, 1.0)
    max_terminal_residual: float = Field(default=0.02, gt=0.0)

    qmc_samples: int = Field(default=200, ge=2)
    screening_threshold: float = Field(default=0.1, ge=0.0)
    max_failed_fraction: float = Field(default=0.2, ge=0.0, le=1.0)

    grid_nodes: int = Field(default=5, ge=2)
    full_grid_nodes: int = Field(default=2, ge=2)
    homotopy_steps: int = Field(default=16, ge=1)

    sweep_size: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0)
    t_change: float = Field(default=2000.0, ge=0.0)
    mode: Literal["reduced", "full"] = "reduced"
    histogram_bins: int = Field(default=20, ge=1)
    norm_threshold: float = Field(default=0.2, gt=0.0)

    output_dir: Path = Path("runs/shuttle")
    grid_path: Optional[Path] = None
    workers: int = Field(default=1, ge=1)
    require_converged_nominal: bool = True

    @field_validator("penalty_ramp", mode="before")
    @classmethod
    def _split_ramp(cls, value):
        if isinstance(value, str):
            return tuple(float(part) for part in value.split(",") if part.strip())
        return value

    @field_validator("penalty_ramp")
    @classmethod
    def check_ramp(cls, value: Tuple[float, ...]):
        if not value:
            raise ValueError("penalty_ramp must not be empty")
        if any(not 0.0 < v <= 1.0 for v in value):
            raise ValueError(f"penalty_ramp factors must lie in (0, 1], got {value}")
        if any(b < a for a, b in zip(value, value[1:])):
            raise ValueError(f"penalty_ramp must be nondecreasing, got {value}")
        return value

    @model_validator(mode="after")
    def check_t_change(self):
        if self.t_change > self.problem.t_final:
            raise ValueError(f"t_change {self.t_change} must lie in [0, T={self.problem.t_final}]")
        return self

    @property
    def reduced_grid_path(self) -> Path:
        return self.grid_path if self.grid_path is not None else self.output_dir / "grid_reduced.rjgd"

    @property
    def full_grid_path(self) -> Path:
        return self.output_dir / "grid_full.rjgd"

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """覆盖顶层字段并重新校验（用于命令行参数）"""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return validate_config(data)


def unflatten(values: Dict[str, Optional[str]]) -> Dict[str, Any]:
    """把 A__B__C=value 展开为嵌套字典，键名统一转小写"""
    nested: Dict[str, Any] = {}
    for key, value in values.items():
        if value is None:
            continue
        parts = [p.lower() for p in key.split("__") if p]
        node = nested
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"config key {key} conflicts with a scalar value")
            node = child
        node[parts[-1]] = value
    return nested


def validate_config(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid experiment configuration: {e}") from e


def load_config(path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """
    读取 dotenv 配置文件；path 为 None 时返回默认配置

    返回值：
    - ExperimentConfig；文件缺失或校验失败时抛出 ConfigError
    """
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = dotenv_values(path)
    logger.debug("读取配置文件 %s: %d 个键", path, len(values))
    return validate_config(unflatten(values))

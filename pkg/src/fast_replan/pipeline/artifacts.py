"""
流水线产物

每个阶段把结果写到 output_dir 下的固定文件名，后续阶段从文件重新加载，
因此各子命令可以独立运行。
"""

from pathlib import Path
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator
from typing import Dict, Optional
import logging
import numpy as np

from fast_replan.approx import JacobianGrid, load_grid
from fast_replan.errors import ConfigError
from fast_replan.gsa import ScreeningReport
from fast_replan.hdsa import SensitivityMatrix
from fast_replan.ocp import Controller, ProblemSpec
from fast_replan.optimizer import OptimReport
from fast_replan.shuttle import shuttle_problem
from .config import ExperimentConfig
from .events import new_run_id

logger = logging.getLogger(__name__)

NOMINAL_FILE = "nominal.json"
SCREENING_FILE = "screening.json"
SCREENING_LOG_FILE = "screening_log.jsonl"
PRECOMPUTE_LOG_FILE = "precompute_log.jsonl"
RECORDS_FILE = "records.csv"
SUMMARY_FILE = "summary.json"
HISTOGRAM_FILE = "histogram.json"
TIMINGS_CSV_FILE = "timings.csv"
TIMINGS_JSON_FILE = "timings.json"
REPORT_FILE = "report.md"


class NominalSolution(BaseModel):
    """
    NominalSolution 标称解，包含以下字段：

    - controller: θ = 0 处的最优控制 u*
    - report: 最后一次（冻结尺度后的热启动）求解的优化报告
    - scales: 冻结的归一化尺度 x̄
    - cost: J(u*)
    - initial_cost: 初始猜测控制在同一尺度下的代价
    - terminal_residuals: 终端相对残差，键为状态名
    - sensitivity: θ = 0 处全部 P 列的灵敏度矩阵（线性近似使用）
    - run_id: 运行标识，后续阶段的事件日志沿用
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True, ser_json_inf_nan="constants")

    controller: Controller
    report: OptimReport
    scales: np.ndarray
    cost: float
    initial_cost: float
    terminal_residuals: Dict[str, float]
    sensitivity: SensitivityMatrix
    run_id: str = Field(default_factory=new_run_id)

    @field_validator("scales", mode="before")
    @classmethod
    def _as_vector(cls, value):
        return np.array(value, dtype=float).reshape(-1)

    @field_serializer("scales")
    def _dump_scales(self, value: np.ndarray):
        return value.tolist()

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Path) -> "NominalSolution":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"nominal solution not found at {path}; run the nominal stage first")
        return cls.model_validate_json(path.read_text(encoding="utf-8"))


def load_screening(path: Path) -> ScreeningReport:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"screening report not found at {path}; run the screen stage first")
    return ScreeningReport.from_json(path.read_text(encoding="utf-8"))


class ReplanContext(BaseModel):
    """
    ReplanContext 模拟与扫描所需的全部已计算产物

    - cfg: 实验配置
    - spec: 使用冻结尺度的问题定义
    - nominal: 标称解
    - screening: 筛选结果
    - reduced_grid: 重要参数网格
    - full_grid: 全参数网格（仅 full 模式）
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    cfg: ExperimentConfig
    spec: ProblemSpec
    nominal: NominalSolution
    screening: ScreeningReport
    reduced_grid: JacobianGrid
    full_grid: Optional[JacobianGrid] = None

    @property
    def important(self):
        return list(self.reduced_grid.dims)

    @property
    def theta0(self) -> np.ndarray:
        return np.zeros(self.spec.n_params)

    @classmethod
    def load(cls, cfg: ExperimentConfig) -> "ReplanContext":
        """从 output_dir 加载标称解、筛选结果和网格"""
        out = cfg.output_dir
        nominal = NominalSolution.load(out / NOMINAL_FILE)
        screening = load_screening(out / SCREENING_FILE)
        spec = shuttle_problem(cfg.problem, scales=nominal.scales)
        reduced = load_grid(cfg.reduced_grid_path)
        full = None
        if cfg.mode == "full":
            full = load_grid(cfg.full_grid_path)
        logger.info(
            "已加载产物: 重要参数=%s, 降维网格节点=%d%s",
            screening.important_names,
            reduced.n_nodes,
            f", 全参数网格节点={full.n_nodes}" if full is not None else "",
        )
        return cls(cfg=cfg, spec=spec, nominal=nominal, screening=screening, reduced_grid=reduced, full_grid=full)

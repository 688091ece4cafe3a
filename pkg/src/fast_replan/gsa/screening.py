from pydantic import BaseModel, ConfigDict, field_serializer, field_validator, model_validator
from typing import List, Optional, Sequence
import numpy as np

from fast_replan.errors import EmptyImportantSet
from .dgsm import sobol_upper_bound


class ScreeningReport(BaseModel):
    """
    ScreeningReport 参数筛选结果，包含以下字段：

    - parameter_names: 参数名（按参数下标）
    - dgsm: 每个参数的 DGSM N_j
    - bounds: Sobol 总指数上界
    - trace_gamma: Tr(Γ)
    - important: 上界超过阈值的参数下标（升序）
    - ordering: 按上界降序排列的全部参数下标
    - threshold: 筛选阈值
    - samples_used / samples_requested: 实际参与计算的 / 计划的 QMC 样本数
    - a, b: 均匀分布区间
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True, ser_json_inf_nan="constants")

    parameter_names: List[str]
    dgsm: np.ndarray
    bounds: np.ndarray
    trace_gamma: float
    important: List[int]
    ordering: List[int]
    threshold: float
    samples_used: int
    samples_requested: Optional[int] = None
    a: float = -1.0
    b: float = 1.0

    @field_validator("dgsm", "bounds", mode="before")
    @classmethod
    def _as_vector(cls, value):
        return np.array(value, dtype=float).reshape(-1)

    @field_serializer("dgsm", "bounds")
    def _dump_vector(self, value: np.ndarray):
        return value.tolist()

    @model_validator(mode="after")
    def check_report(self):
        p = len(self.parameter_names)
        if self.dgsm.size != p or self.bounds.size != p:
            raise ValueError("ScreeningReport: dgsm/bounds length must match parameter_names")
        if np.any(self.dgsm < 0) or np.any(self.bounds < 0):
            raise ValueError("ScreeningReport: dgsm and bounds must be nonnegative")
        expected = [j for j in range(p) if self.bounds[j] > self.threshold]
        if list(self.important) != expected:
            raise ValueError("ScreeningReport: important must equal {j : bounds_j > threshold}")
        return self

    @property
    def important_names(self) -> List[str]:
        return [self.parameter_names[j] for j in self.important]

    def require_important(self) -> List[int]:
        """返回重要参数下标；为空时抛出 EmptyImportantSet"""
        if not self.important:
            raise EmptyImportantSet(
                f"no parameter has a Sobol bound above threshold {self.threshold}"
            )
        return list(self.important)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ScreeningReport":
        return cls.model_validate_json(text)

    def table(self) -> str:
        """按上界降序输出的文本表"""
        lines = [
            f"{'parameter':<10} {'DGSM':>12} {'Sobol bound':>12}  important",
            "-" * 48,
        ]
        for j in self.ordering:
            flag = "yes" if j in self.important else ""
            lines.append(f"{self.parameter_names[j]:<10} {self.dgsm[j]:>12.4e} {self.bounds[j]:>12.4e}  {flag}")
        lines.append(f"Tr(Gamma) = {self.trace_gamma:.6e}, M = {self.samples_used}, threshold = {self.threshold:g}")
        return "\n".join(lines)


def screen(
    dgsm: np.ndarray,
    trace_gamma: float,
    threshold: float = 0.1,
    parameter_names: Optional[Sequence[str]] = None,
    samples_used: int = 0,
    samples_requested: Optional[int] = None,
    a: float = -1.0,
    b: float = 1.0,
) -> ScreeningReport:
    """
    计算 Sobol 上界并按阈值筛选重要参数

    参数列表：
    - dgsm: DGSM 估计
    - trace_gamma: Tr(Γ)
    - threshold: 上界阈值（> threshold 即为重要）
    - parameter_names: 参数名，缺省为 theta0..theta{P-1}
    """
    dgsm = np.asarray(dgsm, dtype=float)
    bounds = sobol_upper_bound(dgsm, trace_gamma, a, b)
    names = list(parameter_names) if parameter_names is not None else [f"theta{j}" for j in range(dgsm.size)]
    important = [j for j in range(dgsm.size) if bounds[j] > threshold]
    # 稳定排序：上界相同的参数保持下标顺序
    ordering = [int(j) for j in np.argsort(-bounds, kind="stable")]
    return ScreeningReport(
        parameter_names=names,
        dgsm=dgsm,
        bounds=bounds,
        trace_gamma=float(trace_gamma),
        important=important,
        ordering=ordering,
        threshold=float(threshold),
        samples_used=samples_used,
        samples_requested=samples_requested,
        a=a,
        b=b,
    )

"""
随机扰动扫描与统计

每个扰动使用从种子派生的独立随机子流，结果按扰动序号排列，
因此 records.csv / summary.json / histogram.json 与并发度无关、逐字节可复现。
耗时与求值次数写入单独的 timings.csv / timings.json。
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence
import json
import logging
import math
import numpy as np
import pandas as pd

from fast_replan.runtime import run_jobs
from .artifacts import (
    HISTOGRAM_FILE,
    RECORDS_FILE,
    SUMMARY_FILE,
    TIMINGS_CSV_FILE,
    TIMINGS_JSON_FILE,
    ReplanContext,
)
from .config import ExperimentConfig
from .simulate import NOMINAL_LABEL, ReplanMethod, SweepRecord, labels_for, simulate_change

logger = logging.getLogger(__name__)


def draw_thetas(seed: int, count: int, n_params: int, active: Sequence[int]) -> np.ndarray:
    """在 active 分量上均匀采样 [-1, 1]，其余分量为 0；第 i 行只依赖 (seed, i)"""
    thetas = np.zeros((count, n_params))
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(count)):
        rng = np.random.default_rng(child)
        thetas[i, list(active)] = rng.uniform(-1.0, 1.0, size=len(active))
    return thetas


def _clean(value: Any) -> Any:
    """NaN / inf 写成 null，numpy 标量转成 Python 标量"""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def dump_json(data: Dict[str, Any], path: Path) -> Path:
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _stats(values: pd.Series) -> Dict[str, Any]:
    finite = values[np.isfinite(values.astype(float))]
    return {
        "mean": float(finite.mean()) if len(finite) else float("nan"),
        "median": float(finite.median()) if len(finite) else float("nan"),
        "count": int(len(finite)),
    }


def _frame(records: Sequence[SweepRecord], field: str) -> pd.DataFrame:
    return pd.DataFrame([getattr(r, field) for r in records], index=[r.draw for r in records]).sort_index()


def summarize(
    records: Sequence[SweepRecord],
    labels: Sequence[str],
    nominal_norm: float,
    norm_threshold: float = 0.2,
) -> Dict[str, Any]:
    """
    按方法汇总代价、误差范数和失败次数

    返回值：
    - 字典，包含 costs / cost_differences / norms / below_threshold / failures /
      unconverged / dominance_violations
    """
    costs = _frame(records, "costs")
    norms = _frame(records, "norms")
    spaces = sorted({label.split("_")[1] for label in labels})
    summary: Dict[str, Any] = {
        "draws": len(records),
        "nominal_norm": nominal_norm,
        "norm_threshold": norm_threshold,
        "costs": {label: _stats(costs[label]) for label in costs.columns},
        "norms": {pair: _stats(norms[pair]) for pair in norms.columns},
        "failures": {label: int(sum(label in r.errors for r in records)) for label in [NOMINAL_LABEL, *labels]},
        "unconverged": {
            label: int(sum(not r.converged.get(label, False) for r in records))
            for label in labels if label.startswith(ReplanMethod.REOPT.value)
        },
        "dominance_violations": int(sum(not r.dominance_ok for r in records)),
    }

    differences: Dict[str, Any] = {}
    below: Dict[str, Any] = {}
    for space in spaces:
        opt = f"{ReplanMethod.REOPT.value}_{space}"
        if opt not in costs.columns:
            continue
        for method in (ReplanMethod.LINEAR, ReplanMethod.INTERPOLATED, None):
            label = NOMINAL_LABEL if method is None else f"{method.value}_{space}"
            if label in costs.columns:
                differences[f"{label}-{opt}"] = _stats(costs[label] - costs[opt])
        pair = f"{opt}:{ReplanMethod.INTERPOLATED.value}_{space}"
        if pair in norms.columns:
            values = norms[pair].astype(float)
            finite = values[np.isfinite(values)]
            below[pair] = {
                "absolute": float((finite < norm_threshold).mean()) if len(finite) else float("nan"),
                "relative": float((finite < norm_threshold * nominal_norm).mean()) if len(finite) else float("nan"),
            }
    summary["cost_differences"] = differences
    summary["below_threshold"] = below
    return summary


def histograms(records: Sequence[SweepRecord], labels: Sequence[str], bins: int = 20) -> Dict[str, Any]:
    """代价差 J(近似) - J(重新优化) 与误差范数 ‖u_opt - u_近似‖ 的直方图"""
    costs = _frame(records, "costs")
    norms = _frame(records, "norms")
    out: Dict[str, Any] = {"cost_difference": {}, "error_norm": {}}

    def hist(values: pd.Series) -> Dict[str, Any]:
        values = values.astype(float).to_numpy()
        counts, edges = np.histogram(values[np.isfinite(values)], bins=bins)
        return {"counts": counts.tolist(), "edges": edges.tolist()}

    for space in sorted({label.split("_")[1] for label in labels}):
        opt = f"{ReplanMethod.REOPT.value}_{space}"
        for method in (ReplanMethod.LINEAR, ReplanMethod.INTERPOLATED):
            label = f"{method.value}_{space}"
            if opt in costs.columns and label in costs.columns:
                out["cost_difference"][f"{label}-{opt}"] = hist(costs[label] - costs[opt])
            pair = f"{opt}:{label}"
            if pair in norms.columns:
                out["error_norm"][pair] = hist(norms[pair])
    return out


def timings(records: Sequence[SweepRecord], labels: Sequence[str]) -> Dict[str, Any]:
    """平均耗时、平均求值次数以及 重新优化/插值同伦 的耗时比"""
    times = _frame(records, "wall_times")
    evaluations = _frame(records, "evaluations")
    out: Dict[str, Any] = {
        "wall_time": {label: _stats(times[label]) for label in times.columns},
        "evaluations": {label: _stats(evaluations[label]) for label in evaluations.columns},
        "speedup": {},
    }
    for space in sorted({label.split("_")[1] for label in labels}):
        opt, fast = f"{ReplanMethod.REOPT.value}_{space}", f"{ReplanMethod.INTERPOLATED.value}_{space}"
        if opt in times.columns and fast in times.columns:
            out["speedup"][f"{opt}/{fast}"] = float(times[opt].mean() / times[fast].mean())
    return out


def run_sweep(cfg: ExperimentConfig, ctx: Optional[ReplanContext] = None) -> Dict[str, Any]:
    """
    运行 sweep_size 次随机突变并写出 records.csv、summary.json、histogram.json、timings.*

    reduced 模式只扰动重要参数，full 模式扰动全部参数。
    """
    ctx = ctx or ReplanContext.load(cfg)
    spec = ctx.spec
    active = ctx.important if cfg.mode == "reduced" else list(range(spec.n_params))
    thetas = draw_thetas(cfg.seed, cfg.sweep_size, spec.n_params, active)
    labels = labels_for(cfg.mode)
    logger.info("开始扫描: %d 个扰动, 模式=%s, 扰动参数=%s", cfg.sweep_size, cfg.mode, [spec.param_names[j] for j in active])

    records: List[SweepRecord] = run_jobs(
        lambda i: simulate_change(ctx, thetas[i], draw=i), range(cfg.sweep_size), cfg.workers
    )
    records = sorted(records, key=lambda r: r.draw)

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    pd.DataFrame([r.to_row(spec.param_names) for r in records]).to_csv(out / RECORDS_FILE, index=False)
    pd.DataFrame([r.timing_row() for r in records]).to_csv(out / TIMINGS_CSV_FILE, index=False)

    nominal_norm = float(np.linalg.norm(ctx.nominal.controller.coeffs))
    summary = summarize(records, labels, nominal_norm, cfg.norm_threshold)
    summary.update({"mode": cfg.mode, "seed": cfg.seed, "t_change": cfg.t_change, "homotopy_steps": cfg.homotopy_steps})
    dump_json(summary, out / SUMMARY_FILE)
    dump_json(histograms(records, labels, cfg.histogram_bins), out / HISTOGRAM_FILE)
    dump_json(timings(records, labels), out / TIMINGS_JSON_FILE)
    logger.info(
        "扫描完成: 失败=%s, 优势性违反=%d",
        summary["failures"], summary["dominance_violations"],
    )
    return summary

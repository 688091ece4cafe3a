from typing import Any, Dict, List, Optional
import json
import logging

from .artifacts import (
    NOMINAL_FILE,
    REPORT_FILE,
    SCREENING_FILE,
    SUMMARY_FILE,
    TIMINGS_JSON_FILE,
    NominalSolution,
    load_screening,
)
from .config import ExperimentConfig

logger = logging.getLogger(__name__)


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.4e}"


def _table(title: str, header: List[str], rows: List[List[str]]) -> List[str]:
    lines = [f"## {title}", "", "| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return lines + [""]


def _read_json(path) -> Optional[Dict[str, Any]]:
    if not path.is_file():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def render_report(
    screening_table: Optional[str],
    nominal: Optional[NominalSolution],
    summary: Optional[Dict[str, Any]],
    timings: Optional[Dict[str, Any]],
) -> str:
    lines = ["# Mid-course replanning report", ""]
    if nominal is not None:
        lines += _table(
            "Nominal solution",
            ["quantity", "value"],
            [
                ["J(u*)", _fmt(nominal.cost)],
                ["J(initial guess)", _fmt(nominal.initial_cost)],
                ["status", nominal.report.status],
                ["iterations", str(nominal.report.iterations)],
            ] + [[f"terminal residual {k}", _fmt(v)] for k, v in nominal.terminal_residuals.items()],
        )
    if screening_table is not None:
        lines += ["## Parameter screening", "", "```", screening_table, "```", ""]
    if summary is not None:
        lines.append(f"Draws: {summary['draws']}, mode: {summary.get('mode')}, seed: {summary.get('seed')}")
        lines.append("")
        lines += _table(
            "Controller error norms",
            ["pair", "mean", "median"],
            [[k, _fmt(v["mean"]), _fmt(v["median"])] for k, v in summary["norms"].items()],
        )
        lines += _table(
            "Realized costs",
            ["method", "mean", "median", "failures"],
            [
                [k, _fmt(v["mean"]), _fmt(v["median"]), str(summary["failures"].get(k, 0))]
                for k, v in summary["costs"].items()
            ],
        )
        lines += _table(
            "Cost differences",
            ["difference", "mean", "median"],
            [[k, _fmt(v["mean"]), _fmt(v["median"])] for k, v in summary["cost_differences"].items()],
        )
        threshold = summary["norm_threshold"]
        lines += _table(
            f"P(error norm < {threshold:g})",
            ["pair", "absolute", f"relative to |u*| = {summary['nominal_norm']:.3f}"],
            [[k, _fmt(v["absolute"]), _fmt(v["relative"])] for k, v in summary["below_threshold"].items()],
        )
        lines.append(f"Unconverged reoptimizations: {summary['unconverged']}")
        lines.append(f"Dominance violations: {summary['dominance_violations']}")
        lines.append("")
    if timings is not None:
        lines += _table(
            "Mean replanning times",
            ["method", "mean (s)", "median (s)", "mean evaluations"],
            [
                [k, _fmt(v["mean"]), _fmt(v["median"]), _fmt(timings["evaluations"].get(k, {}).get("mean"))]
                for k, v in timings["wall_time"].items()
            ],
        )
        for ratio, value in timings["speedup"].items():
            lines.append(f"Speedup {ratio}: {_fmt(value)}")
        lines.append("")
    return "\n".join(lines)


def run_report(cfg: ExperimentConfig) -> str:
    """把筛选表和扫描统计汇总为 report.md，并返回其内容"""
    out = cfg.output_dir
    nominal = NominalSolution.load(out / NOMINAL_FILE) if (out / NOMINAL_FILE).is_file() else None
    screening = load_screening(out / SCREENING_FILE).table() if (out / SCREENING_FILE).is_file() else None
    text = render_report(screening, nominal, _read_json(out / SUMMARY_FILE), _read_json(out / TIMINGS_JSON_FILE))
    out.mkdir(parents=True, exist_ok=True)
    (out / REPORT_FILE).write_text(text, encoding="utf-8")
    logger.info("报告已写入 %s", out / REPORT_FILE)
    return text

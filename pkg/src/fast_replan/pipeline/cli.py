"""
命令行入口：python -m fast_replan <subcommand> [options]

子命令依次为 nominal → screen → precompute → simulate / sweep → report，
每个子命令从 --out 目录读取前序阶段的产物。
"""

from pathlib import Path
from typing import Callable, Dict, List, Optional
import argparse
import json
import logging
import sys

import numpy as np

from fast_replan.errors import ConfigError, ReplanError
from .artifacts import ReplanContext
from .config import ExperimentConfig, load_config
from .report import run_report
from .simulate import simulate_change
from .stage import PipelineStage
from .stages import run_nominal, run_precompute, run_screening
from .sweep import run_sweep

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fast_replan",
        description="Mid-course replanning of the shuttle reentry problem with interpolated sensitivities.",
    )
    parser.add_argument("stage", choices=[s.value for s in PipelineStage], help="Pipeline stage to run.")
    parser.add_argument("--config", type=Path, default=None, help="dotenv config file (KEY__SUBKEY=value).")
    parser.add_argument("--grid", type=Path, default=None, help="Reduced grid file path.")
    parser.add_argument("--seed", type=int, default=None, help="Random seed for the sweep.")
    parser.add_argument("--samples", type=int, default=None, help="QMC samples (screen) or sweep size (sweep).")
    parser.add_argument("--mode", choices=["full", "reduced"], default=None, help="Perturb all or only important parameters.")
    parser.add_argument("--out", type=Path, default=None, help="Output directory.")
    parser.add_argument("--theta", type=str, default=None, help="Comma-separated theta1 for simulate (length P).")
    parser.add_argument("--workers", type=int, default=None, help="Concurrent jobs.")
    parser.add_argument("--log-level", default="INFO", help="Logging level (default INFO).")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config)
    overrides = {
        "grid_path": args.grid,
        "seed": args.seed,
        "mode": args.mode,
        "output_dir": args.out,
        "workers": args.workers,
    }
    if args.samples is not None:
        key = "qmc_samples" if args.stage == PipelineStage.SCREEN.value else "sweep_size"
        overrides[key] = args.samples
    return cfg.with_overrides(**overrides)


def parse_theta(text: Optional[str], n_params: int) -> np.ndarray:
    if text is None:
        return np.zeros(n_params)
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"--theta must be comma-separated numbers: {e}") from e
    if len(values) != n_params:
        raise ConfigError(f"--theta needs {n_params} values, got {len(values)}")
    return np.array(values)


# ===== 子命令 =====

def _nominal(cfg: ExperimentConfig, args: argparse.Namespace) -> None:
    nominal = run_nominal(cfg)
    print(json.dumps({"cost": nominal.cost, "status": nominal.report.status, "terminal_residuals": nominal.terminal_residuals}))


def _screen(cfg: ExperimentConfig, args: argparse.Namespace) -> None:
    print(run_screening(cfg).table())


def _precompute(cfg: ExperimentConfig, args: argparse.Namespace) -> None:
    reduced, full = run_precompute(cfg)
    grids = [reduced] + ([full] if full is not None else [])
    print(json.dumps([{"dims": g.dims, "nodes": g.n_nodes} for g in grids]))


def _simulate(cfg: ExperimentConfig, args: argparse.Namespace) -> None:
    ctx = ReplanContext.load(cfg)
    record = simulate_change(ctx, parse_theta(args.theta, ctx.spec.n_params))
    print(record.model_dump_json(indent=2, exclude={"coeffs"}))


def _sweep(cfg: ExperimentConfig, args: argparse.Namespace) -> None:
    summary = run_sweep(cfg)
    print(json.dumps({"draws": summary["draws"], "failures": summary["failures"], "below_threshold": summary["below_threshold"]}))


def _report(cfg: ExperimentConfig, args: argparse.Namespace) -> None:
    print(run_report(cfg))


COMMANDS: Dict[str, Callable[[ExperimentConfig, argparse.Namespace], None]] = {
    PipelineStage.NOMINAL.value: _nominal,
    PipelineStage.SCREEN.value: _screen,
    PipelineStage.PRECOMPUTE.value: _precompute,
    PipelineStage.SIMULATE.value: _simulate,
    PipelineStage.SWEEP.value: _sweep,
    PipelineStage.REPORT.value: _report,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    返回值：
    - 退出码：成功 0，配置错误 2，其他错误 1；错误以 JSON 写到 stderr
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.stage](cfg, args)
    except ConfigError as e:
        print(json.dumps(e.to_dict()), file=sys.stderr)
        return 2
    except ReplanError as e:
        logger.error("阶段 %s 中止", args.stage, exc_info=True)
        print(json.dumps(e.to_dict()), file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        logger.error("阶段 %s 中止", args.stage, exc_info=True)
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1
    return 0

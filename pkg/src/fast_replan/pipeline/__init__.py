from .stage import PipelineStage
from .config import ExperimentConfig, load_config, unflatten
from .events import (
	BaseEvent,
	EventLog,
	EventMetadata,
	NodeFailedEvent,
	NodeSolvedEvent,
	SampleSkippedEvent,
	StageEvent,
)
from .artifacts import NominalSolution, ReplanContext
from .stages import run_nominal, run_precompute, run_screening
from .simulate import ReplanMethod, SweepRecord, fly, labels_for, simulate_change
from .sweep import draw_thetas, histograms, run_sweep, summarize, timings
from .report import render_report, run_report
from .cli import build_parser, main

__all__ = [
	# 配置
	"PipelineStage",
	"ExperimentConfig",
	"load_config",
	"unflatten",
	# 事件
	"BaseEvent",
	"EventLog",
	"EventMetadata",
	"NodeFailedEvent",
	"NodeSolvedEvent",
	"SampleSkippedEvent",
	"StageEvent",
	# 产物
	"NominalSolution",
	"ReplanContext",
	# 阶段
	"run_nominal",
	"run_precompute",
	"run_screening",
	"ReplanMethod",
	"SweepRecord",
	"fly",
	"labels_for",
	"simulate_change",
	"draw_thetas",
	"histograms",
	"run_sweep",
	"summarize",
	"timings",
	"render_report",
	"run_report",
	# 命令行
	"build_parser",
	"main",
]

from enum import Enum


class PipelineStage(Enum):
    NOMINAL = "nominal"
    SCREEN = "screen"
    PRECOMPUTE = "precompute"
    SIMULATE = "simulate"
    SWEEP = "sweep"
    REPORT = "report"

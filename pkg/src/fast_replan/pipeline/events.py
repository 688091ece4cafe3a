from pydantic import BaseModel, Field
from pathlib import Path
from typing import List, Literal, Optional
import itertools
import threading
import time
import uuid

from fast_replan.approx import NodeOutcome
from .stage import PipelineStage


def new_run_id() -> str:
    return f"run_{uuid.uuid4().hex[:12]}"


class EventMetadata(BaseModel):
    """
    EventMetadata 事件元数据

    - run_id: 所属运行（同一个标称解派生出的各阶段共用）
    - stage: 产生事件的流水线阶段
    - sequence: 在本日志文件中的序号，从 0 开始
    - timestamp: 毫秒时间戳
    """
    run_id: str

    stage: PipelineStage

    sequence: int = Field(ge=0)

    timestamp: int = Field(default_factory=lambda: int(time.time() * 1000))


class BaseEvent(BaseModel):
    """BaseEvent 事件基类，子类用 data 声明各自的负载类型"""
    id: str = Field(default_factory=lambda: f"event_{uuid.uuid4().hex[:16]}")

    type: str

    metadata: EventMetadata


class StageEvent(BaseEvent):
    """StageEvent 阶段开始/结束事件"""
    type: Literal["stage"] = "stage"

    class StageEventData(BaseModel):
        stage: PipelineStage

        status: Literal["started", "finished", "failed"]

        detail: Optional[str] = None

    data: StageEventData


class NodeSolvedEvent(BaseEvent):
    """NodeSolvedEvent 网格节点求解成功事件"""
    type: Literal["node_solved"] = "node_solved"

    data: NodeOutcome


class NodeFailedEvent(BaseEvent):
    """NodeFailedEvent 网格节点求解失败事件"""
    type: Literal["node_failed"] = "node_failed"

    data: NodeOutcome


class SampleSkippedEvent(BaseEvent):
    """SampleSkippedEvent QMC 样本被跳过事件"""
    type: Literal["sample_skipped"] = "sample_skipped"

    class SampleSkippedEventData(BaseModel):
        index: int

        theta: List[float]

        reason: str

    data: SampleSkippedEventData


class EventLog:
    """
    把某个阶段的事件以 JSON Lines 写入文件（线程安全）

    每条事件的 metadata 由日志统一填写：run_id、stage 和递增的 sequence。
    """

    def __init__(self, path: Path, stage: PipelineStage, run_id: Optional[str] = None):
        self.path = Path(path)
        self.stage_name = stage
        self.run_id = run_id or new_run_id()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("", encoding="utf-8")
        self._lock = threading.Lock()
        self._sequence = itertools.count()

    def metadata(self) -> EventMetadata:
        with self._lock:
            sequence = next(self._sequence)
        return EventMetadata(run_id=self.run_id, stage=self.stage_name, sequence=sequence)

    def emit(self, event: BaseEvent) -> None:
        line = event.model_dump_json()
        with self._lock:
            with self.path.open("a", encoding="utf-8") as f:
                f.write(line + "\n")

    def node(self, outcome: NodeOutcome) -> None:
        event_cls = NodeSolvedEvent if outcome.status == "solved" else NodeFailedEvent
        self.emit(event_cls(metadata=self.metadata(), data=outcome))

    def sample_skipped(self, index: int, theta: List[float], reason: str) -> None:
        self.emit(SampleSkippedEvent(
            metadata=self.metadata(),
            data=SampleSkippedEvent.SampleSkippedEventData(index=index, theta=theta, reason=reason),
        ))

    def stage(self, status: str, detail: Optional[str] = None) -> None:
        self.emit(StageEvent(
            metadata=self.metadata(),
            data=StageEvent.StageEventData(stage=self.stage_name, status=status, detail=detail),
        ))

"""
求值计数模块

在当前上下文（contextvars）内统计动力学调用、积分次数、代价函数求值和优化器运行次数。
网格插值近似的"零求值"性质即通过该计数器验证。
"""

from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Iterator, Optional
import threading


@dataclass
class EvaluationCounter:
    dynamics_calls: int = 0
    integrations: int = 0
    cost_evaluations: int = 0
    optimizer_runs: int = 0

    parent: Optional[EvaluationCounter] = field(default=None, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def total(self) -> int:
        return self.dynamics_calls + self.integrations + self.cost_evaluations + self.optimizer_runs

    def add(self, kind: str, amount: int = 1) -> None:
        counter: Optional[EvaluationCounter] = self
        while counter is not None:
            with counter._lock:
                setattr(counter, kind, getattr(counter, kind) + amount)
            counter = counter.parent


_ACTIVE: ContextVar[Optional[EvaluationCounter]] = ContextVar("fast_replan_evaluations", default=None)


@contextmanager
def count_evaluations() -> Iterator[EvaluationCounter]:
    """开启一个计数作用域；嵌套作用域的计数同时累加到外层"""
    counter = EvaluationCounter(parent=_ACTIVE.get())
    token = _ACTIVE.set(counter)
    try:
        yield counter
    finally:
        _ACTIVE.reset(token)


def record(kind: str, amount: int = 1) -> None:
    counter = _ACTIVE.get()
    if counter is not None:
        counter.add(kind, amount)

"""
并发执行模块

独立任务（Hessian 列、QMC 样本、网格节点、扫描抽样）通过 run_jobs 分发：
workers <= 1 时顺序执行；否则用 asyncio.to_thread 把任务放到线程池，信号量限制并发数。
结果顺序与输入顺序一致，与调度无关。
"""

from typing import Callable, List, Sequence, TypeVar
import asyncio

T = TypeVar("T")
R = TypeVar("R")


async def _gather_jobs(fn: Callable[[T], R], items: Sequence[T], workers: int) -> List[R]:
    semaphore = asyncio.Semaphore(workers)

    async def _run(item: T) -> R:
        async with semaphore:
            # to_thread 会复制当前 contextvars 上下文，求值计数随之传播
            return await asyncio.to_thread(fn, item)

    return list(await asyncio.gather(*(_run(item) for item in items)))


def run_jobs(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """
    并发执行 fn(item)

    参数列表：
    - fn: 任务函数（需可重入）
    - items: 任务输入
    - workers: 最大并发数

    返回值：
    - 与 items 顺序一致的结果列表；任一任务抛出的异常原样向上传播
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return asyncio.run(_gather_jobs(fn, items, workers))

"""Background prefetching and order-preserving parallel mapping.

These are the only nuts that run user code off the consumer's thread.
Both keep element order exactly; errors reach the consumer at the
position where they occurred.
"""

from __future__ import annotations

import queue
import threading
from collections import deque
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor

from .core import Processor

__all__ = ["Prefetch", "ParallelMap"]

_ITEM, _END, _ERROR = range(3)
_POLL = 0.05  # seconds between stop-flag checks while the worker waits


class Prefetch(Processor):
    """Pull upstream on a background thread into a buffer of ``capacity`` elements.

    The worker starts on the first downstream pull and never holds more
    than ``capacity`` elements that the consumer has not yet received. It
    stops when upstream ends, fails, or the downstream flow is closed or
    garbage collected.
    """

    def __init__(self, capacity: int = 1):
        if capacity < 1:
            raise ValueError(f"Prefetch needs capacity >= 1, got {capacity}")
        self.capacity = capacity

    def process(self, iterable):
        it = iter(iterable)
        slots = threading.Semaphore(self.capacity)
        items: queue.Queue = queue.Queue()
        stop = threading.Event()

        def worker():
            while True:
                while not slots.acquire(timeout=_POLL):
                    if stop.is_set():
                        return
                if stop.is_set():
                    return
                try:
                    x = next(it)
                except StopIteration:
                    items.put((_END, None))
                    return
                except BaseException as exc:
                    items.put((_ERROR, exc))
                    return
                items.put((_ITEM, x))

        thread = threading.Thread(target=worker, name="nutpipe-prefetch", daemon=True)
        thread.start()
        try:
            while True:
                kind, x = items.get()
                if kind == _ITEM:
                    slots.release()
                    yield x
                elif kind == _END:
                    return
                else:
                    raise x
        finally:
            stop.set()

    def __repr__(self):
        return f"Prefetch({self.capacity})"


class ParallelMap(Processor):
    """Apply ``fn`` with up to ``workers`` concurrent calls, preserving input order.

    At most ``window`` elements are in flight (pulled but not yet
    delivered). ``executor`` is ``"thread"`` (default) or ``"process"``;
    the latter sidesteps the GIL for CPU-bound Python code but requires
    ``fn`` and the elements to be picklable.
    """

    def __init__(self, fn, workers: int = 4, window: int | None = None, executor: str = "thread"):
        window = 2 * workers if window is None else window
        if workers < 1:
            raise ValueError(f"ParallelMap needs workers >= 1, got {workers}")
        if window < workers:
            raise ValueError(f"ParallelMap needs window >= workers, got {window} < {workers}")
        if executor not in ("thread", "process"):
            raise ValueError(f"unknown executor {executor!r}")
        self.fn = fn
        self.workers = workers
        self.window = window
        self.executor = executor

    def process(self, iterable):
        it = iter(iterable)
        pool_cls = ThreadPoolExecutor if self.executor == "thread" else ProcessPoolExecutor
        pool = pool_cls(max_workers=self.workers)
        pending: deque = deque()
        upstream_error = None

        def fill():
            nonlocal upstream_error
            while upstream_error is None and len(pending) < self.window:
                try:
                    x = next(it)
                except StopIteration:
                    return False
                except Exception as exc:
                    upstream_error = exc
                    return False
                pending.append(pool.submit(self.fn, x))
            return True

        try:
            more = fill()
            while pending:
                result = pending.popleft().result()
                if more:
                    more = fill()
                yield result
            if upstream_error is not None:
                raise upstream_error
        finally:
            for fut in pending:
                fut.cancel()
            pool.shutdown(wait=False, cancel_futures=True)

    def __repr__(self):
        return f"ParallelMap({getattr(self.fn, '__name__', self.fn)}, {self.workers}, {self.window})"

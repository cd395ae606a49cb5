"""General-purpose nuts: sources, per-element processors, sinks and logging."""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from itertools import islice
from typing import Any, Callable, Iterable

import numpy as np

from .core import FlowError, Processor, Sink, Source, check_column

__all__ = [
    "Range",
    "Map",
    "Filter",
    "MapCol",
    "Zip",
    "Take",
    "Chunk",
    "Flatten",
    "Collect",
    "Consume",
    "MeanStd",
    "MeanStdResult",
    "TryCatch",
    "skip",
    "substitute",
    "LogToFile",
    "render",
]


class Range(Source):
    """Integers ``start, start+1, ..., end-1``; ``Range(n)`` counts from 0.

    An empty range (``start >= end``) is not an error.
    """

    def __init__(self, start: int, end: int | None = None):
        if end is None:
            start, end = 0, start
        self.start = int(start)
        self.end = int(end)

    def generate(self):
        return iter(range(self.start, self.end))

    def __repr__(self):
        return f"Range({self.start}, {self.end})"


class Map(Processor):
    def __init__(self, fn: Callable[[Any], Any]):
        self.fn = fn

    def __call__(self, x):
        return self.fn(x)

    def process(self, iterable):
        fn = self.fn
        for x in iterable:
            yield fn(x)

    def __repr__(self):
        return f"Map({getattr(self.fn, '__name__', self.fn)})"


class Filter(Processor):
    """Keep elements for which ``pred`` is true, in order."""

    def __init__(self, pred: Callable[[Any], bool]):
        self.pred = pred

    def process(self, iterable):
        pred = self.pred
        for x in iterable:
            if pred(x):
                yield x

    def __repr__(self):
        return f"Filter({getattr(self.pred, '__name__', self.pred)})"


class MapCol(Processor):
    """Apply ``fn`` to column ``col`` of every sample, leaving other columns alone.

    >>> [(1, -1), (2, 1)] >> MapCol(1, lambda y: y * 2) >> Collect()
    [(1, -2), (2, 2)]
    """

    def __init__(self, col: int, fn: Callable[[Any], Any]):
        self.col = col
        self.fn = fn

    def process(self, iterable):
        col, fn = self.col, self.fn
        for sample in iterable:
            check_column(sample, col, repr(self))
            values = list(sample)
            values[col] = fn(values[col])
            yield type(sample)(values) if isinstance(sample, (tuple, list)) else tuple(values)

    def __repr__(self):
        return f"MapCol({self.col})"


class Zip(Processor):
    """Pair every element with the next element of ``other``; stops at the shorter side."""

    def __init__(self, other: Iterable):
        self.other = other

    def process(self, iterable):
        other = iter(self.other)
        for x in iterable:
            try:
                y = next(other)
            except StopIteration:
                return
            yield (x, y)


class Take(Processor):
    """Yield at most ``n`` elements, pulling upstream at most ``n`` times."""

    def __init__(self, n: int):
        if n < 0:
            raise ValueError(f"Take needs n >= 0, got {n}")
        self.n = n

    def process(self, iterable):
        if self.n == 0:
            return
        for i, x in enumerate(iterable, 1):
            yield x
            if i >= self.n:
                return

    def __repr__(self):
        return f"Take({self.n})"


class Chunk(Processor):
    """Group consecutive elements into lists of ``n``; the last list may be shorter."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError(f"Chunk needs n >= 1, got {n}")
        self.n = n

    def process(self, iterable):
        it = iter(iterable)
        while True:
            chunk = list(islice(it, self.n))
            if not chunk:
                return
            yield chunk

    def __repr__(self):
        return f"Chunk({self.n})"


class Flatten(Processor):
    def process(self, iterable):
        for xs in iterable:
            yield from xs


class Collect(Sink):
    def consume(self, flow):
        return list(flow)


class Consume(Sink):
    """Drive the flow to its end, discarding elements. Returns the element count."""

    def consume(self, flow):
        n = 0
        for _ in flow:
            n += 1
        return n


@dataclass(frozen=True)
class MeanStdResult:
    """Mean and population standard deviation of a flow.

    Unpacks as ``(mean, std)``; the element count is kept in ``count``.
    """

    mean: float
    std: float
    count: int

    def __iter__(self):
        return iter((self.mean, self.std))


_SCALE = 1074  # every finite float is an integer multiple of 2**-1074


class _ExactMoments:
    """Running sums of x and x**2, kept exactly as scaled integers."""

    def __init__(self):
        self.n = 0
        self.s1 = 0
        self.s2 = 0

    def add(self, x: float) -> None:
        num, den = x.as_integer_ratio()
        k = num << (_SCALE - (den.bit_length() - 1))
        self.n += 1
        self.s1 += k
        self.s2 += k * k

    def mean(self) -> float:
        return self.s1 / (self.n << _SCALE)

    def std(self) -> float:
        # n^2 * var = n * sum(x^2) - sum(x)^2, exact and never negative
        spread = self.n * self.s2 - self.s1 * self.s1
        root = math.isqrt(spread << 128)  # sqrt(spread) * 2**64, floored
        return root / ((self.n << _SCALE) << 64)


class MeanStd(Sink):
    """Mean and population standard deviation (ddof=0) in one pass.

    Sums are accumulated exactly, so the result is correctly rounded up to
    the final square root regardless of cancellation in the data.
    """

    def consume(self, flow):
        acc = _ExactMoments()
        for x in flow:
            if isinstance(x, bool) or not isinstance(x, numbers.Real):
                raise FlowError(repr(self), f"non-numeric element {x!r}")
            x = float(x)
            if not math.isfinite(x):
                raise FlowError(repr(self), f"non-finite element {x!r}")
            acc.add(x)
        if acc.n == 0:
            raise FlowError(repr(self), "empty flow")
        return MeanStdResult(acc.mean(), acc.std(), acc.n)


class _Skip:
    __slots__ = ()

    def __repr__(self):
        return "skip"


#: Handler result telling :class:`TryCatch` to drop the failing element.
SKIPPED = _Skip()


def skip(element, error) -> _Skip:
    """TryCatch handler that drops failing elements."""
    return SKIPPED


def substitute(value) -> Callable[[Any, Exception], Any]:
    """TryCatch handler that replaces failing elements with ``value``."""

    def handler(element, error):
        return value

    return handler


class TryCatch(Processor):
    """Run a per-element processor and recover from its failures.

    ``handler(element, error)`` is called for every element on which
    ``inner`` fails. It returns :data:`SKIPPED` (see :func:`skip`) to drop
    the element or any other value to emit in its place. ``inner`` must be
    per-element: it is applied to each element in isolation, and may emit
    zero or more outputs for it (``Filter`` works too).
    """

    def __init__(self, inner: Processor, handler: Callable[[Any, Exception], Any] = skip):
        self.inner = inner
        self.handler = handler

    def process(self, iterable):
        for x in iterable:
            try:
                outputs = list([x] >> self.inner)
            except FlowError as err:
                cause = err.__cause__ if err.__cause__ is not None else err
                try:
                    replacement = self.handler(x, cause)
                except Exception as exc:
                    raise FlowError(repr(self), f"handler failed: {type(exc).__name__}: {exc}") from exc
                if replacement is not SKIPPED:
                    yield replacement
                continue
            yield from outputs

    def __repr__(self):
        return f"TryCatch({self.inner!r})"


def render(x) -> str:
    """Text form of an element for log lines: scalars joined with commas."""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, numbers.Integral):
        return str(int(x))
    if isinstance(x, numbers.Real):
        return repr(float(x))
    if isinstance(x, np.ndarray):
        return ",".join(render(v) for v in x.ravel().tolist())
    if isinstance(x, (tuple, list)):
        return ",".join(render(v) for v in x)
    return str(x)


class LogToFile(Processor):
    """Write each passing element to ``path`` as one line and yield it unchanged.

    The file is truncated when the nut is created; every flow built from
    this nut appends to it, so one instance reused across epochs collects
    the whole run. The file is flushed when a flow ends.
    """

    def __init__(self, path):
        self.path = path
        open(path, "w", encoding="utf-8").close()

    def process(self, iterable):
        with open(self.path, "a", encoding="utf-8", newline="\n") as f:
            for x in iterable:
                f.write(render(x) + "\n")
                yield x

    def __repr__(self):
        return f"LogToFile({str(self.path)!r})"

"""Nut base classes, the lazy Flow wrapper and helpers for writing custom nuts.

A pipeline is a left-to-right chain of nuts joined with ``>>``::

    Range(10) >> Filter(lambda x: x > 5) >> Take(3) >> Collect()

Sources emit data, processors wrap an upstream iterable in a new lazy
:class:`Flow`, and sinks pull a flow until it ends and return a result.
Nothing is pulled from upstream until a sink (or any other consumer) asks
for the next element.
"""

from __future__ import annotations

import functools
from typing import Any, Callable, Iterable, Iterator, Optional

__all__ = [
    "END",
    "Flow",
    "FlowError",
    "Nut",
    "Source",
    "Processor",
    "Sink",
    "pull",
    "make_source",
    "nut_function",
    "nut_processor",
    "nut_sink",
    "nut_source",
]


class _End:
    __slots__ = ()

    def __repr__(self) -> str:
        return "END"

    def __bool__(self) -> bool:
        return False


#: Returned by :func:`pull` once a flow is exhausted.
END = _End()


class FlowError(Exception):
    """A per-element failure inside a pipeline.

    ``nut`` is a short description of the nut that failed; the original
    exception is kept as ``__cause__``.
    """

    def __init__(self, nut: str, message: str):
        super().__init__(f"{nut}: {message}")
        self.nut = nut


def describe(obj: Any) -> str:
    """Short human-readable name of a nut or iterable, used in error messages."""
    if isinstance(obj, Nut):
        return repr(obj)
    return f"source {type(obj).__name__}"


class Flow:
    """Lazy, single-consumer stream of elements.

    Elements are produced only when pulled. Once the underlying iterator is
    exhausted or fails, every further pull reports the end of the flow.
    Exceptions raised while producing an element are re-raised as
    :class:`FlowError` naming the producing nut.
    """

    __slots__ = ("_it", "_owner", "_done")

    def __init__(self, iterable: Iterable, owner: Any = None):
        self._it = iter(iterable)
        self._owner = owner if owner is not None else iterable
        self._done = False

    @property
    def done(self) -> bool:
        return self._done

    def __iter__(self) -> Flow:
        return self

    def __next__(self):
        if self._done:
            raise StopIteration
        try:
            return next(self._it)
        except StopIteration:
            self._done = True
            raise
        except FlowError:
            self._done = True
            raise
        except Exception as exc:
            self._done = True
            raise FlowError(describe(self._owner), f"{type(exc).__name__}: {exc}") from exc

    def close(self) -> None:
        """Abandon the flow; releases generator resources held upstream."""
        self._done = True
        close = getattr(self._it, "close", None)
        if close is not None:
            close()

    def __repr__(self) -> str:
        state = "done" if self._done else "live"
        return f"<Flow from {describe(self._owner)} ({state})>"


def make_source(iterable: Iterable) -> Flow:
    """Wrap any iterable, finite or infinite, in a :class:`Flow`."""
    if isinstance(iterable, Flow):
        return iterable
    return Flow(iterable)


def pull(flow: Flow):
    """Return the next element of ``flow``, or :data:`END` once it is exhausted.

    Raises :class:`FlowError` if producing the element failed; the flow is
    dead afterwards and later pulls return :data:`END`.
    """
    try:
        return next(flow)
    except StopIteration:
        return END


class Nut:
    """Base class of all pipeline components."""

    # Makes numpy defer ``array >> nut`` to Nut.__rrshift__.
    __array_ufunc__ = None

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class Source(Nut):
    """A nut that emits elements. Subclasses implement :meth:`generate`.

    Each iteration over a source starts a fresh flow, so one source object
    can feed many pipelines (one per epoch, say).
    """

    def generate(self) -> Iterator:
        raise NotImplementedError

    def __iter__(self) -> Flow:
        return Flow(self.generate(), self)

    def __rrshift__(self, other):
        raise TypeError(f"{self!r} is a source and cannot appear to the right of '>>'")


class Processor(Nut):
    """A nut turning an input iterable into a new lazy flow.

    Subclasses implement :meth:`process` as a generator function; it runs
    only when the returned flow is pulled.
    """

    def process(self, iterable: Iterable) -> Iterator:
        raise NotImplementedError

    def __rrshift__(self, iterable) -> Flow:
        if not _is_iterable(iterable):
            return NotImplemented
        return Flow(self.process(make_source(iterable)), self)

    def __rshift__(self, other):
        if isinstance(other, Processor):
            return _ChainedProcessor(self, other)
        if isinstance(other, Sink):
            return _ChainedSink(self, other)
        return NotImplemented


class Sink(Nut):
    """A nut that drives a flow and returns a result. Subclasses implement :meth:`consume`."""

    def consume(self, flow: Flow) -> Any:
        raise NotImplementedError

    def __rrshift__(self, iterable):
        if not _is_iterable(iterable):
            return NotImplemented
        return self.consume(make_source(iterable))


class _ChainedProcessor(Processor):
    def __init__(self, first: Processor, second: Processor):
        self.first = first
        self.second = second

    def process(self, iterable):
        return iterable >> self.first >> self.second

    def __repr__(self) -> str:
        return f"{self.first!r} >> {self.second!r}"


class _ChainedSink(Sink):
    def __init__(self, first: Processor, second: Sink):
        self.first = first
        self.second = second

    def consume(self, flow):
        return flow >> self.first >> self.second

    def __repr__(self) -> str:
        return f"{self.first!r} >> {self.second!r}"


def _is_iterable(obj) -> bool:
    try:
        iter(obj)
    except TypeError:
        return False
    return True


class _FunctionNut(Processor):
    def __init__(self, fn: Callable, args: tuple, kwargs: dict, name: str):
        self.fn = fn
        self.args = args
        self.kwargs = kwargs
        self.name = name

    def __call__(self, x):
        return self.fn(x, *self.args, **self.kwargs)

    def process(self, iterable):
        for x in iterable:
            yield self(x)

    def __repr__(self) -> str:
        params = [repr(a) for a in self.args] + [f"{k}={v!r}" for k, v in self.kwargs.items()]
        return f"{self.name}({', '.join(params)})"


def nut_function(fn: Callable) -> Callable[..., Processor]:
    """Turn a per-element function into a processor factory.

    The first argument of ``fn`` receives the element; further arguments
    become the nut's parameters::

        @nut_function
        def MultiplyBy(x, factor):
            return x * factor

        [1, 2, 3] >> MultiplyBy(2) >> Collect()   # [2, 4, 6]
        MultiplyBy(2)(5)                          # 10
    """

    @functools.wraps(fn)
    def factory(*args, **kwargs) -> Processor:
        return _FunctionNut(fn, args, kwargs, fn.__name__)

    return factory


class _GeneratorNut(Processor):
    def __init__(self, fn, args, kwargs, name):
        self.fn = fn
        self.args = args
        self.kwargs = kwargs
        self.name = name

    def process(self, iterable):
        return iter(self.fn(iterable, *self.args, **self.kwargs))

    def __repr__(self) -> str:
        return f"{self.name}(...)"


def nut_processor(fn: Callable) -> Callable[..., Processor]:
    """Turn ``fn(iterable, *params)`` returning an iterator into a processor factory."""

    @functools.wraps(fn)
    def factory(*args, **kwargs) -> Processor:
        return _GeneratorNut(fn, args, kwargs, fn.__name__)

    return factory


class _SinkNut(Sink):
    def __init__(self, fn, args, kwargs, name):
        self.fn = fn
        self.args = args
        self.kwargs = kwargs
        self.name = name

    def consume(self, flow):
        return self.fn(flow, *self.args, **self.kwargs)

    def __repr__(self) -> str:
        return f"{self.name}(...)"


def nut_sink(fn: Callable) -> Callable[..., Sink]:
    """Turn ``fn(iterable, *params)`` returning a value into a sink factory."""

    @functools.wraps(fn)
    def factory(*args, **kwargs) -> Sink:
        return _SinkNut(fn, args, kwargs, fn.__name__)

    return factory


class _SourceNut(Source):
    def __init__(self, fn, args, kwargs, name):
        self.fn = fn
        self.args = args
        self.kwargs = kwargs
        self.name = name

    def generate(self):
        return iter(self.fn(*self.args, **self.kwargs))

    def __repr__(self) -> str:
        return f"{self.name}(...)"


def nut_source(fn: Callable) -> Callable[..., Source]:
    """Turn a generator function into a source factory; every iteration calls it anew."""

    @functools.wraps(fn)
    def factory(*args, **kwargs) -> Source:
        return _SourceNut(fn, args, kwargs, fn.__name__)

    return factory


def check_column(sample, col: int, nut: Optional[str] = None) -> None:
    n = len(sample)
    if not 0 <= col < n:
        where = f" in {nut}" if nut else ""
        raise IndexError(f"column {col} out of range for sample with {n} columns{where}")

"""CSV source and sink nuts (RFC-4180 subset, UTF-8)."""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .core import FlowError, Sink, Source
from .ops import render

__all__ = ["CsvConfig", "ReadCSV", "WriteCSV"]


@dataclass(frozen=True)
class CsvConfig:
    delimiter: str = ","
    has_header: bool = False
    quote: str = '"'

    def __post_init__(self):
        if len(self.delimiter) != 1 or len(self.quote) != 1:
            raise ValueError("delimiter and quote must be single characters")
        if self.delimiter == self.quote:
            raise ValueError("delimiter and quote character must differ")

    def dialect(self) -> dict:
        return dict(
            delimiter=self.delimiter,
            quotechar=self.quote,
            doublequote=True,
            quoting=csv.QUOTE_MINIMAL,
            lineterminator="\n",
            strict=True,
        )


class ReadCSV(Source):
    """Yield one tuple of text fields per record of a CSV file.

    The file is opened when the flow is first pulled. Both ``\\n`` and
    ``\\r\\n`` line endings are accepted. Fields stay text; convert them
    downstream (e.g. with :class:`~nutpipe.ops.MapCol`).
    """

    def __init__(self, path, config: CsvConfig = CsvConfig()):
        self.path = path
        self.config = config

    def generate(self):
        try:
            f = open(self.path, newline="", encoding="utf-8")
        except OSError as exc:
            raise FlowError(repr(self), f"cannot open {self.path}: {exc.strerror}") from exc
        with f:
            reader = csv.reader(f, **self.config.dialect())
            try:
                if self.config.has_header:
                    next(reader, None)
                for row in reader:
                    yield tuple(row)
            except csv.Error as exc:
                raise FlowError(repr(self), f"{self.path} line {reader.line_num}: {exc}") from exc

    def __repr__(self):
        return f"ReadCSV({str(self.path)!r})"


class WriteCSV(Sink):
    """Write samples as CSV records; returns the number of rows written.

    Fields are quoted only when they contain the delimiter, the quote
    character or a line break. Floats use their shortest round-trip form.
    """

    def __init__(self, path, config: CsvConfig = CsvConfig(), header=None):
        self.path = path
        self.config = config
        self.header = header

    def consume(self, flow):
        try:
            f = open(self.path, "w", newline="", encoding="utf-8")
        except OSError as exc:
            raise FlowError(repr(self), f"cannot write {self.path}: {exc.strerror}") from exc
        n = 0
        with f:
            writer = csv.writer(f, **self.config.dialect())
            if self.config.has_header and self.header is not None:
                writer.writerow(self.header)
            for sample in flow:
                if not isinstance(sample, (tuple, list)):
                    sample = (sample,)
                writer.writerow([render(v) for v in sample])
                n += 1
        return n

    def __repr__(self):
        return f"WriteCSV({str(self.path)!r})"

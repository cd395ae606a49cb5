"""Nuts for the stages of a deep-learning input pipeline.

The usual arrangement, per epoch::

    (trainset >> stratify >> read_images >> transform >> augment
     >> build_batch >> network.train() >> log >> Consume())

Splitting and stratification work on whole (small) sample lists of file
names; everything after them is lazy and touches one batch of images at
a time.
"""

from __future__ import annotations

import random
from collections import defaultdict
from fractions import Fraction
from typing import Hashable, Iterable, Sequence

import numpy as np

from .core import FlowError, Processor, Sink, Source, check_column
from .csvio import CsvConfig, ReadCSV
from .imaging import (
    TRANSFORMS,
    AugmentSpec,
    Image,
    TransformRegistry,
    TransformSpec,
    apply_augmentation,
    apply_transform,
    read_image_file,
)

__all__ = [
    "ReadSamples",
    "apportion",
    "split_random",
    "SplitRandom",
    "stratify",
    "Stratify",
    "label_index",
    "ReadImage",
    "TransformImage",
    "AugmentImage",
    "one_hot",
    "BuildBatch",
]


class ReadSamples(Source):
    """``(filepath, label)`` samples from a two-column CSV file, in file order."""

    def __init__(self, path, has_header: bool = False):
        self.path = path
        self.csv = ReadCSV(path, CsvConfig(has_header=has_header))

    def generate(self):
        for row in self.csv.generate():
            if len(row) != 2:
                raise FlowError(repr(self), f"expected 2 columns (filepath, label), got {len(row)}: {row!r}")
            yield row

    def __repr__(self):
        return f"ReadSamples({str(self.path)!r})"


def apportion(n: int, ratios: Sequence[float]) -> list[int]:
    """Split ``n`` into integer parts proportional to ``ratios``.

    Largest-remainder method on exact fractions; ties in the remainder go
    to the earlier part.
    """
    if len(ratios) < 1:
        raise ValueError("need at least one ratio")
    weights = [Fraction(r) for r in ratios]
    if any(w < 0 for w in weights) or sum(weights) <= 0:
        raise ValueError(f"ratios must be non-negative with a positive sum, got {list(ratios)}")
    total = sum(weights)
    quotas = [n * w / total for w in weights]
    sizes = [int(q) for q in quotas]
    left = n - sum(sizes)
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:left]:
        sizes[i] += 1
    return sizes


def split_random(samples: Iterable, ratios: Sequence[float] = (60, 20, 20), seed: int = 0) -> list[list]:
    """Shuffle ``samples`` with ``seed`` and cut them into folds sized by ``ratios``.

    >>> [len(f) for f in split_random(range(10), (60, 20, 20))]
    [6, 2, 2]
    """
    if len(ratios) < 2:
        raise ValueError(f"need at least two ratios, got {list(ratios)}")
    if any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be positive, got {list(ratios)}")
    samples = list(samples)
    random.Random(seed).shuffle(samples)
    folds = []
    start = 0
    for size in apportion(len(samples), ratios):
        folds.append(samples[start : start + size])
        start += size
    return folds


class SplitRandom(Sink):
    """Sink form of :func:`split_random`: ``train, val, test = samples >> SplitRandom()``."""

    def __init__(self, ratio: Sequence[float] = (60, 20, 20), seed: int = 0):
        if len(ratio) < 2 or any(r <= 0 for r in ratio):
            raise ValueError(f"need at least two positive ratios, got {list(ratio)}")
        self.ratio = tuple(ratio)
        self.seed = seed

    def consume(self, flow):
        return split_random(flow, self.ratio, self.seed)

    def __repr__(self):
        return f"SplitRandom(ratio={self.ratio}, seed={self.seed})"


def stratify(samples: Iterable, labelcol: int = 1, mode: str = "up", seed: int = 0) -> list:
    """Balance class counts by up- or down-sampling, then shuffle.

    ``up`` keeps every sample and tops each class up to the largest class
    count with copies drawn with replacement. ``down`` draws each class
    down to the smallest class count without replacement.
    """
    if mode not in ("up", "down"):
        raise ValueError(f"mode must be 'up' or 'down', got {mode!r}")
    rng = random.Random(seed)
    by_label: dict[Hashable, list] = defaultdict(list)
    for sample in samples:
        check_column(sample, labelcol, "Stratify")
        by_label[sample[labelcol]].append(sample)
    if not by_label:
        return []
    counts = [len(group) for group in by_label.values()]
    out = []
    if mode == "up":
        target = max(counts)
        for group in by_label.values():
            out.extend(group)
            out.extend(rng.choices(group, k=target - len(group)))
    else:
        target = min(counts)
        for group in by_label.values():
            out.extend(rng.sample(group, target))
    rng.shuffle(out)
    return out


class Stratify(Processor):
    """Processor form of :func:`stratify`; reads its whole input before emitting."""

    def __init__(self, labelcol: int = 1, mode: str = "up", seed: int = 0):
        if mode not in ("up", "down"):
            raise ValueError(f"mode must be 'up' or 'down', got {mode!r}")
        self.labelcol = labelcol
        self.mode = mode
        self.seed = seed

    def process(self, iterable):
        yield from stratify(iterable, self.labelcol, self.mode, self.seed)

    def __repr__(self):
        return f"Stratify(labelcol={self.labelcol}, mode={self.mode!r})"


def label_index(samples: Iterable, labelcol: int = 1) -> dict:
    """Map the distinct labels, sorted, to class indices ``0..k-1``."""
    return {label: i for i, label in enumerate(sorted({s[labelcol] for s in samples}))}


def _columns(cols) -> tuple[int, ...]:
    if isinstance(cols, int):
        return (cols,)
    cols = tuple(cols)
    if len(set(cols)) != len(cols):
        raise ValueError(f"duplicate columns {cols}")
    return cols


def _replace(sample, cols, fn):
    values = list(sample)
    for c in cols:
        check_column(values, c)
        values[c] = fn(values[c])
    return tuple(values)


class ReadImage(Processor):
    """Replace file names in ``columns`` by the images they point to.

    ``imagepath`` is a template whose ``*`` is replaced by the file name,
    e.g. ``'images/*'``; without a template the column holds the path.
    """

    def __init__(self, columns, imagepath: str | None = None):
        self.columns = _columns(columns)
        self.imagepath = imagepath

    def path(self, filename: str) -> str:
        if self.imagepath is None:
            return filename
        return self.imagepath.replace("*", filename)

    def process(self, iterable):
        def load(name):
            if not isinstance(name, str):
                raise TypeError(f"expected a file name, got {type(name).__name__}")
            return read_image_file(self.path(name))

        for sample in iterable:
            yield _replace(sample, self.columns, load)

    def __repr__(self):
        return f"ReadImage({list(self.columns)}, imagepath={self.imagepath!r})"


class TransformImage(Processor):
    """Apply named transformations, in order, to the images in ``imagecols``.

    >>> transform = TransformImage(0).by('resize', 64, 64).by('rgb2gray')
    """

    def __init__(self, imagecols, specs: Sequence[TransformSpec] = (), registry: TransformRegistry | None = None):
        self.imagecols = _columns(imagecols)
        self.specs = tuple(specs)
        self.registry = registry

    def by(self, name: str, *params) -> TransformImage:
        return TransformImage(self.imagecols, self.specs + (TransformSpec(name, params),), self.registry)

    def transform(self, img: Image) -> Image:
        for spec in self.specs:
            img = apply_transform(spec, img, self.registry or TRANSFORMS)
        return img

    def process(self, iterable):
        for sample in iterable:
            yield _replace(sample, self.imagecols, self.transform)

    def __repr__(self):
        return f"TransformImage({list(self.imagecols)}, {[s.name for s in self.specs]})"


class AugmentImage(Processor):
    """Randomly augment the images in ``imagecols``, synchronized within a sample.

    Each spec fires with its probability; parameters are drawn once per
    sample from the given ``[lo, hi]`` ranges and applied to all addressed
    images alike (image and mask stay aligned). The generator for the n-th
    sample of a flow is seeded from ``(seed, n)``, so a given seed always
    reproduces the same stream; ``seed`` may be an int or a tuple of ints.
    One output sample per input sample.
    """

    def __init__(self, imagecols, seed: int | tuple = 0, specs: Sequence[AugmentSpec] = (),
                 registry: TransformRegistry | None = None):
        self.imagecols = _columns(imagecols)
        self.seed = seed
        self.specs = tuple(specs)
        self.registry = registry

    def by(self, name: str, probability: float, *ranges) -> AugmentImage:
        spec = AugmentSpec(name, probability, tuple(ranges))
        return AugmentImage(self.imagecols, self.seed, self.specs + (spec,), self.registry)

    def process(self, iterable):
        for ordinal, sample in enumerate(iterable):
            rng = np.random.default_rng([*_entropy(self.seed), ordinal])
            values = list(sample)
            for c in self.imagecols:
                check_column(values, c)
            imgs = apply_augmentation(self.specs, [values[c] for c in self.imagecols], rng, self.registry)
            for c, img in zip(self.imagecols, imgs):
                values[c] = img
            yield tuple(values)

    def __repr__(self):
        return f"AugmentImage({list(self.imagecols)}, {[s.name for s in self.specs]})"


def _entropy(seed) -> list[int]:
    parts = seed if isinstance(seed, (tuple, list)) else (seed,)
    return [int(p) & 0xFFFFFFFFFFFFFFFF for p in parts]


_ELEM_KINDS = (np.dtype(np.uint8), np.dtype(np.int64), np.dtype(np.float64))


def _elem_dtype(dtype) -> np.dtype:
    d = np.dtype(dtype)
    if d not in _ELEM_KINDS:
        raise ValueError(f"element kind must be uint8, int64 or float64, got {d}")
    return d


def one_hot(label: int, k: int, dtype=np.uint8) -> np.ndarray:
    """Length-``k`` vector of zeros with a single 1 at ``label``.

    >>> one_hot(2, 4)
    array([0, 0, 1, 0], dtype=uint8)
    """
    if not isinstance(label, (int, np.integer)) or isinstance(label, bool):
        raise TypeError(f"one-hot label must be a class index, got {label!r}")
    if not 0 <= label < k:
        raise ValueError(f"label {label} out of range for {k} classes")
    vec = np.zeros(k, dtype=_elem_dtype(dtype))
    vec[label] = 1
    return vec


class BuildBatch(Processor):
    """Stack ``batchsize`` consecutive samples into a list of column arrays.

    Columns are declared with :meth:`by`:

    * ``by(col, 'image', dtype, channelfirst=False)`` stacks images to
      ``N x H x W x C`` (``N x C x H x W`` when channel-first),
    * ``by(col, 'number', dtype)`` gives an ``N`` vector,
    * ``by(col, 'one_hot', dtype, k)`` gives an ``N x k`` matrix of
      one-hot rows for integer class labels.

    The final batch may hold fewer than ``batchsize`` rows. Each batch
    pulls exactly the samples it contains.

    >>> build = BuildBatch(2).by(0, 'number', int).by(1, 'number', int)
    >>> [(1, -2), (2, 2)] >> build >> Collect()  # doctest: +SKIP
    [[array([1, 2]), array([-2,  2])]]
    """

    def __init__(self, batchsize: int, columns: Sequence[tuple] = ()):
        if batchsize < 1:
            raise ValueError(f"batchsize must be >= 1, got {batchsize}")
        self.batchsize = batchsize
        self.columns = tuple(columns)

    def by(self, col: int, kind: str, dtype=np.float64, extra=None) -> BuildBatch:
        if kind not in ("image", "number", "one_hot"):
            raise ValueError(f"unknown batch column kind {kind!r}")
        if any(c[0] == col for c in self.columns):
            raise ValueError(f"column {col} already declared")
        dtype = _elem_dtype(dtype)
        if kind == "one_hot":
            if extra is None or int(extra) < 2:
                raise ValueError("one_hot columns need a class count >= 2")
            extra = int(extra)
        elif kind == "image":
            extra = bool(extra)
        return BuildBatch(self.batchsize, self.columns + ((col, kind, dtype, extra),))

    def _column(self, rows: list, col: int, kind: str, dtype: np.dtype, extra) -> np.ndarray:
        values = []
        for sample in rows:
            check_column(sample, col, repr(self))
            values.append(sample[col])
        if kind == "number":
            return np.asarray(values, dtype=dtype)
        if kind == "one_hot":
            return np.stack([one_hot(v, extra, dtype) for v in values])
        arrays = [v.pixels if isinstance(v, Image) else np.asarray(v) for v in values]
        shapes = {a.shape for a in arrays}
        if len(shapes) > 1:
            raise ValueError(f"column {col}: images of different shapes {sorted(shapes)} in one batch")
        stacked = np.stack(arrays).astype(dtype, copy=False)
        if extra and stacked.ndim == 4:
            stacked = np.ascontiguousarray(np.moveaxis(stacked, 3, 1))
        return stacked

    def process(self, iterable):
        if not self.columns:
            raise ValueError("BuildBatch has no columns; declare them with .by()")
        it = iter(iterable)
        while True:
            rows = []
            for _ in range(self.batchsize):
                try:
                    rows.append(next(it))
                except StopIteration:
                    break
            if not rows:
                return
            yield [self._column(rows, *spec) for spec in self.columns]
            if len(rows) < self.batchsize:
                return

    def __repr__(self):
        return f"BuildBatch({self.batchsize})"

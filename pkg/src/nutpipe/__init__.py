"""Lazy, chainable dataflow nuts and deep-learning preprocessing pipelines.

>>> from nutpipe import Range, Filter, Take, Collect
>>> Range(10) >> Filter(lambda x: x > 5) >> Take(3) >> Collect()
[6, 7, 8]
"""

from .core import (
    END,
    Flow,
    FlowError,
    Nut,
    Processor,
    Sink,
    Source,
    make_source,
    nut_function,
    nut_processor,
    nut_sink,
    nut_source,
    pull,
)
from .ops import (
    SKIPPED,
    Chunk,
    Collect,
    Consume,
    Filter,
    Flatten,
    LogToFile,
    Map,
    MapCol,
    MeanStd,
    MeanStdResult,
    Range,
    Take,
    TryCatch,
    Zip,
    skip,
    substitute,
)
from .csvio import CsvConfig, ReadCSV, WriteCSV
from .concurrency import ParallelMap, Prefetch
from .imaging import (
    TRANSFORMS,
    AugmentSpec,
    Image,
    ImageFormatError,
    TransformRegistry,
    TransformSpec,
    apply_augmentation,
    apply_transform,
    crop,
    fliplr,
    image_new,
    read_image_file,
    register_transform,
    resize,
    rgb2gray,
    rotate,
    write_image_file,
)
from .ml import (
    AugmentImage,
    BuildBatch,
    ReadImage,
    ReadSamples,
    SplitRandom,
    Stratify,
    TransformImage,
    apportion,
    label_index,
    one_hot,
    split_random,
    stratify,
)
from .model import Evaluate, Network, Predict, ToyModel, Train, TrainableModel

__version__ = "0.1.0"

"""Command line demo of the canonical pipeline: ``synth``, ``train`` and ``eval``.

::

    nutpipe synth --data demo --n 200 --classes 3 --side 16
    nutpipe train --data demo --epochs 30
    nutpipe eval --data demo --fold train
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .core import FlowError
from .imaging import Image, ImageFormatError, read_image_file, write_image_file
from .ml import (
    AugmentImage,
    BuildBatch,
    ReadImage,
    ReadSamples,
    TransformImage,
    apportion,
    label_index,
    split_random,
    stratify,
)
from .model import Network, ToyModel
from .ops import Collect, LogToFile, MapCol, MeanStd
from .concurrency import Prefetch

log = logging.getLogger("nutpipe")

FOLDS = ("train", "val", "test")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def _ratios(text: str) -> tuple[float, ...]:
    try:
        ratios = tuple(float(r) for r in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None
    if len(ratios) < 2 or any(r <= 0 for r in ratios):
        raise argparse.ArgumentTypeError("need at least two positive ratios")
    return ratios


# --- synth --------------------------------------------------------------------


def class_sizes(n: int, k: int) -> list[int]:
    """One sample per class, the rest split geometrically (halving per class)."""
    if k < 1 or k > n:
        raise ValueError(f"cannot fill {k} classes with {n} samples; every class needs at least one")
    return [1 + s for s in apportion(n - k, [2.0 ** -c for c in range(k)])]


def synth(n: int, k: int, side: int, seed: int, out_dir) -> None:
    """Write ``n`` noisy gray ``side x side`` images in ``k`` classes plus ``data.csv``.

    Class ``c`` has base intensity ``c * (200 // k)`` with uniform noise in
    [-20, 20]. Class sizes are deliberately imbalanced.
    """
    sizes = class_sizes(n, k)
    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
    labels = np.repeat(np.arange(k), sizes)
    labels = labels[rng.permutation(n)]
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    step = 200 // k
    width = len(str(n - 1))
    rows = []
    for i, c in enumerate(labels):
        noise = rng.integers(-20, 21, size=(side, side))
        pixels = np.clip(int(c) * step + noise, 0, 255).astype(np.uint8)
        name = f"img{i:0{width}d}.pgm"
        write_image_file(out / "images" / name, Image(pixels))
        rows.append(f"{name},class{int(c)}\n")
    with open(out / "data.csv", "w", encoding="utf-8", newline="\n") as f:
        f.writelines(rows)


# --- train / eval -------------------------------------------------------------


class _Setup:
    """What train and eval share: samples, label map, folds and preprocessing."""

    def __init__(self, args):
        self.data = Path(args.data)
        samples = ReadSamples(self.data / "data.csv") >> Collect()
        if not samples:
            raise ValueError(f"{self.data / 'data.csv'} holds no samples")
        self.labels = label_index(samples)
        self.folds = dict(zip(FOLDS, split_random(samples, args.split, args.seed)))
        first = read_image_file(self.data / "images" / samples[0][0])
        self.side = args.side or first.height
        self.rgb = first.channels == 3
        self.imagepath = str(self.data / "images" / "*")

    @property
    def k(self) -> int:
        return len(self.labels)

    def load(self):
        transform = TransformImage(0).by("resize", self.side, self.side)
        if self.rgb:
            transform = transform.by("rgb2gray")
        return MapCol(1, self.labels.__getitem__) >> ReadImage(0, self.imagepath) >> transform

    def batches(self, batch_size: int) -> BuildBatch:
        return BuildBatch(batch_size).by(0, "image", np.uint8, True).by(1, "one_hot", np.uint8, self.k)


def _resolve(data: Path, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else data / p


def train(args) -> None:
    setup = _Setup(args)
    trainset = setup.folds["train"]
    if args.stratify != "none":
        trainset = stratify(trainset, labelcol=1, mode=args.stratify, seed=args.seed)
    if not trainset:
        raise ValueError("training fold is empty")
    model = ToyModel(setup.k, setup.side * setup.side, lr=args.lr, seed=args.seed)
    network = Network(model)
    load = setup.load()
    build_batch = setup.batches(args.batch_size)
    losslog = LogToFile(_resolve(setup.data, args.log))
    for epoch in range(args.epochs):
        augment = (
            AugmentImage(0, seed=(args.seed, epoch))
            .by("fliplr", 0.5)
            .by("rotate", 0.5, [-10, 10])
        )
        samples = trainset >> load >> augment
        if args.prefetch:
            samples = samples >> Prefetch(args.batch_size)
        losses = samples >> build_batch >> network.train() >> losslog >> Collect()
        loss, std = losses >> MeanStd()
        print(f"epoch {epoch + 1} loss={loss:.6f} std={std:.6f}")
    model.save(setup.data / "model.bin")


def evaluate(args) -> float:
    setup = _Setup(args)
    path = setup.data / "model.bin"
    if not path.exists():
        raise FileNotFoundError(f"no trained model at {path}; run 'train' first")
    model = ToyModel.load(path)
    if model.d != setup.side * setup.side or model.k != setup.k:
        raise ValueError(
            f"model shape k={model.k}, d={model.d} does not match data (k={setup.k}, side={setup.side})"
        )
    fold = setup.folds[args.fold]
    accuracy = fold >> setup.load() >> setup.batches(args.batch_size) >> Network(model).evaluate()
    print(f"accuracy={accuracy!r}")
    return accuracy


# --- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", required=True, help="dataset directory")
    common.add_argument("--seed", type=int, default=0)

    pipeline = argparse.ArgumentParser(add_help=False)
    pipeline.add_argument("--batch-size", type=_positive_int, default=16)
    pipeline.add_argument("--split", type=_ratios, default=(60.0, 20.0, 20.0), help="fold ratios, e.g. 60,20,20")
    pipeline.add_argument("--side", type=_positive_int, default=None,
                          help="image side after resizing (default: size of the first image)")

    parser = argparse.ArgumentParser(prog="nutpipe", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic image dataset")
    p.add_argument("--n", type=_positive_int, default=200)
    p.add_argument("--classes", type=_positive_int, default=3)
    p.add_argument("--side", type=_positive_int, default=16)

    p = sub.add_parser("train", parents=[common, pipeline], help="train the toy model")
    p.add_argument("--epochs", type=_positive_int, default=30)
    p.add_argument("--lr", type=_positive_float, default=0.1)
    p.add_argument("--stratify", choices=("up", "down", "none"), default="up")
    p.add_argument("--log", default="losses.log", help="loss log; relative paths are inside --data")
    p.add_argument("--prefetch", action="store_true")

    p = sub.add_parser("eval", parents=[common, pipeline], help="report accuracy of a trained model")
    p.add_argument("--fold", choices=FOLDS, default="test")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "synth":
            synth(args.n, args.classes, args.side, args.seed, args.data)
        elif args.command == "train":
            train(args)
        else:
            evaluate(args)
    except FlowError as exc:
        log.debug("pipeline failure", exc_info=True)
        print(f"error: pipeline failed in {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, ImageFormatError) as exc:
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

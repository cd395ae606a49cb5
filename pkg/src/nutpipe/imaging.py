"""Minimal 8-bit raster images, Netpbm (P5/P6) I/O, transforms and augmentation.

Images are ``height x width x channels`` uint8 arrays wrapped in
:class:`Image`; channels is 1 (gray) or 3 (RGB). All geometric operations
use nearest-neighbour sampling so results are integer exact.

Transforms are looked up by name in a :class:`TransformRegistry`. The
default registry ships ``identity``, ``resize``, ``crop``, ``rgb2gray``,
``fliplr`` and ``rotate``; add your own with :func:`register_transform`.
"""

from __future__ import annotations

import inspect
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Image",
    "ImageFormatError",
    "image_new",
    "read_image_file",
    "write_image_file",
    "TransformSpec",
    "AugmentSpec",
    "TransformRegistry",
    "TRANSFORMS",
    "register_transform",
    "apply_transform",
    "apply_augmentation",
    "resize",
    "crop",
    "rgb2gray",
    "fliplr",
    "rotate",
]


class Image:
    """An 8-bit raster of shape ``(height, width, channels)``."""

    __slots__ = ("pixels",)

    def __init__(self, pixels):
        pixels = np.asarray(pixels)
        if pixels.ndim == 2:
            pixels = pixels[:, :, None]
        if pixels.ndim != 3 or pixels.shape[2] not in (1, 3):
            raise ValueError(f"image must be HxW, HxWx1 or HxWx3, got shape {pixels.shape}")
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise ValueError(f"image must be at least 1x1, got shape {pixels.shape}")
        if pixels.dtype != np.uint8:
            if np.any(pixels < 0) or np.any(pixels > 255):
                raise ValueError("pixel values must lie in [0, 255]")
            pixels = pixels.astype(np.uint8)
        self.pixels = np.ascontiguousarray(pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def shape(self) -> tuple:
        return self.pixels.shape

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))

    __hash__ = None

    def __repr__(self):
        return f"Image({self.height}x{self.width}x{self.channels})"


def image_new(height: int, width: int, channels: int = 1, fill: int = 0) -> Image:
    if channels not in (1, 3):
        raise ValueError(f"channels must be 1 or 3, got {channels}")
    if height < 1 or width < 1:
        raise ValueError(f"image dimensions must be positive, got {height}x{width}")
    if not 0 <= fill <= 255:
        raise ValueError(f"fill must be in [0, 255], got {fill}")
    return Image(np.full((height, width, channels), fill, dtype=np.uint8))


# --- Netpbm -----------------------------------------------------------------


class ImageFormatError(ValueError):
    pass


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace separated header tokens, skipping '#' comments.

    Returns the tokens and the offset of the byte after the single
    whitespace that terminates the last token.
    """
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated header")
        tokens.append(data[start:pos])
    if pos >= n or not data[pos : pos + 1].isspace():
        raise ImageFormatError("header must end with a single whitespace byte")
    return tokens, pos + 1


def decode_netpbm(data: bytes) -> Image:
    """Decode binary P5 (gray) or P6 (RGB) data with maxval 255."""
    magic = data[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise ImageFormatError(f"unsupported magic number {magic!r}")
    tokens, offset = _header_tokens(data[2:], 3)
    offset += 2
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise ImageFormatError(f"non-numeric header fields {tokens!r}") from None
    if maxval != 255:
        raise ImageFormatError(f"unsupported maxval {maxval} (only 255)")
    if width < 1 or height < 1:
        raise ImageFormatError(f"invalid dimensions {width}x{height}")
    size = width * height * channels
    payload = data[offset : offset + size]
    if len(payload) != size:
        raise ImageFormatError(f"expected {size} pixel bytes, found {len(payload)}")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return Image(pixels.copy())


def encode_netpbm(img: Image) -> bytes:
    magic = b"P5" if img.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, img.width, img.height)
    return header + img.pixels.tobytes()


def read_image_file(path) -> Image:
    """Load a binary PGM (P5) or PPM (P6) file with maxval 255.

    Raises ``FileNotFoundError`` for missing files and
    :class:`ImageFormatError` (naming the path) for anything else it
    cannot decode.
    """
    with open(path, "rb") as f:
        data = f.read()
    try:
        return decode_netpbm(data)
    except ImageFormatError as exc:
        raise ImageFormatError(f"{os.fspath(path)}: {exc}") from None


def write_image_file(path, img: Image) -> None:
    """Write ``img`` as P5 (1 channel) or P6 (3 channels); the output is bit exact."""
    with open(path, "wb") as f:
        f.write(encode_netpbm(img))


# --- transforms ---------------------------------------------------------------


def identity(img: Image) -> Image:
    return Image(img.pixels.copy())


def _nearest_index(n_out: int, n_in: int) -> np.ndarray:
    # Pixel-centre alignment; equal sizes map onto themselves.
    idx = np.floor((np.arange(n_out) + 0.5) * n_in / n_out).astype(np.int64)
    return np.clip(idx, 0, n_in - 1)


def resize(img: Image, width: int, height: int) -> Image:
    """Nearest-neighbour resize. Note the argument order: width first, then height."""
    width, height = int(width), int(height)
    if width < 1 or height < 1:
        raise ValueError(f"resize target must be positive, got {width}x{height}")
    rows = _nearest_index(height, img.height)
    cols = _nearest_index(width, img.width)
    return Image(img.pixels[rows][:, cols])


def crop(img: Image, x: int, y: int, width: int, height: int) -> Image:
    """Cut out the window with top-left corner (x, y); it must lie inside the image."""
    x, y, width, height = int(x), int(y), int(width), int(height)
    if width < 1 or height < 1 or x < 0 or y < 0 or x + width > img.width or y + height > img.height:
        raise ValueError(
            f"crop window ({x}, {y}, {width}, {height}) outside {img.width}x{img.height} image"
        )
    return Image(img.pixels[y : y + height, x : x + width].copy())


def rgb2gray(img: Image) -> Image:
    """Luma with BT.601 weights, rounded half up. Gray images are returned as copies."""
    if img.channels == 1:
        return identity(img)
    rgb = img.pixels.astype(np.float64)
    y = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return Image(np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8))


def fliplr(img: Image) -> Image:
    return Image(img.pixels[:, ::-1].copy())


def rotate(img: Image, angle: float) -> Image:
    """Rotate counterclockwise by ``angle`` degrees about the image centre.

    The canvas keeps its size; pixels mapped from outside the source are 0.
    """
    theta = math.radians(float(angle))
    c, s = math.cos(theta), math.sin(theta)
    h, w = img.height, img.width
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rows, cols = np.mgrid[0:h, 0:w]
    dx = cols - cx
    dy = cy - rows  # y axis pointing up
    # Inverse mapping: rotate each output offset back by -angle.
    sx = c * dx + s * dy
    sy = -s * dx + c * dy
    src_col = np.floor(cx + sx + 0.5).astype(np.int64)
    src_row = np.floor(cy - sy + 0.5).astype(np.int64)
    inside = (src_col >= 0) & (src_col < w) & (src_row >= 0) & (src_row < h)
    out = np.zeros_like(img.pixels)
    out[inside] = img.pixels[src_row[inside], src_col[inside]]
    return Image(out)


def _arity(fn: Callable) -> int | None:
    """Number of parameters after the image, or None if variadic."""
    try:
        params = list(inspect.signature(fn).parameters.values())[1:]
    except (TypeError, ValueError):
        return None
    if any(p.kind in (p.VAR_POSITIONAL, p.VAR_KEYWORD) for p in params):
        return None
    return sum(1 for p in params if p.default is p.empty and p.kind != p.KEYWORD_ONLY)


class TransformRegistry:
    """Name to ``fn(image, *params) -> image`` lookup table."""

    def __init__(self, builtins: bool = True):
        self._fns: dict[str, Callable[..., Image]] = {}
        if builtins:
            for name, fn in _BUILTINS.items():
                self.register(name, fn)

    def register(self, name: str, fn: Callable[..., Image]) -> None:
        self._fns[name] = fn

    def __contains__(self, name) -> bool:
        return name in self._fns

    def names(self) -> list[str]:
        return sorted(self._fns)

    def get(self, name: str) -> Callable[..., Image]:
        try:
            return self._fns[name]
        except KeyError:
            raise KeyError(f"unknown transformation {name!r}") from None

    def apply(self, name: str, img: Image, params: Sequence = ()) -> Image:
        fn = self.get(name)
        arity = _arity(fn)
        if arity is not None and len(params) != arity:
            raise ValueError(f"transformation {name!r} takes {arity} parameters, got {len(params)}")
        return fn(img, *params)


_BUILTINS = {
    "identity": identity,
    "resize": resize,
    "crop": crop,
    "rgb2gray": rgb2gray,
    "fliplr": fliplr,
    "rotate": rotate,
}

#: Process-wide default registry.
TRANSFORMS = TransformRegistry()


def register_transform(name: str, fn: Callable[..., Image], registry: TransformRegistry | None = None) -> None:
    """Make ``fn`` available under ``name``; an existing entry is replaced."""
    (registry or TRANSFORMS).register(name, fn)


@dataclass(frozen=True)
class TransformSpec:
    name: str
    params: tuple = ()


@dataclass(frozen=True)
class AugmentSpec:
    """Apply transform ``name`` with ``probability``, drawing one parameter per range."""

    name: str
    probability: float
    ranges: tuple = field(default=())

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability must be in [0, 1], got {self.probability}")
        ranges = tuple(tuple(r) for r in self.ranges)
        for r in ranges:
            if len(r) != 2 or r[0] > r[1]:
                raise ValueError(f"parameter range must be [lo, hi] with lo <= hi, got {list(r)}")
        object.__setattr__(self, "ranges", ranges)


def apply_transform(spec: TransformSpec, img: Image, registry: TransformRegistry | None = None) -> Image:
    return (registry or TRANSFORMS).apply(spec.name, img, spec.params)


def apply_augmentation(
    specs: Sequence[AugmentSpec],
    imgs: Sequence[Image],
    rng: np.random.Generator,
    registry: TransformRegistry | None = None,
) -> list[Image]:
    """Randomly augment a group of same-sized images in lockstep.

    For each spec in order, one uniform draw decides whether it fires
    (``u < probability``); if so its parameters are drawn once, uniformly
    from ``[lo, hi)``, and the same transform is applied to every image.
    """
    registry = registry or TRANSFORMS
    imgs = list(imgs)
    if imgs:
        size = (imgs[0].height, imgs[0].width)
        for img in imgs[1:]:
            if (img.height, img.width) != size:
                raise ValueError(
                    f"synchronized augmentation needs equal image sizes, got {size} and {(img.height, img.width)}"
                )
    for spec in specs:
        registry.get(spec.name)
        if rng.random() >= spec.probability:
            continue
        params = [float(rng.uniform(lo, hi)) for lo, hi in spec.ranges]
        imgs = [registry.apply(spec.name, img, params) for img in imgs]
    return imgs

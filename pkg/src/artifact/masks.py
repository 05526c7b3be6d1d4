"""Binary mask primitives: PNG decoding, morphology, and confusion counts.

Masks are immutable value objects over a row-major boolean grid.  All
operations here are pure functions; results never alias caller-owned
buffers, so values are safe to share across threads.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import InvalidInputError, MaskDecodeError

Connectivity = Literal["four", "eight"]

DEFAULT_THRESHOLD = 127
DEFAULT_CONNECTIVITY: Connectivity = "eight"

# Rec. 601 luma weights, used for RGB inputs.
_REC601 = np.array([0.299, 0.587, 0.114], dtype=np.float64)

_STRUCTURES = {
    "four": np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    "eight": np.ones((3, 3), dtype=bool),
}


class BinaryMask:
    """Per-pixel artifact indicator over a ``width x height`` grid.

    ``bits`` is a read-only boolean array of shape ``(height, width)``;
    True marks artifact (foreground) pixels.
    """

    __slots__ = ("_bits",)

    def __init__(self, bits: np.ndarray):
        arr = np.asarray(bits, dtype=bool)
        if arr.ndim != 2:
            raise InvalidInputError(f"mask grid must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidInputError(f"mask dimensions must be >= 1, got {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        self._bits = arr

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.ones((height, width), dtype=bool))

    @classmethod
    def from_pixels(cls, width: int, height: int, pixels: Iterable[tuple[int, int]]) -> "BinaryMask":
        """Build a mask with the given (x, y) pixels set."""
        bits = np.zeros((height, width), dtype=bool)
        for x, y in pixels:
            bits[y, x] = True
        return cls(bits)

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def width(self) -> int:
        return self._bits.shape[1]

    @property
    def height(self) -> int:
        return self._bits.shape[0]

    def count(self) -> int:
        """Number of foreground pixels."""
        return int(np.count_nonzero(self._bits))

    def is_empty(self) -> bool:
        return not self._bits.any()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self._bits.shape == other._bits.shape and bool(
            np.array_equal(self._bits, other._bits)
        )

    def __hash__(self) -> int:
        return hash((self._bits.shape, self._bits.tobytes()))

    def __repr__(self) -> str:
        return f"BinaryMask({self.width}x{self.height}, {self.count()} set)"


@dataclass(frozen=True, order=True)
class Box:
    """Inclusive pixel-coordinate bounding box."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x0 < 0 or self.y0 < 0 or self.x1 < self.x0 or self.y1 < self.y0:
            raise InvalidInputError(
                f"box coordinates out of order: ({self.x0},{self.y0})-({self.x1},{self.y1})"
            )

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    def contains(self, other: "Box") -> bool:
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and self.x1 >= other.x1
            and self.y1 >= other.y1
        )


@dataclass(frozen=True)
class Component:
    """One connected component of a mask's foreground."""

    label: int
    area: int
    bbox: Box
    pixels: frozenset[tuple[int, int]]


@dataclass(frozen=True)
class ComponentSet:
    """Connected components in raster-scan label order."""

    components: tuple[Component, ...]
    connectivity: Connectivity

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)


@dataclass(frozen=True)
class Confusion:
    """Pixel confusion counts for the artifact (foreground) class."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise InvalidInputError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.tn + other.tn,
        )


def decode_mask(png_bytes: bytes, threshold: int = DEFAULT_THRESHOLD, source: str | None = None) -> BinaryMask:
    """Decode an encoded image into a mask: foreground iff luminance > threshold.

    Grayscale inputs compare pixel values directly; RGB inputs use Rec. 601
    luma.  ``source`` names the origin (e.g. a file path) in error messages.
    """
    if not 0 <= threshold <= 255:
        raise InvalidInputError(f"threshold must be in [0, 255], got {threshold}")
    where = f" ({source})" if source else ""
    try:
        img = Image.open(io.BytesIO(png_bytes))
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise MaskDecodeError(f"cannot decode mask image{where}: {exc}") from exc
    if img.width < 1 or img.height < 1:
        raise InvalidInputError(f"zero-area mask image{where}")
    if img.mode in ("L", "1", "I", "I;16"):
        lum = np.asarray(img.convert("I"), dtype=np.float64)
    else:
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
        lum = rgb @ _REC601
    return BinaryMask(lum > threshold)


def encode_mask(mask: BinaryMask) -> bytes:
    """Encode a mask as an 8-bit grayscale PNG with values {0, 255}."""
    arr = mask.bits.astype(np.uint8) * 255
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def label_components(bits: np.ndarray, connectivity: Connectivity) -> tuple[np.ndarray, int]:
    """Label foreground regions; labels are 1..N in raster order of first pixel."""
    if connectivity not in _STRUCTURES:
        raise InvalidInputError(f"connectivity must be 'four' or 'eight', got {connectivity!r}")
    labels, n = ndimage.label(bits, structure=_STRUCTURES[connectivity])
    if n <= 1:
        return labels, int(n)
    # scipy's label order is not contractual; remap to raster-scan order.
    flat = labels.ravel()
    nonzero = np.flatnonzero(flat)
    first_seen = np.full(n + 1, flat.size, dtype=np.int64)
    np.minimum.at(first_seen, flat[nonzero], nonzero)
    order = np.argsort(first_seen[1:], kind="stable") + 1
    remap = np.zeros(n + 1, dtype=labels.dtype)
    remap[order] = np.arange(1, n + 1)
    return remap[labels], int(n)


def connected_components(mask: BinaryMask, connectivity: Connectivity = DEFAULT_CONNECTIVITY) -> ComponentSet:
    """Partition the mask foreground into connected components.

    Components carry 1-based labels assigned in raster-scan order of each
    component's first-encountered pixel, so the result is deterministic.
    """
    labels, n = label_components(mask.bits, connectivity)
    if n == 0:
        return ComponentSet(components=(), connectivity=connectivity)
    ys, xs = np.nonzero(labels)
    lbls = labels[ys, xs]
    order = np.argsort(lbls, kind="stable")
    ys, xs, lbls = ys[order], xs[order], lbls[order]
    bounds = np.searchsorted(lbls, np.arange(1, n + 2))
    comps = []
    for label in range(1, n + 1):
        lo, hi = bounds[label - 1], bounds[label]
        cx, cy = xs[lo:hi], ys[lo:hi]
        comps.append(
            Component(
                label=label,
                area=int(hi - lo),
                bbox=Box(int(cx.min()), int(cy.min()), int(cx.max()), int(cy.max())),
                pixels=frozenset(zip(cx.tolist(), cy.tolist())),
            )
        )
    return ComponentSet(components=tuple(comps), connectivity=connectivity)


def dilate(mask: BinaryMask, radius: int) -> BinaryMask:
    """Dilate by a square structuring element of side ``2 * radius + 1``.

    An output pixel is set iff any input pixel within Chebyshev distance
    ``radius`` is set.
    """
    if radius < 0:
        raise InvalidInputError(f"dilation radius must be >= 0, got {radius}")
    if radius == 0:
        return mask
    out = ndimage.maximum_filter(
        mask.bits.astype(np.uint8), size=2 * radius + 1, mode="constant", cval=0
    )
    return BinaryMask(out > 0)


def erode(mask: BinaryMask, radius: int) -> BinaryMask:
    """Erode by the square structuring element; outside the grid counts as background."""
    if radius < 0:
        raise InvalidInputError(f"erosion radius must be >= 0, got {radius}")
    if radius == 0:
        return mask
    out = ndimage.minimum_filter(
        mask.bits.astype(np.uint8), size=2 * radius + 1, mode="constant", cval=0
    )
    return BinaryMask(out > 0)


def bounding_box(pixels: Iterable[tuple[int, int]]) -> Box:
    """Tight bounding box of a non-empty (x, y) pixel set."""
    xs, ys = [], []
    for x, y in pixels:
        xs.append(x)
        ys.append(y)
    if not xs:
        raise InvalidInputError("bounding_box of an empty pixel set")
    return Box(min(xs), min(ys), max(xs), max(ys))


def confusion_counts(pred: BinaryMask, gt: BinaryMask) -> Confusion:
    """Per-pixel confusion of a predicted mask against ground truth."""
    if (pred.width, pred.height) != (gt.width, gt.height):
        raise InvalidInputError(
            f"mask dimensions differ: pred {pred.width}x{pred.height} "
            f"vs gt {gt.width}x{gt.height}"
        )
    p, g = pred.bits, gt.bits
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = p.size - tp - fp - fn
    return Confusion(tp=tp, fp=fp, fn=fn, tn=tn)


def default_dilation_radius(width: int, height: int, percent: float = 1.0) -> int:
    """Slight-dilation default: ``percent`` of the longest side, at least 1 px."""
    if percent < 0:
        raise InvalidInputError(f"percent must be >= 0, got {percent}")
    side = max(width, height)
    return max(1, int(np.floor(percent / 100.0 * side + 0.5)))

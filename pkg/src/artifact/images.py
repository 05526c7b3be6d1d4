"""8-bit RGB image values and PNG round-tripping."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import InvalidInputError, MaskDecodeError

# Rec. 601 luma weights.
_REC601 = np.array([0.299, 0.587, 0.114], dtype=np.float64)


class RgbImage:
    """Immutable row-major 8-bit RGB image."""

    __slots__ = ("_pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InvalidInputError(f"image array must have shape (h, w, 3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidInputError(f"image dimensions must be >= 1, got {arr.shape}")
        arr = arr.astype(np.uint8, copy=True)
        arr.setflags(write=False)
        self._pixels = arr

    @classmethod
    def filled(cls, width: int, height: int, color: tuple[int, int, int]) -> "RgbImage":
        return cls(np.full((height, width, 3), color, dtype=np.uint8))

    @property
    def pixels(self) -> np.ndarray:
        return self._pixels

    @property
    def width(self) -> int:
        return self._pixels.shape[1]

    @property
    def height(self) -> int:
        return self._pixels.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RgbImage):
            return NotImplemented
        return self._pixels.shape == other._pixels.shape and bool(
            np.array_equal(self._pixels, other._pixels)
        )

    def __hash__(self) -> int:
        return hash((self._pixels.shape, self._pixels.tobytes()))

    def __repr__(self) -> str:
        return f"RgbImage({self.width}x{self.height})"


def decode_image(data: bytes, source: str | None = None) -> RgbImage:
    """Decode encoded image bytes into an RGB image."""
    where = f" ({source})" if source else ""
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise MaskDecodeError(f"cannot decode image{where}: {exc}") from exc
    if img.width < 1 or img.height < 1:
        raise InvalidInputError(f"zero-area image{where}")
    return RgbImage(np.asarray(img.convert("RGB")))


def encode_image(image: RgbImage) -> bytes:
    """Encode an RGB image as PNG bytes."""
    buf = io.BytesIO()
    Image.fromarray(image.pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def luminance(image: RgbImage) -> np.ndarray:
    """Rec. 601 luma of an RGB image as a float64 (h, w) array."""
    return image.pixels.astype(np.float64) @ _REC601


def decode_label_map(data: bytes, source: str | None = None) -> np.ndarray:
    """Decode a single-channel class-id image into an int array.

    Palette images yield their palette indices; grayscale images yield
    their pixel values.  Multi-channel images are rejected because a class
    id per pixel is ambiguous there.
    """
    where = f" ({source})" if source else ""
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise MaskDecodeError(f"cannot decode label map{where}: {exc}") from exc
    if img.mode == "P":
        arr = np.asarray(img)
    elif img.mode in ("L", "1", "I", "I;16"):
        arr = np.asarray(img.convert("I"))
    else:
        raise InvalidInputError(
            f"label map{where} must be single-channel, got mode {img.mode!r}"
        )
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidInputError(f"zero-area label map{where}")
    return arr.astype(np.int64)

"""Pluggable detector and inpainter backends.

Detectors produce artifact masks; inpainters fill masked regions.  Three
detector variants (precomputed file, remote service, deterministic stub)
and two inpainter variants (remote, stub) cover batch runs against live
model servers as well as fully offline, reproducible tests.
"""

from __future__ import annotations

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence
from urllib.parse import urlparse

import numpy as np
import requests
from PIL import Image
from scipy import ndimage

from .errors import BackendError, InvalidInputError, MaskLookupError, ProtocolError
from .images import RgbImage, decode_image, encode_image, luminance
from .masks import DEFAULT_THRESHOLD, BinaryMask, decode_mask, dilate, erode

WILDCARD_PROMPT = "photograph of a beautiful empty scene, highest quality settings"
WILDCARD_DOMAIN = "*"

DEFAULT_TIMEOUT = 30.0
DEFAULT_RETRIES = 2
DEFAULT_BACKOFF = 0.5
DEFAULT_MAX_SIDE = 512
DEFAULT_LAPLACIAN_THRESHOLD = 32.0
DEFAULT_BOUNDARY_RING = 4

_LAPLACIAN = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64)


@dataclass(frozen=True)
class PromptRule:
    """Maps a manifest domain to the fixed inpainting text prompt."""

    domain: str
    prompt: str

    def __post_init__(self):
        if not self.domain or not self.prompt:
            raise InvalidInputError("prompt rule domain and prompt must be non-empty")


DEFAULT_PROMPT_RULES: tuple[PromptRule, ...] = (
    PromptRule("ffhq", "a person's face"),
    PromptRule("celebahq", "a person's face"),
    PromptRule("human", "a person"),
    PromptRule("vton", "a person"),
    PromptRule("lsun_bedroom", "bedroom"),
    PromptRule(WILDCARD_DOMAIN, WILDCARD_PROMPT),
)


def default_prompt(rules: Sequence[PromptRule], domain: str) -> str:
    """Exact-match rule wins; otherwise the wildcard prompt."""
    for rule in rules:
        if rule.domain == domain:
            return rule.prompt
    for rule in rules:
        if rule.domain == WILDCARD_DOMAIN:
            return rule.prompt
    return WILDCARD_PROMPT


class DetectorBackend(ABC):
    """Produces an artifact mask for an image."""

    #: Backends that cannot tolerate concurrent calls declare 1 here.
    max_concurrency: int | None = None

    @abstractmethod
    def detect(self, image_id: str, image: RgbImage) -> BinaryMask:
        """Return a mask dimension-matched to ``image``."""


class InpainterBackend(ABC):
    """Fills the masked region of an image."""

    max_concurrency: int | None = None

    @abstractmethod
    def inpaint(self, image: RgbImage, mask: BinaryMask, prompt: str) -> RgbImage:
        """Return an image of identical dimensions with the mask region filled."""


class FileDetector(DetectorBackend):
    """Serves precomputed masks from a per-image-id file map."""

    def __init__(self, mask_paths: Mapping[str, str | Path], threshold: int = DEFAULT_THRESHOLD):
        paths = {image_id: Path(p) for image_id, p in mask_paths.items()}
        missing = [str(p) for p in paths.values() if not p.is_file()]
        if missing:
            raise InvalidInputError(f"mask files do not exist: {', '.join(sorted(missing))}")
        self._paths = paths
        self._threshold = threshold

    def detect(self, image_id: str, image: RgbImage) -> BinaryMask:
        path = self._paths.get(image_id)
        if path is None:
            raise MaskLookupError(f"no mask mapped for image_id {image_id!r}")
        mask = decode_mask(path.read_bytes(), threshold=self._threshold, source=str(path))
        if (mask.width, mask.height) != (image.width, image.height):
            raise ProtocolError(
                f"mask {mask.width}x{mask.height} from {path} does not match "
                f"image {image.width}x{image.height}"
            )
        return mask


class StubDetector(DetectorBackend):
    """Deterministic high-frequency detector for tests and desk-scale runs.

    Flags pixels whose absolute discrete Laplacian of luminance exceeds the
    threshold, then applies one radius-1 opening to drop isolated pixels.
    """

    def __init__(self, laplacian_threshold: float = DEFAULT_LAPLACIAN_THRESHOLD):
        if laplacian_threshold < 0:
            raise InvalidInputError(
                f"laplacian threshold must be >= 0, got {laplacian_threshold}"
            )
        self.laplacian_threshold = laplacian_threshold

    def detect(self, image_id: str, image: RgbImage) -> BinaryMask:
        lap = ndimage.convolve(luminance(image), _LAPLACIAN, mode="nearest")
        raw = BinaryMask(np.abs(lap) > self.laplacian_threshold)
        return dilate(erode(raw, 1), 1)


class StubInpainter(InpainterBackend):
    """Fills the masked region with the mean color of a ring around it.

    The ring is the set of unmasked pixels within Chebyshev distance
    ``boundary_ring`` of the mask; if it is empty the global unmasked mean
    is used, and a fully masked image is returned unchanged.
    """

    def __init__(self, boundary_ring: int = DEFAULT_BOUNDARY_RING):
        if boundary_ring < 0:
            raise InvalidInputError(f"boundary ring must be >= 0, got {boundary_ring}")
        self.boundary_ring = boundary_ring

    def inpaint(self, image: RgbImage, mask: BinaryMask, prompt: str) -> RgbImage:
        if (mask.width, mask.height) != (image.width, image.height):
            raise InvalidInputError(
                f"mask {mask.width}x{mask.height} does not match image "
                f"{image.width}x{image.height}"
            )
        if mask.is_empty():
            return image
        bits = mask.bits
        unmasked = ~bits
        if not unmasked.any():
            return image
        ring = dilate(mask, self.boundary_ring).bits & unmasked
        source = ring if ring.any() else unmasked
        fill = np.floor(image.pixels[source].mean(axis=0) + 0.5).astype(np.uint8)
        out = image.pixels.copy()
        out[bits] = fill
        return RgbImage(out)


def _check_url(endpoint: str) -> str:
    parsed = urlparse(endpoint)
    if parsed.scheme not in ("http", "https") or not parsed.netloc:
        raise InvalidInputError(f"endpoint must be an http(s) URL, got {endpoint!r}")
    return endpoint.rstrip("/")


class _RemoteClient:
    """Shared HTTP plumbing: session pooling, retries with backoff, errors."""

    def __init__(
        self,
        endpoint: str,
        timeout: float,
        retries: int,
        token: str | None,
        backoff: float,
        session: requests.Session | None,
    ):
        if timeout <= 0:
            raise InvalidInputError(f"timeout must be > 0, got {timeout}")
        if retries < 0:
            raise InvalidInputError(f"retries must be >= 0, got {retries}")
        self.endpoint = _check_url(endpoint)
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._session = session or requests.Session()
        self._headers = {"Authorization": f"Bearer {token}"} if token else {}

    def post(self, path: str, **kwargs) -> requests.Response:
        """POST with up to ``retries`` retries on timeouts, connection errors, and 5xx."""
        url = self.endpoint + path
        headers = {**self._headers, **kwargs.pop("headers", {})}
        last_error: str | None = None
        last_status: int | None = None
        for attempt in range(self.retries + 1):
            if attempt > 0 and self.backoff > 0:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._session.post(url, timeout=self.timeout, headers=headers, **kwargs)
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_error, last_status = f"{type(exc).__name__}: {exc}", None
                continue
            if resp.status_code == 200:
                return resp
            last_status = resp.status_code
            last_error = _error_body(resp)
            if resp.status_code < 500:
                break
        raise BackendError(
            f"POST {url} failed after {self.retries + 1} attempt(s): {last_error}",
            status=last_status,
        )


def _error_body(resp: requests.Response) -> str:
    try:
        doc = resp.json()
        if isinstance(doc, dict) and "error" in doc:
            return f"HTTP {resp.status_code}: {doc['error']}"
    except ValueError:
        pass
    return f"HTTP {resp.status_code}"


class RemoteDetector(DetectorBackend):
    """Client for the /segment wire contract: PNG in, grayscale PNG mask out."""

    def __init__(
        self,
        endpoint: str,
        timeout: float = DEFAULT_TIMEOUT,
        retries: int = DEFAULT_RETRIES,
        token: str | None = None,
        backoff: float = DEFAULT_BACKOFF,
        session: requests.Session | None = None,
    ):
        self._client = _RemoteClient(endpoint, timeout, retries, token, backoff, session)

    def detect(self, image_id: str, image: RgbImage) -> BinaryMask:
        resp = self._client.post(
            "/segment",
            data=encode_image(image),
            headers={"Content-Type": "image/png"},
        )
        mask = decode_mask(resp.content, source=f"{self._client.endpoint}/segment")
        if (mask.width, mask.height) != (image.width, image.height):
            raise ProtocolError(
                f"remote mask {mask.width}x{mask.height} does not match image "
                f"{image.width}x{image.height}"
            )
        return mask


class RemoteInpainter(InpainterBackend):
    """Client for the /inpaint wire contract (multipart image + mask + prompt).

    Images whose longest side exceeds ``max_side`` are downscaled for the
    round trip, the result is upscaled back, and changes are then restricted
    to the mask so unmasked pixels stay untouched.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = DEFAULT_TIMEOUT,
        retries: int = DEFAULT_RETRIES,
        max_side: int = DEFAULT_MAX_SIDE,
        token: str | None = None,
        backoff: float = DEFAULT_BACKOFF,
        session: requests.Session | None = None,
    ):
        if max_side < 64:
            raise InvalidInputError(f"max_side must be >= 64, got {max_side}")
        self.max_side = max_side
        self._client = _RemoteClient(endpoint, timeout, retries, token, backoff, session)

    def inpaint(self, image: RgbImage, mask: BinaryMask, prompt: str) -> RgbImage:
        if (mask.width, mask.height) != (image.width, image.height):
            raise InvalidInputError(
                f"mask {mask.width}x{mask.height} does not match image "
                f"{image.width}x{image.height}"
            )
        if mask.is_empty():
            return image
        width, height = image.width, image.height
        resized = max(width, height) > self.max_side
        if resized:
            ratio = self.max_side / max(width, height)
            send_w = max(1, round(width * ratio))
            send_h = max(1, round(height * ratio))
            send_image = _resize_image(image, send_w, send_h)
            send_mask = _resize_mask(mask, send_w, send_h)
        else:
            send_image, send_mask = image, mask
        from .masks import encode_mask

        resp = self._client.post(
            "/inpaint",
            files={
                "image": ("image.png", encode_image(send_image), "image/png"),
                "mask": ("mask.png", encode_mask(send_mask), "image/png"),
                "prompt": (None, prompt),
            },
        )
        result = decode_image(resp.content, source=f"{self._client.endpoint}/inpaint")
        if (result.width, result.height) != (send_image.width, send_image.height):
            raise ProtocolError(
                f"remote inpaint returned {result.width}x{result.height} for a "
                f"{send_image.width}x{send_image.height} request"
            )
        if not resized:
            return result
        upscaled = _resize_image(result, width, height)
        out = np.where(mask.bits[:, :, None], upscaled.pixels, image.pixels)
        return RgbImage(out)


def _resize_image(image: RgbImage, width: int, height: int) -> RgbImage:
    pil = Image.fromarray(image.pixels, mode="RGB").resize((width, height), Image.BILINEAR)
    return RgbImage(np.asarray(pil))


def _resize_mask(mask: BinaryMask, width: int, height: int) -> BinaryMask:
    arr = mask.bits.astype(np.uint8) * 255
    pil = Image.fromarray(arr, mode="L").resize((width, height), Image.NEAREST)
    return BinaryMask(np.asarray(pil) > 127)

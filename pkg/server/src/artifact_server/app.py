"""HTTP wire layer: /health, /segment, /inpaint.

Contract: /segment takes a PNG body and returns a {0,255} PNG mask of
identical dimensions; /inpaint takes multipart image/mask/prompt and
returns a PNG of identical dimensions with only masked pixels changed;
errors come back as JSON ``{"error": str}`` with status 400 (bad
request) or 500 (inference failure).  Requests larger than the
configured ``max_side`` are processed at reduced resolution and the
result is resampled back to the request dimensions.
"""

from __future__ import annotations

import io

import numpy as np
from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from PIL import Image

from .config import ServerConfig
from .models import Inpainter, Segmenter


class BadRequestError(Exception):
    pass


class InferenceError(Exception):
    pass


def _decode_rgb(data: bytes, what: str) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except Exception as exc:
        raise BadRequestError(f"cannot decode {what}: {exc}") from exc


def _decode_mask(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("L")) > 127
    except Exception as exc:
        raise BadRequestError(f"cannot decode mask: {exc}") from exc


def _png(array: np.ndarray, mode: str) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(array, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def _reduced_dims(width: int, height: int, max_side: int) -> tuple[int, int]:
    ratio = max_side / max(width, height)
    return max(1, round(width * ratio)), max(1, round(height * ratio))


def _resize(array: np.ndarray, dims: tuple[int, int], resample) -> np.ndarray:
    return np.asarray(Image.fromarray(array).resize(dims, resample))


def create_app(
    config: ServerConfig,
    *,
    segmenter: Segmenter | None = None,
    inpainter: Inpainter | None = None,
) -> FastAPI:
    """Load models (unless injected) and wire up the three endpoints."""
    segmenter = segmenter or Segmenter(config.seg_checkpoint, config.device)
    inpainter = inpainter or Inpainter(config.inpaint_model_id)
    max_side = config.max_side

    app = FastAPI(title="artifact model server", docs_url=None, redoc_url=None)

    @app.exception_handler(BadRequestError)
    async def bad_request(_request: Request, exc: BadRequestError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(InferenceError)
    async def inference_failure(_request: Request, exc: InferenceError):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def malformed(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": f"malformed request: {exc}"})

    @app.exception_handler(Exception)
    async def unexpected(_request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.get("/health")
    async def health():
        return {"status": "ok"}

    @app.post("/segment")
    async def segment(request: Request):
        rgb = _decode_rgb(await request.body(), "image")
        height, width = rgb.shape[:2]
        reduced = max(width, height) > max_side
        work = (
            _resize(rgb, _reduced_dims(width, height, max_side), Image.BILINEAR)
            if reduced
            else rgb
        )
        try:
            mask = segmenter.mask(work)
        except Exception as exc:
            raise InferenceError(f"segmentation failed: {exc}") from exc
        if reduced:
            mask = _resize(mask.astype(np.uint8) * 255, (width, height), Image.NEAREST) > 127
        return Response(_png(mask.astype(np.uint8) * 255, "L"), media_type="image/png")

    @app.post("/inpaint")
    async def inpaint(
        image: UploadFile = File(...),
        mask: UploadFile = File(...),
        prompt: str = Form(""),
    ):
        rgb = _decode_rgb(await image.read(), "image")
        bits = _decode_mask(await mask.read())
        height, width = rgb.shape[:2]
        if bits.shape != (height, width):
            raise BadRequestError(
                f"mask is {bits.shape[1]}x{bits.shape[0]} but image is {width}x{height}"
            )
        if not bits.any():
            return Response(_png(rgb, "RGB"), media_type="image/png")
        reduced = max(width, height) > max_side
        if reduced:
            dims = _reduced_dims(width, height, max_side)
            work_rgb = _resize(rgb, dims, Image.BILINEAR)
            work_mask = (
                _resize(bits.astype(np.uint8) * 255, dims, Image.NEAREST) > 127
            )
        else:
            work_rgb, work_mask = rgb, bits
        try:
            filled = inpainter.inpaint(work_rgb, work_mask, prompt)
        except Exception as exc:
            raise InferenceError(f"inpainting failed: {exc}") from exc
        if reduced:
            filled = _resize(filled, (width, height), Image.BILINEAR)
        # only masked pixels may differ from the request image
        result = np.where(bits[:, :, None], filled, rgb)
        return Response(_png(result, "RGB"), media_type="image/png")

    return app

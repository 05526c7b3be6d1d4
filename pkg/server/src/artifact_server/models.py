"""Model loading and inference behind the two endpoints.

Segmentation runs a TorchScript checkpoint (``[N,3,H,W]`` RGB in [0,1] to
``[N,1,H,W]`` logits) and thresholds the sigmoid at 0.5.  Inpainting runs
a classical diffusion-based fill from OpenCV, selected by model id; both
are deterministic for identical inputs.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np
import torch

INPAINT_MODELS = {
    "telea": cv2.INPAINT_TELEA,
    "navier-stokes": cv2.INPAINT_NS,
}
INPAINT_RADIUS = 3
PROBABILITY_THRESHOLD = 0.5


class ModelLoadError(RuntimeError):
    """A model could not be loaded or fails its interface probe."""


class Segmenter:
    """TorchScript checkpoint wrapper producing boolean artifact masks."""

    def __init__(self, checkpoint: str | Path, device: str = "cpu"):
        try:
            self._device = torch.device(device)
            self._model = torch.jit.load(str(checkpoint), map_location=self._device)
            self._model.eval()
        except Exception as exc:
            raise ModelLoadError(
                f"cannot load segmentation checkpoint {checkpoint}: {exc}"
            ) from exc
        probe = torch.zeros(1, 3, 8, 8, device=self._device)
        with torch.no_grad():
            try:
                out = self._model(probe)
            except Exception as exc:
                raise ModelLoadError(
                    f"checkpoint {checkpoint} rejected a (1, 3, 8, 8) probe: {exc}"
                ) from exc
        if tuple(out.shape) != (1, 1, 8, 8):
            raise ModelLoadError(
                f"checkpoint {checkpoint} returned shape {tuple(out.shape)} for a "
                "(1, 3, 8, 8) probe; expected (1, 1, 8, 8)"
            )

    def mask(self, rgb: np.ndarray) -> np.ndarray:
        """Boolean artifact mask for an (H, W, 3) uint8 RGB array."""
        torch.manual_seed(0)
        x = torch.from_numpy(rgb.astype(np.float32) / 255.0)
        x = x.permute(2, 0, 1).unsqueeze(0).to(self._device)
        with torch.no_grad():
            logits = self._model(x)
        probabilities = torch.sigmoid(logits)[0, 0].cpu().numpy()
        return probabilities > PROBABILITY_THRESHOLD


class Inpainter:
    """Classical inpainting fill, selected by model id."""

    def __init__(self, model_id: str):
        if model_id not in INPAINT_MODELS:
            raise ModelLoadError(
                f"unknown inpainting model {model_id!r}; "
                f"available: {sorted(INPAINT_MODELS)}"
            )
        self.model_id = model_id
        self._flags = INPAINT_MODELS[model_id]

    def inpaint(self, rgb: np.ndarray, mask: np.ndarray, prompt: str) -> np.ndarray:
        """Fill masked pixels of an (H, W, 3) uint8 array; prompt is ignored
        by the classical models but kept for interface parity."""
        del prompt
        mask_u8 = mask.astype(np.uint8) * 255
        return cv2.inpaint(rgb, mask_u8, INPAINT_RADIUS, self._flags)

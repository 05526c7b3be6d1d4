"""Build a self-contained TorchScript segmentation checkpoint.

The reference checkpoint is a fixed-weight convolutional high-frequency
detector: Rec. 601 luminance, a 3x3 Laplacian with replicate padding,
then ``logits = |response| - threshold``.  ``sigmoid(logits) > 0.5``
therefore marks exactly the pixels whose absolute Laplacian (on the
0-255 luminance scale) exceeds the threshold.

Any TorchScript module with the same interface is a valid checkpoint:
input ``[N, 3, H, W]`` RGB in [0, 1], output ``[N, 1, H, W]`` logits.
"""

from __future__ import annotations

from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

DEFAULT_THRESHOLD = 32.0


class HighFrequencyNet(nn.Module):
    def __init__(self, threshold: float = DEFAULT_THRESHOLD):
        super().__init__()
        self.threshold = float(threshold)
        self.register_buffer(
            "luma", torch.tensor([0.299, 0.587, 0.114]).view(1, 3, 1, 1)
        )
        self.register_buffer(
            "kernel",
            torch.tensor([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]]).view(
                1, 1, 3, 3
            ),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        luminance = (x * self.luma).sum(dim=1, keepdim=True) * 255.0
        padded = F.pad(luminance, (1, 1, 1, 1), mode="replicate")
        response = F.conv2d(padded, self.kernel)
        return response.abs() - self.threshold


def make_checkpoint(path: str | Path, threshold: float = DEFAULT_THRESHOLD) -> Path:
    """Script the reference net and save it where ``torch.jit.load`` finds it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    module = torch.jit.script(HighFrequencyNet(threshold))
    torch.jit.save(module, str(path))
    return path

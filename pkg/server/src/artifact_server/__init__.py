"""Reference model server for the artifact pipeline's remote backends.

Exposes the wire contract the pipeline's remote detector and inpainter
speak: ``POST /segment`` (PNG in, PNG mask out), ``POST /inpaint``
(multipart image/mask/prompt in, PNG out), and ``GET /health`` — with a
TorchScript segmentation checkpoint and a classical inpainting model
behind them.
"""

from .app import create_app
from .checkpoint import DEFAULT_THRESHOLD, HighFrequencyNet, make_checkpoint
from .config import (
    DEFAULT_BIND,
    DEFAULT_DEVICE,
    DEFAULT_INPAINT_MODEL,
    DEFAULT_MAX_SIDE,
    ServerConfig,
    ServerConfigError,
    load_server_config,
)
from .models import (
    INPAINT_MODELS,
    INPAINT_RADIUS,
    PROBABILITY_THRESHOLD,
    Inpainter,
    ModelLoadError,
    Segmenter,
)

__all__ = [
    "DEFAULT_BIND",
    "DEFAULT_DEVICE",
    "DEFAULT_INPAINT_MODEL",
    "DEFAULT_MAX_SIDE",
    "DEFAULT_THRESHOLD",
    "HighFrequencyNet",
    "INPAINT_MODELS",
    "INPAINT_RADIUS",
    "Inpainter",
    "ModelLoadError",
    "PROBABILITY_THRESHOLD",
    "Segmenter",
    "ServerConfig",
    "ServerConfigError",
    "create_app",
    "load_server_config",
    "make_checkpoint",
]

__version__ = "0.1.0"

"""Pipeline configuration: backend choice, dilation rule, blending knobs.

The config file is a single JSON object; anything omitted falls back to
the defaults below (stub backends, 1%-of-longest-side dilation, crop
scale 1.5, feather 2, eight-connectivity, one worker).  A configuration
hash over the normalized document lets run summaries prove two runs used
identical settings.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .backends import (
    DEFAULT_BOUNDARY_RING,
    DEFAULT_LAPLACIAN_THRESHOLD,
    DEFAULT_MAX_SIDE,
    DEFAULT_PROMPT_RULES,
    DEFAULT_RETRIES,
    DEFAULT_TIMEOUT,
    DetectorBackend,
    FileDetector,
    InpainterBackend,
    PromptRule,
    RemoteDetector,
    RemoteInpainter,
    StubDetector,
    StubInpainter,
)
from .errors import ConfigError
from .manifest import Manifest
from .masks import DEFAULT_THRESHOLD, default_dilation_radius
from .zoom import DEFAULT_CROP_SCALE, DEFAULT_FEATHER

TOKEN_ENV_VAR = "PAL_TOKEN"

_CONNECTIVITIES = ("four", "eight")
_TOP_KEYS = {
    "detector",
    "inpainter",
    "dilation",
    "crop_scale",
    "feather",
    "connectivity",
    "prompt_rules",
    "parallelism",
}


@dataclass(frozen=True)
class DilationRule:
    """Either a fixed pixel radius or a percentage of the longest side."""

    mode: str
    value: float

    def __post_init__(self):
        if self.mode not in ("fixed", "percent"):
            raise ConfigError(f"dilation mode must be 'fixed' or 'percent', got {self.mode!r}")
        if self.mode == "fixed":
            if self.value != int(self.value) or self.value < 0:
                raise ConfigError(
                    f"fixed dilation radius must be a non-negative integer, got {self.value}"
                )
        elif self.value < 0:
            raise ConfigError(f"dilation percent must be >= 0, got {self.value}")

    def radius_for(self, width: int, height: int) -> int:
        if self.mode == "fixed":
            return int(self.value)
        return default_dilation_radius(width, height, percent=self.value)


DEFAULT_DILATION = DilationRule("percent", 1.0)


@dataclass(frozen=True)
class PipelineConfig:
    detector: Mapping[str, Any] = field(default_factory=lambda: {"kind": "stub"})
    inpainter: Mapping[str, Any] = field(default_factory=lambda: {"kind": "stub"})
    dilation: DilationRule = DEFAULT_DILATION
    crop_scale: float = DEFAULT_CROP_SCALE
    feather: int = DEFAULT_FEATHER
    connectivity: str = "eight"
    prompt_rules: tuple[PromptRule, ...] = DEFAULT_PROMPT_RULES
    parallelism: int = 1

    def __post_init__(self):
        if self.crop_scale < 1.0:
            raise ConfigError(f"crop_scale must be >= 1, got {self.crop_scale}")
        if self.feather < 0 or self.feather != int(self.feather):
            raise ConfigError(f"feather must be a non-negative integer, got {self.feather}")
        if self.connectivity not in _CONNECTIVITIES:
            raise ConfigError(
                f"connectivity must be one of {_CONNECTIVITIES}, got {self.connectivity!r}"
            )
        if self.parallelism < 1 or self.parallelism != int(self.parallelism):
            raise ConfigError(f"parallelism must be a positive integer, got {self.parallelism}")
        _validate_backend_options("detector", self.detector, ("stub", "remote", "file"))
        _validate_backend_options("inpainter", self.inpainter, ("stub", "remote"))

    def to_json_dict(self) -> dict:
        """Fully normalized representation with every default made explicit."""
        return {
            "detector": dict(self.detector),
            "inpainter": dict(self.inpainter),
            "dilation": {"mode": self.dilation.mode, "value": self.dilation.value},
            "crop_scale": self.crop_scale,
            "feather": self.feather,
            "connectivity": self.connectivity,
            "prompt_rules": [
                {"domain": r.domain, "prompt": r.prompt} for r in self.prompt_rules
            ],
            "parallelism": self.parallelism,
        }


_BACKEND_OPTIONS = {
    ("detector", "stub"): {"laplacian_threshold"},
    ("detector", "remote"): {"endpoint", "timeout", "retries"},
    ("detector", "file"): {"threshold"},
    ("inpainter", "stub"): {"boundary_ring"},
    ("inpainter", "remote"): {"endpoint", "timeout", "retries", "max_side"},
}


def _validate_backend_options(role: str, options: Mapping[str, Any], kinds: tuple[str, ...]):
    if not isinstance(options, Mapping):
        raise ConfigError(f"{role} config must be an object, got {type(options).__name__}")
    kind = options.get("kind")
    if kind not in kinds:
        raise ConfigError(f"{role} kind must be one of {kinds}, got {kind!r}")
    allowed = _BACKEND_OPTIONS[(role, kind)]
    unknown = set(options) - allowed - {"kind"}
    if unknown:
        raise ConfigError(f"{role} config has unknown options: {sorted(unknown)}")
    if kind == "remote" and not options.get("endpoint"):
        raise ConfigError(f"remote {role} requires an 'endpoint'")


def _parse_dilation(raw: Any) -> DilationRule:
    if not isinstance(raw, Mapping):
        raise ConfigError(f"dilation must be an object, got {type(raw).__name__}")
    if "mode" in raw:
        extra = set(raw) - {"mode", "value"}
        if extra or "value" not in raw:
            raise ConfigError(f"dilation with 'mode' takes exactly 'mode' and 'value': {dict(raw)}")
        return DilationRule(raw["mode"], raw["value"])
    keys = set(raw) & {"fixed", "percent"}
    if len(keys) != 1 or set(raw) != keys:
        raise ConfigError(
            f"dilation must set exactly one of 'fixed' or 'percent', got {sorted(raw)}"
        )
    (mode,) = keys
    return DilationRule(mode, raw[mode])


def _parse_prompt_rules(raw: Any) -> tuple[PromptRule, ...]:
    if not isinstance(raw, list):
        raise ConfigError("prompt_rules must be a list of {domain, prompt} objects")
    rules = []
    for item in raw:
        if not isinstance(item, Mapping) or set(item) != {"domain", "prompt"}:
            raise ConfigError(f"prompt rule must have exactly domain and prompt: {item!r}")
        try:
            rules.append(PromptRule(item["domain"], item["prompt"]))
        except Exception as exc:
            raise ConfigError(str(exc)) from exc
    return tuple(rules)


def load_config(path: str | Path | None = None) -> PipelineConfig:
    """Parse a JSON config file, or return pure defaults when ``path`` is None."""
    if path is None:
        return PipelineConfig()
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"config {path} has unknown keys: {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    if "detector" in doc:
        kwargs["detector"] = doc["detector"]
    if "inpainter" in doc:
        kwargs["inpainter"] = doc["inpainter"]
    if "dilation" in doc:
        kwargs["dilation"] = _parse_dilation(doc["dilation"])
    for key in ("crop_scale", "feather", "connectivity", "parallelism"):
        if key in doc:
            kwargs[key] = doc[key]
    if "prompt_rules" in doc:
        kwargs["prompt_rules"] = _parse_prompt_rules(doc["prompt_rules"])
    try:
        return PipelineConfig(**kwargs)
    except ConfigError:
        raise
    except TypeError as exc:
        raise ConfigError(f"config {path}: {exc}") from exc


def config_hash(config: PipelineConfig) -> str:
    """Stable sha256 over the normalized config document."""
    canonical = json.dumps(config.to_json_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _token() -> str | None:
    return os.environ.get(TOKEN_ENV_VAR) or None


def build_detector(config: PipelineConfig, manifest: Manifest | None = None) -> DetectorBackend:
    """Instantiate the configured detector.

    The ``file`` kind serves each entry's precomputed ``mask_path`` and
    therefore needs the manifest.
    """
    options = config.detector
    kind = options["kind"]
    if kind == "stub":
        return StubDetector(
            laplacian_threshold=options.get("laplacian_threshold", DEFAULT_LAPLACIAN_THRESHOLD)
        )
    if kind == "remote":
        return RemoteDetector(
            options["endpoint"],
            timeout=options.get("timeout", DEFAULT_TIMEOUT),
            retries=options.get("retries", DEFAULT_RETRIES),
            token=_token(),
        )
    if manifest is None:
        raise ConfigError("file detector requires a manifest with mask_path entries")
    paths = {e.image_id: e.mask_path for e in manifest if e.mask_path is not None}
    return FileDetector(paths, threshold=options.get("threshold", DEFAULT_THRESHOLD))


def build_inpainter(config: PipelineConfig) -> InpainterBackend:
    options = config.inpainter
    if options["kind"] == "stub":
        return StubInpainter(boundary_ring=options.get("boundary_ring", DEFAULT_BOUNDARY_RING))
    return RemoteInpainter(
        options["endpoint"],
        timeout=options.get("timeout", DEFAULT_TIMEOUT),
        retries=options.get("retries", DEFAULT_RETRIES),
        max_side=options.get("max_side", DEFAULT_MAX_SIDE),
        token=_token(),
    )

"""Server configuration from a JSON file and/or CLI flags (flags win)."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping

DEFAULT_INPAINT_MODEL = "telea"
DEFAULT_BIND = "127.0.0.1:8500"
DEFAULT_MAX_SIDE = 1024
DEFAULT_DEVICE = "cpu"


class ServerConfigError(ValueError):
    """The server configuration is invalid or unreadable."""


@dataclass(frozen=True)
class ServerConfig:
    seg_checkpoint: Path
    inpaint_model_id: str = DEFAULT_INPAINT_MODEL
    bind_address: str = DEFAULT_BIND
    max_side: int = DEFAULT_MAX_SIDE
    device: str = DEFAULT_DEVICE

    def __post_init__(self):
        object.__setattr__(self, "seg_checkpoint", Path(self.seg_checkpoint))
        if not self.seg_checkpoint.is_file():
            raise ServerConfigError(
                f"segmentation checkpoint {self.seg_checkpoint} does not exist"
            )
        if not isinstance(self.max_side, int) or isinstance(self.max_side, bool):
            raise ServerConfigError(f"max_side must be an integer, got {self.max_side!r}")
        if self.max_side < 64:
            raise ServerConfigError(f"max_side must be >= 64, got {self.max_side}")
        if not self.inpaint_model_id or not isinstance(self.inpaint_model_id, str):
            raise ServerConfigError(
                f"inpaint_model_id must be a non-empty string, got {self.inpaint_model_id!r}"
            )
        self.host_port()

    def host_port(self) -> tuple[str, int]:
        host, sep, port = str(self.bind_address).rpartition(":")
        if not sep or not host or not port.isdigit() or int(port) > 65535:
            raise ServerConfigError(
                f"bind_address must be host:port, got {self.bind_address!r}"
            )
        return host, int(port)


_FIELD_NAMES = tuple(f.name for f in fields(ServerConfig))


def load_server_config(
    path: str | Path | None = None, overrides: Mapping[str, Any] | None = None
) -> ServerConfig:
    """Build a config from an optional JSON file plus override values.

    ``overrides`` uses the dataclass field names; None values are ignored,
    so CLI flags can be passed straight through.
    """
    merged: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise ServerConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ServerConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ServerConfigError(f"config {path} must be a JSON object")
        unknown = set(doc) - set(_FIELD_NAMES)
        if unknown:
            raise ServerConfigError(f"config {path} has unknown keys: {sorted(unknown)}")
        merged.update(doc)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    if "seg_checkpoint" not in merged:
        raise ServerConfigError("seg_checkpoint is required (config file or flag)")
    return ServerConfig(**merged)


def with_bind(config: ServerConfig, bind_address: str) -> ServerConfig:
    return replace(config, bind_address=bind_address)

"""Dataset manifest: one JSON document listing every image in a corpus.

Each entry carries the image path, optional precomputed/ground-truth mask
paths, an optional semantic label map, and the task/domain/split tags used
for grouping, prompt selection, and train/val/test filtering.  Validation
is eager and reports every problem at once rather than stopping at the
first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidInputError, ManifestError

SPLITS = ("train", "val", "test")

_OPTIONAL_PATHS = ("mask_path", "gt_mask_path", "label_map_path")


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    image_path: Path
    task: str
    domain: str
    split: str
    mask_path: Path | None = None
    gt_mask_path: Path | None = None
    label_map_path: Path | None = None


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def for_split(self, split: str) -> tuple[ManifestEntry, ...]:
        """Entries in one split, or everything when split is ``"all"``."""
        if split == "all":
            return self.entries
        if split not in SPLITS:
            raise InvalidInputError(f"split must be one of {SPLITS + ('all',)}, got {split!r}")
        return tuple(e for e in self.entries if e.split == split)


def _string_field(raw: dict, key: str, where: str, errors: list[str]) -> str | None:
    value = raw.get(key)
    if not isinstance(value, str) or not value:
        errors.append(f"{where}: field {key!r} must be a non-empty string, got {value!r}")
        return None
    return value


def _path_field(raw: dict, key: str, where: str, base: Path, errors: list[str],
                required: bool) -> Path | None:
    value = raw.get(key)
    if value is None:
        if required:
            errors.append(f"{where}: field {key!r} is required")
        return None
    if not isinstance(value, str) or not value:
        errors.append(f"{where}: field {key!r} must be a non-empty string, got {value!r}")
        return None
    path = Path(value)
    if not path.is_absolute():
        path = base / path
    if not path.is_file():
        errors.append(f"{where}: {key} {path} does not exist")
        return None
    return path


def load_manifest(path: str | Path) -> Manifest:
    """Parse and fully validate a manifest file.

    Relative paths inside the manifest are resolved against the manifest's
    own directory, so a corpus can be moved wholesale.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ManifestError([f"cannot read {path}: {exc}"]) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError([f"{path}: not valid JSON: {exc}"]) from exc

    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise ManifestError([f"{path}: top level must be an object with an 'entries' list"])

    base = path.resolve().parent
    errors: list[str] = []
    seen_ids: set[str] = set()
    entries: list[ManifestEntry] = []
    for index, raw in enumerate(doc["entries"]):
        where = f"entry {index}"
        if not isinstance(raw, dict):
            errors.append(f"{where}: must be an object, got {type(raw).__name__}")
            continue
        image_id = _string_field(raw, "image_id", where, errors)
        if image_id is not None:
            where = f"entry {index} ({image_id})"
            if image_id in seen_ids:
                errors.append(f"{where}: duplicate image_id {image_id!r}")
            seen_ids.add(image_id)
        task = _string_field(raw, "task", where, errors)
        domain = _string_field(raw, "domain", where, errors)
        split = raw.get("split")
        if split not in SPLITS:
            errors.append(f"{where}: split must be one of {SPLITS}, got {split!r}")
        image_path = _path_field(raw, "image_path", where, base, errors, required=True)
        optional = {
            key: _path_field(raw, key, where, base, errors, required=False)
            for key in _OPTIONAL_PATHS
        }
        if None not in (image_id, task, domain, image_path) and split in SPLITS:
            entries.append(
                ManifestEntry(
                    image_id=image_id,
                    image_path=image_path,
                    task=task,
                    domain=domain,
                    split=split,
                    **optional,
                )
            )
    if errors:
        raise ManifestError(errors)
    return Manifest(entries=tuple(entries))

"""Artifact-ratio scoring, ranking, selection, and corpus statistics.

The score of a mask is its foreground area divided by the image area
(range [0, 1]); lower means fewer artifacts, so rankings are ascending.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError
from .masks import BinaryMask

DEFAULT_HEATMAP_GRID = (512, 512)


@dataclass(frozen=True)
class ParRecord:
    """A scored image: id, artifact ratio, and optional task/domain tags."""

    image_id: str
    par: float
    task: str | None = None
    domain: str | None = None

    def __post_init__(self):
        if not self.image_id:
            raise InvalidInputError("image_id must be non-empty")
        if not 0.0 <= self.par <= 1.0:
            raise InvalidInputError(f"par must be in [0, 1], got {self.par} for {self.image_id!r}")


@dataclass(frozen=True)
class TaskParStat:
    mean_par: float
    count: int


@dataclass(frozen=True)
class ClassParRow:
    class_id: int
    class_name: str
    artifact_pixels: int
    class_pixels: int
    par: float


@dataclass(frozen=True)
class ClassParTable:
    """Per-semantic-class artifact ratios, sorted by descending ratio."""

    rows: tuple[ClassParRow, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["class_id", "class_name", "artifact_pixels", "class_pixels", "par"])
        for row in self.rows:
            writer.writerow(
                [row.class_id, row.class_name, row.artifact_pixels, row.class_pixels, repr(row.par)]
            )
        return buf.getvalue()


class ParHeatmap:
    """Per-cell mean artifact frequency over a corpus of masks."""

    __slots__ = ("_values", "count")

    def __init__(self, values: np.ndarray, count: int):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidInputError(f"heatmap grid must be 2-D and non-empty, got {arr.shape}")
        if count < 1:
            raise InvalidInputError("heatmap count must be >= 1")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InvalidInputError("heatmap cells must lie in [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        self._values = arr
        self.count = count

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def grid_width(self) -> int:
        return self._values.shape[1]

    @property
    def grid_height(self) -> int:
        return self._values.shape[0]

    def to_json_dict(self) -> dict:
        return {
            "grid_width": self.grid_width,
            "grid_height": self.grid_height,
            "count": self.count,
            "values": [[float(v) for v in row] for row in self._values],
        }


def par(mask: BinaryMask) -> float:
    """Foreground pixel count divided by image area."""
    return mask.count() / (mask.width * mask.height)


def rank_by_par(records: Sequence[ParRecord]) -> list[ParRecord]:
    """Best-first ordering: ascending score, ties broken by image_id."""
    seen: set[str] = set()
    for rec in records:
        if rec.image_id in seen:
            raise InvalidInputError(f"duplicate image_id {rec.image_id!r}")
        seen.add(rec.image_id)
    return sorted(records, key=lambda r: (r.par, r.image_id))


def percentile_samples(ranked: Sequence[ParRecord], percentiles: Iterable[float]) -> list[ParRecord]:
    """Nearest-rank selection from an already-ranked list.

    Index for percentile p is round(p/100 * (N-1)) clamped to [0, N-1];
    the 0th percentile is the best (lowest score), the 100th the worst.
    """
    n = len(ranked)
    if n == 0:
        raise InvalidInputError("percentile_samples of an empty list")
    out = []
    for p in percentiles:
        if not 0.0 <= p <= 100.0:
            raise InvalidInputError(f"percentile must be in [0, 100], got {p}")
        idx = int(np.floor(p / 100.0 * (n - 1) + 0.5))
        out.append(ranked[min(max(idx, 0), n - 1)])
    return out


def select_best(candidates: Sequence[ParRecord]) -> ParRecord:
    """The candidate with the minimum score; ties broken by image_id."""
    if not candidates:
        raise InvalidInputError("select_best of an empty candidate list")
    return min(candidates, key=lambda r: (r.par, r.image_id))


def _nearest_resample(bits: np.ndarray, grid_width: int, grid_height: int) -> np.ndarray:
    h, w = bits.shape
    src_y = np.minimum((np.floor((np.arange(grid_height) + 0.5) * h / grid_height)).astype(np.int64), h - 1)
    src_x = np.minimum((np.floor((np.arange(grid_width) + 0.5) * w / grid_width)).astype(np.int64), w - 1)
    return bits[np.ix_(src_y, src_x)]


def par_heatmap(
    masks: Sequence[BinaryMask],
    grid_width: int = DEFAULT_HEATMAP_GRID[0],
    grid_height: int = DEFAULT_HEATMAP_GRID[1],
) -> ParHeatmap:
    """Mean of nearest-neighbor-resampled masks on a fixed grid."""
    if not masks:
        raise InvalidInputError("par_heatmap of an empty mask list")
    if grid_width < 1 or grid_height < 1:
        raise InvalidInputError(f"heatmap grid must be >= 1x1, got {grid_width}x{grid_height}")
    acc = np.zeros((grid_height, grid_width), dtype=np.float64)
    for mask in masks:
        acc += _nearest_resample(mask.bits, grid_width, grid_height)
    return ParHeatmap(acc / len(masks), count=len(masks))


def per_class_par(
    pairs: Sequence[tuple[BinaryMask, np.ndarray]],
    class_names: Mapping[int, str] | None = None,
) -> ClassParTable:
    """Corpus-level artifact ratio per semantic class.

    Each pair is (artifact mask, per-pixel class-id grid of the same
    dimensions).  Ratios are sums of artifact pixels over sums of class
    pixels across all pairs; classes with zero pixels are omitted.
    """
    class_names = class_names or {}
    artifact_counts: dict[int, int] = {}
    class_counts: dict[int, int] = {}
    for i, (mask, label_map) in enumerate(pairs):
        labels = np.asarray(label_map)
        if labels.shape != mask.bits.shape:
            raise InvalidInputError(
                f"pair {i}: label map shape {labels.shape} does not match "
                f"mask {mask.bits.shape}"
            )
        labels = labels.astype(np.int64, copy=False)
        ids, counts = np.unique(labels, return_counts=True)
        for cid, cnt in zip(ids.tolist(), counts.tolist()):
            class_counts[cid] = class_counts.get(cid, 0) + cnt
        a_ids, a_counts = np.unique(labels[mask.bits], return_counts=True)
        for cid, cnt in zip(a_ids.tolist(), a_counts.tolist()):
            artifact_counts[cid] = artifact_counts.get(cid, 0) + cnt
    rows = [
        ClassParRow(
            class_id=cid,
            class_name=class_names.get(cid, f"class_{cid}"),
            artifact_pixels=artifact_counts.get(cid, 0),
            class_pixels=total,
            par=artifact_counts.get(cid, 0) / total,
        )
        for cid, total in class_counts.items()
        if total > 0
    ]
    rows.sort(key=lambda r: (-r.par, r.class_id))
    return ClassParTable(rows=tuple(rows))


def par_histogram(records: Sequence[ParRecord]) -> dict[str, TaskParStat]:
    """Arithmetic mean score per task, keyed and ordered by task name."""
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for rec in records:
        if rec.task is None:
            raise InvalidInputError(f"record {rec.image_id!r} has no task tag")
        sums[rec.task] = sums.get(rec.task, 0.0) + rec.par
        counts[rec.task] = counts.get(rec.task, 0) + 1
    return {
        task: TaskParStat(mean_par=sums[task] / counts[task], count=counts[task])
        for task in sorted(sums)
    }


def histogram_to_csv(histogram: Mapping[str, TaskParStat]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["task", "mean_par", "count"])
    for task, stat in histogram.items():
        writer.writerow([task, repr(stat.mean_par), stat.count])
    return buf.getvalue()


def record_to_json(record: ParRecord) -> str:
    doc: dict = {"image_id": record.image_id, "par": record.par}
    if record.task is not None:
        doc["task"] = record.task
    if record.domain is not None:
        doc["domain"] = record.domain
    return json.dumps(doc, sort_keys=False)


def records_to_jsonl(records: Iterable[ParRecord]) -> str:
    """Serialize records as JSON lines, one object per record."""
    return "".join(record_to_json(rec) + "\n" for rec in records)


def records_from_jsonl(text: str) -> list[ParRecord]:
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"line {lineno}: invalid JSON: {exc}") from exc
        try:
            records.append(
                ParRecord(
                    image_id=doc["image_id"],
                    par=float(doc["par"]),
                    task=doc.get("task"),
                    domain=doc.get("domain"),
                )
            )
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"line {lineno}: missing field: {exc}") from exc
    return records

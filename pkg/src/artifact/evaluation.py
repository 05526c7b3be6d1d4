"""Corpus evaluation and user-study statistics.

Covers two distinct jobs: scoring predicted masks against ground truth
(confusion counts and IoU, aggregated corpus-wide), and testing whether
preference votes from a study differ significantly from the zero-mean
null (one-sample sign-flip permutation test with Holm–Bonferroni
correction across tasks).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError
from .masks import BinaryMask, Confusion, confusion_counts

DEFAULT_PERMUTATIONS = 1_000_000
DEFAULT_ALPHA = 0.05
EXACT_CUTOFF = 20
_MC_CHUNK = 65536

_VALID_VOTES = (-1, 0, 1)


def _iou(intersection: int, union: int) -> float:
    """Intersection over union with the empty-union convention of 1.0."""
    return 1.0 if union == 0 else intersection / union


@dataclass(frozen=True)
class EvalReport:
    """Per-image confusions plus corpus-level IoU summary.

    ``aggregate`` is the field-wise sum of the per-image confusions, and the
    IoU numbers are computed from it (dataset-level aggregation).
    """

    per_image: tuple[tuple[str, Confusion], ...]
    aggregate: Confusion
    iou_artifact: float
    iou_background: float
    miou: float

    def __post_init__(self):
        total = sum((c for _, c in self.per_image), Confusion(0, 0, 0, 0))
        if total != self.aggregate:
            raise InvalidInputError("aggregate confusion does not equal sum of per-image counts")
        a = _iou(self.aggregate.tp, self.aggregate.tp + self.aggregate.fp + self.aggregate.fn)
        b = _iou(self.aggregate.tn, self.aggregate.tn + self.aggregate.fp + self.aggregate.fn)
        if (a, b, (a + b) / 2.0) != (self.iou_artifact, self.iou_background, self.miou):
            raise InvalidInputError("IoU fields are inconsistent with the aggregate confusion")


def report_from_confusions(per_image: Sequence[tuple[str, Confusion]]) -> EvalReport:
    """Build a consistent report from already-computed confusion counts."""
    per_image = tuple(per_image)
    aggregate = sum((c for _, c in per_image), Confusion(0, 0, 0, 0))
    iou_artifact = _iou(aggregate.tp, aggregate.tp + aggregate.fp + aggregate.fn)
    iou_background = _iou(aggregate.tn, aggregate.tn + aggregate.fp + aggregate.fn)
    return EvalReport(
        per_image=per_image,
        aggregate=aggregate,
        iou_artifact=iou_artifact,
        iou_background=iou_background,
        miou=(iou_artifact + iou_background) / 2.0,
    )


def evaluate_miou(pairs: Iterable[tuple[str, BinaryMask, BinaryMask]]) -> EvalReport:
    """Score predictions against ground truth with corpus-summed confusions."""
    per_image = []
    for image_id, pred, gt in pairs:
        if (pred.width, pred.height) != (gt.width, gt.height):
            raise InvalidInputError(
                f"image {image_id!r}: prediction {pred.width}x{pred.height} does not "
                f"match ground truth {gt.width}x{gt.height}"
            )
        per_image.append((image_id, confusion_counts(pred, gt)))
    return report_from_confusions(per_image)


def _confusion_json(c: Confusion) -> dict:
    return {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn}


def report_to_json_dict(report: EvalReport) -> dict:
    """JSON-ready dict with both dataset-level and per-image IoU views."""
    rows = []
    image_mious = []
    for image_id, c in report.per_image:
        iou_a = _iou(c.tp, c.tp + c.fp + c.fn)
        iou_b = _iou(c.tn, c.tn + c.fp + c.fn)
        image_mious.append((iou_a + iou_b) / 2.0)
        rows.append(
            {
                "image_id": image_id,
                **_confusion_json(c),
                "iou_artifact": iou_a,
                "iou_background": iou_b,
            }
        )
    doc = {
        "per_image": rows,
        "aggregate": _confusion_json(report.aggregate),
        "iou_artifact": report.iou_artifact,
        "iou_background": report.iou_background,
        "miou": report.miou,
    }
    if image_mious:
        doc["mean_per_image_miou"] = float(np.mean(image_mious))
    return doc


@dataclass(frozen=True)
class PreferenceVotes:
    """One study task's votes: -1, 0, or +1 per rater comparison."""

    task: str
    votes: tuple[int, ...]

    def __post_init__(self):
        if not self.task:
            raise InvalidInputError("task name must be non-empty")
        if not self.votes:
            raise InvalidInputError(f"task {self.task!r} has no votes")
        bad = [v for v in self.votes if v not in _VALID_VOTES]
        if bad:
            raise InvalidInputError(
                f"task {self.task!r} has votes outside {{-1, 0, +1}}: {sorted(set(bad))}"
            )


def _exact_p(total: int, n_nonzero: int) -> float:
    # Sign flips leave zero votes at zero, so only the n_nonzero unit votes
    # matter: a flip pattern with k negatives sums to n_nonzero - 2k.
    target = abs(total)
    hits = sum(
        math.comb(n_nonzero, k)
        for k in range(n_nonzero + 1)
        if abs(n_nonzero - 2 * k) >= target
    )
    return hits / 2**n_nonzero


def _monte_carlo_p(total: int, n_nonzero: int, n_permutations: int, seed: int) -> float:
    target = abs(total)
    rng = np.random.default_rng(seed)
    hits = 0
    remaining = n_permutations
    while remaining > 0:
        size = min(remaining, _MC_CHUNK)
        signs = rng.integers(0, 2, size=(size, n_nonzero), dtype=np.int64) * 2 - 1
        sums = np.abs(signs.sum(axis=1)) if n_nonzero else np.zeros(size, dtype=np.int64)
        hits += int(np.count_nonzero(sums >= target))
        remaining -= size
    return (1 + hits) / (1 + n_permutations)


def permutation_test(
    votes: PreferenceVotes,
    n_permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
    method: str = "auto",
) -> float:
    """Two-sided one-sample sign-flip test of mean(votes) == 0.

    The statistic is |mean(votes)|, compared against the sign-flip null.
    Small vote lists (n <= 20) are enumerated exactly; larger ones are
    sampled with a seeded generator and add-one smoothing, so the result
    is deterministic for a given seed and always positive.  ``method``
    forces ``"exact"`` or ``"monte-carlo"`` regardless of size.
    """
    if n_permutations < 1:
        raise InvalidInputError(f"n_permutations must be >= 1, got {n_permutations}")
    if method not in ("auto", "exact", "monte-carlo"):
        raise InvalidInputError(f"unknown method {method!r}")
    total = sum(votes.votes)
    n_nonzero = sum(1 for v in votes.votes if v != 0)
    if method == "exact" or (method == "auto" and len(votes.votes) <= EXACT_CUTOFF):
        return _exact_p(total, n_nonzero)
    return _monte_carlo_p(total, n_nonzero, n_permutations, seed)


def holm_bonferroni(
    p_values: Mapping[str, float], alpha: float = DEFAULT_ALPHA
) -> dict[str, bool]:
    """Step-down multiple-comparison correction at familywise rate ``alpha``.

    Tasks are processed in ascending p order (ties broken by task name);
    rejection stops at the first p exceeding its adjusted threshold.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must be in (0, 1), got {alpha}")
    for task, p in p_values.items():
        if not 0.0 < p <= 1.0:
            raise InvalidInputError(f"task {task!r} has p-value {p} outside (0, 1]")
    ordered = sorted(p_values.items(), key=lambda item: (item[1], item[0]))
    m = len(ordered)
    rejected: set[str] = set()
    for i, (task, p) in enumerate(ordered):
        if p <= alpha / (m - i):
            rejected.add(task)
        else:
            break
    return {task: task in rejected for task in p_values}


def load_votes_csv(path: str | Path) -> dict[str, PreferenceVotes]:
    """Read a two-column task,vote CSV into per-task vote lists.

    Tasks are returned in sorted order; malformed rows raise with their
    line number.
    """
    path = Path(path)
    collected: dict[str, list[int]] = {}
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or not {"task", "vote"} <= set(reader.fieldnames):
            raise InvalidInputError(f"{path}: votes CSV must have columns task,vote")
        for row in reader:
            line = reader.line_num
            task = (row.get("task") or "").strip()
            raw = (row.get("vote") or "").strip()
            if not task:
                raise InvalidInputError(f"{path}:{line}: empty task name")
            try:
                vote = int(raw)
            except ValueError:
                raise InvalidInputError(f"{path}:{line}: vote {raw!r} is not an integer") from None
            if vote not in _VALID_VOTES:
                raise InvalidInputError(f"{path}:{line}: vote {vote} outside {{-1, 0, +1}}")
            collected.setdefault(task, []).append(vote)
    return {
        task: PreferenceVotes(task=task, votes=tuple(collected[task]))
        for task in sorted(collected)
    }

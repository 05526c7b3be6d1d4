"""Batch command-line frontend.

Subcommands wire the library into corpus-scale workflows: ``detect``
writes artifact masks, ``par`` scores images, ``rank``/``select`` order
and pick candidates, ``refine`` runs zoom-in or naive inpainting,
``eval`` scores predictions against ground truth and runs the
user-study statistics, and ``stats`` emits corpus summaries (per-task
histogram, spatial heatmap, per-class table).

Exit codes: 0 success, 1 when any per-item failure occurred (remaining
items still processed unless ``--strict``), 2 for configuration errors.
All outputs are written atomically, and every run leaves a
``run_summary.json`` recording per-item status, timings, and the config
hash.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

from .backends import default_prompt
from .config import (
    PipelineConfig,
    build_detector,
    build_inpainter,
    config_hash,
    load_config,
)
from .errors import ArtifactError, ConfigError, InvalidInputError
from .evaluation import (
    holm_bonferroni,
    load_votes_csv,
    permutation_test,
    report_from_confusions,
    report_to_json_dict,
)
from .fileio import atomic_write_bytes, atomic_write_json, atomic_write_text
from .images import RgbImage, decode_image, decode_label_map, encode_image
from .manifest import Manifest, ManifestEntry, load_manifest
from .masks import BinaryMask, confusion_counts, decode_mask, encode_mask
from .par import (
    ParRecord,
    histogram_to_csv,
    par,
    par_heatmap,
    par_histogram,
    per_class_par,
    percentile_samples,
    rank_by_par,
    records_from_jsonl,
    records_to_jsonl,
    select_best,
)
from .zoom import naive_refine, refine

EXIT_OK = 0
EXIT_ITEM_FAILURES = 1
EXIT_CONFIG = 2

logger = logging.getLogger("artifact")


@dataclass
class ItemOutcome:
    image_id: str
    status: str  # ok | error | skipped
    error: str | None
    seconds: float
    payload: Any


@dataclass
class RunContext:
    """Everything a subcommand needs after flags and files are validated."""

    manifest: Manifest
    entries: list[ManifestEntry]
    config: PipelineConfig
    out: Path
    split: str
    seed: int
    parallelism: int
    strict: bool


def _setup(args: argparse.Namespace) -> RunContext:
    manifest = load_manifest(args.manifest)
    config = load_config(args.config)
    parallelism = config.parallelism if args.parallelism is None else args.parallelism
    if parallelism < 1:
        raise ConfigError(f"--parallelism must be >= 1, got {parallelism}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return RunContext(
        manifest=manifest,
        entries=list(manifest.for_split(args.split)),
        config=config,
        out=out,
        split=args.split,
        seed=args.seed,
        parallelism=parallelism,
        strict=args.strict,
    )


def _timed(worker: Callable[[ManifestEntry], Any], entry: ManifestEntry) -> ItemOutcome:
    start = time.perf_counter()
    try:
        payload = worker(entry)
    except Exception as exc:
        logger.error("item %s failed: %s", entry.image_id, exc)
        return ItemOutcome(entry.image_id, "error", str(exc), time.perf_counter() - start, None)
    return ItemOutcome(entry.image_id, "ok", None, time.perf_counter() - start, payload)


def _run_pool(ctx: RunContext, worker: Callable[[ManifestEntry], Any]) -> list[ItemOutcome]:
    """Run ``worker`` over every entry, preserving manifest order.

    Worker exceptions become per-item error outcomes.  With ``--strict``
    the first error aborts the run: queued items are cancelled, and items
    a pool thread picks up after the failure are skipped without running.
    Items already in flight when the failure happens still finish and are
    recorded honestly.
    """
    abort = threading.Event()

    def skipped(entry: ManifestEntry) -> ItemOutcome:
        return ItemOutcome(entry.image_id, "skipped", "aborted by --strict", 0.0, None)

    def guarded(entry: ManifestEntry) -> ItemOutcome:
        if ctx.strict and abort.is_set():
            return skipped(entry)
        outcome = _timed(worker, entry)
        if ctx.strict and outcome.status == "error":
            abort.set()
        return outcome

    outcomes: list[ItemOutcome | None] = [None] * len(ctx.entries)
    with ThreadPoolExecutor(max_workers=ctx.parallelism) as pool:
        futures = [pool.submit(guarded, entry) for entry in ctx.entries]
        for i, future in enumerate(futures):
            if abort.is_set() and future.cancel():
                outcomes[i] = skipped(ctx.entries[i])
            else:
                outcomes[i] = future.result()
    return outcomes  # type: ignore[return-value]


def _exit_code(outcomes: Sequence[ItemOutcome]) -> int:
    ok = all(o.status == "ok" for o in outcomes)
    return EXIT_OK if ok else EXIT_ITEM_FAILURES


def _write_summary(
    ctx: RunContext,
    command: str,
    outcomes: Sequence[ItemOutcome],
    outputs: Sequence[str],
    exit_code: int,
) -> None:
    items = []
    for o in outcomes:
        item = {"image_id": o.image_id, "status": o.status, "seconds": round(o.seconds, 6)}
        if o.error is not None:
            item["error"] = o.error
        items.append(item)
    atomic_write_json(
        ctx.out / "run_summary.json",
        {
            "command": command,
            "config_hash": config_hash(ctx.config),
            "split": ctx.split,
            "seed": ctx.seed,
            "parallelism": ctx.parallelism,
            "exit_code": exit_code,
            "outputs": sorted(outputs),
            "items": items,
        },
    )


def _safe_name(image_id: str) -> str:
    return image_id.replace("/", "__").replace("\\", "__") + ".png"


def _load_image(entry: ManifestEntry) -> RgbImage:
    return decode_image(entry.image_path.read_bytes(), source=str(entry.image_path))


def _make_mask_loader(ctx: RunContext):
    """Entry's precomputed mask wins; otherwise the configured detector runs."""
    detector = build_detector(ctx.config, ctx.manifest)

    def load(entry: ManifestEntry, image: RgbImage | None = None) -> BinaryMask:
        if entry.mask_path is not None:
            mask = decode_mask(entry.mask_path.read_bytes(), source=str(entry.mask_path))
            if image is not None and (mask.width, mask.height) != (image.width, image.height):
                raise InvalidInputError(
                    f"mask {entry.mask_path} is {mask.width}x{mask.height} but image "
                    f"is {image.width}x{image.height}"
                )
            return mask
        return detector.detect(entry.image_id, image if image is not None else _load_image(entry))

    return load


def cmd_detect(args: argparse.Namespace) -> int:
    ctx = _setup(args)
    detector = build_detector(ctx.config, ctx.manifest)

    def worker(entry: ManifestEntry) -> str:
        mask = detector.detect(entry.image_id, _load_image(entry))
        rel = str(Path("masks") / _safe_name(entry.image_id))
        atomic_write_bytes(ctx.out / rel, encode_mask(mask))
        return rel

    outcomes = _run_pool(ctx, worker)
    code = _exit_code(outcomes)
    _write_summary(ctx, "detect", outcomes, [o.payload for o in outcomes if o.payload], code)
    return code


def _record_worker(ctx: RunContext) -> Callable[[ManifestEntry], ParRecord]:
    load_mask = _make_mask_loader(ctx)

    def worker(entry: ManifestEntry) -> ParRecord:
        mask = load_mask(entry)
        return ParRecord(
            image_id=entry.image_id, par=par(mask), task=entry.task, domain=entry.domain
        )

    return worker


def cmd_par(args: argparse.Namespace) -> int:
    ctx = _setup(args)
    outcomes = _run_pool(ctx, _record_worker(ctx))
    records = [o.payload for o in outcomes if o.status == "ok"]
    atomic_write_text(ctx.out / "par.jsonl", records_to_jsonl(records))
    code = _exit_code(outcomes)
    _write_summary(ctx, "par", outcomes, ["par.jsonl"], code)
    return code


def _parse_percentiles(raw: str) -> list[float]:
    values = []
    for token in raw.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            values.append(float(token))
        except ValueError:
            raise ConfigError(f"--percentiles: {token!r} is not a number") from None
    return values


def cmd_rank(args: argparse.Namespace) -> int:
    ctx = _setup(args)
    percentiles = _parse_percentiles(args.percentiles)
    if args.records:
        try:
            records = records_from_jsonl(Path(args.records).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read --records {args.records}: {exc}") from exc
        except InvalidInputError as exc:
            raise ConfigError(f"--records {args.records}: {exc}") from exc
        outcomes: list[ItemOutcome] = []
    else:
        outcomes = _run_pool(ctx, _record_worker(ctx))
        records = [o.payload for o in outcomes if o.status == "ok"]
    try:
        ranked = rank_by_par(records)
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    atomic_write_text(ctx.out / "ranked.jsonl", records_to_jsonl(ranked))
    outputs = ["ranked.jsonl"]
    if percentiles:
        if not ranked:
            raise ConfigError("cannot sample percentiles of an empty ranking")
        samples = percentile_samples(ranked, percentiles)
        atomic_write_json(
            ctx.out / "percentiles.json",
            [
                {"percentile": p, "image_id": s.image_id, "par": s.par}
                for p, s in zip(percentiles, samples)
            ],
        )
        outputs.append("percentiles.json")
    code = _exit_code(outcomes)
    _write_summary(ctx, "rank", outcomes, outputs, code)
    return code


def cmd_select(args: argparse.Namespace) -> int:
    ctx = _setup(args)
    outcomes = _run_pool(ctx, _record_worker(ctx))
    records = [o.payload for o in outcomes if o.status == "ok"]
    if not records:
        raise ConfigError("no candidates to select from")
    groups: dict[str, list[ParRecord]] = {}
    for record in records:
        if args.group_by == "task":
            key = record.task or ""
        elif args.group_by == "domain":
            key = record.domain or ""
        else:
            key = "all"
        groups.setdefault(key, []).append(record)
    selection = []
    for key in sorted(groups):
        best = select_best(groups[key])
        selection.append({"group": key, "image_id": best.image_id, "par": best.par})
    atomic_write_json(ctx.out / "selection.json", selection)
    code = _exit_code(outcomes)
    _write_summary(ctx, "select", outcomes, ["selection.json"], code)
    return code


def cmd_refine(args: argparse.Namespace) -> int:
    ctx = _setup(args)
    load_mask = _make_mask_loader(ctx)
    inpainter = build_inpainter(ctx.config)

    def worker(entry: ManifestEntry) -> str:
        image = _load_image(entry)
        mask = load_mask(entry, image)
        radius = ctx.config.dilation.radius_for(image.width, image.height)
        prompt = default_prompt(ctx.config.prompt_rules, entry.domain)
        if args.mode == "zoom":
            result = refine(
                image,
                mask,
                inpainter,
                scale=ctx.config.crop_scale,
                dilation_radius=radius,
                feather=ctx.config.feather,
                prompt=prompt,
                connectivity=ctx.config.connectivity,
            )
        else:
            result = naive_refine(
                image, mask, inpainter, dilation_radius=radius, prompt=prompt
            )
        rel = str(Path("refined") / _safe_name(entry.image_id))
        atomic_write_bytes(ctx.out / rel, encode_image(result))
        return rel

    outcomes = _run_pool(ctx, worker)
    code = _exit_code(outcomes)
    _write_summary(ctx, "refine", outcomes, [o.payload for o in outcomes if o.payload], code)
    return code


def cmd_eval(args: argparse.Namespace) -> int:
    ctx = _setup(args)
    if not 0.0 < args.alpha < 1.0:
        raise ConfigError(f"--alpha must be in (0, 1), got {args.alpha}")
    if args.permutations < 1:
        raise ConfigError(f"--permutations must be >= 1, got {args.permutations}")
    missing = [e.image_id for e in ctx.entries if e.gt_mask_path is None]
    if missing:
        raise ConfigError(
            f"eval requires gt_mask_path for every entry; missing for: {', '.join(missing)}"
        )
    load_mask = _make_mask_loader(ctx)

    def worker(entry: ManifestEntry):
        pred = load_mask(entry)
        gt = decode_mask(entry.gt_mask_path.read_bytes(), source=str(entry.gt_mask_path))
        if (pred.width, pred.height) != (gt.width, gt.height):
            raise InvalidInputError(
                f"prediction {pred.width}x{pred.height} does not match ground truth "
                f"{gt.width}x{gt.height}"
            )
        return confusion_counts(pred, gt)

    outcomes = _run_pool(ctx, worker)
    report = report_from_confusions(
        [(o.image_id, o.payload) for o in outcomes if o.status == "ok"]
    )
    atomic_write_json(ctx.out / "eval_report.json", report_to_json_dict(report))
    outputs = ["eval_report.json"]
    if args.votes:
        try:
            votes_by_task = load_votes_csv(args.votes)
        except OSError as exc:
            raise ConfigError(f"cannot read --votes {args.votes}: {exc}") from exc
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from exc
        p_values = {
            task: permutation_test(v, n_permutations=args.permutations, seed=ctx.seed)
            for task, v in votes_by_task.items()
        }
        rejections = holm_bonferroni(p_values, alpha=args.alpha)
        atomic_write_json(
            ctx.out / "significance.json",
            {
                "alpha": args.alpha,
                "n_permutations": args.permutations,
                "seed": ctx.seed,
                "tasks": [
                    {
                        "task": task,
                        "n_votes": len(votes_by_task[task].votes),
                        "mean_vote": sum(votes_by_task[task].votes)
                        / len(votes_by_task[task].votes),
                        "p_value": p_values[task],
                        "reject_null": rejections[task],
                    }
                    for task in votes_by_task
                ],
            },
        )
        outputs.append("significance.json")
    code = _exit_code(outcomes)
    _write_summary(ctx, "eval", outcomes, outputs, code)
    return code


def _parse_grid(raw: str) -> tuple[int, int]:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    try:
        numbers = [int(p) for p in parts]
    except ValueError:
        raise ConfigError(f"--heatmap-grid: {raw!r} is not an integer pair") from None
    if len(numbers) == 1:
        numbers = numbers * 2
    if len(numbers) != 2 or any(n < 1 for n in numbers):
        raise ConfigError(f"--heatmap-grid must be one or two positive integers, got {raw!r}")
    return numbers[0], numbers[1]


def _load_class_names(path: str | None) -> dict[int, str] | None:
    if not path:
        return None
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read --class-names {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--class-names {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"--class-names {path} must map class id to name")
    try:
        return {int(k): str(v) for k, v in doc.items()}
    except ValueError as exc:
        raise ConfigError(f"--class-names {path}: keys must be integers: {exc}") from exc


def cmd_stats(args: argparse.Namespace) -> int:
    ctx = _setup(args)
    grid_w, grid_h = _parse_grid(args.heatmap_grid)
    class_names = _load_class_names(args.class_names)
    load_mask = _make_mask_loader(ctx)

    def worker(entry: ManifestEntry):
        mask = load_mask(entry)
        label = None
        if entry.label_map_path is not None:
            label = decode_label_map(
                entry.label_map_path.read_bytes(), source=str(entry.label_map_path)
            )
            if label.shape != (mask.height, mask.width):
                raise InvalidInputError(
                    f"label map {entry.label_map_path} shape {label.shape} does not "
                    f"match mask {mask.width}x{mask.height}"
                )
        return mask, label

    outcomes = _run_pool(ctx, worker)
    done = [(ctx.entries[i], o.payload) for i, o in enumerate(outcomes) if o.status == "ok"]
    records = [
        ParRecord(image_id=e.image_id, par=par(mask), task=e.task, domain=e.domain)
        for e, (mask, _) in done
    ]
    atomic_write_text(ctx.out / "histogram.csv", histogram_to_csv(par_histogram(records)))
    outputs = ["histogram.csv"]
    masks = [mask for _, (mask, _) in done]
    if masks:
        heatmap = par_heatmap(masks, grid_width=grid_w, grid_height=grid_h)
        atomic_write_json(ctx.out / "heatmap.json", heatmap.to_json_dict())
        outputs.append("heatmap.json")
    labeled = [(mask, label) for _, (mask, label) in done if label is not None]
    if labeled:
        table = per_class_par(labeled, class_names)
        atomic_write_text(ctx.out / "class_par.csv", table.to_csv())
        outputs.append("class_par.csv")
    code = _exit_code(outcomes)
    _write_summary(ctx, "stats", outcomes, outputs, code)
    return code


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--manifest", required=True, help="path to the corpus manifest JSON")
    sub.add_argument("--config", help="pipeline config JSON (defaults used when omitted)")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument(
        "--split", choices=("train", "val", "test", "all"), default="all",
        help="restrict to one manifest split",
    )
    sub.add_argument("--seed", type=int, default=0, help="seed for randomized statistics")
    sub.add_argument(
        "--parallelism", type=int, default=None,
        help="worker threads (default: config value)",
    )
    sub.add_argument(
        "--strict", action="store_true",
        help="abort on the first per-item failure instead of continuing",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="artifact",
        description="Perceptual-artifact detection, scoring, and refinement pipeline.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("detect", help="run the detector and write one mask per image")
    _add_common(p)
    p.set_defaults(func=cmd_detect)

    p = subs.add_parser("par", help="write per-image artifact-ratio records")
    _add_common(p)
    p.set_defaults(func=cmd_par)

    p = subs.add_parser("rank", help="order images by ratio and sample percentiles")
    _add_common(p)
    p.add_argument("--records", help="reuse a par JSONL instead of recomputing")
    p.add_argument(
        "--percentiles", default="0,25,50,75,100",
        help="comma-separated percentiles to sample (empty to skip)",
    )
    p.set_defaults(func=cmd_rank)

    p = subs.add_parser("select", help="pick the lowest-ratio candidate per group")
    _add_common(p)
    p.add_argument("--group-by", choices=("none", "task", "domain"), default="none")
    p.set_defaults(func=cmd_select)

    p = subs.add_parser("refine", help="inpaint artifact regions and write refined images")
    _add_common(p)
    p.add_argument("--mode", choices=("zoom", "naive"), default="zoom")
    p.set_defaults(func=cmd_refine)

    p = subs.add_parser("eval", help="score predictions against ground truth")
    _add_common(p)
    p.add_argument("--votes", help="CSV of task,vote user-study preferences")
    p.add_argument("--alpha", type=float, default=0.05, help="familywise error rate")
    p.add_argument("--permutations", type=int, default=1_000_000)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("stats", help="corpus histogram, heatmap, and per-class table")
    _add_common(p)
    p.add_argument("--heatmap-grid", default="512", help="heatmap grid as N or W,H")
    p.add_argument("--class-names", help="JSON mapping class id to name")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    try:
        return args.func(args)
    except ArtifactError as exc:
        logger.error("error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Whole-suite acceptance runs at fixed sizes, tolerances, and time budgets.

Each test covers one gate criterion end to end and prints a single
``[acceptance] <name>: PASS`` line with the key measured quantity; a
failing criterion fails its test and shows up as exactly one FAILED line.
"""

import json
import math
import time

import numpy as np

from artifact import (
    BinaryMask,
    PreferenceVotes,
    RgbImage,
    connected_components,
    dilate,
    evaluate_miou,
    holm_bonferroni,
    permutation_test,
    plan_crops,
    refine,
)
from artifact.cli import main
from support import (
    brute_confusion,
    brute_dilate,
    brute_permutation_p,
    flood_fill_components,
    random_image,
    random_mask,
)
from test_cli import make_corpus


def _report(name: str, start: float, limit: float, detail: str = "") -> None:
    elapsed = time.perf_counter() - start
    assert elapsed < limit, f"{name} took {elapsed:.1f}s, budget {limit}s"
    extra = f" — {detail}" if detail else ""
    print(f"[acceptance] {name}: PASS{extra} ({elapsed:.1f}s)")


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


def test_morphology_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(20001)
    for case in range(1000):
        mask = random_mask(rng, max_side=64)
        for connectivity in ("four", "eight"):
            expected = flood_fill_components(mask.bits, connectivity)
            got = connected_components(mask, connectivity=connectivity)
            assert len(got.components) == len(expected), f"case {case}"
            for comp, pixels in zip(got.components, expected):
                assert comp.pixels == frozenset(pixels), f"case {case}"
                assert comp.area == len(pixels), f"case {case}"
        radius = int(rng.integers(0, 6))
        assert np.array_equal(
            dilate(mask, radius).bits, brute_dilate(mask.bits, radius)
        ), f"case {case} radius {radius}"
    _report("morphology-oracle", start, 30.0, "1000 masks, both connectivities")


def test_crop_plan_invariants():
    start = time.perf_counter()
    rng = np.random.default_rng(20002)
    for case in range(1000):
        mask = random_mask(rng, max_side=64)
        width, height = mask.width, mask.height
        scale = float(rng.uniform(1.0, 3.0))
        radius = int(rng.integers(0, 6))
        connectivity = "four" if case % 2 else "eight"
        plan = plan_crops(
            mask,
            (width, height),
            scale=scale,
            dilation_radius=radius,
            connectivity=connectivity,
        )
        grown = dilate(mask, radius)
        comps = connected_components(grown, connectivity=connectivity)
        assert (len(plan.crops) == 0) == mask.is_empty(), f"case {case}"
        assert len(plan.crops) == len(comps.components), f"case {case}"
        for crop, comp in zip(plan.crops, comps.components):
            box = crop.box
            assert crop.component_label == comp.label
            # in bounds
            assert 0 <= box.x0 <= box.x1 < width, f"case {case}"
            assert 0 <= box.y0 <= box.y1 < height, f"case {case}"
            # contains the dilated component's bbox
            assert box.x0 <= comp.bbox.x0 and comp.bbox.x1 <= box.x1, f"case {case}"
            assert box.y0 <= comp.bbox.y0 and comp.bbox.y1 <= box.y1, f"case {case}"
            # square side from the scale rule, clamped per axis
            longest = max(
                comp.bbox.x1 - comp.bbox.x0 + 1, comp.bbox.y1 - comp.bbox.y0 + 1
            )
            side = math.ceil(scale * longest)
            assert box.x1 - box.x0 + 1 == min(side, width), f"case {case}"
            assert box.y1 - box.y0 + 1 == min(side, height), f"case {case}"
            # the region is exactly the component, shifted into the box
            region = {
                (x + box.x0, y + box.y0)
                for x, y in zip(*np.nonzero(crop.region_mask.bits)[::-1])
            }
            assert region == set(comp.pixels), f"case {case}"
    _report("crop-plan-invariants", start, 30.0, "1000 masks, scale 1-3, radius 0-5")


class _NoiseInpainter:
    """Adversarial backend: correct shape, random content, ignores the mask."""

    def __init__(self, seed: int):
        self._rng = np.random.default_rng(seed)

    def inpaint(self, image, mask, prompt):
        noise = self._rng.integers(0, 256, size=image.pixels.shape, dtype=np.uint8)
        return RgbImage(noise)


def test_pixel_preservation():
    start = time.perf_counter()
    rng = np.random.default_rng(20003)
    for case in range(200):
        mask = random_mask(rng, max_side=48)
        image = random_image(rng, mask.width, mask.height)
        scale = float(rng.uniform(1.0, 3.0))
        radius = int(rng.integers(0, 4))
        feather = int(rng.integers(0, 4))
        result = refine(
            image,
            mask,
            _NoiseInpainter(seed=case),
            scale=scale,
            dilation_radius=radius,
            feather=feather,
            prompt="x",
        )
        plan = plan_crops(mask, (image.width, image.height), scale=scale,
                          dilation_radius=radius)
        outside = np.ones((image.height, image.width), dtype=bool)
        for crop in plan.crops:
            ys, xs = np.nonzero(crop.region_mask.bits)
            outside[ys + crop.box.y0, xs + crop.box.x0] = False
        assert np.array_equal(
            result.pixels[outside], image.pixels[outside]
        ), f"case {case}"
    _report("pixel-preservation", start, 60.0, "200 adversarial inpainter cases")


def test_miou_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(20004)
    for case in range(500):
        corpus = []
        tp = fp = fn = tn = 0
        for i in range(int(rng.integers(1, 11))):
            gt = random_mask(rng, max_side=32)
            pred = BinaryMask(rng.random((gt.height, gt.width)) < rng.uniform(0, 1))
            corpus.append((f"img{i}", pred, gt))
            dtp, dfp, dfn, dtn = brute_confusion(pred.bits, gt.bits)
            tp, fp, fn, tn = tp + dtp, fp + dfp, fn + dfn, tn + dtn
        report = evaluate_miou(corpus)
        agg = report.aggregate
        assert (agg.tp, agg.fp, agg.fn, agg.tn) == (tp, fp, fn, tn), f"case {case}"
        iou_a = 1.0 if tp + fp + fn == 0 else tp / (tp + fp + fn)
        iou_b = 1.0 if tn + fp + fn == 0 else tn / (tn + fp + fn)
        assert abs(report.miou - (iou_a + iou_b) / 2) <= 1e-12, f"case {case}"
    pred = BinaryMask.from_pixels(4, 4, [(0, 0), (1, 0), (0, 1), (1, 1)])
    gt = BinaryMask.from_pixels(4, 4, [(1, 0), (2, 0), (1, 1), (2, 1)])
    assert abs(evaluate_miou([("w", pred, gt)]).miou - 11 / 21) <= 1e-12
    _report("miou-oracle", start, 30.0, "500 corpora + 11/21 worked example")


def test_permutation_exactness():
    start = time.perf_counter()
    rng = np.random.default_rng(20005)
    worst = 0.0
    for case in range(200):
        n = int(rng.integers(1, 11))
        votes = tuple(int(v) for v in rng.integers(-1, 2, size=n))
        record = PreferenceVotes("t", votes)
        exact = permutation_test(record, method="exact")
        assert abs(exact - brute_permutation_p(votes)) <= 1e-12, f"case {case}"
        sampled = permutation_test(
            record, n_permutations=100_000, seed=0, method="monte-carlo"
        )
        worst = max(worst, abs(sampled - exact))
        assert abs(sampled - exact) <= 0.02, f"case {case}: {sampled} vs {exact}"
    assert permutation_test(PreferenceVotes("t", (0, 0, 0, 0))) == 1.0
    assert permutation_test(PreferenceVotes("t", (1,) * 8)) == 0.0078125
    _report(
        "permutation-exactness",
        start,
        120.0,
        f"200 vectors, worst sampled gap {worst:.4f}",
    )


def test_holm_bonferroni_gate():
    start = time.perf_counter()
    assert holm_bonferroni({"A": 0.01, "B": 0.04}, alpha=0.05) == {"A": True, "B": True}
    assert holm_bonferroni({"A": 1.0, "B": 1.0}, alpha=0.05) == {
        "A": False,
        "B": False,
    }
    assert holm_bonferroni({"A": 0.03, "B": 0.04}, alpha=0.05) == {
        "A": False,
        "B": False,
    }
    rng = np.random.default_rng(20006)
    for case in range(1000):
        m = int(rng.integers(1, 10))
        p = {f"t{i}": float(rng.uniform(1e-9, 1.0)) for i in range(m)}
        lo, hi = sorted(rng.uniform(0.0001, 0.9999, size=2))
        small = {t for t, r in holm_bonferroni(p, alpha=float(lo)).items() if r}
        large = {t for t, r in holm_bonferroni(p, alpha=float(hi)).items() if r}
        assert small <= large, f"case {case}"
    _report("holm-bonferroni", start, 10.0, "3 worked examples + 1000 monotone checks")


def test_end_to_end_desk_scale(tmp_path):
    start = time.perf_counter()
    manifest, entries, planted = make_corpus(
        tmp_path / "corpus", n_artifact=40, n_clean=10, size=64, seed=20007
    )
    clean_ids = {e["image_id"] for e in entries[40:]}

    # (a) detector quality against the planted ground truth
    eval_out = tmp_path / "eval"
    assert run_cli("eval", "--manifest", manifest, "--out", eval_out) == 0
    report = json.loads((eval_out / "eval_report.json").read_text())
    per_image_iou = [row["iou_artifact"] for row in report["per_image"]]
    mean_iou = float(np.mean(per_image_iou))
    assert mean_iou >= 0.5, f"mean detector IoU {mean_iou}"

    # (b) refinement reduces the mean artifact ratio under re-detection
    par_before_out = tmp_path / "par_before"
    assert run_cli("par", "--manifest", manifest, "--out", par_before_out) == 0
    refine_out = tmp_path / "refined"
    assert run_cli("refine", "--manifest", manifest, "--out", refine_out) == 0
    refined_entries = [
        {
            "image_id": e["image_id"],
            "image_path": str(refine_out / "refined" / f"{e['image_id']}.png"),
            "task": e["task"],
            "domain": e["domain"],
            "split": "train",
        }
        for e in entries
    ]
    refined_manifest = tmp_path / "refined_manifest.json"
    refined_manifest.write_text(json.dumps({"entries": refined_entries}))
    par_after_out = tmp_path / "par_after"
    assert run_cli("par", "--manifest", refined_manifest, "--out", par_after_out) == 0

    def mean_par(path):
        values = [
            json.loads(line)["par"]
            for line in path.read_text().splitlines()
            if line.strip()
        ]
        return float(np.mean(values))

    before = mean_par(par_before_out / "par.jsonl")
    after = mean_par(par_after_out / "par.jsonl")
    assert after < before, f"mean PAR {before} -> {after}"

    # (c) ranking puts every artifact-free image in the top ten
    rank_out = tmp_path / "rank"
    assert run_cli("rank", "--manifest", manifest, "--out", rank_out) == 0
    ranked_ids = [
        json.loads(line)["image_id"]
        for line in (rank_out / "ranked.jsonl").read_text().splitlines()
        if line.strip()
    ]
    assert set(ranked_ids[:10]) == clean_ids
    _report(
        "end-to-end-desk-scale",
        start,
        120.0,
        f"mean IoU {mean_iou:.3f}, mean PAR {before:.4f} -> {after:.4f}",
    )


def _strip_timings(doc: dict) -> dict:
    out = dict(doc)
    out["items"] = [
        {k: v for k, v in item.items() if k != "seconds"} for item in doc["items"]
    ]
    return out


def _assert_same_outputs(a, b, ignore_summary=False):
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        if rel.name == "run_summary.json":
            if not ignore_summary:
                assert _strip_timings(
                    json.loads((a / rel).read_text())
                ) == _strip_timings(json.loads((b / rel).read_text())), str(rel)
        else:
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), str(rel)


def test_cli_determinism(tmp_path):
    start = time.perf_counter()
    root = tmp_path / "corpus"
    manifest, entries, _ = make_corpus(root, n_artifact=8, n_clean=4, size=48)
    votes = tmp_path / "votes.csv"
    votes.write_text("task,vote\n" + "inpainting,1\n" * 8 + "cond,-1\ncond,0\n")
    commands = {
        "detect": ["detect"],
        "par": ["par"],
        "rank": ["rank"],
        "select": ["select", "--group-by", "task"],
        "refine": ["refine"],
        "eval": ["eval", "--votes", votes, "--permutations", "50000"],
        "stats": ["stats", "--heatmap-grid", "16"],
    }
    for name, argv in commands.items():
        out_a = tmp_path / f"{name}_a"
        out_b = tmp_path / f"{name}_b"
        for out in (out_a, out_b):
            code = run_cli(*argv, "--manifest", manifest, "--out", out, "--seed", "3")
            assert code == 0, name
        _assert_same_outputs(out_a, out_b)
    for name, argv in (("par", ["par"]), ("refine", ["refine"])):
        serial = tmp_path / f"{name}_serial"
        threaded = tmp_path / f"{name}_threaded"
        assert run_cli(*argv, "--manifest", manifest, "--out", serial,
                       "--parallelism", "1") == 0
        assert run_cli(*argv, "--manifest", manifest, "--out", threaded,
                       "--parallelism", "8") == 0
        _assert_same_outputs(serial, threaded, ignore_summary=True)
    _report("cli-determinism", start, 120.0, "7 commands re-run, 1 vs 8 workers")

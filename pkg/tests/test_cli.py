import json

import numpy as np
import pytest

from artifact import (
    BinaryMask,
    RgbImage,
    StubInpainter,
    decode_image,
    decode_mask,
    dilate,
    encode_image,
    encode_mask,
    load_config,
    naive_refine,
    records_from_jsonl,
)
from artifact.cli import main
from artifact.config import config_hash


def plant_patch(px: np.ndarray, x0: int, y0: int, w: int, h: int) -> None:
    """Checkerboard patch the built-in detector recovers exactly."""
    yy, xx = np.mgrid[y0 : y0 + h, x0 : x0 + w]
    checker = np.where((yy + xx) % 2 == 0, 144, 96).astype(np.uint8)
    px[y0 : y0 + h, x0 : x0 + w] = checker[:, :, None]


def make_corpus(root, n_artifact=3, n_clean=1, size=32, seed=77):
    """Flat images, some with a planted high-frequency patch; paired gt masks."""
    (root / "imgs").mkdir(parents=True, exist_ok=True)
    (root / "gt").mkdir(exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    planted = {}
    for i in range(n_artifact + n_clean):
        px = np.full((size, size, 3), 120, dtype=np.uint8)
        bits = np.zeros((size, size), dtype=bool)
        if i < n_artifact:
            w = int(rng.integers(6, 10))
            h = int(rng.integers(6, 10))
            x0 = int(rng.integers(2, size - w - 1))
            y0 = int(rng.integers(2, size - h - 1))
            plant_patch(px, x0, y0, w, h)
            bits[y0 : y0 + h, x0 : x0 + w] = True
        (root / "imgs" / f"img{i}.png").write_bytes(encode_image(RgbImage(px)))
        (root / "gt" / f"img{i}.png").write_bytes(encode_mask(BinaryMask(bits)))
        planted[f"img{i}"] = bits
        entries.append(
            {
                "image_id": f"img{i}",
                "image_path": f"imgs/img{i}.png",
                "gt_mask_path": f"gt/img{i}.png",
                "task": "inpainting" if i % 2 == 0 else "editing",
                "domain": "ffhq" if i % 2 == 0 else "lsun_bedroom",
                "split": "train" if i % 2 == 0 else "val",
            }
        )
    manifest = root / "manifest.json"
    manifest.write_text(json.dumps({"entries": entries}))
    return manifest, entries, planted


def run(*argv) -> int:
    return main([str(a) for a in argv])


def read_json(path):
    return json.loads(path.read_text())


class TestDetect:
    def test_writes_masks_and_summary(self, tmp_path):
        manifest, entries, planted = make_corpus(tmp_path / "corpus")
        out = tmp_path / "out"
        assert run("detect", "--manifest", manifest, "--out", out) == 0
        for image_id, bits in planted.items():
            mask = decode_mask((out / "masks" / f"{image_id}.png").read_bytes())
            assert np.array_equal(mask.bits, bits)
        summary = read_json(out / "run_summary.json")
        assert summary["command"] == "detect"
        assert summary["exit_code"] == 0
        assert summary["config_hash"] == config_hash(load_config(None))
        assert summary["split"] == "all"
        assert summary["parallelism"] == 1
        assert [i["image_id"] for i in summary["items"]] == [
            e["image_id"] for e in entries
        ]
        assert all(i["status"] == "ok" for i in summary["items"])
        assert summary["outputs"] == sorted(
            f"masks/img{i}.png" for i in range(len(entries))
        )

    def test_clean_corpus_gives_empty_masks(self, tmp_path):
        manifest, entries, _ = make_corpus(tmp_path / "c", n_artifact=0, n_clean=2)
        out = tmp_path / "out"
        assert run("detect", "--manifest", manifest, "--out", out) == 0
        for e in entries:
            mask = decode_mask((out / "masks" / f"{e['image_id']}.png").read_bytes())
            assert mask.is_empty()


class TestPar:
    def test_records_match_planted_areas(self, tmp_path):
        manifest, entries, planted = make_corpus(tmp_path / "c", size=32)
        out = tmp_path / "out"
        assert run("par", "--manifest", manifest, "--out", out) == 0
        records = records_from_jsonl((out / "par.jsonl").read_text())
        assert [r.image_id for r in records] == [e["image_id"] for e in entries]
        for record in records:
            expected = planted[record.image_id].sum() / (32 * 32)
            assert record.par == expected
        clean = [r for r in records if r.image_id == "img3"]
        assert clean[0].par == 0.0

    def test_mask_path_beats_detector(self, tmp_path):
        root = tmp_path / "c"
        manifest, entries, _ = make_corpus(root, n_artifact=0, n_clean=1)
        bits = np.zeros((32, 32), dtype=bool)
        bits[0:2, 0:4] = True
        (root / "pre.png").write_bytes(encode_mask(BinaryMask(bits)))
        entries[0]["mask_path"] = "pre.png"
        manifest.write_text(json.dumps({"entries": entries}))
        out = tmp_path / "out"
        assert run("par", "--manifest", manifest, "--out", out) == 0
        (record,) = records_from_jsonl((out / "par.jsonl").read_text())
        assert record.par == 8 / 1024

    def test_split_filter(self, tmp_path):
        manifest, entries, _ = make_corpus(tmp_path / "c")
        out = tmp_path / "out"
        assert run(
            "par", "--manifest", manifest, "--out", out, "--split", "train"
        ) == 0
        records = records_from_jsonl((out / "par.jsonl").read_text())
        assert [r.image_id for r in records] == ["img0", "img2"]
        summary = read_json(out / "run_summary.json")
        assert summary["split"] == "train"
        assert len(summary["items"]) == 2


class TestRank:
    def make_premasked(self, root, areas):
        """Corpus of clean images whose PAR comes from precomputed masks."""
        (root / "imgs").mkdir(parents=True)
        (root / "masks").mkdir()
        entries = []
        for i, area in enumerate(areas):
            px = np.full((16, 16, 3), 100, dtype=np.uint8)
            (root / "imgs" / f"i{i}.png").write_bytes(encode_image(RgbImage(px)))
            bits = np.zeros((16, 16), dtype=bool)
            bits.flat[:area] = True
            (root / "masks" / f"i{i}.png").write_bytes(encode_mask(BinaryMask(bits)))
            entries.append(
                {
                    "image_id": f"i{i}",
                    "image_path": f"imgs/i{i}.png",
                    "mask_path": f"masks/i{i}.png",
                    "task": "inpainting" if i % 2 == 0 else "editing",
                    "domain": "d",
                    "split": "train",
                }
            )
        manifest = root / "manifest.json"
        manifest.write_text(json.dumps({"entries": entries}))
        return manifest

    def test_ascending_order_and_percentiles(self, tmp_path):
        manifest = self.make_premasked(tmp_path / "c", [40, 0, 8])
        out = tmp_path / "out"
        assert run("rank", "--manifest", manifest, "--out", out) == 0
        ranked = records_from_jsonl((out / "ranked.jsonl").read_text())
        assert [r.image_id for r in ranked] == ["i1", "i2", "i0"]
        samples = read_json(out / "percentiles.json")
        assert [s["percentile"] for s in samples] == [0, 25, 50, 75, 100]
        assert samples[0]["image_id"] == "i1"
        assert samples[-1]["image_id"] == "i0"
        assert samples[2]["image_id"] == "i2"  # median of three

    def test_records_reuse_skips_recompute(self, tmp_path):
        manifest = self.make_premasked(tmp_path / "c", [40, 0, 8])
        par_out = tmp_path / "par"
        assert run("par", "--manifest", manifest, "--out", par_out) == 0
        out = tmp_path / "out"
        assert run(
            "rank",
            "--manifest", manifest,
            "--out", out,
            "--records", par_out / "par.jsonl",
            "--percentiles", "",
        ) == 0
        ranked = records_from_jsonl((out / "ranked.jsonl").read_text())
        assert [r.image_id for r in ranked] == ["i1", "i2", "i0"]
        summary = read_json(out / "run_summary.json")
        assert summary["items"] == []
        assert not (out / "percentiles.json").exists()

    def test_empty_ranking_with_percentiles_is_config_error(self, tmp_path):
        root = tmp_path / "c"
        root.mkdir()
        (root / "manifest.json").write_text('{"entries": []}')
        out = tmp_path / "out"
        assert run("rank", "--manifest", root / "manifest.json", "--out", out) == 2

    def test_bad_percentile_value(self, tmp_path):
        manifest = self.make_premasked(tmp_path / "c", [4])
        assert run(
            "rank",
            "--manifest", manifest,
            "--out", tmp_path / "out",
            "--percentiles", "0,fifty",
        ) == 2


class TestSelect:
    def test_group_by_task(self, tmp_path):
        manifest = TestRank().make_premasked(tmp_path / "c", [40, 30, 8, 50])
        out = tmp_path / "out"
        assert run(
            "select", "--manifest", manifest, "--out", out, "--group-by", "task"
        ) == 0
        selection = read_json(out / "selection.json")
        assert selection == [
            {"group": "editing", "image_id": "i1", "par": 30 / 256},
            {"group": "inpainting", "image_id": "i2", "par": 8 / 256},
        ]

    def test_default_single_group(self, tmp_path):
        manifest = TestRank().make_premasked(tmp_path / "c", [40, 30, 8, 50])
        out = tmp_path / "out"
        assert run("select", "--manifest", manifest, "--out", out) == 0
        selection = read_json(out / "selection.json")
        assert selection == [{"group": "all", "image_id": "i2", "par": 8 / 256}]

    def test_empty_corpus_is_config_error(self, tmp_path):
        root = tmp_path / "c"
        root.mkdir()
        (root / "manifest.json").write_text('{"entries": []}')
        assert run(
            "select", "--manifest", root / "manifest.json", "--out", tmp_path / "o"
        ) == 2


class TestRefine:
    def test_outside_dilated_mask_untouched_and_par_drops(self, tmp_path):
        manifest, entries, planted = make_corpus(tmp_path / "c", size=32)
        out = tmp_path / "out"
        assert run("refine", "--manifest", manifest, "--out", out) == 0
        # default dilation: one percent of 32 rounds to 0, floored to radius 1
        for e in entries:
            image_id = e["image_id"]
            original = decode_image(
                (tmp_path / "c" / "imgs" / f"{image_id}.png").read_bytes()
            )
            refined = decode_image((out / "refined" / f"{image_id}.png").read_bytes())
            grown = dilate(BinaryMask(planted[image_id]), 1)
            keep = ~grown.bits
            assert np.array_equal(refined.pixels[keep], original.pixels[keep])
        # re-detecting on the refined images finds strictly fewer artifacts
        redetect = tmp_path / "redetect"
        refined_entries = [
            {
                "image_id": e["image_id"],
                "image_path": str(out / "refined" / f"{e['image_id']}.png"),
                "task": e["task"],
                "domain": e["domain"],
                "split": "train",
            }
            for e in entries
        ]
        (tmp_path / "m2.json").write_text(json.dumps({"entries": refined_entries}))
        assert run("par", "--manifest", tmp_path / "m2.json", "--out", redetect) == 0
        after = records_from_jsonl((redetect / "par.jsonl").read_text())
        before_mean = np.mean(
            [planted[e["image_id"]].sum() / 1024 for e in entries]
        )
        assert np.mean([r.par for r in after]) < before_mean

    def test_naive_mode_matches_library_call(self, tmp_path):
        root = tmp_path / "c"
        manifest, entries, planted = make_corpus(root, n_artifact=1, n_clean=0)
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"dilation": {"fixed": 2}}))
        out = tmp_path / "out"
        assert run(
            "refine",
            "--manifest", manifest,
            "--out", out,
            "--config", config,
            "--mode", "naive",
        ) == 0
        image = decode_image((root / "imgs" / "img0.png").read_bytes())
        expected = naive_refine(
            image,
            BinaryMask(planted["img0"]),
            StubInpainter(),
            dilation_radius=2,
            prompt="a person's face",
        )
        got = decode_image((out / "refined" / "img0.png").read_bytes())
        assert got == expected


class TestEval:
    def test_perfect_detection_scores_one(self, tmp_path):
        manifest, _, _ = make_corpus(tmp_path / "c")
        out = tmp_path / "out"
        assert run("eval", "--manifest", manifest, "--out", out) == 0
        report = read_json(out / "eval_report.json")
        assert report["miou"] == 1.0
        assert report["iou_artifact"] == 1.0
        assert len(report["per_image"]) == 4

    def test_votes_produce_significance(self, tmp_path):
        manifest, _, _ = make_corpus(tmp_path / "c")
        votes = tmp_path / "votes.csv"
        lines = ["task,vote"] + ["inpainting,1"] * 8 + ["cond,0"] * 5
        votes.write_text("\n".join(lines) + "\n")
        out = tmp_path / "out"
        assert run(
            "eval", "--manifest", manifest, "--out", out, "--votes", votes
        ) == 0
        doc = read_json(out / "significance.json")
        assert doc["alpha"] == 0.05
        assert doc["seed"] == 0
        by_task = {t["task"]: t for t in doc["tasks"]}
        assert by_task["inpainting"]["p_value"] == 0.0078125
        assert by_task["inpainting"]["reject_null"] is True
        assert by_task["inpainting"]["n_votes"] == 8
        assert by_task["cond"]["p_value"] == 1.0
        assert by_task["cond"]["reject_null"] is False

    def test_missing_gt_is_config_error(self, tmp_path):
        root = tmp_path / "c"
        manifest, entries, _ = make_corpus(root, n_artifact=1, n_clean=0)
        for e in entries:
            del e["gt_mask_path"]
        manifest.write_text(json.dumps({"entries": entries}))
        out = tmp_path / "out"
        assert run("eval", "--manifest", manifest, "--out", out) == 2
        assert not (out / "eval_report.json").exists()

    def test_bad_alpha(self, tmp_path):
        manifest, _, _ = make_corpus(tmp_path / "c", n_artifact=1, n_clean=0)
        assert run(
            "eval", "--manifest", manifest, "--out", tmp_path / "o", "--alpha", "1.5"
        ) == 2


class TestStats:
    def test_outputs(self, tmp_path):
        root = tmp_path / "c"
        manifest, entries, planted = make_corpus(root, size=32)
        # label maps: class 1 on the left half, class 2 on the right
        (root / "labels").mkdir()
        from PIL import Image

        label = np.ones((32, 32), dtype=np.uint8)
        label[:, 16:] = 2
        for e in entries:
            path = root / "labels" / f"{e['image_id']}.png"
            Image.fromarray(label, mode="L").save(path)
            e["label_map_path"] = f"labels/{e['image_id']}.png"
        manifest.write_text(json.dumps({"entries": entries}))
        names = tmp_path / "names.json"
        names.write_text('{"1": "left", "2": "right"}')
        out = tmp_path / "out"
        assert run(
            "stats",
            "--manifest", manifest,
            "--out", out,
            "--heatmap-grid", "8",
            "--class-names", names,
        ) == 0
        histogram = (out / "histogram.csv").read_text().splitlines()
        assert histogram[0] == "task,mean_par,count"
        assert {line.split(",")[0] for line in histogram[1:]} == {
            "editing",
            "inpainting",
        }
        heatmap = read_json(out / "heatmap.json")
        assert heatmap["grid_width"] == 8
        assert heatmap["count"] == 4
        assert len(heatmap["values"]) == 8
        table = (out / "class_par.csv").read_text().splitlines()
        assert table[0] == "class_id,class_name,artifact_pixels,class_pixels,par"
        assert {line.split(",")[1] for line in table[1:]} == {"left", "right"}

    def test_no_labels_no_class_csv(self, tmp_path):
        manifest, _, _ = make_corpus(tmp_path / "c")
        out = tmp_path / "out"
        assert run("stats", "--manifest", manifest, "--out", out) == 0
        assert (out / "histogram.csv").exists()
        assert (out / "heatmap.json").exists()
        assert not (out / "class_par.csv").exists()

    def test_bad_grid(self, tmp_path):
        manifest, _, _ = make_corpus(tmp_path / "c", n_artifact=1, n_clean=0)
        assert run(
            "stats",
            "--manifest", manifest,
            "--out", tmp_path / "o",
            "--heatmap-grid", "0",
        ) == 2


class TestFailureHandling:
    def corrupt(self, root, image_id):
        (root / "imgs" / f"{image_id}.png").write_bytes(b"not a png at all")

    def test_continue_on_error(self, tmp_path):
        root = tmp_path / "c"
        manifest, entries, _ = make_corpus(root)
        self.corrupt(root, "img1")
        out = tmp_path / "out"
        assert run("par", "--manifest", manifest, "--out", out) == 1
        records = records_from_jsonl((out / "par.jsonl").read_text())
        assert [r.image_id for r in records] == ["img0", "img2", "img3"]
        summary = read_json(out / "run_summary.json")
        statuses = {i["image_id"]: i["status"] for i in summary["items"]}
        assert statuses == {
            "img0": "ok",
            "img1": "error",
            "img2": "ok",
            "img3": "ok",
        }
        failed = next(i for i in summary["items"] if i["image_id"] == "img1")
        assert "error" in failed
        assert summary["exit_code"] == 1

    def test_strict_aborts_remaining(self, tmp_path):
        root = tmp_path / "c"
        manifest, entries, _ = make_corpus(root)
        self.corrupt(root, "img1")
        out = tmp_path / "out"
        assert run(
            "par",
            "--manifest", manifest,
            "--out", out,
            "--strict",
            "--parallelism", "1",
        ) == 1
        summary = read_json(out / "run_summary.json")
        statuses = [i["status"] for i in summary["items"]]
        assert statuses == ["ok", "error", "skipped", "skipped"]
        skipped = summary["items"][2]
        assert skipped["error"] == "aborted by --strict"

    def test_config_errors_exit_two(self, tmp_path):
        manifest, _, _ = make_corpus(tmp_path / "c", n_artifact=1, n_clean=0)
        assert run("par", "--manifest", tmp_path / "gone.json", "--out", tmp_path / "o") == 2
        bad_config = tmp_path / "bad.json"
        bad_config.write_text('{"crop_scale": 0.1}')
        assert run(
            "par",
            "--manifest", manifest,
            "--out", tmp_path / "o",
            "--config", bad_config,
        ) == 2

    def test_unknown_flag_exits_two(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            run("par", "--manifest", "x", "--out", "y", "--frobnicate")
        assert info.value.code == 2

    def test_missing_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as info:
            run()
        assert info.value.code == 2


class TestDeterminism:
    def strip_timings(self, summary):
        doc = dict(summary)
        doc["items"] = [
            {k: v for k, v in item.items() if k != "seconds"}
            for item in summary["items"]
        ]
        return doc

    def test_rerun_byte_identical(self, tmp_path):
        manifest, _, _ = make_corpus(tmp_path / "c")
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        for out in (out1, out2):
            assert run("detect", "--manifest", manifest, "--out", out) == 0
        files1 = sorted(p.relative_to(out1) for p in out1.rglob("*.png"))
        files2 = sorted(p.relative_to(out2) for p in out2.rglob("*.png"))
        assert files1 == files2
        for rel in files1:
            assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes()
        assert self.strip_timings(read_json(out1 / "run_summary.json")) == (
            self.strip_timings(read_json(out2 / "run_summary.json"))
        )

    def test_parallelism_does_not_change_outputs(self, tmp_path):
        manifest, _, _ = make_corpus(tmp_path / "c")
        serial, parallel = tmp_path / "s", tmp_path / "p"
        assert run("par", "--manifest", manifest, "--out", serial) == 0
        assert run(
            "par", "--manifest", manifest, "--out", parallel, "--parallelism", "8"
        ) == 0
        assert (serial / "par.jsonl").read_bytes() == (parallel / "par.jsonl").read_bytes()

import json
from pathlib import Path

import numpy as np
import pytest

from crowdsafe import imgio
from crowdsafe.cli import main
from crowdsafe.imaging import new_image


def write_video(tmp_path, n_frames=12, w=320, h=240, fps=6.0):
    frames = []
    for i in range(n_frames):
        name = f"src_{i:03d}.png"
        imgio.write_image(tmp_path / name, new_image(w, h, 3, fill=100))
        frames.append(name)
    manifest = tmp_path / "video.json"
    manifest.write_text(json.dumps({"fps": fps, "frames": frames}))
    return manifest


def write_scenario(tmp_path):
    doc = {"frames": {
        "0": {"persons": [{"box": [100, 50, 40, 100], "conf": 0.9},
                          {"box": [200, 50, 40, 100], "conf": 0.8}],
              "faces": [{"box": [110, 60, 24, 24], "conf": 0.95, "mask_prob": 0.9}]},
        "5": {"persons": [{"box": [10, 10, 40, 100], "conf": 0.9}], "faces": []},
    }}
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc))
    return path


def process_args(tmp_path, manifest, scenario, out="out", extra=()):
    return ["process", "--manifest", str(manifest), "--backend", "synthetic",
            "--scenario", str(scenario), "--out", str(tmp_path / out), *extra]


# -- process -----------------------------------------------------------------------

def test_process_synthetic_run(tmp_path, capsys):
    manifest = write_video(tmp_path)
    scenario = write_scenario(tmp_path)
    code = main(process_args(tmp_path, manifest, scenario))
    assert code == 0
    report_path = tmp_path / "out" / "report.json"
    assert report_path.is_file()
    report = json.loads(report_path.read_text())
    assert len(report["frames"]) == 3  # 12 frames, stride 5
    assert "report.json" in capsys.readouterr().out


def test_process_requires_scenario_for_synthetic(tmp_path, capsys):
    manifest = write_video(tmp_path)
    code = main(["process", "--manifest", str(manifest), "--backend", "synthetic",
                 "--out", str(tmp_path / "out")])
    assert code == 1
    assert "--scenario" in capsys.readouterr().err


def test_process_defaults_recorded_in_config(tmp_path):
    manifest = write_video(tmp_path)
    scenario = write_scenario(tmp_path)
    assert main(process_args(tmp_path, manifest, scenario)) == 0
    config = json.loads((tmp_path / "out" / "report.json").read_text())["config"]
    assert config["stride"] == 5
    assert config["conf"] == 0.5
    assert config["nms"] == 0.3
    assert config["eps"] == 200.0
    assert config["min_pts"] == 2
    assert config["classifier_input"] == 128
    assert config["detector_input"] == 416
    assert config["backend"] == "synthetic"


def test_process_unreadable_manifest(tmp_path, capsys):
    scenario = write_scenario(tmp_path)
    code = main(["process", "--manifest", str(tmp_path / "nope.json"),
                 "--backend", "synthetic", "--scenario", str(scenario),
                 "--out", str(tmp_path / "out")])
    assert code == 1


def test_process_malformed_scenario(tmp_path):
    manifest = write_video(tmp_path)
    bad = tmp_path / "bad.json"
    bad.write_text('{"frames": {"0": {"persons": [{"box": [0,0,1,1], "conf": 2.0}]}}}')
    assert main(process_args(tmp_path, manifest, bad)) == 1


def test_process_graph_backend_requires_models(tmp_path, capsys):
    manifest = write_video(tmp_path)
    code = main(["process", "--manifest", str(manifest), "--backend", "graph",
                 "--out", str(tmp_path / "out")])
    assert code == 1


def test_process_graph_backend_missing_files_is_runtime_error(tmp_path):
    manifest = write_video(tmp_path)
    code = main(["process", "--manifest", str(manifest), "--backend", "graph",
                 "--models", str(tmp_path / "models"), "--out", str(tmp_path / "out")])
    assert code == 2


def test_unknown_flag_is_usage_error(tmp_path, capsys):
    assert main(["process", "--wat"]) == 1
    assert "usage" in capsys.readouterr().err.lower()


# -- augment -----------------------------------------------------------------------

def make_face_inputs(tmp_path, n=10):
    img_dir = tmp_path / "in"
    lm_dir = tmp_path / "lm"
    masks_dir = tmp_path / "masks"
    for d in (img_dir, lm_dir, masks_dir):
        d.mkdir()
    rng = np.random.default_rng(1)
    rows = ["path,label"]
    for i in range(n):
        img = rng.integers(0, 256, size=(120, 120, 3), dtype=np.uint8)
        imgio.write_image(img_dir / f"f{i}.png", img)
        (lm_dir / f"f{i}.json").write_text(json.dumps({
            "nose_bridge": [60, 40], "chin_left": [35, 90],
            "chin_bottom": [60, 95], "chin_right": [85, 90]}))
        rows.append(f"{img_dir / f'f{i}.png'},0")
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("\n".join(rows) + "\n")
    asset = np.zeros((10, 20, 4), dtype=np.uint8)
    asset[:, :] = (40, 40, 220, 255)
    imgio.write_image(masks_dir / "mask0.png", asset)
    return manifest, masks_dir, lm_dir


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(Path(root).rglob("*")) if p.is_file()}


def test_augment_mask_labels_outputs_as_masked(tmp_path):
    manifest, masks, lm = make_face_inputs(tmp_path)
    code = main(["augment", "mask", "--manifest", str(manifest), "--masks", str(masks),
                 "--landmarks", str(lm), "--out", str(tmp_path / "out"), "--seed", "7"])
    assert code == 0
    out_manifest = (tmp_path / "out" / "manifest.csv").read_text().strip().splitlines()
    assert out_manifest[0] == "path,label"
    assert len(out_manifest) == 11
    assert all(line.endswith(",1") for line in out_manifest[1:])


def test_augment_blur_empty_manifest(tmp_path):
    manifest = tmp_path / "m.csv"
    manifest.write_text("path,label\n")
    code = main(["augment", "blur", "--manifest", str(manifest),
                 "--out", str(tmp_path / "out")])
    assert code == 0
    assert (tmp_path / "out" / "manifest.csv").read_text().strip() == "path,label"


def test_augment_blur_same_seed_identical_trees(tmp_path):
    manifest, _masks, _lm = make_face_inputs(tmp_path, n=5)
    for name in ("a", "b"):
        code = main(["augment", "blur", "--manifest", str(manifest),
                     "--out", str(tmp_path / name), "--seed", "42"])
        assert code == 0
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


def test_augment_blur_test_fraction_split(tmp_path):
    manifest, _masks, _lm = make_face_inputs(tmp_path, n=10)
    code = main(["augment", "blur", "--manifest", str(manifest),
                 "--out", str(tmp_path / "out"), "--seed", "1"])
    assert code == 0
    train = (tmp_path / "out" / "train.csv").read_text().strip().splitlines()
    test = (tmp_path / "out" / "test.csv").read_text().strip().splitlines()
    assert len(train) - 1 == 9 and len(test) - 1 == 1  # default 0.10 fraction


def test_augment_malformed_csv(tmp_path):
    manifest = tmp_path / "m.csv"
    manifest.write_text("wrong,header\nx.png,0\n")
    assert main(["augment", "blur", "--manifest", str(manifest),
                 "--out", str(tmp_path / "out")]) == 1


# -- evaluate ----------------------------------------------------------------------

def run_pipeline_to_report(tmp_path):
    manifest = write_video(tmp_path)
    scenario = write_scenario(tmp_path)
    assert main(process_args(tmp_path, manifest, scenario)) == 0
    return tmp_path / "out" / "report.json"


def test_evaluate_self_consistent_labels(tmp_path, capsys):
    report_path = run_pipeline_to_report(tmp_path)
    report = json.loads(report_path.read_text())
    labels = {"frames": {str(f["index"]): f["counts"] for f in report["frames"]}}
    labels_path = tmp_path / "labels.json"
    labels_path.write_text(json.dumps(labels))
    out = tmp_path / "metrics.json"
    code = main(["evaluate", "--report", str(report_path), "--labels", str(labels_path),
                 "--out", str(out)])
    assert code == 0
    metrics = json.loads(out.read_text())
    for row in metrics["rows"].values():
        assert row["accuracy"] == 1.0
        assert row["f1"] == 1.0


def test_evaluate_missing_labels_file(tmp_path):
    report_path = run_pipeline_to_report(tmp_path)
    code = main(["evaluate", "--report", str(report_path),
                 "--labels", str(tmp_path / "absent.json"), "--out", str(tmp_path / "m.json")])
    assert code == 1


def test_evaluate_frame_mismatch_listed(tmp_path, capsys):
    report_path = run_pipeline_to_report(tmp_path)
    labels_path = tmp_path / "labels.json"
    labels_path.write_text(json.dumps({"frames": {"999": {
        "people": 1, "violators": 0, "faces": 0, "masked": 0}}}))
    code = main(["evaluate", "--report", str(report_path), "--labels", str(labels_path),
                 "--out", str(tmp_path / "m.json")])
    assert code == 1
    assert "999" in capsys.readouterr().err


def test_evaluate_hand_computed_people_accuracy(tmp_path):
    report = {
        "frames": [{"index": 0,
                    "counts": {"people": 4, "violators": 0, "faces": 0, "masked": 0},
                    "failed": False}],
        "timing_per_video_second_s": {},
    }
    report_path = tmp_path / "report.json"
    report_path.write_text(json.dumps(report))
    labels_path = tmp_path / "labels.json"
    labels_path.write_text(json.dumps({"frames": {"0": {
        "people": 6, "violators": 0, "faces": 0, "masked": 0}}}))
    out = tmp_path / "metrics.json"
    assert main(["evaluate", "--report", str(report_path), "--labels", str(labels_path),
                 "--out", str(out)]) == 0
    metrics = json.loads(out.read_text())
    assert metrics["rows"]["person_detection"]["accuracy"] == pytest.approx(2 / 3, abs=1e-12)


# -- bench -------------------------------------------------------------------------

def test_bench_prints_stage_rows(tmp_path, capsys):
    manifest = write_video(tmp_path)
    scenario = write_scenario(tmp_path)
    code = main(["bench", "--manifest", str(manifest), "--backend", "synthetic",
                 "--scenario", str(scenario), "--repeat", "3"])
    assert code == 0
    out = capsys.readouterr().out
    for row in ("person_detection", "social_distancing", "face_detection",
                "mask_classification", "total"):
        assert row in out
    assert "3 runs" in out

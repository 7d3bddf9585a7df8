"""The pcrop command line: exit codes, outputs, and a small pipeline."""

import json

import numpy as np
import pytest

from perspective_crop.cli import main
from perspective_crop.datafiles import (
    load_json,
    load_keypoint_frames,
    load_manifest,
    load_npy,
    verify_manifest,
)


def _run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture()
def camera_file(tmp_path):
    path = tmp_path / "cam.json"
    path.write_text(
        json.dumps({"fx": 0.7, "fy": 0.7, "cx": 0.5, "cy": 0.5, "width": 512, "height": 512})
    )
    return path


@pytest.fixture()
def keypoint_file(tmp_path):
    rng = np.random.default_rng(51)
    path = tmp_path / "kps.jsonl"
    with open(path, "w") as fh:
        for _ in range(3):
            kps = (0.5 + 0.2 * rng.uniform(-1, 1, size=(6, 2))).tolist()
            fh.write(json.dumps({"keypoints": kps}) + "\n")
    return path


def test_no_command_is_usage_error(capsys):
    assert _run() == 1
    assert "error:" in capsys.readouterr().err


def test_unknown_command_is_usage_error(capsys):
    assert _run("definitely-not-a-command") == 1
    assert "invalid choice" in capsys.readouterr().err


def test_bad_flag_value_is_usage_error(capsys):
    assert _run("gen", "--kind", "sphere", "--n", "5", "--out", "x") == 1
    assert "invalid choice" in capsys.readouterr().err


def test_missing_input_file_is_exit_1(tmp_path, capsys):
    assert _run("warp-keypoints", "--keypoints", tmp_path / "nope.jsonl", "--out", tmp_path / "o") == 1
    assert "cannot read" in capsys.readouterr().err


def test_impossible_scene_is_exit_2(tmp_path, capsys):
    code = _run(
        "gen", "--kind", "figure", "--n", "3", "--out", tmp_path / "d",
        "--depth", "300", "320",
    )
    assert code == 2
    assert "runtime error" in capsys.readouterr().err


def test_warp_keypoints_roundtrip(tmp_path, camera_file, keypoint_file):
    out = tmp_path / "warped.jsonl"
    assert _run(
        "warp-keypoints", "--camera", camera_file, "--keypoints", keypoint_file,
        "--out", out, "--margin", "0.1",
    ) == 0
    frames = load_keypoint_frames(out)
    assert len(frames) == 3
    for f in frames:
        # the root joint lands on the patch center
        assert np.allclose(f["keypoints"][0], [0.5, 0.5], atol=1e-9)
        assert "target" in f and "scale" in f


def test_warp_keypoints_root_center_mode(tmp_path, camera_file, keypoint_file):
    out = tmp_path / "rc.jsonl"
    assert _run(
        "warp-keypoints", "--camera", camera_file, "--keypoints", keypoint_file,
        "--out", out, "--mode", "root_center", "--margin", "0.1",
    ) == 0
    frames = load_keypoint_frames(out)
    assert np.allclose(frames[0]["keypoints"][0], [0.0, 0.0], atol=1e-12)


def test_warp_sequence_uses_one_shared_crop(tmp_path, camera_file, keypoint_file):
    out = tmp_path / "seq.jsonl"
    assert _run(
        "warp-sequence", "--camera", camera_file, "--keypoints", keypoint_file,
        "--out", out, "--margin", "0.1",
    ) == 0
    frames = load_keypoint_frames(out)
    scales = np.array([f["scale"] for f in frames])
    targets = np.array([f["target"] for f in frames])
    assert np.allclose(scales, scales[0]) and np.allclose(targets, targets[0])
    # the middle frame's root is pinned to the patch center
    mid = frames[len(frames) // 2]
    assert np.allclose(mid["keypoints"][0], [0.5, 0.5], atol=1e-12)


def test_warp_image_writes_patch_and_pgm(tmp_path, camera_file):
    img = np.linspace(0, 1, 64)[None, :] * np.ones((64, 1))
    src = tmp_path / "img.npy"
    np.save(src, img)
    out = tmp_path / "patch.npy"
    pgm = tmp_path / "patch.pgm"
    assert _run(
        "warp-image", "--camera", camera_file, "--image", src,
        "--target", "0.6", "0.5", "--scale", "0.3", "0.3",
        "--out", out, "--pgm", pgm, "--out-size", "32", "32",
    ) == 0
    patch = load_npy(out)
    assert patch.shape == (32, 32)
    assert pgm.read_bytes().startswith(b"P5\n32 32\n255\n")


def test_gradcheck_exits_zero(capsys):
    assert _run("gradcheck") == 0
    out = capsys.readouterr().out
    assert "rotation" in out and "FAIL" not in out


def test_compare_focal_options_reports_option_c_exact(capsys):
    assert _run("compare-focal-options", "--target", "0.8", "0.5", "--scale", "0.3", "0.3") == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if " C " in f" {l} "]
    assert any("1.000000/  1.000000" in l for l in lines)


def test_gen_train_eval_bin_pipeline(tmp_path, capsys):
    train_dir = tmp_path / "train"
    test_dir = tmp_path / "test"
    model = tmp_path / "model.json"
    report = tmp_path / "report.json"
    assert _run("gen", "--kind", "figure", "--n", "200", "--seed", "3", "--out", train_dir) == 0
    assert _run("gen", "--kind", "figure", "--n", "80", "--seed", "4", "--out", test_dir) == 0
    assert verify_manifest(train_dir / "manifest.json") == []
    assert _run(
        "train", "--data", train_dir, "--out", model, "--pipeline", "perspective",
        "--hidden", "24", "--epochs", "5", "--seed", "0",
    ) == 0
    manifest = load_manifest(str(model) + ".manifest.json")
    assert manifest["command"] == "train"
    assert _run(
        "eval", "--data", test_dir, "--model", model, "--pipeline", "perspective",
        "--out", report,
    ) == 0
    data = load_json(report)
    assert set(data) >= {"summary", "bins", "per_sample", "slope_mm_per_unit"}
    assert data["summary"]["n"] == 80
    assert 0.0 <= data["summary"]["pck50_percent"] <= data["summary"]["pck100_percent"] <= 100.0
    assert len(data["per_sample"]["error_mm"]) == 80
    assert len(data["per_sample"]["root2d"]) == 80
    # bins with no samples are dropped rather than padded with NaN
    assert len(data["bins"]["counts"]) == len(data["bins"]["mean_mpjpe_mm"])
    assert all(c > 0 for c in data["bins"]["counts"])
    assert np.isfinite(np.asarray(data["bins"]["mean_mpjpe_mm"])).all()
    capsys.readouterr()
    assert _run("bin-errors", "--report", report, "--bins", "4") == 0
    out = capsys.readouterr().out
    assert "slope" in out and "eccentricity" in out


def test_eval_rejects_mismatched_model(tmp_path, capsys):
    data_dir = tmp_path / "data"
    assert _run("gen", "--kind", "cube", "--n", "60", "--seed", "2", "--out", data_dir) == 0
    model = tmp_path / "model.json"
    assert _run(
        "train", "--data", data_dir, "--out", model, "--pipeline", "root_center",
        "--hidden", "16", "--epochs", "2",
    ) == 0
    fig_dir = tmp_path / "figs"
    assert _run("gen", "--kind", "figure", "--n", "40", "--seed", "2", "--out", fig_dir) == 0
    # cube model (16 inputs) on figure data (34 inputs): caught cleanly
    assert _run("eval", "--data", fig_dir, "--model", model, "--pipeline", "root_center") == 1
    assert "expects" in capsys.readouterr().err


def test_bin_errors_needs_per_sample_records(tmp_path, capsys):
    report = tmp_path / "r.json"
    report.write_text('{"summary": {}}')
    assert _run("bin-errors", "--report", report) == 1
    assert "per-sample" in capsys.readouterr().err


def test_gen_deterministic_across_runs(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for d in (a, b):
        assert _run("gen", "--kind", "cube", "--n", "50", "--seed", "9", "--out", d) == 0
    ma = load_manifest(a / "manifest.json")
    mb = load_manifest(b / "manifest.json")
    assert ma["outputs"] == mb["outputs"]


def test_head_to_head_driver_small(tmp_path, capsys):
    out = tmp_path / "result.json"
    code = _run(
        "head-to-head", "--n-train", "150", "--n-test", "60", "--hidden", "16",
        "--epochs", "3", "--seed", "0", "--out", out,
    )
    assert code == 0
    result = load_json(out)
    assert result["experiment"] == "head_to_head"
    assert "median_mpjpe_mm" in result["root_center"]
    assert load_manifest(str(out) + ".manifest.json")["command"] == "head_to_head"
    assert "median" in capsys.readouterr().out

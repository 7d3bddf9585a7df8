"""Deterministic IO: JSON, .npy, JSONL keypoints, scenes, manifests."""

import json
import os

import numpy as np
import pytest

from perspective_crop.camera import CameraIntrinsics
from perspective_crop.datafiles import (
    atomic_write_text,
    canonical_json,
    config_sha256,
    load_json,
    load_keypoint_frames,
    load_manifest,
    load_model,
    load_npy,
    load_scene,
    save_json,
    save_keypoint_frames,
    save_model,
    save_npy,
    save_scene,
    sha256_file,
    verify_manifest,
    write_manifest,
    write_pgm,
)
from perspective_crop.errors import ValidationError
from perspective_crop.mlp import fit_lifting
from perspective_crop.synth import sample_figures

INTR = CameraIntrinsics(fx=0.7, fy=0.7, cx=0.5, cy=0.5, width=512, height=512)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    path = tmp_path / "out.txt"
    atomic_write_text(path, "hello\n")
    assert path.read_text() == "hello\n"
    assert os.listdir(tmp_path) == ["out.txt"]


def test_json_roundtrip_and_stable_bytes(tmp_path):
    obj = {"b": [1, 2, 3], "a": {"x": 1.5}}
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_json(p1, obj)
    save_json(p2, obj)
    assert p1.read_bytes() == p2.read_bytes()
    assert load_json(p1) == obj
    (tmp_path / "bad.json").write_text("{nope")
    with pytest.raises(ValidationError):
        load_json(tmp_path / "bad.json")


def test_npy_roundtrip_and_stable_bytes(tmp_path):
    arr = np.arange(12, dtype=np.float64).reshape(3, 4)
    p1, p2 = tmp_path / "a.npy", tmp_path / "b.npy"
    save_npy(p1, arr)
    save_npy(p2, arr)
    assert p1.read_bytes() == p2.read_bytes()
    back = load_npy(p1)
    assert back.dtype == arr.dtype and np.array_equal(back, arr)
    with pytest.raises(ValidationError):
        load_npy(tmp_path / "missing.npy")


def test_pgm_header_and_payload(tmp_path):
    img = np.array([[0.0, 0.5], [1.0, 0.25]])
    path = tmp_path / "img.pgm"
    write_pgm(path, img)
    data = path.read_bytes()
    assert data.startswith(b"P5\n2 2\n255\n")
    assert data[-4:] == bytes([0, 128, 255, 64])
    with pytest.raises(ValidationError):
        write_pgm(path, np.zeros((2, 2, 3)))


def test_canonical_json_and_hash():
    a = {"x": 1, "y": [1, 2]}
    b = {"y": [1, 2], "x": 1}
    assert canonical_json(a) == canonical_json(b)
    assert config_sha256(a) == config_sha256(b)
    assert config_sha256(a) != config_sha256({"x": 2, "y": [1, 2]})


def test_keypoint_frames_roundtrip(tmp_path):
    frames = [
        {"keypoints": np.array([[0.1, 0.2], [0.3, 0.4]])},
        {
            "keypoints": np.array([[0.5, 0.6], [0.7, 0.8]]),
            "target": np.array([0.5, 0.5]),
            "scale": np.array([0.2, 0.3]),
            "root": 1,
        },
    ]
    path = tmp_path / "kps.jsonl"
    save_keypoint_frames(path, frames)
    back = load_keypoint_frames(path)
    assert len(back) == 2
    assert np.allclose(back[0]["keypoints"], frames[0]["keypoints"])
    assert np.allclose(back[1]["scale"], [0.2, 0.3])
    assert back[1]["root"] == 1 and "root" not in back[0]


@pytest.mark.parametrize(
    "line",
    [
        '{"keypoints": [[0.1], [0.2]]}',  # not 2D points
        '{"keypoints": [[0.1, 0.2]], "root": 5}',  # root out of range
        '{"keypoints": [[0.1, 0.2]], "scale": [0.0, 0.1]}',  # zero scale
        '{"keypoints": [[0.1, 0.2]], "target": [0.5]}',  # bad target
        '[1, 2, 3]',  # not an object
        'not json at all',
    ],
)
def test_keypoint_frames_validation(tmp_path, line):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"keypoints": [[0.1, 0.2], [0.3, 0.4]]}\n' + line + "\n")
    with pytest.raises(ValidationError) as err:
        load_keypoint_frames(path)
    assert ":2:" in str(err.value)  # the offending line is named


def test_model_file_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(80, 6))
    y = rng.normal(size=(80, 9))
    model, _ = fit_lifting(x, y, hidden=8, epochs=3, seed=0)
    path = tmp_path / "model.json"
    save_model(path, model)
    again = load_model(path)
    assert np.array_equal(model.predict(x), again.predict(x))
    path.write_text('{"something": "else"}')
    with pytest.raises(ValidationError):
        load_model(path)


def test_scene_roundtrip_and_corruption(tmp_path):
    scene = sample_figures(INTR, 12, seed=13)
    d = tmp_path / "scene"
    files = save_scene(d, scene, meta={"note": "test"})
    assert "scene.json" in files and "joints3d.npy" in files
    back = load_scene(d)
    assert back.kind == "figure" and back.camera == INTR
    assert np.array_equal(back.joints3d, scene.joints3d)
    # corrupt one array: shape disagreement must be caught
    save_npy(d / "root2d.npy", np.zeros((5, 2)))
    with pytest.raises(ValidationError):
        load_scene(d)


def test_manifest_roundtrip_and_verify(tmp_path):
    out = tmp_path / "data.npy"
    save_npy(out, np.arange(6))
    manifest_path = tmp_path / "manifest.json"
    m = write_manifest(manifest_path, "gen", {"n": 6, "seed": 1}, 1, [out])
    assert m["outputs"] == {"data.npy": sha256_file(out)}
    loaded = load_manifest(manifest_path)
    assert loaded["command"] == "gen" and loaded["seed"] == 1
    assert verify_manifest(manifest_path) == []
    # tamper with the output: verification must name the file
    save_npy(out, np.arange(7))
    problems = verify_manifest(manifest_path)
    assert len(problems) == 1 and "data.npy" in problems[0]
    os.remove(out)
    problems = verify_manifest(manifest_path)
    assert len(problems) == 1 and "missing" in problems[0]


def test_manifest_config_hash_guard(tmp_path):
    out = tmp_path / "x.npy"
    save_npy(out, np.zeros(3))
    path = tmp_path / "m.json"
    write_manifest(path, "gen", {"n": 3}, 0, [out])
    data = json.loads(path.read_text())
    data["config"]["n"] = 4  # silently edited config no longer matches its hash
    path.write_text(json.dumps(data))
    with pytest.raises(ValidationError):
        load_manifest(path)
    (tmp_path / "not_manifest.json").write_text('{"format": "other"}')
    with pytest.raises(ValidationError):
        load_manifest(tmp_path / "not_manifest.json")

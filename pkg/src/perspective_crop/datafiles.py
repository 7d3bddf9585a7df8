"""File formats and reproducibility plumbing.

All writers are atomic (temp file in the target directory, then
os.replace) and all formats are byte-deterministic for fixed content:
JSON floats use Python's shortest round-trip repr, arrays go to .npy
(header carries only shape/dtype, no timestamps), and manifests record a
sha256 per output so a re-run can be checked for byte identity.  Zip
containers (.npz) are deliberately avoided; they embed timestamps.

Keypoint sequences travel as JSONL: one frame per line,
{"keypoints": [[u, v], ...]} with optional "target" [u, v], "scale"
[sx, sy], and "root" (joint index, -1 for the centroid).  Coordinates are
normalized unless the reader is told otherwise.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from .camera import CameraIntrinsics
from .errors import ValidationError
from .mlp import LiftingModel
from .synth import SceneSet

__all__ = [
    "package_version",
    "atomic_write_bytes",
    "atomic_write_text",
    "save_json",
    "load_json",
    "save_npy",
    "load_npy",
    "write_pgm",
    "sha256_file",
    "canonical_json",
    "config_sha256",
    "load_keypoint_frames",
    "save_keypoint_frames",
    "save_model",
    "load_model",
    "save_scene",
    "load_scene",
    "write_manifest",
    "load_manifest",
    "verify_manifest",
]


def package_version() -> str:
    try:
        return version("perspective-crop")
    except PackageNotFoundError:
        return "unknown"


def atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def save_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


def save_npy(path, array) -> None:
    import io

    buf = io.BytesIO()
    np.save(buf, np.asarray(array), allow_pickle=False)
    atomic_write_bytes(path, buf.getvalue())


def load_npy(path) -> np.ndarray:
    try:
        return np.load(path, allow_pickle=False)
    except OSError as exc:
        raise ValidationError(f"cannot read array file {path}: {exc}") from exc
    except ValueError as exc:
        raise ValidationError(f"{path} is not a plain .npy array: {exc}") from exc


def write_pgm(path, image) -> None:
    """8-bit grayscale PGM (P5) from a float image in [0, 1]; for eyeballing."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValidationError(f"PGM needs a (H, W) image, got shape {image.shape}")
    data = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + data.tobytes())


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def canonical_json(obj) -> str:
    """Key-sorted, whitespace-free JSON; the hashing form for configs."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_sha256(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def load_keypoint_frames(path) -> list[dict]:
    """Read a JSONL keypoint file; see the module docstring for the schema."""
    frames = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read keypoint file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
        if not isinstance(rec, dict) or "keypoints" not in rec:
            raise ValidationError(f"{path}:{lineno}: each line needs a 'keypoints' field")
        kps = np.asarray(rec["keypoints"], dtype=float)
        if kps.ndim != 2 or kps.shape[1] != 2 or not np.all(np.isfinite(kps)):
            raise ValidationError(f"{path}:{lineno}: 'keypoints' must be a finite (J, 2) list")
        frame = {"keypoints": kps}
        if "target" in rec and rec["target"] is not None:
            target = np.asarray(rec["target"], dtype=float)
            if target.shape != (2,) or not np.all(np.isfinite(target)):
                raise ValidationError(f"{path}:{lineno}: 'target' must be a finite [u, v] pair")
            frame["target"] = target
        if "scale" in rec and rec["scale"] is not None:
            scale = np.asarray(rec["scale"], dtype=float)
            if scale.shape != (2,) or np.any(~np.isfinite(scale)) or np.any(scale <= 0):
                raise ValidationError(f"{path}:{lineno}: 'scale' must be a positive [sx, sy] pair")
            frame["scale"] = scale
        if "root" in rec and rec["root"] is not None:
            root = rec["root"]
            if not isinstance(root, int) or not (-1 <= root < kps.shape[0]):
                raise ValidationError(
                    f"{path}:{lineno}: 'root' must be a joint index in [-1, {kps.shape[0]})"
                )
            frame["root"] = root
        frames.append(frame)
    if not frames:
        raise ValidationError(f"{path}: no frames found")
    return frames


def save_keypoint_frames(path, frames: list[dict]) -> None:
    lines = []
    for frame in frames:
        rec = {"keypoints": np.asarray(frame["keypoints"], float).tolist()}
        for key in ("target", "scale"):
            if key in frame:
                rec[key] = np.asarray(frame[key], float).tolist()
        if "root" in frame:
            rec["root"] = int(frame["root"])
        lines.append(json.dumps(rec, sort_keys=True))
    atomic_write_text(path, "\n".join(lines) + "\n")


def save_model(path, model: LiftingModel) -> None:
    save_json(path, model.to_dict())


def load_model(path) -> LiftingModel:
    data = load_json(path)
    if not isinstance(data, dict):
        raise ValidationError(f"model file {path} must contain a JSON object")
    try:
        return LiftingModel.from_dict(data)
    except ValidationError as exc:
        raise ValidationError(f"model file {path}: {exc}") from exc


_SCENE_ARRAYS = ("joints3d", "joints2d", "root3d", "root2d")


def save_scene(directory, scene: SceneSet, meta: dict | None = None) -> list[str]:
    """Write a SceneSet as .npy arrays plus scene.json; returns the file names."""
    os.makedirs(directory, exist_ok=True)
    written = []
    for name in _SCENE_ARRAYS:
        save_npy(os.path.join(directory, f"{name}.npy"), getattr(scene, name))
        written.append(f"{name}.npy")
    info = {
        "kind": scene.kind,
        "camera": scene.camera.to_dict(),
        "n": len(scene),
    }
    if meta:
        info["meta"] = meta
    save_json(os.path.join(directory, "scene.json"), info)
    written.append("scene.json")
    return written


def load_scene(directory) -> SceneSet:
    info = load_json(os.path.join(directory, "scene.json"))
    if not isinstance(info, dict) or "camera" not in info or "kind" not in info:
        raise ValidationError(f"{directory}/scene.json must describe kind and camera")
    arrays = {}
    for name in _SCENE_ARRAYS:
        arrays[name] = load_npy(os.path.join(directory, f"{name}.npy"))
    n = arrays["joints3d"].shape[0]
    shapes_ok = (
        arrays["joints3d"].ndim == 3
        and arrays["joints3d"].shape[2] == 3
        and arrays["joints2d"].shape == arrays["joints3d"].shape[:2] + (2,)
        and arrays["root3d"].shape == (n, 3)
        and arrays["root2d"].shape == (n, 2)
    )
    if not shapes_ok:
        raise ValidationError(f"{directory}: scene arrays have inconsistent shapes")
    return SceneSet(
        camera=CameraIntrinsics.from_dict(info["camera"]),
        kind=str(info["kind"]),
        **arrays,
    )


def write_manifest(path, command: str, config: dict, seed: int, output_paths: list) -> dict:
    """Record what produced a set of outputs, hashing each one.

    Output paths are stored relative to the manifest's directory.  The
    manifest itself is not part of the byte-identity contract (it lists
    the hashes; it does not hash itself).
    """
    base = os.path.dirname(os.fspath(path)) or "."
    outputs = {}
    for out in output_paths:
        rel = os.path.relpath(os.fspath(out), base)
        outputs[rel] = sha256_file(out)
    manifest = {
        "format": "perspective-crop-manifest-v1",
        "version": package_version(),
        "command": command,
        "seed": int(seed),
        "config": config,
        "config_sha256": config_sha256(config),
        "outputs": outputs,
    }
    save_json(path, manifest)
    return manifest


def load_manifest(path) -> dict:
    data = load_json(path)
    if not isinstance(data, dict) or data.get("format") != "perspective-crop-manifest-v1":
        raise ValidationError(f"{path} is not a recognized manifest")
    for key in ("config", "config_sha256", "seed", "outputs"):
        if key not in data:
            raise ValidationError(f"manifest {path} missing field {key!r}")
    if config_sha256(data["config"]) != data["config_sha256"]:
        raise ValidationError(f"manifest {path}: config hash does not match the stored config")
    return data


def verify_manifest(path) -> list[str]:
    """Re-hash every output a manifest lists; returns a list of problems."""
    manifest = load_manifest(path)
    base = os.path.dirname(os.fspath(path)) or "."
    problems = []
    for rel, expected in manifest["outputs"].items():
        full = os.path.join(base, rel)
        if not os.path.exists(full):
            problems.append(f"missing output: {rel}")
            continue
        actual = sha256_file(full)
        if actual != expected:
            problems.append(f"hash mismatch for {rel}: expected {expected}, got {actual}")
    return problems

"""Pinhole camera model in normalized image coordinates.

COORDINATE CONVENTIONS (used throughout the package):
- Camera frame: right-handed, x rightward, y DOWNWARD, z forward
  (the camera looks along +z; points with z <= 0 are behind the camera).
- Image frame: normalized coordinates in [0, 1] x [0, 1], origin at the
  TOP-LEFT corner, u rightward, v downward.  Pixel resolution enters only
  when converting to/from pixel coordinates; pixel (i, j) has its center
  at ((j + 0.5) / width, (i + 0.5) / height).
- Focal lengths f = (fx, fy) are expressed in normalized-image units per
  camera-plane unit, i.e. a point at lateral offset x on the z=1 plane
  projects to u = fx * x + cx.  A focal length given in pixels converts
  via fx = fx_pixels / width (and likewise for fy with height).

The intrinsic matrix has zero skew:

    K = | fx  0  cx |
        |  0 fy  cy |
        |  0  0   1 |

Projection: (u, v, 1) ~ K @ (x, y, z);  backprojection: K^-1 @ (u, v, 1)
rescaled so the third component is exactly 1 (a point on the z=1 plane).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveDepthError, PointAtInfinityError, ValidationError

__all__ = [
    "CameraIntrinsics",
    "load_camera",
    "save_camera",
    "pixel_to_normalized",
    "normalized_to_pixel",
    "backproject",
    "project",
    "homogenize",
    "dehomogenize",
    "is_rotation",
    "check_rotation",
]

# Dehomogenization rejects |w| below this.  Crop geometry keeps points far
# from infinity, so the error path is defensive only.
HOMOGENEOUS_EPS = 1e-12


@dataclass(frozen=True)
class CameraIntrinsics:
    """Zero-skew pinhole intrinsics in normalized image coordinates.

    fx, fy: focal lengths (normalized-image units per camera-plane unit).
    cx, cy: principal point in [0, 1].
    width, height: pixel resolution, used only for pixel conversions.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int = 1000
    height: int = 1000

    def __post_init__(self):
        if not (np.isfinite(self.fx) and np.isfinite(self.fy)):
            raise ValidationError("focal lengths must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError(f"focal lengths must be positive, got f=({self.fx}, {self.fy})")
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise ValidationError(
                f"principal point must lie in [0,1]^2, got c=({self.cx}, {self.cy})"
            )
        if int(self.width) <= 0 or int(self.height) <= 0:
            raise ValidationError(f"resolution must be positive, got {self.width}x{self.height}")

    @property
    def f(self) -> np.ndarray:
        return np.array([self.fx, self.fy])

    @property
    def t(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.fx, 0.0, self.cx],
                [0.0, self.fy, self.cy],
                [0.0, 0.0, 1.0],
            ]
        )

    def inverse_matrix(self) -> np.ndarray:
        # Closed form for an upper-triangular zero-skew K.
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    def with_focal_multiplier(self, m: float) -> "CameraIntrinsics":
        """Same camera with f scaled by m (simulates a miscalibrated focal length)."""
        if m <= 0:
            raise ValidationError(f"focal multiplier must be positive, got {m}")
        return CameraIntrinsics(self.fx * m, self.fy * m, self.cx, self.cy, self.width, self.height)

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CameraIntrinsics":
        missing = [k for k in ("fx", "fy", "cx", "cy", "width", "height") if k not in data]
        if missing:
            raise ValidationError(f"camera file missing fields: {', '.join(missing)}")
        try:
            return cls(
                fx=float(data["fx"]),
                fy=float(data["fy"]),
                cx=float(data["cx"]),
                cy=float(data["cy"]),
                width=int(data["width"]),
                height=int(data["height"]),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"camera file has non-numeric fields: {exc}") from exc


def load_camera(path) -> CameraIntrinsics:
    """Read a camera JSON file ({fx, fy, cx, cy, width, height}, cx/cy normalized)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read camera file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"camera file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"camera file {path} must contain a JSON object")
    try:
        return CameraIntrinsics.from_dict(data)
    except ValidationError as exc:
        raise ValidationError(f"camera file {path}: {exc}") from exc


def save_camera(path, intr: CameraIntrinsics) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(intr.to_dict(), fh, indent=2)
        fh.write("\n")


def pixel_to_normalized(pts, intr: CameraIntrinsics) -> np.ndarray:
    """Pixel coordinates -> normalized image coordinates (divide by resolution)."""
    pts = np.asarray(pts, dtype=float)
    return pts / np.array([intr.width, intr.height], dtype=float)


def normalized_to_pixel(pts, intr: CameraIntrinsics) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    return pts * np.array([intr.width, intr.height], dtype=float)


def backproject(pts, intr: CameraIntrinsics) -> np.ndarray:
    """Normalized image points (..., 2) -> points on the z=1 camera plane (..., 3).

    Returns K^-1 @ (u, v, 1); the third component is exactly 1.
    """
    pts = np.asarray(pts, dtype=float)
    x = (pts[..., 0] - intr.cx) / intr.fx
    y = (pts[..., 1] - intr.cy) / intr.fy
    return np.stack([x, y, np.ones_like(x)], axis=-1)


def project(points, intr: CameraIntrinsics) -> np.ndarray:
    """Camera-frame 3D points (..., 3) -> normalized image coordinates (..., 2).

    Raises NonPositiveDepthError for any point with z <= 0.
    """
    points = np.asarray(points, dtype=float)
    z = points[..., 2]
    if np.any(z <= 0):
        raise NonPositiveDepthError("cannot project points with z <= 0")
    u = intr.fx * points[..., 0] / z + intr.cx
    v = intr.fy * points[..., 1] / z + intr.cy
    return np.stack([u, v], axis=-1)


def homogenize(pts) -> np.ndarray:
    """(..., 2) -> (..., 3) with a trailing 1."""
    pts = np.asarray(pts, dtype=float)
    return np.concatenate([pts, np.ones(pts.shape[:-1] + (1,))], axis=-1)


def dehomogenize(pts, eps: float = HOMOGENEOUS_EPS) -> np.ndarray:
    """(..., 3) -> (..., 2); raises PointAtInfinityError when |w| < eps."""
    pts = np.asarray(pts, dtype=float)
    w = pts[..., 2]
    if np.any(np.abs(w) < eps):
        raise PointAtInfinityError("homogeneous point has (near-)zero last component")
    return pts[..., :2] / w[..., None]


def is_rotation(R, tol: float = 1e-9) -> bool:
    """True if R is orthonormal with det +1 (Frobenius tolerance tol)."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    ortho = np.linalg.norm(R.T @ R - np.eye(3))
    return bool(ortho <= tol and abs(np.linalg.det(R) - 1.0) <= tol)


def check_rotation(R, tol: float = 1e-9) -> np.ndarray:
    """Validate a rotation matrix, returning it as a float array."""
    R = np.asarray(R, dtype=float)
    if not is_rotation(R, tol):
        raise ValidationError("matrix is not a proper rotation (R^T R = I, det = 1)")
    return R

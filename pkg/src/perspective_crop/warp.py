"""Perspective-correcting crops via a virtual rotated camera.

A crop at image location t_uv is modeled as a second pinhole camera that
shares the real camera's optical center but whose optical axis passes
through the backprojection of t_uv.  The real-to-patch mapping is then the
homography

    G = K_virt @ R^T @ K^-1

where R rotates virtual-camera coordinates into real-camera coordinates
(columns of R are the virtual axes; the third column is the unit vector
toward the crop target).  Because the two cameras share their center, G is
exact for any scene depth; no geometry assumptions are hidden in the crop.

All rotations here are built without trig calls: with p = (px, py) on the
z=1 plane, a = sqrt(1 + px^2) and n = ||(px, py, 1)||,

    R = | 1/a   -px*py/(n*a)   px/n |
        | 0      a/n           py/n |
        | -px/a -py/(n*a)      1/n  |

which factors as R = R_y @ R_x (rotation about the camera y axis by the
target's horizontal offset, then about x by the vertical offset).  This
factorization is what the partial back-rotation modes expose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import (
    CameraIntrinsics,
    backproject,
    dehomogenize,
    homogenize,
)
from .errors import DegenerateBoundingBoxError, GeometryError, ValidationError

__all__ = [
    "FOCAL_OPTIONS",
    "ROTATION_MODES",
    "rotation_from_target",
    "rotation_factors",
    "partial_rotation",
    "target_from_rotation",
    "virtual_focal",
    "build_virtual_camera",
    "warp_matrix",
    "inverse_warp_matrix",
    "warp_points",
    "measured_center_scale",
    "bbox_scale",
    "PerspectiveCrop",
    "perspective_crop_keypoints",
    "perspective_crop_sequence",
    "AffineCrop",
    "root_center_crop",
    "to_real_frame",
    "to_real_frame_partial",
]

# Virtual focal length options.  h below is the focal the virtual camera
# would need for its unit image plane; the actual virtual focal is h / s
# for crop scale s.
#   "A": h = f            focal copied from the real camera; the patch
#                         stretches anisotropically away from the center.
#   "B": h = f * n        focal grows with the distance n to the target's
#                         backprojection; corrects the overall blow-up but
#                         not the horizontal/vertical imbalance.
#   "C": h = (f_x*n*a, f_y*n^2/a)
#                         matches the local scale of the original image at
#                         the crop center exactly on both axes.
FOCAL_OPTIONS = ("A", "B", "C")

# Back-rotation modes for turning a predicted camera-frame pose from the
# crop's virtual frame (or an approximation of it) into the real frame.
ROTATION_MODES = ("none", "x_only", "xy_full")


def _plane_terms(p2d):
    p2d = np.asarray(p2d, dtype=float)
    if p2d.shape[-1] != 2:
        raise ValidationError(f"expected (..., 2) plane coordinates, got shape {p2d.shape}")
    px = p2d[..., 0]
    py = p2d[..., 1]
    a = np.sqrt(1.0 + px * px)
    n = np.sqrt(1.0 + px * px + py * py)
    return px, py, a, n


def rotation_from_target(p2d) -> np.ndarray:
    """Rotation of the virtual camera aimed at p2d on the z=1 plane.

    p2d: (..., 2) plane coordinates (backprojected image points, z dropped).
    Returns (..., 3, 3).  Columns are the virtual camera's axes in real
    coordinates; column 3 is (px, py, 1) / n.
    """
    px, py, a, n = _plane_terms(p2d)
    zero = np.zeros_like(px)
    row0 = np.stack([1.0 / a, -px * py / (n * a), px / n], axis=-1)
    row1 = np.stack([zero, a / n, py / n], axis=-1)
    row2 = np.stack([-px / a, -py / (n * a), 1.0 / n], axis=-1)
    return np.stack([row0, row1, row2], axis=-2)


def rotation_factors(p2d) -> tuple[np.ndarray, np.ndarray]:
    """Factor rotation_from_target(p2d) as R_y @ R_x.

    R_y turns about the camera y axis (horizontal aim), R_x about the x
    axis (vertical aim).  Returns two (..., 3, 3) arrays.
    """
    px, py, a, n = _plane_terms(p2d)
    zero = np.zeros_like(px)
    one = np.ones_like(px)
    ry = np.stack(
        [
            np.stack([1.0 / a, zero, px / a], axis=-1),
            np.stack([zero, one, zero], axis=-1),
            np.stack([-px / a, zero, 1.0 / a], axis=-1),
        ],
        axis=-2,
    )
    rx = np.stack(
        [
            np.stack([one, zero, zero], axis=-1),
            np.stack([zero, a / n, py / n], axis=-1),
            np.stack([zero, -py / n, a / n], axis=-1),
        ],
        axis=-2,
    )
    return ry, rx


def partial_rotation(p2d, mode: str) -> np.ndarray:
    """Back-rotation matrix for the given mode at target p2d.

    "none" is the identity, "x_only" applies only the vertical-aim factor
    R_x, "xy_full" the complete rotation R_y @ R_x.
    """
    if mode not in ROTATION_MODES:
        raise ValidationError(f"unknown rotation mode {mode!r}, expected one of {ROTATION_MODES}")
    px, py, a, n = _plane_terms(p2d)
    if mode == "none":
        return np.broadcast_to(np.eye(3), px.shape + (3, 3)).copy()
    if mode == "x_only":
        return rotation_factors(p2d)[1]
    return rotation_from_target(p2d)


def target_from_rotation(R) -> np.ndarray:
    """Recover the z=1 plane target from a virtual-camera rotation.

    Inverse of rotation_from_target: p = (R[0,2], R[1,2]) / R[2,2].
    """
    R = np.asarray(R, dtype=float)
    if R.shape[-2:] != (3, 3):
        raise ValidationError(f"expected (..., 3, 3) rotation, got shape {R.shape}")
    w = R[..., 2, 2]
    if np.any(np.abs(w) < 1e-12):
        raise GeometryError("rotation aims perpendicular to the optical axis; no plane target")
    return np.stack([R[..., 0, 2] / w, R[..., 1, 2] / w], axis=-1)


def virtual_focal(f, p2d, option: str = "C") -> np.ndarray:
    """Unit-plane focal h of the virtual camera (before dividing by scale).

    f: (2,) or (..., 2) real focal lengths.  p2d: (..., 2) plane target.
    Returns (..., 2).  See FOCAL_OPTIONS for the three variants.
    """
    if option not in FOCAL_OPTIONS:
        raise ValidationError(f"unknown focal option {option!r}, expected one of {FOCAL_OPTIONS}")
    f = np.asarray(f, dtype=float)
    px, py, a, n = _plane_terms(p2d)
    if option == "A":
        factor = np.stack([np.ones_like(n), np.ones_like(n)], axis=-1)
    elif option == "B":
        factor = np.stack([n, n], axis=-1)
    else:
        factor = np.stack([n * a, n * n / a], axis=-1)
    return f * factor


def build_virtual_camera(
    intr: CameraIntrinsics,
    target,
    scale,
    option: str = "C",
    preserve_aspect: bool = True,
    patch_width: int = 128,
    patch_height: int = 128,
) -> tuple[CameraIntrinsics, np.ndarray]:
    """Virtual camera (intrinsics, rotation) for a crop of the real camera.

    target: (2,) crop center in normalized image coordinates of the real
        camera.
    scale: (2,) crop extent; the patch [0,1]^2 covers scale[0] x scale[1]
        of the original image around the target (exactly so, in local
        scale, under option "C").
    preserve_aspect: use the smaller of the two virtual focals on both
        axes so the requested region fits without distorting aspect.

    The virtual principal point is always (0.5, 0.5).
    """
    target = np.asarray(target, dtype=float)
    if target.shape != (2,):
        raise ValidationError(f"crop target must have shape (2,), got {target.shape}")
    scale = np.asarray(scale, dtype=float)
    if scale.shape != (2,):
        raise ValidationError(f"crop scale must have shape (2,), got {scale.shape}")
    if not np.all(np.isfinite(scale)) or np.any(scale <= 0):
        raise ValidationError(f"crop scale must be positive and finite, got {scale}")
    p2d = backproject(target, intr)[:2]
    R = rotation_from_target(p2d)
    h = virtual_focal(intr.f, p2d, option)
    f_virt = h / scale
    if preserve_aspect:
        f_virt = np.full(2, f_virt.min())
    virt = CameraIntrinsics(
        fx=float(f_virt[0]),
        fy=float(f_virt[1]),
        cx=0.5,
        cy=0.5,
        width=patch_width,
        height=patch_height,
    )
    return virt, R


def warp_matrix(intr: CameraIntrinsics, virt: CameraIntrinsics, R) -> np.ndarray:
    """Homography K_virt @ R^T @ K^-1 taking real image points to the patch."""
    R = np.asarray(R, dtype=float)
    return virt.as_matrix() @ R.T @ intr.inverse_matrix()


def inverse_warp_matrix(intr: CameraIntrinsics, virt: CameraIntrinsics, R) -> np.ndarray:
    """Analytic inverse of warp_matrix: K @ R @ K_virt^-1 (no linear solve)."""
    R = np.asarray(R, dtype=float)
    return intr.as_matrix() @ R @ virt.inverse_matrix()


def warp_points(G, pts) -> np.ndarray:
    """Apply a 3x3 homography to (..., 2) points (homogenize, map, divide)."""
    G = np.asarray(G, dtype=float)
    return dehomogenize(homogenize(pts) @ G.T)


def measured_center_scale(crop: "PerspectiveCrop", eps: float = 1e-4) -> np.ndarray:
    """Original-image extent the patch actually covers at its center.

    Central finite difference of the inverse warp at (0.5, 0.5), per
    axis, in original-image units per patch unit.  Under focal option "C"
    this equals the requested crop scale exactly (up to the difference
    step); options "A" and "B" deviate away from the principal point,
    which is the measurable difference between the three options.
    """
    g_inv = crop.inverse_matrix()
    center = np.array([0.5, 0.5])
    ex = np.array([eps, 0.0])
    ey = np.array([0.0, eps])
    du = (warp_points(g_inv, center + ex) - warp_points(g_inv, center - ex)) / (2 * eps)
    dv = (warp_points(g_inv, center + ey) - warp_points(g_inv, center - ey)) / (2 * eps)
    return np.array([du[0], dv[1]])


def bbox_scale(kps2d, margin: float = 0.0) -> np.ndarray:
    """Crop scale from the tight bounding box of 2D keypoints.

    Returns (width, height) * (1 + margin).  Raises
    DegenerateBoundingBoxError when either extent is (near) zero, which
    happens for a single keypoint or collinear axis-aligned ones; pass an
    explicit scale to the crop functions in that case.
    """
    kps2d = np.asarray(kps2d, dtype=float)
    if kps2d.ndim != 2 or kps2d.shape[-1] != 2:
        raise ValidationError(f"expected (J, 2) keypoints, got shape {kps2d.shape}")
    if margin < 0:
        raise ValidationError(f"margin must be >= 0, got {margin}")
    extent = kps2d.max(axis=0) - kps2d.min(axis=0)
    if np.any(extent < 1e-12):
        axis = "x" if extent[0] < 1e-12 else "y"
        raise DegenerateBoundingBoxError(
            f"keypoint bounding box has zero extent along {axis}; provide an explicit scale"
        )
    return extent * (1.0 + margin)


def _resolve_target(kps2d: np.ndarray, root_index: int) -> np.ndarray:
    if root_index == -1:
        return kps2d.mean(axis=0)
    if not (0 <= root_index < kps2d.shape[0]):
        raise ValidationError(
            f"root index {root_index} out of range for {kps2d.shape[0]} keypoints "
            "(use -1 for the centroid)"
        )
    return kps2d[root_index]


@dataclass(frozen=True)
class PerspectiveCrop:
    """A resolved crop: real camera, virtual camera, and their relative pose.

    Carries everything needed to warp points or images in both directions
    and to rotate predicted camera-frame poses back to the real frame.
    """

    camera: CameraIntrinsics
    virtual_camera: CameraIntrinsics
    rotation: np.ndarray
    target: np.ndarray
    scale: np.ndarray
    focal_option: str = "C"

    @classmethod
    def from_target(
        cls,
        intr: CameraIntrinsics,
        target,
        scale,
        option: str = "C",
        preserve_aspect: bool = True,
        patch_width: int = 128,
        patch_height: int = 128,
    ) -> "PerspectiveCrop":
        virt, R = build_virtual_camera(
            intr, target, scale, option, preserve_aspect, patch_width, patch_height
        )
        return cls(
            camera=intr,
            virtual_camera=virt,
            rotation=R,
            target=np.asarray(target, dtype=float).copy(),
            scale=np.asarray(scale, dtype=float).copy(),
            focal_option=option,
        )

    def matrix(self) -> np.ndarray:
        return warp_matrix(self.camera, self.virtual_camera, self.rotation)

    def inverse_matrix(self) -> np.ndarray:
        return inverse_warp_matrix(self.camera, self.virtual_camera, self.rotation)

    def warp(self, pts) -> np.ndarray:
        """Real normalized image points -> patch coordinates."""
        return warp_points(self.matrix(), pts)

    def unwarp(self, pts) -> np.ndarray:
        """Patch coordinates -> real normalized image points."""
        return warp_points(self.inverse_matrix(), pts)

    def plane_target(self) -> np.ndarray:
        """Crop target on the z=1 plane of the real camera."""
        return backproject(self.target, self.camera)[:2]


def perspective_crop_keypoints(
    kps2d,
    intr: CameraIntrinsics,
    root_index: int = 0,
    margin: float = 0.0,
    scale=None,
    option: str = "C",
    preserve_aspect: bool = True,
    patch_width: int = 128,
    patch_height: int = 128,
) -> tuple[np.ndarray, PerspectiveCrop]:
    """Crop 2D keypoints with a virtual camera aimed at the root joint.

    kps2d: (J, 2) normalized image coordinates.
    root_index: joint the crop is centered on (-1 for the centroid).  The
        root maps to exactly (0.5, 0.5) in the patch.
    scale: explicit (2,) crop extent; default is the tight keypoint
        bounding box inflated by margin.

    Returns (warped keypoints (J, 2), PerspectiveCrop).
    """
    kps2d = np.asarray(kps2d, dtype=float)
    if kps2d.ndim != 2 or kps2d.shape[-1] != 2:
        raise ValidationError(f"expected (J, 2) keypoints, got shape {kps2d.shape}")
    if not np.all(np.isfinite(kps2d)):
        raise ValidationError("keypoints contain non-finite values")
    target = _resolve_target(kps2d, root_index)
    if scale is None:
        scale = bbox_scale(kps2d, margin)
    crop = PerspectiveCrop.from_target(
        intr, target, scale, option, preserve_aspect, patch_width, patch_height
    )
    return crop.warp(kps2d), crop


def perspective_crop_sequence(
    frames,
    intr: CameraIntrinsics,
    root_index: int = 0,
    margin: float = 0.0,
    scale=None,
    option: str = "C",
    preserve_aspect: bool = True,
    patch_width: int = 128,
    patch_height: int = 128,
) -> tuple[np.ndarray, PerspectiveCrop]:
    """Crop a keypoint sequence through one shared virtual camera.

    frames: (T, J, 2) normalized image coordinates.  The virtual camera is
    aimed at the root joint of the middle frame (index T // 2) and every
    frame is warped through that same homography, so motion relative to the
    crop is preserved: a subject that holds still produces identical warped
    frames, and only the middle frame's root lands exactly at (0.5, 0.5).

    scale: explicit (2,) crop extent; default is the bounding box of all
    frames pooled together, inflated by margin, so no frame spills out.

    Returns (warped (T, J, 2), shared PerspectiveCrop).
    """
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 3 or frames.shape[-1] != 2:
        raise ValidationError(f"expected (T, J, 2) keypoint frames, got shape {frames.shape}")
    if frames.shape[0] == 0:
        raise ValidationError("keypoint sequence is empty")
    if not np.all(np.isfinite(frames)):
        raise ValidationError("keypoints contain non-finite values")
    target = _resolve_target(frames[frames.shape[0] // 2], root_index)
    if scale is None:
        scale = bbox_scale(frames.reshape(-1, 2), margin)
    crop = PerspectiveCrop.from_target(
        intr, target, scale, option, preserve_aspect, patch_width, patch_height
    )
    return crop.warp(frames), crop


@dataclass(frozen=True)
class AffineCrop:
    """Plain 2D affine crop u' = S u + t with S = [[sx, cx], [cy, sy]].

    The shear terms cx, cy are zero for axis-aligned crops; they are kept
    so externally supplied crop matrices round-trip through this type.
    """

    sx: float
    sy: float
    tx: float
    ty: float
    cx: float = 0.0
    cy: float = 0.0

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.sx, self.cx, self.tx],
                [self.cy, self.sy, self.ty],
                [0.0, 0.0, 1.0],
            ]
        )

    def is_invertible(self) -> bool:
        return abs(self.sx * self.sy - self.cx * self.cy) > 1e-12

    def inverse_matrix(self) -> np.ndarray:
        det = self.sx * self.sy - self.cx * self.cy
        if abs(det) <= 1e-12:
            raise GeometryError("affine crop is singular (sx*sy == cx*cy)")
        inv_s = np.array([[self.sy, -self.cx], [-self.cy, self.sx]]) / det
        t = -inv_s @ np.array([self.tx, self.ty])
        out = np.eye(3)
        out[:2, :2] = inv_s
        out[:2, 2] = t
        return out

    def warp(self, pts) -> np.ndarray:
        return warp_points(self.matrix(), pts)

    def unwarp(self, pts) -> np.ndarray:
        return warp_points(self.inverse_matrix(), pts)


def root_center_crop(
    kps2d,
    root_index: int = 0,
    margin: float = 0.0,
    scale=None,
) -> tuple[np.ndarray, AffineCrop]:
    """Rectangular crop baseline: subtract the root, divide by the box size.

    The root maps to (0, 0).  This is the usual root-centered keypoint
    normalization; it discards where in the image the subject was, which
    is precisely the information the perspective crop retains.
    """
    kps2d = np.asarray(kps2d, dtype=float)
    if kps2d.ndim != 2 or kps2d.shape[-1] != 2:
        raise ValidationError(f"expected (J, 2) keypoints, got shape {kps2d.shape}")
    if not np.all(np.isfinite(kps2d)):
        raise ValidationError("keypoints contain non-finite values")
    target = _resolve_target(kps2d, root_index)
    if scale is None:
        scale = bbox_scale(kps2d, margin)
    else:
        scale = np.asarray(scale, dtype=float)
        if scale.shape != (2,):
            raise ValidationError(f"crop scale must have shape (2,), got {scale.shape}")
        if np.any(scale <= 0):
            raise ValidationError(f"crop scale must be positive, got {scale}")
    crop = AffineCrop(
        sx=1.0 / scale[0],
        sy=1.0 / scale[1],
        tx=-target[0] / scale[0],
        ty=-target[1] / scale[1],
    )
    return crop.warp(kps2d), crop


def to_real_frame(pose3d, rotation) -> np.ndarray:
    """Rotate a virtual-camera-frame pose back to the real camera frame.

    pose3d: (..., J, 3) predicted in the crop's virtual frame.
    rotation: the crop's (3, 3) rotation (virtual axes in real coords).
    """
    pose3d = np.asarray(pose3d, dtype=float)
    rotation = np.asarray(rotation, dtype=float)
    if pose3d.shape[-1] != 3:
        raise ValidationError(f"expected (..., J, 3) pose, got shape {pose3d.shape}")
    return pose3d @ rotation.T


def to_real_frame_partial(pose3d, target, intr: CameraIntrinsics, mode: str) -> np.ndarray:
    """Partially back-rotate a pose toward the real frame.

    Used to isolate how much of the perspective crop's benefit comes from
    the output-side rotation alone: a pose predicted from a plain
    rectangular crop is treated as if it lived in the virtual frame of a
    crop at `target` and rotated back by the "none" / "x_only" /
    "xy_full" component of that frame's rotation.
    """
    target = np.asarray(target, dtype=float)
    if target.shape != (2,):
        raise ValidationError(f"crop target must have shape (2,), got {target.shape}")
    p2d = backproject(target, intr)[:2]
    return to_real_frame(pose3d, partial_rotation(p2d, mode))

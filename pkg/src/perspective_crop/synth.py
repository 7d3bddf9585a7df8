"""Synthetic desk-scale scenes: articulated stick figures and shaded cubes.

Both generators share one contract: every sample has 3D keypoints in the
real camera frame (millimeters), their projections in normalized image
coordinates, and a designated 3D root whose exact projection is the crop
target.  The root's image position is drawn first and then HELD FIXED
while depth, orientation and articulation are redrawn until all keypoints
project inside the frame.  That keeps the root-position distribution
exactly uniform over the requested region regardless of how many
rejections each position needed.

The stick figure is a 17-joint skeleton (pelvis root; hips / knees /
ankles, spine / thorax / neck / head, shoulders / elbows / wrists) with
fixed bone offsets, articulated by a random axis-angle rotation per bone,
so bone lengths are exact by construction.

The cube is a 500 mm wireframe-free solid rendered with flat per-face
Lambert-style shading against a black background; its 8 corners are the
keypoints and its center is the root.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics, backproject
from .errors import RejectionExhaustedError, ValidationError

__all__ = [
    "PARENTS",
    "BONE_OFFSETS_MM",
    "JOINT_NAMES",
    "CUBE_CORNER_SIGNS",
    "CUBE_FACES",
    "random_rotations",
    "axis_angle_rotations",
    "articulated_bodies",
    "SceneSet",
    "sample_figures",
    "sample_cubes",
    "cube_corners",
    "render_cube",
]

JOINT_NAMES = (
    "pelvis",
    "r_hip",
    "r_knee",
    "r_ankle",
    "l_hip",
    "l_knee",
    "l_ankle",
    "spine",
    "thorax",
    "neck",
    "head",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
)

PARENTS = (-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15)

# Rest-pose bone vectors (child minus parent) in the body frame, mm.
# Body frame matches the camera convention: x right, y DOWN, z forward,
# so the head offset is negative y.
BONE_OFFSETS_MM = np.array(
    [
        [0.0, 0.0, 0.0],  # pelvis (root, no bone)
        [-130.0, 0.0, 0.0],  # r_hip
        [0.0, 440.0, 0.0],  # r_knee
        [0.0, 440.0, 0.0],  # r_ankle
        [130.0, 0.0, 0.0],  # l_hip
        [0.0, 440.0, 0.0],  # l_knee
        [0.0, 440.0, 0.0],  # l_ankle
        [0.0, -230.0, 0.0],  # spine
        [0.0, -230.0, 0.0],  # thorax
        [0.0, -110.0, 0.0],  # neck
        [0.0, -110.0, 0.0],  # head
        [150.0, -40.0, 0.0],  # l_shoulder
        [280.0, 0.0, 0.0],  # l_elbow
        [250.0, 0.0, 0.0],  # l_wrist
        [-150.0, -40.0, 0.0],  # r_shoulder
        [-280.0, 0.0, 0.0],  # r_elbow
        [-250.0, 0.0, 0.0],  # r_wrist
    ]
)

# Corner i has sign pattern (bit 0 -> x, bit 1 -> y, bit 2 -> z).
CUBE_CORNER_SIGNS = np.array(
    [[1 if i & b else -1 for b in (1, 2, 4)] for i in range(8)], dtype=float
)

# Corner index quads, one per face, in cyclic order around the face.
CUBE_FACES = (
    (0, 2, 6, 4),  # x = -1
    (1, 3, 7, 5),  # x = +1
    (0, 1, 5, 4),  # y = -1
    (2, 3, 7, 6),  # y = +1
    (0, 1, 3, 2),  # z = -1
    (4, 5, 7, 6),  # z = +1
)


def random_rotations(rng: np.random.Generator, n: int) -> np.ndarray:
    """n rotations drawn uniformly from SO(3) via normalized 4-gaussians."""
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
            np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
        ],
        axis=-2,
    )


def axis_angle_rotations(axes, angles) -> np.ndarray:
    """Rodrigues formula for (..., 3) unit axes and (...,) angles."""
    axes = np.asarray(axes, dtype=float)
    angles = np.asarray(angles, dtype=float)
    c = np.cos(angles)[..., None, None]
    s = np.sin(angles)[..., None, None]
    zero = np.zeros_like(axes[..., 0])
    k = np.stack(
        [
            np.stack([zero, -axes[..., 2], axes[..., 1]], -1),
            np.stack([axes[..., 2], zero, -axes[..., 0]], -1),
            np.stack([-axes[..., 1], axes[..., 0], zero], -1),
        ],
        axis=-2,
    )
    outer = axes[..., :, None] * axes[..., None, :]
    return c * np.eye(3) + s * k + (1.0 - c) * outer


def articulated_bodies(rng: np.random.Generator, n: int, max_angle: float) -> np.ndarray:
    """n articulated skeletons in the body frame, pelvis at the origin.

    Each bone gets an independent axis-angle rotation with a uniform
    angle in [0, max_angle]; rotations compose down the kinematic chain,
    so bone lengths stay exactly at their rest values.  Returns (n, 17, 3).
    """
    if max_angle < 0:
        raise ValidationError(f"articulation angle must be >= 0, got {max_angle}")
    axes = rng.normal(size=(n, len(PARENTS), 3))
    axes /= np.linalg.norm(axes, axis=-1, keepdims=True)
    angles = rng.uniform(0.0, max_angle, size=(n, len(PARENTS)))
    local = axis_angle_rotations(axes, angles)

    acc = np.empty_like(local)
    pos = np.empty((n, len(PARENTS), 3))
    acc[:, 0] = np.eye(3)
    pos[:, 0] = 0.0
    for j in range(1, len(PARENTS)):
        p = PARENTS[j]
        acc[:, j] = acc[:, p] @ local[:, j]
        pos[:, j] = pos[:, p] + np.einsum("nab,b->na", acc[:, j], BONE_OFFSETS_MM[j])
    return pos


@dataclass(frozen=True)
class SceneSet:
    """A batch of synthetic samples tied to one camera.

    joints3d: (N, K, 3) camera-frame positions, mm.
    joints2d: (N, K, 2) normalized image projections.
    root3d:   (N, 3) the 3D root (pelvis / cube center), mm.
    root2d:   (N, 2) its exact projection; this is the crop target.
    """

    joints3d: np.ndarray
    joints2d: np.ndarray
    root3d: np.ndarray
    root2d: np.ndarray
    camera: CameraIntrinsics
    kind: str

    def __post_init__(self):
        n = self.joints3d.shape[0] if self.joints3d.ndim == 3 else -1
        ok = (
            self.joints3d.ndim == 3
            and self.joints3d.shape[2] == 3
            and self.joints2d.shape == self.joints3d.shape[:2] + (2,)
            and self.root3d.shape == (n, 3)
            and self.root2d.shape == (n, 2)
        )
        if not ok:
            raise ValidationError(
                "scene arrays disagree: joints3d "
                f"{self.joints3d.shape}, joints2d {self.joints2d.shape}, "
                f"root3d {self.root3d.shape}, root2d {self.root2d.shape}"
            )

    def __len__(self) -> int:
        return self.joints3d.shape[0]


def _project_rows(points: np.ndarray, intr: CameraIntrinsics):
    """Per-row projection that flags bad rows instead of raising.

    Returns (uv, ok) where ok is False for rows with any z <= znear or any
    projection outside [0, 1]^2.
    """
    z = points[..., 2]
    ok = np.all(z > 100.0, axis=-1)
    zsafe = np.where(z > 1e-9, z, 1.0)
    u = intr.fx * points[..., 0] / zsafe + intr.cx
    v = intr.fy * points[..., 1] / zsafe + intr.cy
    uv = np.stack([u, v], axis=-1)
    inside = np.all((uv >= 0.0) & (uv <= 1.0), axis=(-2, -1))
    return uv, ok & inside


def _rejection_fill(root2d, intr, draw, max_tries: int):
    """Fill per-sample keypoints by redrawing everything except root2d.

    draw(rng-independent m, pending_root2d) -> (joints3d (m, K, 3)).
    Raises RejectionExhaustedError when any sample fails max_tries times.
    """
    n = root2d.shape[0]
    joints3d = None
    joints2d = None
    pending = np.arange(n)
    tries = np.zeros(n, dtype=int)
    while pending.size:
        cand3d = draw(pending.size, root2d[pending])
        cand2d, ok = _project_rows(cand3d, intr)
        if joints3d is None:
            k = cand3d.shape[1]
            joints3d = np.empty((n, k, 3))
            joints2d = np.empty((n, k, 2))
        good = pending[ok]
        joints3d[good] = cand3d[ok]
        joints2d[good] = cand2d[ok]
        tries[pending[~ok]] += 1
        if np.any(tries >= max_tries):
            raise RejectionExhaustedError(
                f"no in-frame sample after {max_tries} redraws; the subject does not fit "
                "the frame at the requested position/depth (widen the depth range, shrink "
                "the region, or use a wider-angle camera)"
            )
        pending = pending[~ok]
    return joints3d, joints2d


def _check_region(region):
    lo, hi = float(region[0]), float(region[1])
    if not (0.0 <= lo < hi <= 1.0):
        raise ValidationError(f"region must satisfy 0 <= lo < hi <= 1, got {region}")
    return lo, hi


def _check_depth(depth):
    lo, hi = float(depth[0]), float(depth[1])
    if not (0 < lo <= hi):
        raise ValidationError(f"depth range must be positive with lo <= hi, got {depth}")
    return lo, hi


def sample_figures(
    intr: CameraIntrinsics,
    n: int,
    seed: int,
    region=(0.15, 0.85),
    depth=(3000.0, 7000.0),
    articulation: float = 0.6,
    centered: bool = False,
    max_tries: int = 10000,
) -> SceneSet:
    """n random articulated figures in front of the camera.

    The pelvis projects exactly to a root position drawn uniformly over
    region^2 (or pinned to (0.5, 0.5) when centered=True); depth is
    uniform over `depth` mm; global orientation is uniform over SO(3).
    """
    if n <= 0:
        raise ValidationError(f"sample count must be positive, got {n}")
    lo, hi = _check_region(region)
    zlo, zhi = _check_depth(depth)
    rng = np.random.default_rng(seed)
    if centered:
        root2d = np.full((n, 2), 0.5)
    else:
        root2d = rng.uniform(lo, hi, size=(n, 2))

    def draw(m, roots):
        z = rng.uniform(zlo, zhi, size=m)
        orient = random_rotations(rng, m)
        body = articulated_bodies(rng, m, articulation)
        root3 = backproject(roots, intr) * z[:, None]
        return root3[:, None, :] + np.einsum("nab,nkb->nka", orient, body)

    joints3d, joints2d = _rejection_fill(root2d, intr, draw, max_tries)
    return SceneSet(
        joints3d=joints3d,
        joints2d=joints2d,
        root3d=joints3d[:, 0].copy(),
        root2d=joints2d[:, 0].copy(),
        camera=intr,
        kind="figure",
    )


def cube_corners(center, rotation, edge: float = 500.0) -> np.ndarray:
    """Corners (..., 8, 3) of an oriented cube; ordering fixed by CUBE_CORNER_SIGNS."""
    center = np.asarray(center, dtype=float)
    rotation = np.asarray(rotation, dtype=float)
    local = CUBE_CORNER_SIGNS * (edge / 2.0)
    return center[..., None, :] + np.einsum("...ab,kb->...ka", rotation, local)


def sample_cubes(
    intr: CameraIntrinsics,
    n: int,
    seed: int,
    region=(0.15, 0.85),
    depth=(2500.0, 6000.0),
    edge: float = 500.0,
    centered: bool = False,
    max_tries: int = 10000,
) -> SceneSet:
    """n randomly oriented cubes; the center projects to the root position."""
    if n <= 0:
        raise ValidationError(f"sample count must be positive, got {n}")
    if edge <= 0:
        raise ValidationError(f"cube edge must be positive, got {edge}")
    lo, hi = _check_region(region)
    zlo, zhi = _check_depth(depth)
    rng = np.random.default_rng(seed)
    if centered:
        root2d = np.full((n, 2), 0.5)
    else:
        root2d = rng.uniform(lo, hi, size=(n, 2))

    def draw(m, roots):
        z = rng.uniform(zlo, zhi, size=m)
        orient = random_rotations(rng, m)
        center = backproject(roots, intr) * z[:, None]
        return cube_corners(center, orient, edge)

    joints3d, joints2d = _rejection_fill(root2d, intr, draw, max_tries)
    return SceneSet(
        joints3d=joints3d,
        joints2d=joints2d,
        root3d=joints3d.mean(axis=1),
        root2d=_project_rows(joints3d.mean(axis=1)[:, None, :], intr)[0][:, 0],
        camera=intr,
        kind="cube",
    )


def render_cube(
    corners3d,
    intr: CameraIntrinsics,
    width: int | None = None,
    height: int | None = None,
    ambient: float = 0.25,
    supersample: int = 2,
) -> np.ndarray:
    """Rasterize one cube with flat per-face shading on a black background.

    corners3d: (8, 3) camera-frame corners, mm.  Faces pointing away from
    the camera are culled (the cube is convex, so the visible faces never
    overlap); each visible face is filled with
    ambient + (1 - ambient) * |n . v| where n is the outward unit normal
    and v the unit view ray to the face center.  Pixel coverage is
    estimated on a supersample x supersample grid, which antialiases the
    silhouette and face edges.

    Returns a float image (height, width) with values in [0, 1].
    """
    corners3d = np.asarray(corners3d, dtype=float)
    if corners3d.shape != (8, 3):
        raise ValidationError(f"expected (8, 3) cube corners, got shape {corners3d.shape}")
    if not (0.0 <= ambient <= 1.0):
        raise ValidationError(f"ambient must be in [0, 1], got {ambient}")
    if supersample < 1:
        raise ValidationError(f"supersample must be >= 1, got {supersample}")
    w = intr.width if width is None else int(width)
    h = intr.height if height is None else int(height)
    if np.any(corners3d[:, 2] <= 0):
        raise ValidationError("cube extends behind the camera; cannot render")

    center = corners3d.mean(axis=0)
    uv = np.stack(
        [
            intr.fx * corners3d[:, 0] / corners3d[:, 2] + intr.cx,
            intr.fy * corners3d[:, 1] / corners3d[:, 2] + intr.cy,
        ],
        axis=-1,
    )
    px = uv * np.array([w, h], dtype=float)

    faces = []
    for quad in CUBE_FACES:
        p0, p1, p2 = corners3d[quad[0]], corners3d[quad[1]], corners3d[quad[2]]
        normal = np.cross(p1 - p0, p2 - p1)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue
        normal /= norm
        fc = corners3d[list(quad)].mean(axis=0)
        if normal @ (fc - center) < 0:
            normal = -normal
        view = fc / np.linalg.norm(fc)
        facing = normal @ view
        if facing >= -1e-9:
            continue  # back or edge-on face
        shade = ambient + (1.0 - ambient) * abs(facing)
        faces.append((fc[2], px[list(quad)], shade))
    faces.sort(key=lambda item: -item[0])  # far to near

    img = np.zeros((h, w))
    sub = (np.arange(supersample) + 0.5) / supersample
    for _, quad_px, shade in faces:
        x0 = max(int(np.floor(quad_px[:, 0].min())), 0)
        x1 = min(int(np.ceil(quad_px[:, 0].max())) + 1, w)
        y0 = max(int(np.floor(quad_px[:, 1].min())), 0)
        y1 = min(int(np.ceil(quad_px[:, 1].max())) + 1, h)
        if x0 >= x1 or y0 >= y1:
            continue
        xs = x0 + np.add.outer(np.arange(x1 - x0), sub).ravel()
        ys = y0 + np.add.outer(np.arange(y1 - y0), sub).ravel()
        sx, sy = np.meshgrid(xs, ys)  # sample points, pixel units
        inside = np.ones_like(sx, dtype=bool)
        # Consistent winding is unknown, so compare edge crossings to the
        # quad's signed area orientation.
        area = 0.0
        for i in range(4):
            ax, ay = quad_px[i]
            bx, by = quad_px[(i + 1) % 4]
            area += ax * by - bx * ay
        sign = 1.0 if area >= 0 else -1.0
        for i in range(4):
            ax, ay = quad_px[i]
            bx, by = quad_px[(i + 1) % 4]
            cross = (bx - ax) * (sy - ay) - (by - ay) * (sx - ax)
            inside &= sign * cross >= 0
        cov = inside.reshape(y1 - y0, supersample, x1 - x0, supersample).mean(axis=(1, 3))
        block = img[y0:y1, x0:x1]
        img[y0:y1, x0:x1] = block * (1.0 - cov) + shade * cov
    return img

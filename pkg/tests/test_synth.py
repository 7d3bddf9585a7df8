"""Synthetic articulated figures, cubes, and the shaded renderer."""

import numpy as np
import pytest

from perspective_crop.camera import CameraIntrinsics, project
from perspective_crop.errors import RejectionExhaustedError, ValidationError
from perspective_crop.synth import (
    BONE_OFFSETS_MM,
    JOINT_NAMES,
    PARENTS,
    SceneSet,
    cube_corners,
    render_cube,
    sample_cubes,
    sample_figures,
)

INTR = CameraIntrinsics(fx=0.7, fy=0.7, cx=0.5, cy=0.5, width=512, height=512)


def test_skeleton_topology():
    assert len(JOINT_NAMES) == 17 == len(PARENTS) == len(BONE_OFFSETS_MM)
    assert PARENTS[0] == -1 and JOINT_NAMES[0] == "pelvis"
    # every non-root parent comes earlier in the list (valid FK order)
    assert all(0 <= PARENTS[j] < j for j in range(1, 17))


def test_figures_shapes_and_projection():
    scene = sample_figures(INTR, 64, seed=3)
    assert scene.kind == "figure" and len(scene) == 64
    assert scene.joints3d.shape == (64, 17, 3)
    assert scene.joints2d.shape == (64, 17, 2)
    # stored 2D is exactly the projection of stored 3D
    assert np.allclose(scene.joints2d, project(scene.joints3d, INTR), atol=1e-12)
    assert np.allclose(scene.root3d, scene.joints3d[:, 0], atol=1e-15)
    assert np.allclose(scene.root2d, project(scene.root3d, INTR), atol=1e-12)
    # everything in frame by construction
    assert np.all(scene.joints2d >= 0) and np.all(scene.joints2d <= 1)


def test_figures_bone_lengths_fixed():
    scene = sample_figures(INTR, 32, seed=4, articulation=0.9)
    lengths = {
        j: np.linalg.norm(np.asarray(BONE_OFFSETS_MM[j])) for j in range(1, 17)
    }
    for j in range(1, 17):
        d = np.linalg.norm(scene.joints3d[:, j] - scene.joints3d[:, PARENTS[j]], axis=1)
        assert np.allclose(d, lengths[j], atol=1e-9), JOINT_NAMES[j]


def test_figures_root_positions_cover_region():
    scene = sample_figures(INTR, 8000, seed=5, region=(0.15, 0.85))
    r = scene.root2d
    assert np.all(r >= 0.15) and np.all(r <= 0.85)
    # the root location is drawn once and kept during pose rejection, so
    # it stays uniform over the region: chi-square on a 5x5 grid
    counts, _, _ = np.histogram2d(
        r[:, 0], r[:, 1], bins=5, range=[[0.15, 0.85], [0.15, 0.85]]
    )
    expected = 8000 / 25.0
    chi2 = ((counts - expected) ** 2 / expected).sum()
    # 24 dof: mean 24, std ~6.9; 60 is far beyond sane seeded variation
    assert chi2 < 60.0, f"chi2={chi2:.1f}"


def test_figures_centered_pins_root():
    scene = sample_figures(INTR, 40, seed=6, centered=True)
    assert np.allclose(scene.root2d, 0.5, atol=1e-12)


def test_figures_deterministic():
    a = sample_figures(INTR, 25, seed=7)
    b = sample_figures(INTR, 25, seed=7)
    assert np.array_equal(a.joints3d, b.joints3d)
    assert not np.array_equal(a.joints3d, sample_figures(INTR, 25, seed=8).joints3d)


def test_rejection_exhaustion_raises():
    # a depth so close the figure can never fit inside the frame
    with pytest.raises(RejectionExhaustedError):
        sample_figures(INTR, 4, seed=0, depth=(300.0, 320.0))


def test_figures_validation():
    with pytest.raises(ValidationError):
        sample_figures(INTR, 0, seed=0)
    with pytest.raises(ValidationError):
        sample_figures(INTR, 4, seed=0, region=(0.9, 0.1))
    with pytest.raises(ValidationError):
        sample_figures(INTR, 4, seed=0, depth=(5000.0, 3000.0))
    with pytest.raises(ValidationError):
        sample_figures(INTR, 4, seed=0, articulation=-0.5)


def test_cubes_shapes_and_geometry():
    scene = sample_cubes(INTR, 48, seed=9, edge=500.0)
    assert scene.kind == "cube" and scene.joints3d.shape == (48, 8, 3)
    corners = scene.joints3d
    center = corners.mean(axis=1)
    assert np.allclose(scene.root3d, center, atol=1e-9)
    # 12 edges of length 500: each corner has exactly 3 neighbors at 500
    d = np.linalg.norm(corners[:, :, None] - corners[:, None], axis=-1)
    per_corner = (np.abs(d - 500.0) < 1e-6).sum(axis=2)
    assert np.all(per_corner == 3)
    # rigid: diagonals are edge * sqrt(3)
    assert np.allclose(d.max(axis=(1, 2)), 500.0 * np.sqrt(3.0), atol=1e-6)


def test_cube_corners_helper():
    corners = cube_corners(np.array([0.0, 0.0, 4000.0]), np.eye(3), 200.0)
    assert corners.shape == (8, 3)
    assert np.allclose(np.abs(corners - [0, 0, 4000]), 100.0)


def test_scene_set_validation():
    with pytest.raises(ValidationError):
        SceneSet(
            joints3d=np.zeros((4, 8, 3)),
            joints2d=np.zeros((5, 8, 2)),  # mismatched N
            root3d=np.zeros((4, 3)),
            root2d=np.zeros((4, 2)),
            camera=INTR,
            kind="cube",
        )


def test_render_cube_basic():
    corners = cube_corners(np.array([0.0, 0.0, 3000.0]), np.eye(3), 800.0)
    img = render_cube(corners, INTR)
    assert img.shape == (512, 512)
    assert np.all(img >= 0.0) and np.all(img <= 1.0)
    # face-on cube: the front face shades to full intensity at the center
    assert img[256, 256] > 0.9
    # corners of the image stay background
    assert img[0, 0] == 0.0 and img[-1, -1] == 0.0


def test_render_cube_shading_depends_on_orientation():
    c = np.array([600.0, 0.0, 3000.0])
    rng = np.random.default_rng(10)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    from perspective_crop.synth import axis_angle_rotations

    rot = axis_angle_rotations(axis[None], np.array([0.7]))[0]
    img_a = render_cube(cube_corners(c, np.eye(3), 700.0), INTR)
    img_b = render_cube(cube_corners(c, rot, 700.0), INTR)
    assert not np.allclose(img_a, img_b)


def test_render_cube_custom_size():
    corners = cube_corners(np.array([0.0, 0.0, 3000.0]), np.eye(3), 800.0)
    img = render_cube(corners, INTR, width=64, height=48)
    assert img.shape == (48, 64)

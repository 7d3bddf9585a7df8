"""Analytic derivatives versus central finite differences.

gradcheck_report covers every component in one sweep; the targeted tests
below pin shapes and a few structural facts the sweep cannot see.
"""

import numpy as np
import pytest

from perspective_crop.camera import CameraIntrinsics
from perspective_crop.errors import ValidationError
from perspective_crop.jacobians import (
    crop_image_with_jacobian,
    gradcheck_report,
    rotation_jacobian,
    virtual_focal_jacobian,
    warp_points_jacobian,
    warp_with_jacobian,
)
from perspective_crop.warp import rotation_from_target, virtual_focal

INTR = CameraIntrinsics(fx=0.7, fy=0.7, cx=0.5, cy=0.5)


def test_gradcheck_report_all_components_pass():
    report = gradcheck_report(seed=0)
    expected = {
        "rotation",
        "virtual_focal",
        "warp_matrix",
        "inverse_warp_matrix",
        "warped_points",
        "spatial",
        "crop_image",
    }
    assert set(report) == expected
    for name, worst in report.items():
        tol = 1e-4 if name == "crop_image" else 1e-5
        assert worst < tol, f"{name}: {worst:.3e}"


def test_rotation_jacobian_direct_fd():
    rng = np.random.default_rng(41)
    p = rng.uniform(-1.0, 1.0, size=(20, 2))
    jac = rotation_jacobian(p)
    assert jac.shape == (20, 2, 3, 3)
    eps = 1e-6
    for axis in range(2):
        step = np.zeros(2)
        step[axis] = eps
        fd = (rotation_from_target(p + step) - rotation_from_target(p - step)) / (2 * eps)
        assert np.max(np.abs(jac[:, axis] - fd)) < 1e-8


def test_virtual_focal_jacobian_direct_fd():
    rng = np.random.default_rng(42)
    p = rng.uniform(-1.0, 1.0, size=(15, 2))
    f = np.array([0.7, 0.65])
    for option in ("A", "B", "C"):
        jac = virtual_focal_jacobian(f, p, option)
        assert jac.shape == (15, 2, 2)
        eps = 1e-6
        for axis in range(2):
            step = np.zeros(2)
            step[axis] = eps
            fd = (virtual_focal(f, p + step, option) - virtual_focal(f, p - step, option)) / (
                2 * eps
            )
            assert np.max(np.abs(jac[:, :, axis] - fd)) < 1e-8


def test_warp_with_jacobian_shapes_and_fd():
    target = np.array([0.64, 0.38])
    scale = np.array([0.3, 0.25])
    crop, dg, dg_inv = warp_with_jacobian(INTR, target, scale, "C")
    assert dg.shape == (4, 3, 3) and dg_inv.shape == (4, 3, 3)
    eps = 1e-6
    steps = [
        (np.array([eps, 0.0]), np.zeros(2)),
        (np.array([0.0, eps]), np.zeros(2)),
        (np.zeros(2), np.array([eps, 0.0])),
        (np.zeros(2), np.array([0.0, eps])),
    ]
    for i, (dt, ds) in enumerate(steps):
        plus, _, _ = warp_with_jacobian(INTR, target + dt, scale + ds, "C")
        minus, _, _ = warp_with_jacobian(INTR, target - dt, scale - ds, "C")
        fd = (plus.matrix() - minus.matrix()) / (2 * eps)
        fd_inv = (plus.inverse_matrix() - minus.inverse_matrix()) / (2 * eps)
        assert np.max(np.abs(dg[i] - fd)) < 1e-6
        assert np.max(np.abs(dg_inv[i] - fd_inv)) < 1e-6


def test_warp_jacobian_aspect_axes_decouple():
    """With per-axis focals, sx only moves warped x and sy only warped y."""
    crop, dg, _ = warp_with_jacobian(INTR, np.array([0.6, 0.4]), np.array([0.3, 0.3]), "C")
    rng = np.random.default_rng(43)
    pts = rng.uniform(0.2, 0.8, size=(12, 2))
    _, dpts = warp_points_jacobian(crop.matrix(), dg, pts)
    assert dpts.shape == (12, 2, 4)
    assert np.allclose(dpts[:, 1, 2], 0.0, atol=1e-12)  # d(warped y)/d(sx)
    assert np.allclose(dpts[:, 0, 3], 0.0, atol=1e-12)  # d(warped x)/d(sy)
    assert not np.allclose(dpts[:, 0, 2], 0.0)


def test_crop_image_jacobian_shape():
    rng = np.random.default_rng(44)
    img = rng.uniform(size=(48, 48))
    patch, dpatch = crop_image_with_jacobian(
        img, INTR, np.array([0.55, 0.5]), np.array([0.4, 0.4]), out_width=32, out_height=24
    )
    assert patch.shape == (24, 32)
    assert dpatch.shape == (24, 32, 4)  # parameters (tu, tv, sx, sy) last
    assert np.all(np.isfinite(dpatch))


def test_warp_with_jacobian_rejects_bad_input():
    with pytest.raises(ValidationError):
        warp_with_jacobian(INTR, np.array([0.5, 0.5]), np.array([-0.1, 0.2]), "C")
    with pytest.raises(ValidationError):
        warp_with_jacobian(INTR, np.array([0.5, 0.5]), np.array([0.2, 0.2]), "Q")

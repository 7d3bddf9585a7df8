"""Bilinear sampling and homography-based image warping."""

import numpy as np
import pytest

from perspective_crop.camera import CameraIntrinsics
from perspective_crop.errors import ValidationError
from perspective_crop.image import (
    crop_image,
    pixel_grid,
    sample_bilinear,
    sample_bilinear_with_grad,
    uncrop_image,
    warp_image,
)
from perspective_crop.warp import PerspectiveCrop


def test_pixel_grid_centers():
    grid = pixel_grid(4, 2)
    assert grid.shape == (2, 4, 2)
    # pixel centers: (i + 1/2) / n on each axis
    assert np.allclose(grid[0, 0], [0.125, 0.25])
    assert np.allclose(grid[1, 3], [0.875, 0.75])


def test_sample_exact_at_pixel_centers():
    rng = np.random.default_rng(31)
    img = rng.uniform(size=(6, 9))
    grid = pixel_grid(9, 6)
    assert np.allclose(sample_bilinear(img, grid.reshape(-1, 2)), img.reshape(-1), atol=1e-14)


def test_sample_reproduces_linear_functions():
    # a bilinear interpolant is exact for functions linear in u and v
    w, h = 16, 12
    grid = pixel_grid(w, h)
    img = 0.3 + 0.5 * grid[..., 0] - 0.2 * grid[..., 1]
    rng = np.random.default_rng(32)
    # stay inside the outer half-pixel band where extrapolation starts
    pts = rng.uniform([0.5 / w, 0.5 / h], [1 - 0.5 / w, 1 - 0.5 / h], size=(200, 2))
    expected = 0.3 + 0.5 * pts[:, 0] - 0.2 * pts[:, 1]
    assert np.allclose(sample_bilinear(img, pts), expected, atol=1e-12)


def test_sample_zero_padding_outside():
    img = np.ones((4, 4))
    far = np.array([[-0.5, 0.5], [0.5, 1.5], [2.0, 2.0]])
    assert np.allclose(sample_bilinear(img, far), 0.0)


def test_sample_multichannel():
    rng = np.random.default_rng(33)
    img = rng.uniform(size=(5, 7, 3))
    grid = pixel_grid(7, 5).reshape(-1, 2)
    out = sample_bilinear(img, grid)
    assert out.shape == (35, 3)
    assert np.allclose(out, img.reshape(35, 3), atol=1e-14)


def test_sample_gradient_matches_fd():
    rng = np.random.default_rng(34)
    img = rng.uniform(size=(12, 12))
    # keep probes away from cell boundaries where the derivative jumps
    cells = rng.integers(1, 10, size=(50, 2))
    frac = rng.uniform(0.2, 0.8, size=(50, 2))
    pts = (cells + frac) / 12.0
    _, grad = sample_bilinear_with_grad(img, pts)
    eps = 1e-6
    for axis in range(2):
        step = np.zeros(2)
        step[axis] = eps
        fd = (sample_bilinear(img, pts + step) - sample_bilinear(img, pts - step)) / (2 * eps)
        assert np.max(np.abs(grad[:, axis] - fd)) < 1e-6


def test_sample_gradient_multichannel_shape():
    rng = np.random.default_rng(35)
    img = rng.uniform(size=(8, 8, 2))
    pts = rng.uniform(0.2, 0.8, size=(10, 2))
    value, grad = sample_bilinear_with_grad(img, pts)
    assert value.shape == (10, 2) and grad.shape == (10, 2, 2)


def test_warp_image_identity():
    rng = np.random.default_rng(36)
    img = rng.uniform(size=(10, 10))
    out = warp_image(img, np.eye(3), 10, 10)
    assert np.allclose(out, img, atol=1e-14)


def test_warp_image_shift_by_whole_pixels():
    rng = np.random.default_rng(37)
    img = rng.uniform(size=(8, 8))
    # map output (u, v) to source (u + 2px, v): content shifts left
    shift = np.eye(3)
    shift[0, 2] = 2.0 / 8.0
    out = warp_image(img, shift, 8, 8)
    assert np.allclose(out[:, :6], img[:, 2:], atol=1e-14)
    assert np.allclose(out[:, 6:], 0.0)  # pulled from outside: padded


def test_warp_image_validates_input():
    with pytest.raises(ValidationError):
        warp_image(np.zeros((4,)), np.eye(3), 4, 4)
    with pytest.raises(ValidationError):
        warp_image(np.zeros((4, 4)), np.eye(2), 4, 4)
    with pytest.raises(ValidationError):
        warp_image(np.zeros((4, 4)), np.eye(3), 0, 4)


def test_crop_uncrop_roundtrip_interior():
    intr = CameraIntrinsics(fx=0.7, fy=0.7, cx=0.5, cy=0.5)
    rng = np.random.default_rng(38)
    # smooth image so resampling error stays small
    u = pixel_grid(96, 96)
    img = 0.5 + 0.4 * np.sin(6 * u[..., 0]) * np.cos(5 * u[..., 1])
    crop = PerspectiveCrop.from_target(intr, np.array([0.6, 0.45]), np.array([0.35, 0.35]))
    patch = crop_image(img, crop, 160, 160)
    back = uncrop_image(patch, crop, 96, 96)
    # compare only source pixels mapping well inside the patch, away from
    # the border band where padding bleeds into the interpolation
    in_patch = crop.warp(u.reshape(-1, 2)).reshape(96, 96, 2)
    mask = np.all((in_patch > 0.05) & (in_patch < 0.95), axis=-1)
    assert mask.mean() > 0.05
    assert np.abs((back - img)[mask]).mean() < 5e-3
    del rng

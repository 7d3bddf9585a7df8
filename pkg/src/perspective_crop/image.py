"""Bilinear image sampling and homography warps on pixel grids.

Images are float arrays of shape (H, W) or (H, W, C), row i = image row,
column j = image column, indexed as image[i, j].  Pixel (i, j) covers the
normalized-coordinate cell [j/W, (j+1)/W] x [i/H, (i+1)/H] with its center
at ((j + 0.5) / W, (i + 0.5) / H).

Sampling outside the image returns 0 (zero padding).  On the sample
lattice itself bilinear weights are ambiguous between neighboring cells;
this implementation always uses the cell whose lower coordinate corner is
the lattice point (via ceil(x) - 1), so gradients there are a fixed,
deterministic subgradient.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

__all__ = [
    "pixel_grid",
    "sample_bilinear",
    "sample_bilinear_with_grad",
    "warp_image",
    "crop_image",
    "uncrop_image",
]


def pixel_grid(width: int, height: int) -> np.ndarray:
    """Normalized coordinates of all pixel centers, shape (height, width, 2)."""
    if width <= 0 or height <= 0:
        raise ValidationError(f"grid size must be positive, got {width}x{height}")
    u = (np.arange(width) + 0.5) / width
    v = (np.arange(height) + 0.5) / height
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu, vv], axis=-1)


def _check_image(image) -> np.ndarray:
    image = np.asarray(image, dtype=float)
    if image.ndim not in (2, 3):
        raise ValidationError(f"expected (H, W) or (H, W, C) image, got shape {image.shape}")
    return image


def _corners(image: np.ndarray, uv: np.ndarray):
    """Cell indices, fractional offsets, and the four corner values."""
    h, w = image.shape[:2]
    x = uv[..., 0] * w - 0.5
    y = uv[..., 1] * h - 0.5
    # ceil(x) - 1, not floor(x): identical off-lattice, but on the lattice
    # it selects the lower cell, keeping the subgradient deterministic.
    ix = (np.ceil(x) - 1).astype(int)
    iy = (np.ceil(y) - 1).astype(int)
    fx = x - ix
    fy = y - iy

    def gather(iy_, ix_):
        valid = (ix_ >= 0) & (ix_ < w) & (iy_ >= 0) & (iy_ < h)
        vals = image[np.clip(iy_, 0, h - 1), np.clip(ix_, 0, w - 1)]
        mask = valid if image.ndim == 2 else valid[..., None]
        return np.where(mask, vals, 0.0)

    c00 = gather(iy, ix)
    c01 = gather(iy, ix + 1)
    c10 = gather(iy + 1, ix)
    c11 = gather(iy + 1, ix + 1)
    return fx, fy, c00, c01, c10, c11


def sample_bilinear(image, uv) -> np.ndarray:
    """Sample image at normalized coordinates uv (..., 2) with zero padding.

    Returns shape uv.shape[:-1] for (H, W) images and uv.shape[:-1] + (C,)
    for (H, W, C) images.
    """
    image = _check_image(image)
    uv = np.asarray(uv, dtype=float)
    if uv.shape[-1] != 2:
        raise ValidationError(f"expected (..., 2) sample points, got shape {uv.shape}")
    fx, fy, c00, c01, c10, c11 = _corners(image, uv)
    if image.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = c00 * (1.0 - fx) + c01 * fx
    bot = c10 * (1.0 - fx) + c11 * fx
    return top * (1.0 - fy) + bot * fy


def sample_bilinear_with_grad(image, uv) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear sample plus its gradient w.r.t. the normalized coordinates.

    Returns (values, grad); grad has a trailing axis of length 2 holding
    (d/du, d/dv) in normalized units (i.e. already multiplied by W and H).
    For multi-channel images grad has shape uv.shape[:-1] + (C, 2).
    """
    image = _check_image(image)
    uv = np.asarray(uv, dtype=float)
    if uv.shape[-1] != 2:
        raise ValidationError(f"expected (..., 2) sample points, got shape {uv.shape}")
    h, w = image.shape[:2]
    fx, fy, c00, c01, c10, c11 = _corners(image, uv)
    if image.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = c00 * (1.0 - fx) + c01 * fx
    bot = c10 * (1.0 - fx) + c11 * fx
    vals = top * (1.0 - fy) + bot * fy
    d_dx = ((c01 - c00) * (1.0 - fy) + (c11 - c10) * fy) * w
    d_dy = (bot - top) * h
    return vals, np.stack([d_dx, d_dy], axis=-1)


def warp_image(image, out_to_source, out_width: int, out_height: int) -> np.ndarray:
    """Pull-warp through a homography.

    out_to_source maps OUTPUT normalized coordinates to SOURCE normalized
    coordinates (for producing a crop patch this is the crop's inverse
    matrix).  Each output pixel center is mapped and sampled bilinearly;
    samples outside the source image, or mapped behind the camera
    (non-positive homogeneous component), come out 0.
    """
    image = _check_image(image)
    out_to_source = np.asarray(out_to_source, dtype=float)
    if out_to_source.shape != (3, 3):
        raise ValidationError(f"expected a (3, 3) homography, got shape {out_to_source.shape}")
    grid = pixel_grid(out_width, out_height)
    hom = np.concatenate([grid, np.ones(grid.shape[:-1] + (1,))], axis=-1) @ out_to_source.T
    z = hom[..., 2]
    ok = z > 1e-12
    zsafe = np.where(ok, z, 1.0)
    uv = hom[..., :2] / zsafe[..., None]
    # Park invalid rays outside the image so zero padding takes over.
    uv = np.where(ok[..., None], uv, -10.0)
    return sample_bilinear(image, uv)


def crop_image(image, crop, out_width: int, out_height: int) -> np.ndarray:
    """Extract the patch an (Affine or Perspective) crop describes."""
    return warp_image(image, crop.inverse_matrix(), out_width, out_height)


def uncrop_image(patch, crop, out_width: int, out_height: int) -> np.ndarray:
    """Paste a patch back into original-image coordinates (zero elsewhere)."""
    return warp_image(patch, crop.matrix(), out_width, out_height)

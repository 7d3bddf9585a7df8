"""Closed-form derivatives of the crop geometry.

Everything a gradient-based crop-parameter optimizer needs: derivatives of
the virtual-camera rotation, the virtual focal length, the warp homography
and its inverse, warped point positions, and cropped pixel intensities,
all with respect to the four crop parameters

    theta = (target_u, target_v, scale_x, scale_y)

(crop center in normalized image coordinates, crop extent).  No finite
differences and no autodiff; each formula is the hand-derived derivative
of the expressions in warp.py, and the test suite checks every one of
them against central differences.

The aspect-preserving min() rule is not differentiable at focal ties, so
all Jacobians here treat the two axes independently (preserve_aspect is
forced off).
"""

from __future__ import annotations

import numpy as np

from .camera import CameraIntrinsics
from .errors import ValidationError
from .image import pixel_grid, sample_bilinear_with_grad, warp_image
from .warp import (
    FOCAL_OPTIONS,
    PerspectiveCrop,
    _plane_terms,
    rotation_from_target,
    virtual_focal,
)

__all__ = [
    "rotation_jacobian",
    "virtual_focal_jacobian",
    "warp_with_jacobian",
    "warp_points_jacobian",
    "point_warp_spatial_jacobian",
    "crop_image_with_jacobian",
    "gradcheck_report",
]


def rotation_jacobian(p2d) -> np.ndarray:
    """d(rotation_from_target)/d(p2d), shape (..., 2, 3, 3).

    Index [..., 0] is the derivative w.r.t. px, [..., 1] w.r.t. py.
    """
    px, py, a, n = _plane_terms(p2d)
    a3 = a * a * a
    n3 = n * n * n
    a2 = a * a
    n2 = n * n
    zero = np.zeros_like(px)

    d_px = np.stack(
        [
            np.stack(
                [
                    -px / a3,
                    -py * (n2 * a2 - px * px * (a2 + n2)) / (n3 * a3),
                    (1.0 + py * py) / n3,
                ],
                axis=-1,
            ),
            np.stack([zero, px * py * py / (a * n3), -px * py / n3], axis=-1),
            np.stack([-1.0 / a3, py * px * (a2 + n2) / (n3 * a3), -px / n3], axis=-1),
        ],
        axis=-2,
    )
    d_py = np.stack(
        [
            np.stack([zero, -px * a / n3, -px * py / n3], axis=-1),
            np.stack([zero, -a * py / n3, a2 / n3], axis=-1),
            np.stack([zero, -a / n3, -py / n3], axis=-1),
        ],
        axis=-2,
    )
    return np.stack([d_px, d_py], axis=-3)


def virtual_focal_jacobian(f, p2d, option: str = "C") -> np.ndarray:
    """d(virtual_focal)/d(p2d), shape (..., 2, 2): [..., i, j] = dh_i/dp_j."""
    if option not in FOCAL_OPTIONS:
        raise ValidationError(f"unknown focal option {option!r}, expected one of {FOCAL_OPTIONS}")
    f = np.asarray(f, dtype=float)
    fx = f[..., 0]
    fy = f[..., 1]
    px, py, a, n = _plane_terms(p2d)
    zero = np.zeros_like(px)
    if option == "A":
        row_x = np.stack([zero, zero], axis=-1)
        row_y = np.stack([zero, zero], axis=-1)
    elif option == "B":
        row_x = np.stack([fx * px / n, fx * py / n], axis=-1)
        row_y = np.stack([fy * px / n, fy * py / n], axis=-1)
    else:
        a2 = a * a
        n2 = n * n
        row_x = np.stack([fx * px * (a2 + n2) / (n * a), fx * a * py / n], axis=-1)
        row_y = np.stack([fy * px * (2.0 * a2 - n2) / (a * a2), fy * 2.0 * py / a], axis=-1)
    return np.stack([row_x, row_y], axis=-2)


def warp_with_jacobian(
    intr: CameraIntrinsics,
    target,
    scale,
    option: str = "C",
    patch_width: int = 128,
    patch_height: int = 128,
) -> tuple[PerspectiveCrop, np.ndarray, np.ndarray]:
    """Crop plus dG/dtheta and dG^-1/dtheta, each of shape (4, 3, 3).

    theta = (target_u, target_v, scale_x, scale_y).  G = K_virt R^T K^-1;
    the parameter dependence enters through the plane target
    p = K^-1 target (so dp/dtarget = diag(1/fx, 1/fy)), the rotation R(p)
    and the virtual focal h(p), and through K_virt's focals h / s.  The
    inverse derivative uses d(G^-1) = -G^-1 dG G^-1.
    """
    crop = PerspectiveCrop.from_target(
        intr, target, scale, option, False, patch_width, patch_height
    )
    p2d = crop.plane_target()
    R = crop.rotation
    k_inv = intr.inverse_matrix()
    k_virt = crop.virtual_camera.as_matrix()

    h = virtual_focal(intr.f, p2d, option)
    dh_dp = virtual_focal_jacobian(intr.f, p2d, option)
    dr_dp = rotation_jacobian(p2d)
    dp_dt = np.array([1.0 / intr.fx, 1.0 / intr.fy])
    s = crop.scale

    dG = np.empty((4, 3, 3))
    for j in range(2):
        dkv = np.zeros((3, 3))
        dkv[0, 0] = dh_dp[0, j] / s[0]
        dkv[1, 1] = dh_dp[1, j] / s[1]
        dG_dpj = dkv @ R.T @ k_inv + k_virt @ dr_dp[j].T @ k_inv
        dG[j] = dG_dpj * dp_dt[j]
    for j in range(2):
        dkv = np.zeros((3, 3))
        dkv[j, j] = -h[j] / (s[j] * s[j])
        dG[2 + j] = dkv @ R.T @ k_inv

    g_inv = crop.inverse_matrix()
    dG_inv = -np.einsum("ab,kbc,cd->kad", g_inv, dG, g_inv)
    return crop, dG, dG_inv


def warp_points_jacobian(G, dG, pts) -> tuple[np.ndarray, np.ndarray]:
    """Warped points and their derivative w.r.t. the warp parameters.

    G: (3, 3); dG: (K, 3, 3) derivatives of G; pts: (..., 2).
    Returns (warped (..., 2), jac (..., 2, K)).  For q = G (u, v, 1)^T and
    w = q_12 / q_3, each parameter's contribution is
    (dq_12 - w dq_3) / q_3.
    """
    G = np.asarray(G, dtype=float)
    dG = np.asarray(dG, dtype=float)
    pts = np.asarray(pts, dtype=float)
    hom = np.concatenate([pts, np.ones(pts.shape[:-1] + (1,))], axis=-1)
    q = hom @ G.T
    w = q[..., :2] / q[..., 2:3]
    dq = np.einsum("kab,...b->...ka", dG, hom)
    jac = (dq[..., :, :2] - w[..., None, :] * dq[..., :, 2:3]) / q[..., None, 2:3]
    return w, np.swapaxes(jac, -1, -2)


def point_warp_spatial_jacobian(G, pts) -> tuple[np.ndarray, np.ndarray]:
    """Warped points and the 2x2 spatial derivative d(warped)/d(pts).

    Returns (warped (..., 2), jac (..., 2, 2)) with jac[..., i, j] =
    d warped_i / d pts_j.
    """
    G = np.asarray(G, dtype=float)
    pts = np.asarray(pts, dtype=float)
    hom = np.concatenate([pts, np.ones(pts.shape[:-1] + (1,))], axis=-1)
    q = hom @ G.T
    w = q[..., :2] / q[..., 2:3]
    jac = (G[:2, :2] - w[..., :, None] * G[2, :2]) / q[..., 2:3, None]
    return w, jac


def crop_image_with_jacobian(
    image,
    intr: CameraIntrinsics,
    target,
    scale,
    option: str = "C",
    out_width: int = 64,
    out_height: int = 64,
) -> tuple[np.ndarray, np.ndarray]:
    """Cropped patch and its derivative w.r.t. theta.

    Chains the inverse-warp parameter Jacobian with the bilinear sampling
    gradient: each output pixel's source location m(theta) moves with the
    crop parameters, and the intensity moves with the local image
    gradient at m.  Returns (patch, dpatch) where dpatch has shape
    (out_height, out_width, 4) for gray images and (..., C, 4) for
    multi-channel ones.

    The derivative is exact for the bilinear interpolant, which is only a
    subgradient of the true intensity at cell boundaries; image-level
    finite-difference checks should use a looser tolerance than the
    geometric ones.
    """
    crop, _, dG_inv = warp_with_jacobian(intr, target, scale, option)
    g_inv = crop.inverse_matrix()
    grid = pixel_grid(out_width, out_height)
    m, dm = warp_points_jacobian(g_inv, dG_inv, grid)
    vals, grad = sample_bilinear_with_grad(image, m)
    image = np.asarray(image)
    if image.ndim == 3:
        dpatch = np.einsum("hwcs,hwsk->hwck", grad, dm)
    else:
        dpatch = np.einsum("hws,hwsk->hwk", grad, dm)
    return vals, dpatch


def _rel(analytic, fd) -> float:
    """Max abs deviation, relative to the finite-difference magnitude.

    The denominator is floored at 1 so near-zero derivatives are judged
    on absolute error instead of blowing up the ratio.
    """
    analytic = np.asarray(analytic, dtype=float)
    fd = np.asarray(fd, dtype=float)
    return float(np.abs(analytic - fd).max() / max(1.0, np.abs(fd).max()))


def gradcheck_report(seed: int = 0, n_points: int = 20, image_size: int = 64) -> dict:
    """Compare every closed-form derivative against central differences.

    Returns a dict of component name -> worst relative error (see _rel).
    The image-level entry excludes output pixels whose source sample sits
    within 2% of a bilinear cell boundary, where the interpolant's true
    derivative jumps and finite differences measure nothing meaningful.
    """
    rng = np.random.default_rng(seed)
    intr = CameraIntrinsics(0.7, 0.75, 0.48, 0.52, image_size, image_size)
    report: dict[str, float] = {}
    eps = 1e-6

    worst = 0.0
    for p0 in rng.uniform(-1.2, 1.2, size=(n_points, 2)):
        jac = rotation_jacobian(p0)
        for j in range(2):
            step = np.zeros(2)
            step[j] = eps
            fd = (rotation_from_target(p0 + step) - rotation_from_target(p0 - step)) / (2 * eps)
            worst = max(worst, _rel(jac[j], fd))
    report["rotation"] = worst

    worst = 0.0
    for option in FOCAL_OPTIONS:
        for p0 in rng.uniform(-1.2, 1.2, size=(n_points, 2)):
            jac = virtual_focal_jacobian(intr.f, p0, option)
            for j in range(2):
                step = np.zeros(2)
                step[j] = eps
                fd = (
                    virtual_focal(intr.f, p0 + step, option)
                    - virtual_focal(intr.f, p0 - step, option)
                ) / (2 * eps)
                worst = max(worst, _rel(jac[:, j], fd))
    report["virtual_focal"] = worst

    def crop_at(theta, option):
        return PerspectiveCrop.from_target(intr, theta[:2], theta[2:], option, False)

    worst_g = 0.0
    worst_gi = 0.0
    worst_pts = 0.0
    for option in FOCAL_OPTIONS:
        for _ in range(max(3, n_points // 4)):
            theta = np.concatenate([rng.uniform(0.25, 0.75, 2), rng.uniform(0.15, 0.45, 2)])
            crop, dG, dGi = warp_with_jacobian(intr, theta[:2], theta[2:], option)
            pts = rng.uniform(0.2, 0.8, size=(5, 2))
            _, pt_jac = warp_points_jacobian(crop.matrix(), dG, pts)
            for k in range(4):
                step = np.zeros(4)
                step[k] = eps
                cp = crop_at(theta + step, option)
                cm = crop_at(theta - step, option)
                worst_g = max(worst_g, _rel(dG[k], (cp.matrix() - cm.matrix()) / (2 * eps)))
                worst_gi = max(
                    worst_gi,
                    _rel(dGi[k], (cp.inverse_matrix() - cm.inverse_matrix()) / (2 * eps)),
                )
                worst_pts = max(
                    worst_pts, _rel(pt_jac[..., k], (cp.warp(pts) - cm.warp(pts)) / (2 * eps))
                )
    report["warp_matrix"] = worst_g
    report["inverse_warp_matrix"] = worst_gi
    report["warped_points"] = worst_pts

    worst = 0.0
    crop = PerspectiveCrop.from_target(intr, [0.4, 0.6], [0.3, 0.35], "C", False)
    pts = rng.uniform(0.2, 0.8, size=(n_points, 2))
    _, spatial = point_warp_spatial_jacobian(crop.matrix(), pts)
    for j in range(2):
        step = np.zeros(2)
        step[j] = eps
        fd = (crop.warp(pts + step) - crop.warp(pts - step)) / (2 * eps)
        worst = max(worst, _rel(spatial[..., j], fd))
    report["spatial"] = worst

    yy, xx = np.meshgrid(np.arange(image_size), np.arange(image_size), indexing="ij")
    smooth = 0.5 + 0.5 * np.sin(xx / 6.5) * np.cos(yy / 8.5)
    theta = np.array([0.45, 0.55, 0.3, 0.35])
    out = 24
    patch, dpatch = crop_image_with_jacobian(smooth, intr, theta[:2], theta[2:], "C", out, out)
    crop, _, dGi = warp_with_jacobian(intr, theta[:2], theta[2:], "C")
    m, _ = warp_points_jacobian(crop.inverse_matrix(), dGi, pixel_grid(out, out))
    frac = m * image_size - 0.5
    frac = frac - np.floor(frac)
    safe = np.all((frac > 0.02) & (frac < 0.98), axis=-1)

    worst = 0.0
    fd_eps = 1e-5
    for k in range(4):
        step = np.zeros(4)
        step[k] = fd_eps
        cp = crop_at(theta + step, "C")
        cm = crop_at(theta - step, "C")
        fd = (
            warp_image(smooth, cp.inverse_matrix(), out, out)
            - warp_image(smooth, cm.inverse_matrix(), out, out)
        ) / (2 * fd_eps)
        worst = max(worst, _rel(dpatch[..., k][safe], fd[safe]))
    report["crop_image"] = worst
    return report

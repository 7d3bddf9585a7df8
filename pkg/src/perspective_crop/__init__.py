"""Perspective crop layers: location-dependent crops as homography warps.

A rectangular crop of a pinhole image silently changes the camera
geometry: the same object looks different depending on where in the
frame it was cut out, and a network consuming such crops has to spend
capacity on an effect that is pure projection.  This package replaces
the rectangular crop with a virtual pinhole camera that shares the real
camera's optical center but looks straight at the crop target.  The
resulting image/keypoint transform is a plane homography determined by
the intrinsics, the target, and the requested crop scale; it is
invertible, differentiable with respect to its parameters, and the
rotation linking the two cameras lets 3D predictions made in the virtual
frame be mapped back to the real one exactly.

Modules
-------
camera       intrinsics, projection, normalized coordinates
warp         virtual camera construction, crop homographies, baselines
image        bilinear sampling and image warping
jacobians    analytic derivatives of every step, with a finite
             difference self-check
mlp          small residual MLP for 2D-to-3D lifting (numpy, seeded)
synth        synthetic articulated figures and shaded cubes
experiments  rectangular-vs-perspective lifting benchmarks
datafiles    deterministic JSON/.npy/JSONL IO and run manifests
cli          the `pcrop` command

Conventions: image coordinates are normalized to [0, 1] x [0, 1] with
the origin at the top-left corner, x right, y down, z forward; focal
lengths are expressed in the same normalized units.
"""

from .camera import (
    CameraIntrinsics,
    backproject,
    check_rotation,
    dehomogenize,
    homogenize,
    is_rotation,
    load_camera,
    normalized_to_pixel,
    pixel_to_normalized,
    project,
    save_camera,
)
from .errors import (
    DegenerateBoundingBoxError,
    GeometryError,
    NonFiniteLossError,
    NonPositiveDepthError,
    PointAtInfinityError,
    RejectionExhaustedError,
    ValidationError,
)
from .experiments import (
    DEFAULT_CAMERA,
    ExperimentConfig,
    LiftingBench,
    PairSet,
    bin_errors,
    center_poses,
    eccentricity,
    experiment_capacity,
    experiment_cube_generalization,
    experiment_focal_sweep,
    experiment_head_to_head,
    experiment_rotation_ablation,
    fit_slope,
    mpjpe_per_sample,
    pck_percent,
    perspective_pairs,
    root_center_pairs,
    rotate_poses,
)
from .image import crop_image, sample_bilinear, sample_bilinear_with_grad, uncrop_image, warp_image
from .jacobians import (
    crop_image_with_jacobian,
    gradcheck_report,
    rotation_jacobian,
    virtual_focal_jacobian,
    warp_points_jacobian,
    warp_with_jacobian,
)
from .mlp import LiftingModel, MlpRegressor, TrainHistory, fit_lifting, param_count
from .synth import SceneSet, render_cube, sample_cubes, sample_figures
from .warp import (
    FOCAL_OPTIONS,
    ROTATION_MODES,
    AffineCrop,
    PerspectiveCrop,
    bbox_scale,
    build_virtual_camera,
    measured_center_scale,
    partial_rotation,
    perspective_crop_keypoints,
    perspective_crop_sequence,
    root_center_crop,
    rotation_from_target,
    target_from_rotation,
    to_real_frame,
    to_real_frame_partial,
    virtual_focal,
    warp_matrix,
    warp_points,
)

try:
    from importlib.metadata import version as _version

    __version__ = _version("perspective-crop")
except Exception:
    __version__ = "unknown"

__all__ = [
    "CameraIntrinsics",
    "backproject",
    "check_rotation",
    "dehomogenize",
    "homogenize",
    "is_rotation",
    "load_camera",
    "normalized_to_pixel",
    "pixel_to_normalized",
    "project",
    "save_camera",
    "DegenerateBoundingBoxError",
    "GeometryError",
    "NonFiniteLossError",
    "NonPositiveDepthError",
    "PointAtInfinityError",
    "RejectionExhaustedError",
    "ValidationError",
    "DEFAULT_CAMERA",
    "ExperimentConfig",
    "LiftingBench",
    "PairSet",
    "bin_errors",
    "center_poses",
    "eccentricity",
    "experiment_capacity",
    "experiment_cube_generalization",
    "experiment_focal_sweep",
    "experiment_head_to_head",
    "experiment_rotation_ablation",
    "fit_slope",
    "mpjpe_per_sample",
    "pck_percent",
    "perspective_pairs",
    "root_center_pairs",
    "rotate_poses",
    "crop_image",
    "sample_bilinear",
    "sample_bilinear_with_grad",
    "uncrop_image",
    "warp_image",
    "crop_image_with_jacobian",
    "gradcheck_report",
    "rotation_jacobian",
    "virtual_focal_jacobian",
    "warp_points_jacobian",
    "warp_with_jacobian",
    "LiftingModel",
    "MlpRegressor",
    "TrainHistory",
    "fit_lifting",
    "param_count",
    "SceneSet",
    "render_cube",
    "sample_cubes",
    "sample_figures",
    "FOCAL_OPTIONS",
    "ROTATION_MODES",
    "AffineCrop",
    "PerspectiveCrop",
    "bbox_scale",
    "build_virtual_camera",
    "measured_center_scale",
    "partial_rotation",
    "perspective_crop_keypoints",
    "perspective_crop_sequence",
    "root_center_crop",
    "rotation_from_target",
    "target_from_rotation",
    "to_real_frame",
    "to_real_frame_partial",
    "virtual_focal",
    "warp_matrix",
    "warp_points",
    "__version__",
]

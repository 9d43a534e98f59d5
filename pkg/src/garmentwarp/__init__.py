"""Garment warping by non-rigid point-set registration and moving-least-squares
image deformation."""

from . import _backend
from .contours import (
    Contour,
    CurvatureProfile,
    SamplingParams,
    curvature_profile,
    keypoints_from_mask,
    largest_contour,
    sample_keypoints,
    trace_contours,
)
from .errors import GarmentWarpError
from .metrics import landmark_rmse, mask_iou, ssim, ssim_region
from .mls import (
    ControlPairs,
    WarpGrid,
    WarpParams,
    build_warp_grid,
    mls_similarity,
    mls_similarity_point,
    warp_image,
    warp_mask,
)
from .pipeline import PipelineOptions, TryOnInputs, TryOnOutput, composite, run_tryon, warp_garment
from .registration import (
    NonRigidTransform,
    RegistrationConfig,
    RegistrationDiagnostics,
    apply_transform,
    register,
)

__version__ = "0.1.0"

__all__ = [
    "Contour", "CurvatureProfile", "SamplingParams", "curvature_profile", "keypoints_from_mask",
    "largest_contour", "sample_keypoints", "trace_contours",
    "GarmentWarpError",
    "landmark_rmse", "mask_iou", "ssim", "ssim_region",
    "ControlPairs", "WarpGrid", "WarpParams", "build_warp_grid", "mls_similarity", "mls_similarity_point",
    "warp_image", "warp_mask",
    "PipelineOptions", "TryOnInputs", "TryOnOutput", "composite", "run_tryon", "warp_garment",
    "NonRigidTransform", "RegistrationConfig", "RegistrationDiagnostics", "apply_transform", "register",
    "backend",
]

backend = _backend.name

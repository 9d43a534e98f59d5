"""Garment deformation pipeline and deterministic compositing.

garment mask -> keypoints X, target region -> keypoints Y, register X onto Y,
MLS-warp the garment with control pairs (X, f(X)), paste the result into the
clothing-agnostic person image.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import _backend
from .contours import SamplingParams, keypoints_from_mask
from .errors import (
    DimensionMismatch,
    EmptyTargetRegion,
    GarmentWarpError,
    InvalidParams,
    MaskOutsideGarment,
)
from .metrics import mask_iou
from .mls import INVERSE, ControlPairs, WarpParams, build_warp_grid, warp_image, warp_mask
from .registration import RegistrationConfig, register


@dataclass(frozen=True)
class PipelineOptions:
    all_components: bool = False
    feather: bool = False
    skip_registration: bool = False


@dataclass(eq=False)
class TryOnInputs:
    garment: np.ndarray
    garment_mask: np.ndarray
    target_region: np.ndarray
    person_agnostic: np.ndarray = None
    sampling: SamplingParams = field(default_factory=SamplingParams)
    reg: RegistrationConfig = field(default_factory=RegistrationConfig)
    warp: WarpParams = field(default_factory=WarpParams)
    options: PipelineOptions = field(default_factory=PipelineOptions)


@dataclass(eq=False)
class TryOnOutput:
    warped_garment: np.ndarray
    warped_mask: np.ndarray
    composite: np.ndarray
    diagnostics: dict
    timings: dict


def _rgba(name, img):
    a = np.asarray(img)
    if a.ndim != 3 or a.shape[2] != 4 or a.dtype != np.uint8:
        raise InvalidParams(f"{name} must be an (H, W, 4) uint8 RGBA image")
    return a


def _mask(name, m):
    a = np.asarray(m)
    if a.ndim != 2:
        raise InvalidParams(f"{name} must be an (H, W) mask")
    return (a != 0).astype(np.uint8)


def validate(inputs):
    """Check shapes and the garment-mask/garment-opacity relation; returns the
    normalised ``(garment, garment_mask, target_region, person)`` arrays.
    ``person`` may be None (warping alone does not need it)."""
    g = _rgba("garment", inputs.garment)
    gm = _mask("garment_mask", inputs.garment_mask)
    tr = _mask("target_region", inputs.target_region)
    shapes = {"garment": g.shape[:2], "garment_mask": gm.shape, "target_region": tr.shape}
    p = None
    if inputs.person_agnostic is not None:
        p = _rgba("person_agnostic", inputs.person_agnostic)
        shapes["person_agnostic"] = p.shape[:2]
    if len(set(shapes.values())) != 1:
        raise DimensionMismatch("inputs differ in resolution: " + ", ".join(f"{k}={v[0]}x{v[1]}" for k, v in shapes.items()))
    opaque = ndimage.binary_dilation(g[..., 3] > 0, structure=np.ones((3, 3), bool), iterations=2)
    if (gm.astype(bool) & ~opaque).any():
        raise MaskOutsideGarment("garment mask extends beyond the garment's opaque area")
    return g, gm, tr, p


def control_pairs(src, dst, tol=1e-6):
    """Drop pairs whose source or destination duplicates an earlier kept one
    (the inverse warp uses the destinations as controls)."""
    keep = []
    for pts in (src, dst):
        dup = set()
        for i, j in sorted(cKDTree(pts).query_pairs(tol)):
            dup.add(max(i, j))
        keep.append(dup)
    mask = np.ones(len(src), dtype=bool)
    mask[list(keep[0] | keep[1])] = False
    return ControlPairs(src[mask], dst[mask])


class _Stages:
    def __init__(self):
        self.timings = {}

    def run(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except GarmentWarpError as exc:
            if exc.stage is None:
                exc.stage = name
                exc.args = (f"[{name}] {exc}",)
            raise
        finally:
            self.timings[name] = time.perf_counter() - t0


def _target_keypoints(target, sampling, all_components):
    if not target.any():
        raise EmptyTargetRegion("target region mask is empty")
    return keypoints_from_mask(target, sampling, all_components)


def _warp_garment(inputs, stages):
    g, gm, tr, _ = stages.run("validate", validate, inputs)
    opts = inputs.options
    X = stages.run("sample_garment", keypoints_from_mask, gm, inputs.sampling, opts.all_components)
    Y = stages.run("sample_target", _target_keypoints, tr, inputs.sampling, opts.all_components)
    diag = {"n_source_points": int(len(X)), "n_target_points": int(len(Y)), "backend": _backend.name()}
    if opts.skip_registration:
        FX = X.copy()
        diag["registration"] = None
    else:
        transform, reg_diag = stages.run("register", register, X, Y, inputs.reg)
        FX = transform(X)
        diag["registration"] = reg_diag.to_dict()
    pairs = stages.run("control_pairs", control_pairs, X, FX)
    h, w = gm.shape
    grid = stages.run("warp_grid", build_warp_grid, w, h, pairs, inputs.warp, INVERSE)
    warped = stages.run("warp_image", warp_image, g, grid)
    wmask = stages.run("warp_mask", warp_mask, gm, grid)
    diag["n_control_pairs"] = len(pairs)
    diag["target_iou"] = mask_iou(wmask, tr)
    return warped, wmask, diag, grid


def warp_garment(inputs):
    """Returns ``(warped_garment, warped_mask, diagnostics)``; per-stage
    timings are under ``diagnostics["timings"]``."""
    stages = _Stages()
    warped, wmask, diag, _ = _warp_garment(inputs, stages)
    diag["timings"] = dict(stages.timings)
    return warped, wmask, diag


def composite(person_agnostic, warped_garment, warped_mask, target_region, feather=False):
    """Paste the warped garment where ``warped_mask & target_region`` holds.

    Hard paste: inside the region the RGB equals the warped garment, outside
    it equals the person image; alpha is always 255. ``feather`` averages the
    region's one-pixel inner rim with the person image.
    """
    p = _rgba("person_agnostic", person_agnostic)
    g = _rgba("warped_garment", warped_garment)
    wm = _mask("warped_mask", warped_mask)
    tr = _mask("target_region", target_region)
    if not (p.shape == g.shape and wm.shape == tr.shape == p.shape[:2]):
        raise DimensionMismatch("composite inputs differ in resolution")
    paste = (wm & tr).astype(bool)
    out = p.copy()
    out[paste, :3] = g[paste, :3]
    if feather:
        rim = paste & ~ndimage.binary_erosion(paste, border_value=1)
        blend = (p[rim, :3].astype(np.uint16) + g[rim, :3].astype(np.uint16) + 1) // 2
        out[rim, :3] = blend.astype(np.uint8)
    out[..., 3] = 255
    return out


def run_tryon(inputs):
    if inputs.person_agnostic is None:
        raise InvalidParams("run_tryon needs person_agnostic")
    stages = _Stages()
    warped, wmask, diag, _ = _warp_garment(inputs, stages)
    comp = stages.run(
        "composite", composite, inputs.person_agnostic, warped, wmask, inputs.target_region, inputs.options.feather
    )
    return TryOnOutput(warped, wmask, comp, diag, dict(stages.timings))

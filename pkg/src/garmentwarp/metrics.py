"""Desk-scale evaluation metrics: SSIM, mask IoU, landmark RMSE, PSNR."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import DimensionMismatch, InvalidParams, LengthMismatch


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise InvalidParams("window must be a positive odd integer")
        if not (self.k1 > 0 and self.k2 > 0):
            raise InvalidParams("k1 and k2 must be > 0")

    def kernel(self):
        r = np.arange(self.window) - self.window // 2
        g = np.exp(-(r * r) / (2.0 * self.sigma**2))
        k = np.outer(g, g)
        return k / k.sum()


def luma(img):
    """Rec. 601 luma of an (H, W, 3|4) image, or the image itself if 2-D."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 2:
        return a
    return 0.299 * a[..., 0] + 0.587 * a[..., 1] + 0.114 * a[..., 2]


def _same_shape(a, b):
    if np.shape(a)[:2] != np.shape(b)[:2]:
        raise DimensionMismatch(f"shapes differ: {np.shape(a)} vs {np.shape(b)}")


def ssim_map(a, b, params=None):
    """Local SSIM over every fully-contained window (``valid`` region)."""
    params = params or SsimParams()
    _same_shape(a, b)
    x, y = luma(a), luma(b)
    if min(x.shape) < params.window:
        raise InvalidParams(f"images must be at least {params.window} px on each side")
    k = params.kernel()

    def filt(z):
        return convolve2d(z, k, mode="valid")

    c1 = (params.k1 * params.dynamic_range) ** 2
    c2 = (params.k2 * params.dynamic_range) ** 2
    mx, my = filt(x), filt(y)
    vx = filt(x * x) - mx * mx
    vy = filt(y * y) - my * my
    cov = filt(x * y) - mx * my
    return ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))


def ssim(a, b, params=None):
    return float(ssim_map(a, b, params).mean())


def ssim_region(a, b, mask, params=None):
    """Mean local SSIM over windows centred inside ``mask``; NaN if none."""
    params = params or SsimParams()
    _same_shape(a, mask)
    smap = ssim_map(a, b, params)
    h = params.window // 2
    m = np.asarray(mask).astype(bool)[h : h + smap.shape[0], h : h + smap.shape[1]]
    return float(smap[m].mean()) if m.any() else float("nan")


def mask_iou(a, b):
    _same_shape(a, b)
    a = np.asarray(a).astype(bool)
    b = np.asarray(b).astype(bool)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def landmark_rmse(a, b):
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} vs {len(b)} points")
    if len(a) == 0:
        raise LengthMismatch("empty point sets")
    d = a - b
    return math.sqrt(float((d * d).sum(axis=1).mean()))


def psnr(a, b, mask=None, peak=255.0):
    """PSNR over the RGB channels, optionally restricted to ``mask``."""
    _same_shape(a, b)
    x = np.asarray(a, dtype=np.float64)[..., :3]
    y = np.asarray(b, dtype=np.float64)[..., :3]
    if mask is not None:
        m = np.asarray(mask).astype(bool)
        x, y = x[m], y[m]
    mse = float(((x - y) ** 2).mean())
    if mse == 0:
        return float("inf")
    return 10.0 * math.log10(peak * peak / mse)

"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable; both backends
share one contract and agree to rounding (see tests/test_backends.py).
"""

import numpy as np

NAME = "python"

_CHUNK = 2048


def mls_similarity(queries, controls, targets, alpha, eps):
    """Similarity MLS deformation of every query point.

    ``queries`` (Q, 2), ``controls``/``targets`` (N, 2). A query within
    ``eps`` of a control returns that control's target (first match).
    """
    q_all = np.ascontiguousarray(queries, dtype=np.float64)
    d = np.ascontiguousarray(controls, dtype=np.float64)
    b = np.ascontiguousarray(targets, dtype=np.float64)
    out = np.empty_like(q_all)
    eps2 = eps * eps
    for start in range(0, len(q_all), _CHUNK):
        v = q_all[start : start + _CHUNK]
        diff = d[None, :, :] - v[:, None, :]
        d2 = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1]
        hit = d2 < eps2
        with np.errstate(divide="ignore"):
            w = 1.0 / d2 if alpha == 1.0 else d2 ** (-alpha)
        w[hit.any(axis=1)] = 1.0  # placeholder rows, overwritten below
        wsum = w.sum(axis=1)
        pstar = (w[..., None] * d[None]).sum(axis=1) / wsum[:, None]
        qstar = (w[..., None] * b[None]).sum(axis=1) / wsum[:, None]
        ph = d[None] - pstar[:, None, :]
        qh = b[None] - qstar[:, None, :]
        mu = (w * (ph[..., 0] * ph[..., 0] + ph[..., 1] * ph[..., 1])).sum(axis=1)
        re = (w * (qh[..., 0] * ph[..., 0] + qh[..., 1] * ph[..., 1])).sum(axis=1) / mu
        im = (w * (qh[..., 1] * ph[..., 0] - qh[..., 0] * ph[..., 1])).sum(axis=1) / mu
        ux = v[:, 0] - pstar[:, 0]
        uy = v[:, 1] - pstar[:, 1]
        res = np.column_stack((re * ux - im * uy + qstar[:, 0], re * uy + im * ux + qstar[:, 1]))
        rows = np.flatnonzero(hit.any(axis=1))
        if len(rows):
            res[rows] = b[hit[rows].argmax(axis=1)]
        out[start : start + len(v)] = res
    return out


def _in_bounds(mapx, mapy, w, h, tol):
    return (mapx >= -tol) & (mapx <= w - 1 + tol) & (mapy >= -tol) & (mapy <= h - 1 + tol)


def remap_bilinear(src, mapx, mapy, tol):
    """Bilinear sampling of a (H, W, C) uint8 image at float coordinates.
    Samples outside the image (beyond ``tol``) are all-zero."""
    src = np.ascontiguousarray(src, dtype=np.uint8)
    h, w, _ = src.shape
    ok = _in_bounds(mapx, mapy, w, h, tol)
    sx = np.clip(mapx, 0.0, w - 1.0)
    sy = np.clip(mapy, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    s = src.astype(np.float64)
    val = (
        (1.0 - fx) * (1.0 - fy) * s[y0, x0]
        + fx * (1.0 - fy) * s[y0, x1]
        + (1.0 - fx) * fy * s[y1, x0]
        + fx * fy * s[y1, x1]
    )
    out = np.clip(np.floor(val + 0.5), 0, 255).astype(np.uint8)
    out[~ok] = 0
    return out


def remap_nearest(src, mapx, mapy):
    """Nearest-neighbour sampling of a (H, W) uint8 raster; outside -> 0."""
    src = np.ascontiguousarray(src, dtype=np.uint8)
    h, w = src.shape
    xi = np.floor(mapx + 0.5)
    yi = np.floor(mapy + 0.5)
    ok = (xi >= 0) & (xi <= w - 1) & (yi >= 0) & (yi <= h - 1)
    out = np.zeros(mapx.shape, dtype=np.uint8)
    out[ok] = src[yi[ok].astype(np.intp), xi[ok].astype(np.intp)]
    return out

"""Moving-least-squares image deformation with similarity transforms.

For a query point ``v`` and control/goal pairs ``(d_i, b_i)`` the weights are
``w_i = 1 / |d_i - v|^(2 alpha)`` and ``f(v)`` is the weighted-least-squares
best similarity transform mapping the ``d_i`` onto the ``b_i``, evaluated at
``v``. Dense warps evaluate ``f`` on a coarse grid and interpolate per pixel;
the per-point and per-pixel loops live in the backend kernels.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import _backend
from .errors import DegenerateControls, GridMismatch, InvalidParams

FORWARD = "forward"
INVERSE = "inverse"
_OOB_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class ControlPairs:
    controls: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(self.controls, dtype=np.float64)
        b = np.ascontiguousarray(self.targets, dtype=np.float64)
        if d.ndim != 2 or d.shape[1] != 2 or d.shape != b.shape:
            raise InvalidParams("controls and targets must be (N, 2) arrays of equal length")
        if len(d) < 3:
            raise InvalidParams("need at least 3 control pairs")
        if not (np.isfinite(d).all() and np.isfinite(b).all()):
            raise InvalidParams("control pairs must be finite")
        if cKDTree(d).query_pairs(1e-6):
            raise InvalidParams("controls contain duplicate points")
        object.__setattr__(self, "controls", d)
        object.__setattr__(self, "targets", b)

    def __len__(self):
        return len(self.controls)

    def swapped(self):
        return ControlPairs(self.targets, self.controls)


@dataclass(frozen=True)
class WarpParams:
    alpha: float = 1.0
    grid_spacing: float = 4.0
    coincidence_eps: float = 1e-6

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise InvalidParams("alpha must lie in (0, 1]")
        if not self.grid_spacing >= 1:
            raise InvalidParams("grid_spacing must be >= 1")
        if not self.coincidence_eps > 0:
            raise InvalidParams("coincidence_eps must be > 0")


@dataclass(frozen=True, eq=False)
class WarpGrid:
    """Deformed grid-node positions. ``vertices[r, c]`` is where node
    ``(xs[c], ys[r])`` goes; for ``direction == "inverse"`` that is the source
    location to sample for the output pixel at the node."""

    width: int
    height: int
    spacing: float
    vertices: np.ndarray
    direction: str = INVERSE

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        xs, ys = grid_nodes(self.width, self.height, self.spacing)
        if v.shape != (len(ys), len(xs), 2):
            raise InvalidParams(f"vertices shape {v.shape} does not match the grid ({len(ys)}, {len(xs)}, 2)")
        if not np.isfinite(v).all():
            raise InvalidParams("grid vertices must be finite")
        if self.direction not in (FORWARD, INVERSE):
            raise InvalidParams(f"direction must be {FORWARD!r} or {INVERSE!r}")
        object.__setattr__(self, "vertices", v)

    @property
    def xs(self):
        return grid_nodes(self.width, self.height, self.spacing)[0]

    @property
    def ys(self):
        return grid_nodes(self.width, self.height, self.spacing)[1]

    def to_dict(self):
        return {
            "width": self.width,
            "height": self.height,
            "spacing": self.spacing,
            "direction": self.direction,
            "vertices": self.vertices.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["width"]), int(d["height"]), float(d["spacing"]),
                   np.array(d["vertices"], dtype=np.float64), d["direction"])


def grid_nodes(width, height, spacing):
    """Node coordinates along x and y; both borders (0 and width/height) are
    always included."""
    if width < 1 or height < 1:
        raise InvalidParams("image dimensions must be >= 1")

    def axis(n):
        nodes = np.arange(0.0, n, spacing)
        return np.append(nodes, float(n)) if nodes[-1] < n else nodes

    return axis(width), axis(height)


def check_controls(controls):
    c = controls - controls.mean(axis=0)
    s = np.linalg.svd(c, compute_uv=False)
    if s[-1] <= 1e-9 * max(1.0, s[0]):
        raise DegenerateControls("control points are collinear")


def mls_similarity(points, pairs, alpha=1.0, eps=1e-6):
    """Deform an (N, 2) array of points."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    check_controls(pairs.controls)
    return _backend.active().mls_similarity(pts, pairs.controls, pairs.targets, float(alpha), float(eps))


def mls_similarity_point(v, pairs, alpha=1.0, eps=1e-6):
    return mls_similarity(np.asarray(v, dtype=np.float64)[None, :], pairs, alpha, eps)[0]


def build_warp_grid(width, height, pairs, params=None, direction=INVERSE):
    """Evaluate the MLS map on the grid nodes. ``direction="inverse"`` swaps
    controls and targets first, giving the backward-sampling map."""
    params = params or WarpParams()
    if direction not in (FORWARD, INVERSE):
        raise InvalidParams(f"direction must be {FORWARD!r} or {INVERSE!r}")
    use = pairs.swapped() if direction == INVERSE else pairs
    xs, ys = grid_nodes(width, height, params.grid_spacing)
    gx, gy = np.meshgrid(xs, ys)
    nodes = np.column_stack((gx.ravel(), gy.ravel()))
    verts = mls_similarity(nodes, use, params.alpha, params.coincidence_eps)
    return WarpGrid(int(width), int(height), float(params.grid_spacing),
                    verts.reshape(len(ys), len(xs), 2), direction)


def identity_grid(width, height, spacing=4.0, direction=INVERSE):
    xs, ys = grid_nodes(width, height, spacing)
    gx, gy = np.meshgrid(xs, ys)
    return WarpGrid(int(width), int(height), float(spacing), np.stack((gx, gy), axis=-1), direction)


def _axis_weights(nodes, n):
    p = np.arange(n, dtype=np.float64)
    i = np.clip(np.searchsorted(nodes, p, side="right") - 1, 0, len(nodes) - 2)
    t = (p - nodes[i]) / (nodes[i + 1] - nodes[i])
    return i, t


def grid_to_map(grid):
    """Per-pixel sampling coordinates ``(mapx, mapy)``, each (H, W): the
    grid displacement bilinearly interpolated and added to the pixel
    position."""
    xs, ys = grid.xs, grid.ys
    gx, gy = np.meshgrid(xs, ys)
    disp = grid.vertices - np.stack((gx, gy), axis=-1)
    ci, tx = _axis_weights(xs, grid.width)
    ri, ty = _axis_weights(ys, grid.height)
    tx = tx[None, :, None]
    ty = ty[:, None, None]
    d00 = disp[ri][:, ci]
    d01 = disp[ri][:, ci + 1]
    d10 = disp[ri + 1][:, ci]
    d11 = disp[ri + 1][:, ci + 1]
    top = d00 + tx * (d01 - d00)
    bottom = d10 + tx * (d11 - d10)
    d = top + ty * (bottom - top)
    px = np.arange(grid.width, dtype=np.float64)[None, :]
    py = np.arange(grid.height, dtype=np.float64)[:, None]
    return px + d[..., 0], py + d[..., 1]


def _check_grid(shape, grid):
    if grid.direction != INVERSE:
        raise InvalidParams("image warping needs an inverse (backward-sampling) grid")
    if (grid.height, grid.width) != tuple(shape[:2]):
        raise GridMismatch(f"grid is {grid.height}x{grid.width}, image is {shape[0]}x{shape[1]}")


def warp_image(src, grid):
    """Backward-warp an (H, W, C) uint8 image. Pixels whose source lies
    outside the image come out all-zero (transparent for RGBA)."""
    src = np.asarray(src)
    if src.ndim != 3 or src.dtype != np.uint8:
        raise InvalidParams("warp_image expects an (H, W, C) uint8 image")
    _check_grid(src.shape, grid)
    mapx, mapy = grid_to_map(grid)
    return _backend.active().remap_bilinear(src, mapx, mapy, _OOB_TOL)


def warp_mask(src, grid):
    """Nearest-neighbour backward warp of a binary mask."""
    src = np.asarray(src)
    if src.ndim != 2:
        raise InvalidParams("warp_mask expects an (H, W) mask")
    _check_grid(src.shape, grid)
    mapx, mapy = grid_to_map(grid)
    out = _backend.active().remap_nearest((src != 0).astype(np.uint8), mapx, mapy)
    return out


def jacobian_determinants(grid):
    """Finite-difference Jacobian determinant of the grid map, one per cell."""
    v = grid.vertices
    dx = np.diff(grid.xs)[None, :, None]
    dy = np.diff(grid.ys)[:, None, None]
    du = 0.5 * ((v[:-1, 1:] - v[:-1, :-1]) + (v[1:, 1:] - v[1:, :-1])) / dx
    dv = 0.5 * ((v[1:, :-1] - v[:-1, :-1]) + (v[1:, 1:] - v[:-1, 1:])) / dy
    return du[..., 0] * dv[..., 1] - du[..., 1] * dv[..., 0]

import math

import numpy as np
import pytest

from garmentwarp import fixtures as fx
from garmentwarp.errors import DegenerateControls, GridMismatch, InvalidParams
from garmentwarp.mls import (
    FORWARD,
    INVERSE,
    ControlPairs,
    WarpGrid,
    WarpParams,
    build_warp_grid,
    grid_nodes,
    grid_to_map,
    identity_grid,
    jacobian_determinants,
    mls_similarity,
    mls_similarity_point,
    warp_image,
    warp_mask,
)
from garmentwarp.registration import RegistrationConfig, register

ROT90 = np.array([[0.0, -1.0], [1.0, 0.0]])


def _card(n=64, seed=3):
    """Smooth opaque RGBA test card."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:n, 0:n].astype(float)
    img = np.empty((n, n, 4), dtype=np.uint8)
    for ch in range(3):
        f = rng.uniform(0.05, 0.2, size=2)
        img[..., ch] = np.rint(128 + 100 * np.sin(f[0] * xx + f[1] * yy + ch)).astype(np.uint8)
    img[..., 3] = 255
    return img


def test_identity_controls(backend, rng):
    d = rng.uniform(0, 100, size=(10, 2))
    v = rng.uniform(-50, 150, size=(200, 2))
    assert np.abs(mls_similarity(v, ControlPairs(d, d.copy())) - v).max() <= 1e-9


def test_rotation_reproduced(backend, rng):
    d = np.array([[0.0, 0.0], [10.0, 0.0], [3.0, 7.0]])
    pairs = ControlPairs(d, d @ ROT90.T)
    v = rng.uniform(-30, 30, size=(100, 2))
    assert np.abs(mls_similarity(v, pairs) - np.column_stack((-v[:, 1], v[:, 0]))).max() <= 1e-9


def test_exact_interpolation_at_control(backend, rng):
    d = rng.uniform(0, 50, size=(6, 2))
    b = rng.uniform(0, 50, size=(6, 2))
    pairs = ControlPairs(d, b)
    assert np.array_equal(mls_similarity_point(d[2], pairs), b[2])


def test_continuous_near_control(backend, rng):
    d = rng.uniform(0, 50, size=(6, 2))
    b = d + rng.normal(scale=3, size=(6, 2))
    pairs = ControlPairs(d, b)
    angles = np.linspace(0, 2 * math.pi, 16, endpoint=False)
    v = d[1] + 1e-3 * np.column_stack((np.cos(angles), np.sin(angles)))
    assert np.linalg.norm(mls_similarity(v, pairs) - b[1], axis=1).max() <= 1e-2


def test_alpha_below_one(backend, rng):
    d = rng.uniform(0, 50, size=(8, 2))
    s, t = 1.3, np.array([4.0, -2.0])
    pairs = ControlPairs(d, s * d @ ROT90.T + t)
    v = rng.uniform(0, 50, size=(50, 2))
    out = mls_similarity(v, pairs, alpha=0.5)
    assert np.abs(out - (s * v @ ROT90.T + t)).max() <= 1e-9


def test_collinear_controls():
    d = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [5.0, 5.0]])
    with pytest.raises(DegenerateControls):
        mls_similarity(np.zeros((1, 2)), ControlPairs(d, d + 1))


def test_control_pair_validation():
    d = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(InvalidParams):
        ControlPairs(d[:2], d[:2])
    with pytest.raises(InvalidParams):
        ControlPairs(d, d[:2])
    with pytest.raises(InvalidParams):
        ControlPairs(np.vstack((d, d[:1] + 1e-8)), np.vstack((d, d[:1])))
    with pytest.raises(InvalidParams):
        ControlPairs(d, d * np.nan)


@pytest.mark.parametrize("kw", [dict(alpha=0), dict(alpha=1.5), dict(grid_spacing=0.5), dict(coincidence_eps=0)])
def test_warp_params_validation(kw):
    with pytest.raises(InvalidParams):
        WarpParams(**kw)


# --- grids -----------------------------------------------------------------


def test_grid_nodes_include_borders():
    xs, ys = grid_nodes(10, 7, 4)
    assert list(xs) == [0, 4, 8, 10] and list(ys) == [0, 4, 7]
    xs, ys = grid_nodes(8, 8, 4)
    assert list(xs) == [0, 4, 8]


def test_identity_pairs_grid(backend):
    d = np.array([[3.0, 3.0], [40.0, 5.0], [20.0, 30.0], [5.0, 28.0]])
    g = build_warp_grid(48, 32, ControlPairs(d, d.copy()))
    gx, gy = np.meshgrid(g.xs, g.ys)
    assert np.abs(g.vertices - np.stack((gx, gy), -1)).max() <= 1e-9


def test_translation_grid(backend):
    d = np.array([[3.0, 3.0], [40.0, 5.0], [20.0, 30.0], [5.0, 28.0]])
    g = build_warp_grid(48, 32, ControlPairs(d, d + [5.0, 0.0]), direction=FORWARD)
    gx, gy = np.meshgrid(g.xs, g.ys)
    assert np.abs(g.vertices - np.stack((gx + 5.0, gy), -1)).max() <= 1e-9


def test_coarse_grid_is_four_corners():
    d = np.array([[3.0, 3.0], [40.0, 5.0], [20.0, 30.0]])
    g = build_warp_grid(48, 32, ControlPairs(d, d + 1), WarpParams(grid_spacing=100))
    assert g.vertices.shape == (2, 2, 2)


def test_inverse_is_swapped_forward(backend, rng):
    d = rng.uniform(0, 60, size=(8, 2))
    pairs = ControlPairs(d, d + rng.normal(scale=2, size=d.shape))
    inv = build_warp_grid(64, 64, pairs, direction=INVERSE)
    fwd = build_warp_grid(64, 64, pairs.swapped(), direction=FORWARD)
    assert np.array_equal(inv.vertices, fwd.vertices)


def test_grid_json_round_trip(rng):
    d = rng.uniform(0, 60, size=(8, 2))
    g = build_warp_grid(64, 50, ControlPairs(d, d + 1.5))
    g2 = WarpGrid.from_dict(g.to_dict())
    assert np.array_equal(g.vertices, g2.vertices) and g2.direction == INVERSE and g2.spacing == g.spacing


def test_grid_validation():
    with pytest.raises(InvalidParams):
        WarpGrid(10, 10, 4.0, np.zeros((2, 2, 2)))
    with pytest.raises(InvalidParams):
        WarpGrid(8, 8, 4.0, np.zeros((3, 3, 2)), direction="sideways")


def test_grid_to_map_identity_exact():
    mx, my = grid_to_map(identity_grid(37, 23, 4.0))
    assert np.array_equal(mx, np.broadcast_to(np.arange(37.0), (23, 37)))
    assert np.array_equal(my, np.broadcast_to(np.arange(23.0)[:, None], (23, 37)))


# --- image / mask warping --------------------------------------------------


def test_identity_grid_round_trip(backend):
    img = _card()
    assert np.array_equal(warp_image(img, identity_grid(64, 64)), img)


def test_integer_translation(backend):
    img = _card()
    d = np.array([[3.0, 3.0], [60.0, 5.0], [20.0, 60.0], [50.0, 50.0]])
    # inverse map v -> v - (5, 0): output is src shifted right by 5
    g = build_warp_grid(64, 64, ControlPairs(d, d + [5.0, 0.0]))
    out = warp_image(img, g)
    assert np.array_equal(out[:, 5:], img[:, :-5])
    assert not out[:, :5].any()


def test_rotation_against_direct_oracle(backend):
    n = 64
    img = _card(n)
    c = np.array([(n - 1) / 2, (n - 1) / 2])
    d = np.array([[5.0, 5.0], [58.0, 9.0], [30.0, 55.0], [12.0, 40.0], [50.0, 33.0]])
    pairs = ControlPairs(d, (d - c) @ ROT90.T + c)
    out = warp_image(img, build_warp_grid(n, n, pairs))
    # oracle: out(q) = src(R^T (q - c) + c), an integer pixel for a quarter turn
    oracle = np.zeros_like(img)
    for y in range(n):
        for x in range(n):
            sx, sy = ROT90.T @ (np.array([x, y]) - c) + c
            oracle[y, x] = img[int(round(sy)), int(round(sx))]
    diff = np.abs(out.astype(int) - oracle.astype(int))[2:-2, 2:-2]
    assert diff.max() <= 2


def test_out_of_bounds_is_transparent(backend):
    img = _card()
    d = np.array([[3.0, 3.0], [60.0, 5.0], [20.0, 60.0]])
    out = warp_image(img, build_warp_grid(64, 64, ControlPairs(d, d + [0.0, 100.0])))
    assert not out.any()


def test_mask_warps(backend):
    m = np.zeros((40, 40), dtype=np.uint8)
    m[10:30, 8:20] = 1
    assert np.array_equal(warp_mask(m, identity_grid(40, 40)), m)
    d = np.array([[3.0, 3.0], [35.0, 5.0], [20.0, 35.0]])
    g = build_warp_grid(40, 40, ControlPairs(d, d + [0.0, 3.0]))
    shifted = np.zeros_like(m)
    shifted[13:33, 8:20] = 1
    assert np.array_equal(warp_mask(m, g), shifted)
    assert not warp_mask(np.zeros_like(m), g).any()


def test_warp_errors():
    img = _card(32)
    with pytest.raises(GridMismatch):
        warp_image(img, identity_grid(31, 32))
    with pytest.raises(GridMismatch):
        warp_mask(img[..., 0], identity_grid(32, 31))
    with pytest.raises(InvalidParams):
        warp_image(img, identity_grid(32, 32, direction=FORWARD))
    with pytest.raises(InvalidParams):
        warp_image(img.astype(float), identity_grid(32, 32))


def test_warp_deterministic(backend, rng):
    img = _card()
    d = rng.uniform(0, 63, size=(10, 2))
    pairs = ControlPairs(d, d + rng.normal(scale=3, size=d.shape))
    a = warp_image(img, build_warp_grid(64, 64, pairs))
    b = warp_image(img, build_warp_grid(64, 64, pairs))
    assert a.tobytes() == b.tobytes()


def test_bend_fixture_jacobian_positive():
    X, _, Y = fx.bend_case(200, 0.2)
    t, _ = register(X, Y, RegistrationConfig(gamma=0.2))
    grid = build_warp_grid(fx.WIDTH, fx.HEIGHT, ControlPairs(X, t(X)))
    assert (jacobian_determinants(grid) > 0).mean() >= 0.99


def test_jacobian_of_similarity_grid(rng):
    d = rng.uniform(0, 60, size=(6, 2))
    g = build_warp_grid(64, 64, ControlPairs(d, 2.0 * d @ ROT90.T), direction=FORWARD)
    assert np.allclose(jacobian_determinants(g), 4.0)

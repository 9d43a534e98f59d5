"""Deterministic synthetic fixtures shared by tests, the CLI and benchmarks."""

import math
import os

import numpy as np

from . import io

DEFAULT_SEED = 42
HEIGHT, WIDTH = 256, 192


# --- point sets ---------------------------------------------------------

def square_points(n=64, side=100.0, origin=(50.0, 50.0)):
    """``n`` points evenly spaced along a square's perimeter, counter-clockwise
    in (x, y), starting at the origin corner."""
    s = np.arange(n) * (4.0 * side / n)
    edge = np.minimum((s // side).astype(int), 3)
    t = s - edge * side
    x = np.choose(edge, [t, np.full(n, side), side - t, np.zeros(n)])
    y = np.choose(edge, [np.zeros(n), t, np.full(n, side), side - t])
    return np.column_stack((x, y)) + np.asarray(origin, dtype=np.float64)


def circle_points(n=360, circumference=400.0, center=(100.0, 100.0)):
    """Vertices of a regular ``n``-gon whose perimeter equals ``circumference``."""
    r = circumference / (2.0 * n * math.sin(math.pi / n))
    theta = 2.0 * math.pi * np.arange(n) / n
    return np.column_stack((center[0] + r * np.cos(theta), center[1] + r * np.sin(theta)))


def bend(points, amplitude=0.15):
    """Vertical sinusoidal bend ``y + amplitude*w*sin(pi*(x - x0)/w)`` over the
    set's own width ``w``."""
    p = np.asarray(points, dtype=np.float64)
    x0 = p[:, 0].min()
    w = p[:, 0].max() - x0
    return np.column_stack((p[:, 0], p[:, 1] + amplitude * w * np.sin(math.pi * (p[:, 0] - x0) / w)))


def uniform_outliers(points, fraction, rng):
    """``round(fraction*len(points))`` points uniform over the bounding box."""
    p = np.asarray(points, dtype=np.float64)
    k = int(round(fraction * len(p)))
    lo, hi = p.min(axis=0), p.max(axis=0)
    return lo + rng.random((k, 2)) * (hi - lo)


def occlude_arc(points, fraction, start=0):
    """Drop a contiguous run of ``fraction`` of an ordered contour sample."""
    p = np.asarray(points, dtype=np.float64)
    k = int(round(fraction * len(p)))
    keep = np.ones(len(p), dtype=bool)
    keep[(start + np.arange(k)) % len(p)] = False
    return p[keep]


def scaled_square_case(n=64, scale=1.5):
    X = square_points(n)
    return X, scale * X


def bend_case(n=200, outlier_fraction=0.2, seed=DEFAULT_SEED):
    """Returns ``(X, Y_inliers, Y_with_outliers)``; Y_inliers[i] is the true
    partner of X[i]."""
    rng = np.random.default_rng(seed)
    X = square_points(n)
    Yi = bend(X)
    Y = np.concatenate((Yi, uniform_outliers(Yi, outlier_fraction, rng)))
    return X, Yi, Y


# --- rasters --------------------------------------------------------------

def stripes_square(height=HEIGHT, width=WIDTH, top=70, left=46, side=100, n_stripes=5):
    """Garment card: an opaque white RGBA image with a square of horizontal
    dark/light stripes. Returns ``(rgba, mask)``; there are ``n_stripes``
    dark stripes."""
    rgba = np.full((height, width, 4), 255, dtype=np.uint8)
    mask = np.zeros((height, width), dtype=np.uint8)
    mask[top : top + side, left : left + side] = 1
    band = side / (2 * n_stripes)
    rows = np.arange(side)
    dark = (rows // band).astype(int) % 2 == 0
    light_rgb = np.array([235, 200, 60], dtype=np.uint8)
    dark_rgb = np.array([30, 40, 140], dtype=np.uint8)
    block = np.where(dark[:, None, None], dark_rgb, light_rgb)
    rgba[top : top + side, left : left + side, :3] = np.broadcast_to(block, (side, side, 3))
    return rgba, mask


def trapezoid_mask(height=HEIGHT, width=WIDTH, top=64, bottom=180, top_width=80, bottom_width=130, cx=96.0):
    """Pixel-centre rasterisation of an isosceles trapezoid."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    t = (yy - top) / (bottom - top)
    half = 0.5 * (top_width + t * (bottom_width - top_width))
    inside = (yy >= top) & (yy < bottom) & (np.abs(xx + 0.5 - cx) <= half)
    return inside.astype(np.uint8)


def person_card(height=HEIGHT, width=WIDTH):
    """Deterministic opaque "clothing-agnostic person" stand-in: a soft
    gradient background."""
    yy, xx = np.mgrid[0:height, 0:width]
    rgba = np.empty((height, width, 4), dtype=np.uint8)
    rgba[..., 0] = (120 + 60 * xx / width).astype(np.uint8)
    rgba[..., 1] = (150 + 50 * yy / height).astype(np.uint8)
    rgba[..., 2] = 170
    rgba[..., 3] = 255
    return rgba


def blank_region(image, mask, value=(128, 128, 128, 255)):
    out = image.copy()
    out[mask.astype(bool)] = value
    return out


def textured_garment(height=HEIGHT, width=WIDTH, seed=DEFAULT_SEED):
    """Smooth random texture inside an ellipse-ish blob; used for the identity
    fixture. Returns ``(rgba, mask)``."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    cy, cx = height / 2, width / 2
    mask = (((xx - cx) / 60.0) ** 2 + ((yy - cy) / 85.0) ** 2 <= 1.0).astype(np.uint8)
    rgba = np.full((height, width, 4), 255, dtype=np.uint8)
    freq = rng.uniform(0.02, 0.08, size=(3, 2))
    phase = rng.uniform(0, 2 * math.pi, size=3)
    for ch in range(3):
        v = 128 + 90 * np.sin(freq[ch, 0] * xx + freq[ch, 1] * yy + phase[ch])
        rgba[..., ch] = np.where(mask.astype(bool), np.clip(np.rint(v), 0, 255), 255).astype(np.uint8)
    return rgba, mask


# --- on-disk fixture set ---------------------------------------------------


def write_fixtures(out_dir, seed=DEFAULT_SEED):
    """Write every fixture into ``out_dir``; returns the list of written file
    names. Output is a pure function of ``seed``."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def emit(name, writer, obj):
        writer(os.path.join(out_dir, name), obj)
        written.append(name)

    sq = square_points(64)
    emit("square.csv", io.write_points_csv, sq)
    emit("square.json", io.write_json, {"kind": "square", "n": 64, "side": 100.0, "origin": [50.0, 50.0]})
    circ = circle_points(360, 400.0)
    emit("circle.csv", io.write_points_csv, circ)
    emit("circle.json", io.write_json, {"kind": "regular_polygon", "n": 360, "circumference": 400.0})

    X, Yi, Y = bend_case(200, 0.2, seed)
    emit("bend_x.csv", io.write_points_csv, X)
    emit("bend_y.csv", io.write_points_csv, Y)
    emit(
        "bend.json",
        io.write_json,
        {"kind": "bend", "seed": seed, "amplitude": 0.15, "n_inliers": len(Yi), "n_outliers": len(Y) - len(Yi),
         "inlier_rows": [0, len(Yi)]},
    )

    garment, gmask = stripes_square()
    target = trapezoid_mask()
    person = blank_region(person_card(), target)
    emit("striped_garment.png", io.write_rgba_png, garment)
    emit("striped_garment_mask.png", io.write_mask_png, gmask)
    emit("trapezoid_target.png", io.write_mask_png, target)
    emit("striped_person.png", io.write_rgba_png, person)
    emit(
        "striped.json",
        io.write_json,
        {"kind": "striped", "garment_mask_area": int(gmask.sum()), "target_area": int(target.sum()),
         "dark_stripes": 5, "height": HEIGHT, "width": WIDTH},
    )
    emit(
        "striped_manifest.json",
        io.write_json,
        {"garment": "striped_garment.png", "garment_mask": "striped_garment_mask.png",
         "target_region": "trapezoid_target.png", "person_agnostic": "striped_person.png"},
    )

    tex, tmask = textured_garment(seed=seed)
    dressed = person_card().copy()
    dressed[tmask.astype(bool)] = tex[tmask.astype(bool)]
    emit("identity_garment.png", io.write_rgba_png, tex)
    emit("identity_mask.png", io.write_mask_png, tmask)
    emit("identity_person.png", io.write_rgba_png, blank_region(dressed, tmask))
    emit("identity_dressed.png", io.write_rgba_png, dressed)
    emit("identity.json", io.write_json, {"kind": "identity", "seed": seed, "mask_area": int(tmask.sum())})
    emit(
        "identity_manifest.json",
        io.write_json,
        {"garment": "identity_garment.png", "garment_mask": "identity_mask.png",
         "target_region": "identity_mask.png", "person_agnostic": "identity_person.png"},
    )
    return written

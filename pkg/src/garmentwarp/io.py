"""File formats: PNG rasters, ``x,y`` point CSVs, JSON."""

import csv
import json
import math

import numpy as np
from PIL import Image

from .errors import MalformedCsv


def read_rgba_png(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("RGBA"), dtype=np.uint8).copy()


def write_rgba_png(path, rgba):
    Image.fromarray(np.ascontiguousarray(rgba, dtype=np.uint8), mode="RGBA").save(path, format="PNG")


def read_mask_png(path):
    """Single-channel mask; anything >= 128 is foreground."""
    with Image.open(path) as im:
        gray = np.asarray(im.convert("L"))
    return (gray >= 128).astype(np.uint8)


def write_mask_png(path, mask):
    data = np.where(np.asarray(mask).astype(bool), 255, 0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path, format="PNG")


def read_points_csv(path):
    """Read an ``x,y`` CSV. Raises :class:`MalformedCsv` naming the line."""
    pts = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "y"]:
            raise MalformedCsv(f"{path}: line 1: expected header 'x,y'")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise MalformedCsv(f"{path}: line {line}: expected 2 fields, got {len(row)}")
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                raise MalformedCsv(f"{path}: line {line}: non-numeric value") from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise MalformedCsv(f"{path}: line {line}: non-finite value")
            pts.append((x, y))
    if not pts:
        raise MalformedCsv(f"{path}: no points")
    return np.array(pts, dtype=np.float64)


def write_points_csv(path, points):
    with open(path, "w", newline="") as f:
        f.write("x,y\n")
        for x, y in np.asarray(points, dtype=np.float64):
            f.write(f"{x:.6f},{y:.6f}\n")


def write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path):
    with open(path) as f:
        return json.load(f)

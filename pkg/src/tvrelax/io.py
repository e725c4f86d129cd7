"""Reading and writing fields: 8-bit PGM, optional PNG, CSV grids, reports."""
from __future__ import annotations

import csv
import hashlib
import json
import os
import re

import numpy as np


class ImageFormatError(ValueError):
    """File content does not match the expected image format."""


_PGM_HEADER = re.compile(rb"\A(P[25])\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)"
                         rb"\s+(?:#[^\n]*\n\s*)*(\d+)\s")


def read_pgm(path):
    """Read a binary (P5) or ASCII (P2) 8-bit PGM; values scaled to [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    m = _PGM_HEADER.match(data)
    if m is None:
        raise ImageFormatError(f"{path}: not a PGM file")
    magic, width, height, maxval = m.group(1), int(m.group(2)), int(m.group(3)), int(m.group(4))
    if not 0 < maxval < 256:
        raise ImageFormatError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    body = data[m.end():]
    if magic == b"P5":
        if len(body) < width * height:
            raise ImageFormatError(f"{path}: truncated pixel data")
        pix = np.frombuffer(body[: width * height], dtype=np.uint8)
    else:
        body = re.sub(rb"#[^\n]*", b"", body)
        pix = np.array(body.split()[: width * height], dtype=np.int64)
        if pix.size < width * height:
            raise ImageFormatError(f"{path}: truncated pixel data")
    return pix.reshape(height, width).astype(float) / maxval


def to_uint8(u):
    """Quantize values in [0, 1] to 0..255 (rounded, clipped)."""
    return np.clip(np.rint(np.asarray(u, dtype=float) * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path, u):
    """Write a 2-d field with values in [0, 1] as binary 8-bit PGM."""
    u = np.asarray(u)
    if u.ndim != 2:
        raise ValueError(f"PGM output needs a 2-d field, got shape {u.shape}")
    pix = to_uint8(u)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (u.shape[1], u.shape[0]))
        fh.write(pix.tobytes())


def _is_png(path):
    return str(path).lower().endswith(".png")


def read_image(path):
    """Grayscale image as floats in [0, 1]; PGM natively, PNG through Pillow."""
    if _is_png(path):
        from PIL import Image

        with Image.open(path) as im:
            if im.mode not in ("L", "1", "P", "I;16", "LA"):
                raise ImageFormatError(f"{path}: expected a grayscale PNG, got mode {im.mode}")
            arr = np.asarray(im.convert("L"), dtype=float)
        return arr / 255.0
    return read_pgm(path)


def write_image(path, u):
    if _is_png(path):
        from PIL import Image

        # fixed encoder settings keep the bytes reproducible
        Image.fromarray(to_uint8(u), mode="L").save(path, format="PNG", optimize=False)
    else:
        write_pgm(path, u)


def read_grid_csv(path):
    """Numeric CSV grid; a single row or column is returned as a 1-d field."""
    arr = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    if arr.shape[0] == 1 or arr.shape[1] == 1:
        arr = arr.ravel()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{path}: non-finite values in grid")
    return arr


def write_grid_csv(path, u):
    u = np.asarray(u, dtype=float)
    rows = u[None, :] if u.ndim == 1 else u
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


def is_csv(path):
    return str(path).lower().endswith(".csv")


def read_field(path):
    """Grid from CSV, or image from PGM/PNG, chosen by extension."""
    return read_grid_csv(path) if is_csv(path) else read_image(path)


def write_field(path, u):
    if is_csv(path):
        write_grid_csv(path, u)
    else:
        write_image(path, u)


def write_residual_csv(path, rows):
    """Rows of ``(iter, residual, pcg_iters)`` under a fixed header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iter", "residual", "pcg_iters"])
        for k, r, its in rows:
            writer.writerow([k, repr(float(r)), its])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)

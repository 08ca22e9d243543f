"""Colour mapping and bit-exact image output for thermograms."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from rdts.errors import DomainError

# Anchors of the colour ramp (sRGB, evenly spaced from cold to hot). The
# 256-entry table is linear interpolation between them rounded to integers,
# so it is identical on every platform.
RAMP_ANCHORS = (
    (0, 0, 4),
    (31, 12, 72),
    (85, 15, 109),
    (136, 34, 106),
    (186, 54, 85),
    (227, 89, 51),
    (249, 140, 10),
    (249, 201, 50),
    (252, 255, 164),
)
OVERLAY_COLOR = (255, 255, 255)
DASH = 2


def _build_lut() -> np.ndarray:
    anchors = np.asarray(RAMP_ANCHORS, dtype=float)
    pos = np.linspace(0.0, 255.0, len(anchors))
    idx = np.arange(256)
    lut = np.stack([np.interp(idx, pos, anchors[:, c]) for c in range(3)], axis=1)
    return np.rint(lut).astype(np.uint8)


COLOR_LUT = _build_lut()


def _dashed_box(img: np.ndarray, i0: int, j0: int, i1: int, j1: int) -> None:
    """Draw a dashed rectangle on ``img`` (row 0 at the top)."""
    ny, nx = img.shape[:2]
    perimeter = (
        [(i, j0) for i in range(i0, i1 + 1)]
        + [(i1, j) for j in range(j0 + 1, j1 + 1)]
        + [(i, j1) for i in range(i1 - 1, i0 - 1, -1)]
        + [(i0, j) for j in range(j1 - 1, j0, -1)]
    )
    for k, (i, j) in enumerate(perimeter):
        if (k // DASH) % 2 == 0 and 0 <= i < nx and 0 <= j < ny:
            img[j, i] = OVERLAY_COLOR


def render_thermogram(grid, color_scale: tuple[float, float], heaters_overlay=()) -> np.ndarray:
    """RGB image (``uint8``, shape ``(ny, nx, 3)``) with the top row at the largest y.

    ``heaters_overlay`` holds heaters, geometries (anything with a
    ``bounds()`` method) or ``(xmin, ymin, xmax, ymax)`` tuples in board metres.
    """
    tmin, tmax = color_scale
    if not tmax > tmin:
        raise DomainError("color scale needs Tmax > Tmin")
    frac = np.clip((np.asarray(grid.values) - tmin) / (tmax - tmin), 0.0, 1.0)
    idx = np.rint(frac * 255).astype(np.intp)
    img = COLOR_LUT[idx][::-1].copy()
    ny = img.shape[0]
    res = grid.resolution
    ox, oy = grid.origin
    for item in heaters_overlay:
        item = getattr(item, "geometry", item)
        x0, y0, x1, y1 = item.bounds() if hasattr(item, "bounds") else item
        i0 = int(round((x0 - ox) / res))
        i1 = int(round((x1 - ox) / res)) - 1
        # flip rows: board y grows upwards, image rows grow downwards
        j0 = ny - int(round((y1 - oy) / res))
        j1 = ny - int(round((y0 - oy) / res)) - 1
        _dashed_box(img, i0, j0, i1, j1)
    return img


def ppm_bytes(img: np.ndarray) -> bytes:
    img = np.ascontiguousarray(img, dtype=np.uint8)
    ny, nx = img.shape[:2]
    return b"P6\n%d %d\n255\n" % (nx, ny) + img.tobytes()


def write_ppm(path, img: np.ndarray) -> Path:
    path = Path(path)
    path.write_bytes(ppm_bytes(img))
    return path


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, dims, maxval, rest = data.split(b"\n", 3)
    if magic != b"P6" or maxval != b"255":
        raise ValueError("not an 8-bit binary PPM")
    nx, ny = map(int, dims.split())
    return np.frombuffer(rest, dtype=np.uint8).reshape(ny, nx, 3)


def write_png(path, img: np.ndarray) -> Path | None:
    """PNG copy of ``img`` if Pillow is installed, else ``None``."""
    try:
        from PIL import Image
    except ImportError:
        return None
    path = Path(path)
    Image.fromarray(np.ascontiguousarray(img, dtype=np.uint8), "RGB").save(path, optimize=False)
    return path

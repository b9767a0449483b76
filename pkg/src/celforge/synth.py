"""Synthetic cel-style frames and flows for benchmarks and tests."""
from __future__ import annotations

import numpy as np


def draw_segment(img: np.ndarray, p0, p1, color, width: int = 1) -> None:
    """Rasterize a straight stroke in place by dense point sampling."""
    h, w = img.shape[:2]
    (y0, x0), (y1, x1) = p0, p1
    n = int(max(abs(y1 - y0), abs(x1 - x0)) * 2) + 2
    ys = np.rint(np.linspace(y0, y1, n)).astype(int)
    xs = np.rint(np.linspace(x0, x1, n)).astype(int)
    r = width // 2
    for dy in range(-r, width - r):
        for dx in range(-r, width - r):
            yy, xx = ys + dy, xs + dx
            ok = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
            img[yy[ok], xx[ok]] = color


def cel_frame(h: int, w: int, rng: np.random.Generator, strokes: int = 40, blobs: int = 6) -> np.ndarray:
    """White frame with flat-colour rectangles and dark line strokes, float32 RGB."""
    img = np.ones((h, w, 3), np.float32)
    for _ in range(blobs):
        y0, x0 = rng.integers(0, h), rng.integers(0, w)
        bh, bw = rng.integers(h // 10 + 1, h // 3 + 2), rng.integers(w // 10 + 1, w // 3 + 2)
        img[y0:y0 + bh, x0:x0 + bw] = rng.uniform(0.4, 1.0, 3)
    for _ in range(strokes):
        p0 = (rng.uniform(0, h - 1), rng.uniform(0, w - 1))
        p1 = (rng.uniform(0, h - 1), rng.uniform(0, w - 1))
        draw_segment(img, p0, p1, rng.uniform(0.0, 0.15, 3), width=int(rng.integers(1, 3)))
    return img


def uniform_flow(h: int, w: int, u: float, v: float) -> np.ndarray:
    f = np.empty((h, w, 2), np.float32)
    f[..., 0] = u
    f[..., 1] = v
    return f

"""Line extraction and line-based geometry.

Sketches are boolean ``(H, W)`` arrays with True on line pixels.  Distance
fields are float64 ``(H, W)`` arrays and may hold ``+inf`` when the sketch
has no line pixels at all.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .errors import EmptySketchError, InvalidInputError, InvalidParameterError
from .imgproc import as_image, as_mask, gaussian_blur, to_grayscale

NEDT_TAU = 15.0 / 540.0
# DoG base sigma at this frame height; scaled linearly with height otherwise
REFERENCE_HEIGHT = 540
REFERENCE_SIGMA = 1.0


@dataclass(frozen=True)
class SketchParams:
    """Difference-of-Gaussians line extractor settings.

    ``sigma=None`` picks ``REFERENCE_SIGMA`` scaled by ``height / 540``.
    """

    sigma: float | None = None
    k_ratio: float = 1.6
    t_gain: float = 2.0
    epsilon: float = 0.01

    def sigma_for(self, height: int) -> float:
        if self.sigma is not None:
            return float(self.sigma)
        return REFERENCE_SIGMA * height / REFERENCE_HEIGHT

    def validate(self, height: int = REFERENCE_HEIGHT) -> None:
        if not self.sigma_for(height) > 0:
            raise InvalidParameterError(f"DoG sigma must be positive, got {self.sigma}")
        if not self.k_ratio > 1:
            raise InvalidParameterError(f"DoG k_ratio must exceed 1, got {self.k_ratio}")


def dog_response(img, params: SketchParams = SketchParams()) -> np.ndarray:
    """Difference-of-Gaussians response ``0.5 + t (G_{k sigma} - G_sigma) - eps`` on luma.

    Accepts RGB or single-channel input; returns ``(H, W)`` float32.
    """
    a = as_image(img, channels=(1, 3))
    params.validate(a.shape[0])
    gray = to_grayscale(a)[:, :, 0] if a.shape[2] == 3 else a[:, :, 0]
    sigma = params.sigma_for(a.shape[0])
    narrow = gaussian_blur(gray, sigma)
    wide = gaussian_blur(gray, params.k_ratio * sigma)
    return np.float32(0.5) + np.float32(params.t_gain) * (wide - narrow) - np.float32(params.epsilon)


def extract_sketch(img, params: SketchParams = SketchParams()) -> np.ndarray:
    """Binary line sketch: pixels whose DoG response exceeds 0.5."""
    return dog_response(img, params) > 0.5


@njit(cache=True)
def _lower_envelope(f, out, v, z):
    # f: squared distances along one line, inf where no site; writes min_q f(q) + (p - q)^2
    n = f.shape[0]
    k = -1
    for q in range(n):
        fq = f[q]
        if fq == np.inf:
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
            z[1] = np.inf
            continue
        s = ((fq + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
        while s <= z[k]:
            k -= 1
            s = ((fq + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    if k < 0:
        for p in range(n):
            out[p] = np.inf
        return
    k = 0
    for p in range(n):
        while z[k + 1] < p:
            k += 1
        d = p - v[k]
        out[p] = d * d + f[v[k]]


@njit(parallel=True, cache=True)
def _edt_sq_kernel(sites):
    h, w = sites.shape
    rows = np.empty((h, w), np.float64)
    for y in prange(h):
        f = np.empty(w, np.float64)
        for x in range(w):
            f[x] = 0.0 if sites[y, x] else np.inf
        v = np.empty(w, np.int64)
        z = np.empty(w + 1, np.float64)
        _lower_envelope(f, rows[y], v, z)
    out = np.empty((h, w), np.float64)
    for x in prange(w):
        f = np.empty(h, np.float64)
        col = np.empty(h, np.float64)
        for y in range(h):
            f[y] = rows[y, x]
        v = np.empty(h, np.int64)
        z = np.empty(h + 1, np.float64)
        _lower_envelope(f, col, v, z)
        for y in range(h):
            out[y, x] = col[y]
    return out


def edt_squared(sketch) -> np.ndarray:
    """Exact squared Euclidean distance to the nearest True pixel.

    Two separable lower-envelope passes (rows, then columns).  Integer-valued
    float64 output; ``+inf`` everywhere for an empty sketch.
    """
    m = np.ascontiguousarray(as_mask(sketch, "sketch"))
    return _edt_sq_kernel(m)


def edt(sketch) -> np.ndarray:
    """Exact Euclidean distance transform of a binary sketch."""
    return np.sqrt(edt_squared(sketch))


def edt_squared_brute(sketch, chunk: int = 4096) -> np.ndarray:
    """All-pairs nearest-line-pixel search; the reference the fast EDT is checked against."""
    m = as_mask(sketch, "sketch")
    h, w = m.shape
    sites = np.argwhere(m).astype(np.int64)
    if len(sites) == 0:
        return np.full((h, w), np.inf)
    yy, xx = np.mgrid[0:h, 0:w]
    pts = np.stack([yy.ravel(), xx.ravel()], axis=1).astype(np.int64)
    best = np.empty(len(pts), np.int64)
    for start in range(0, len(pts), chunk):
        p = pts[start:start + chunk]
        d = ((p[:, None, :] - sites[None, :, :]) ** 2).sum(axis=2)
        best[start:start + chunk] = d.min(axis=1)
    return best.reshape(h, w).astype(np.float64)


def normalize_edt(dist, height: int, tau: float = NEDT_TAU) -> np.ndarray:
    """Squash a distance field into [0, 1]: ``1 - exp(-dist / (tau * height))``."""
    if not tau > 0:
        raise InvalidParameterError(f"tau must be positive, got {tau}")
    return -np.expm1(-np.asarray(dist, dtype=np.float64) / (tau * height))


def nedt(img, tau: float = NEDT_TAU, params: SketchParams = SketchParams()) -> np.ndarray:
    """Normalized distance transform of the DoG sketch of ``img``.

    Zero on line pixels, approaching one far from lines; all ones for a
    frame with no lines.
    """
    if not tau > 0:
        raise InvalidParameterError(f"tau must be positive, got {tau}")
    sketch = extract_sketch(img, params)
    return normalize_edt(edt(sketch), sketch.shape[0], tau)


def image_diameter(height: int, width: int, mode: str = "diagonal") -> float:
    if mode == "diagonal":
        return math.hypot(height, width)
    if mode == "max":
        return float(max(height, width))
    raise InvalidParameterError(f"unknown diameter mode {mode!r}")


def chamfer(x0, x1, diameter: str = "diagonal") -> float:
    """Symmetric chamfer distance normalized by image area and diameter.

    Raises EmptySketchError if either sketch has no line pixels.
    """
    a = as_mask(x0, "x0")
    b = as_mask(x1, "x1")
    if a.shape != b.shape:
        raise InvalidInputError(f"sketch shapes differ: {a.shape} vs {b.shape}")
    if not a.any() or not b.any():
        raise EmptySketchError("chamfer distance needs non-empty sketches")
    return chamfer_from_fields(a, b, edt(a), edt(b), diameter)


def chamfer_from_fields(x0, x1, dt0, dt1, diameter: str = "diagonal") -> float:
    """Chamfer distance from sketches and their precomputed distance fields."""
    h, w = x0.shape
    to_1 = dt1[x0].sum()
    to_0 = dt0[x1].sum()
    return float((to_1 + to_0) / (2.0 * h * w * image_diameter(h, w, diameter)))

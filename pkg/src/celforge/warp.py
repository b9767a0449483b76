"""Flow-driven warping: backward sampling, softmax forward splatting and
occlusion-mask infilling between two frames.

Flow fields are ``(H, W, 2)`` float arrays holding ``(u, v)`` displacements
in pixels, ``u`` to the right and ``v`` downward.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numba import njit

from .errors import InvalidInputError, InvalidParameterError
from .imgproc import as_image, check_same_size, morph_open, rgb_to_lab

COVERAGE_EPS = 1e-7
Z_SCALE = 0.1
OPEN_KERNEL = 5
COVERAGE_THRESHOLD = 0.5


class SplatResult(NamedTuple):
    values: np.ndarray  # (H, W, C) float32, zero where coverage <= COVERAGE_EPS
    coverage: np.ndarray  # (H, W) float32, summed bilinear footprint


def as_flow(flow, name: str = "flow") -> np.ndarray:
    return as_image(flow, channels=2, name=name)


def backward_warp(img, flow) -> np.ndarray:
    """Bilinear gather ``img(x + flow(x))``; samples outside the frame clamp to the border."""
    a = as_image(img)
    fl = as_flow(flow)
    check_same_size(("image", a), ("flow", fl))
    h, w, _ = a.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = np.clip(xx + fl[..., 0], 0.0, w - 1)
    sy = np.clip(yy + fl[..., 1], 0.0, h - 1)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]
    src = a.astype(np.float64)
    top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
    bottom = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
    return (top * (1.0 - fy) + bottom * fy).astype(np.float32)


def z_metric(src, other, flow_src_to_other) -> np.ndarray:
    """Splatting importance of ``src`` pixels: ``-0.1 * ||LAB(src) - LAB(other) warped back||``.

    Returns ``(H, W, 1)``; zero for perfectly colour-consistent pixels,
    negative otherwise.
    """
    a = as_image(src, channels=3, name="src")
    b = as_image(other, channels=3, name="other")
    fl = as_flow(flow_src_to_other)
    check_same_size(("src", a), ("other", b), ("flow", fl))
    diff = rgb_to_lab(a).astype(np.float64) - backward_warp(rgb_to_lab(b), fl)
    return (-Z_SCALE * np.sqrt((diff * diff).sum(axis=2)))[:, :, None].astype(np.float32)


@njit(cache=True)
def _splat_kernel(values, flow, weight):
    h, w, c = values.shape
    acc = np.zeros((h, w, c), np.float64)
    wsum = np.zeros((h, w), np.float64)
    cov = np.zeros((h, w), np.float64)
    for y in range(h):
        for x in range(w):
            tx = x + np.float64(flow[y, x, 0])
            ty = y + np.float64(flow[y, x, 1])
            fx0 = np.floor(tx)
            fy0 = np.floor(ty)
            ax = tx - fx0
            ay = ty - fy0
            x0 = int(fx0)
            y0 = int(fy0)
            e = weight[y, x]
            for dy in range(2):
                yi = y0 + dy
                if yi < 0 or yi >= h:
                    continue
                by = ay if dy == 1 else 1.0 - ay
                for dx in range(2):
                    xi = x0 + dx
                    if xi < 0 or xi >= w:
                        continue
                    b = by * (ax if dx == 1 else 1.0 - ax)
                    if b == 0.0:
                        continue
                    cov[yi, xi] += b
                    be = b * e
                    wsum[yi, xi] += be
                    for ch in range(c):
                        acc[yi, xi, ch] += be * values[y, x, ch]
    return acc, wsum, cov


def softmax_splat(values, flow, z=None) -> SplatResult:
    """Forward-splat ``values`` along ``flow`` with softmax weights ``exp(z)``.

    Each source pixel lands on the four bilinear neighbours of its
    destination; contributions falling outside the frame are dropped.
    ``coverage`` is the splatted bilinear footprint of an all-ones image and
    does not depend on ``z``.
    """
    v = as_image(values, channels=(1, 2, 3), name="values")
    fl = as_flow(flow)
    if z is None:
        zz = np.zeros(v.shape[:2])
    else:
        zz = as_image(z, channels=1, name="z")[:, :, 0].astype(np.float64)
    check_same_size(("values", v), ("flow", fl), ("z", zz))
    # shift by the max so exp never overflows; the ratio is unchanged
    weight = np.exp(zz - zz.max())
    acc, wsum, cov = _splat_kernel(v, fl, weight)
    ok = (cov > COVERAGE_EPS) & (wsum > 0.0)
    out = np.zeros_like(acc)
    np.divide(acc, wsum[:, :, None], out=out, where=ok[:, :, None])
    return SplatResult(out.astype(np.float32), cov.astype(np.float32))


def mask_from_coverage(coverage, k: int = OPEN_KERNEL, threshold: float = COVERAGE_THRESHOLD) -> np.ndarray:
    return morph_open(np.asarray(coverage) > threshold, k)


def occlusion_mask(flow, z=None, k: int = OPEN_KERNEL, threshold: float = COVERAGE_THRESHOLD) -> np.ndarray:
    """Target pixels reached by the forward warp, cleaned of speckle by opening."""
    fl = as_flow(flow)
    ones = np.ones(fl.shape[:2] + (1,), np.float32)
    return mask_from_coverage(softmax_splat(ones, fl, z).coverage, k, threshold)


def infilled_warp(f0, f1, flow_0t, flow_1t, z0=None, z1=None, k: int = OPEN_KERNEL, return_holes: bool = False):
    """Warp both inputs to time t and fill each warp's occlusions from the other.

    Output is the mean of the two infilled warps.  Pixels neither warp
    reaches stay 0; with ``return_holes=True`` a boolean mask of them is
    returned alongside the image.
    """
    a = as_image(f0, name="f0")
    b = as_image(f1, name="f1")
    if a.shape != b.shape:
        raise InvalidInputError(f"size mismatch: f0 {a.shape} vs f1 {b.shape}")
    check_same_size(("f0", a), ("flow_0t", flow_0t), ("flow_1t", flow_1t))
    w0, cov0 = softmax_splat(a, flow_0t, z0)
    w1, cov1 = softmax_splat(b, flow_1t, z1)
    m0 = mask_from_coverage(cov0, k)[:, :, None]
    m1 = mask_from_coverage(cov1, k)[:, :, None]
    out = 0.5 * np.where(m0, w0, w1) + 0.5 * np.where(m1, w1, w0)
    if return_holes:
        holes = (cov0 <= COVERAGE_EPS) & (cov1 <= COVERAGE_EPS)
        return out, holes
    return out


def halfway_guess(i0, i1, flow_01, flow_10, t: float = 0.5, k: int = OPEN_KERNEL, return_holes: bool = False):
    """Interpolate RGB frames at time ``t`` by infilled softmax splatting of the frames themselves.

    ``flow_01`` maps frame 0 onto frame 1 and ``flow_10`` the reverse.
    """
    if not 0.0 <= t <= 1.0:
        raise InvalidParameterError(f"t must lie in [0, 1], got {t}")
    a = as_image(i0, channels=3, name="i0")
    b = as_image(i1, channels=3, name="i1")
    f01 = as_flow(flow_01, "flow_01")
    f10 = as_flow(flow_10, "flow_10")
    check_same_size(("i0", a), ("i1", b), ("flow_01", f01), ("flow_10", f10))
    z0 = z_metric(a, b, f01)
    z1 = z_metric(b, a, f10)
    out, holes = infilled_warp(a, b, t * f01, (1.0 - t) * f10, z0, z1, k=k, return_holes=True)
    out = np.clip(out, 0.0, 1.0)
    return (out, holes) if return_holes else out

"""Image container conventions and low-level pixel operations.

Images are plain numpy arrays of shape ``(H, W, C)`` with ``C`` in {1, 2, 3}
and dtype float32.  Binary masks are boolean arrays of shape ``(H, W)``.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import InvalidInputError, InvalidParameterError

REC601 = (0.299, 0.587, 0.114)

# linear sRGB -> XYZ, D65
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
# white point taken as the image of RGB (1, 1, 1) so that white maps to L*=100, a*=b*=0
_WHITE = _RGB_TO_XYZ.sum(axis=1)
_LAB_EPS = (6.0 / 29.0) ** 3


def as_image(arr, channels=None, name: str = "image") -> np.ndarray:
    """Validate ``arr`` as an image and return it as float32 ``(H, W, C)``.

    A 2-D array is treated as a single-channel image.  ``channels`` may be an
    int or a tuple of allowed channel counts.
    """
    a = np.asarray(arr)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3:
        raise InvalidInputError(f"{name} must be (H, W) or (H, W, C), got shape {a.shape}")
    h, w, c = a.shape
    if h < 1 or w < 1:
        raise InvalidInputError(f"{name} must be non-empty, got shape {a.shape}")
    if channels is not None:
        allowed = (channels,) if isinstance(channels, int) else tuple(channels)
        if c not in allowed:
            raise InvalidInputError(f"{name} must have {' or '.join(map(str, allowed))} channels, got {c}")
    elif c not in (1, 2, 3):
        raise InvalidInputError(f"{name} must have 1, 2 or 3 channels, got {c}")
    a = a.astype(np.float32, copy=False)
    if not np.isfinite(a).all():
        raise InvalidInputError(f"{name} contains non-finite values")
    return a


def as_mask(arr, name: str = "mask") -> np.ndarray:
    m = np.asarray(arr)
    if m.ndim == 3 and m.shape[2] == 1:
        m = m[:, :, 0]
    if m.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {m.shape}")
    return m.astype(bool, copy=False)


def check_same_size(*named) -> None:
    """Raise if the ``(name, array)`` pairs disagree on height and width."""
    shapes = [(n, tuple(np.shape(a)[:2])) for n, a in named]
    if len({s for _, s in shapes}) > 1:
        desc = ", ".join(f"{n} {s[0]}x{s[1]}" for n, s in shapes)
        raise InvalidInputError(f"size mismatch: {desc}")


def to_grayscale(img, weights=REC601) -> np.ndarray:
    """Luma of an RGB image as a ``(H, W, 1)`` array."""
    a = as_image(img, channels=3)
    w = np.asarray(weights, dtype=np.float32)
    if w.shape != (3,):
        raise InvalidParameterError("weights must be three numbers")
    return (a @ w)[:, :, None]


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def rgb_to_lab(img) -> np.ndarray:
    """sRGB in [0, 1] to CIE L*a*b* under D65."""
    a = as_image(img, channels=3).astype(np.float64)
    xyz = _srgb_to_linear(a) @ _RGB_TO_XYZ.T
    t = xyz / _WHITE
    f = np.where(t > _LAB_EPS, np.cbrt(t), t / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab.astype(np.float32)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled 1-D Gaussian truncated at ``ceil(3 sigma)`` and normalized to sum 1."""
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img, sigma: float) -> np.ndarray:
    """Separable Gaussian blur over the two spatial axes with replicated borders.

    Accepts ``(H, W)`` or ``(H, W, C)`` input and returns the same shape.
    """
    k = gaussian_kernel(sigma)
    a = np.asarray(img, dtype=np.float32)
    if a.ndim not in (2, 3):
        raise InvalidInputError(f"cannot blur array of shape {a.shape}")
    out = ndimage.correlate1d(a, k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


def _check_kernel(k: int) -> None:
    if not isinstance(k, (int, np.integer)) or k < 1 or k % 2 == 0:
        raise InvalidParameterError(f"kernel side must be a positive odd integer, got {k!r}")


def erode(mask, k: int) -> np.ndarray:
    _check_kernel(k)
    m = as_mask(mask)
    if k == 1:
        return m.copy()
    return ndimage.binary_erosion(m, structure=np.ones((k, k), bool), border_value=0)


def dilate(mask, k: int) -> np.ndarray:
    _check_kernel(k)
    m = as_mask(mask)
    if k == 1:
        return m.copy()
    return ndimage.binary_dilation(m, structure=np.ones((k, k), bool), border_value=0)


def morph_open(mask, k: int = 5) -> np.ndarray:
    """Binary opening with a ``k x k`` square; pixels outside the frame count as background."""
    return dilate(erode(mask, k), k)


def resize_nearest(arr: np.ndarray, factor: int) -> np.ndarray:
    """Integer nearest-neighbour upscale along the two spatial axes."""
    if factor < 1:
        raise InvalidParameterError("factor must be >= 1")
    return np.repeat(np.repeat(np.asarray(arr), factor, axis=0), factor, axis=1)


def read_png(path) -> np.ndarray:
    """Read an 8-bit PNG as float32 in [0, 1]; alpha is dropped.

    Greyscale files come back with one channel, everything else as RGB.
    """
    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I", "1"):
            data = np.asarray(im.convert("L"))[:, :, None]
        else:
            data = np.asarray(im.convert("RGB"))
    return data.astype(np.float32) / np.float32(255.0)


def write_png(path, img) -> None:
    """Write a [0, 1] image (1 or 3 channels, or a boolean mask) as 8-bit PNG."""
    a = np.asarray(img)
    if a.dtype == bool:
        a = a.astype(np.float32)
    a = as_image(a, channels=(1, 3))
    q = np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8)
    if q.shape[2] == 1:
        Image.fromarray(q[:, :, 0]).save(Path(path), format="PNG")
    else:
        Image.fromarray(q).save(Path(path), format="PNG")

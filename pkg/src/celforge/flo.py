"""Middlebury ``.flo`` optical-flow files.

Layout (little-endian): float32 magic 202021.25, int32 width, int32 height,
then ``height * width`` interleaved ``(u, v)`` float32 pairs, row-major.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInputError

FLO_MAGIC = np.float32(202021.25)
HEADER_BYTES = 12


def read_flo(path) -> np.ndarray:
    """Read a flow file as a float32 ``(H, W, 2)`` array."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_BYTES:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic = np.frombuffer(raw, "<f4", count=1)[0]
    if magic != FLO_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {float(FLO_MAGIC)}")
    w, h = (int(v) for v in np.frombuffer(raw, "<i4", count=2, offset=4))
    if w < 1 or h < 1:
        raise FormatError(f"{path}: bad dimensions {w}x{h}")
    expected = HEADER_BYTES + 8 * w * h
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for {w}x{h}, found {len(raw)}")
    data = np.frombuffer(raw, "<f4", count=2 * w * h, offset=HEADER_BYTES)
    return data.reshape(h, w, 2).astype(np.float32)


def write_flo(flow, path) -> None:
    f = np.asarray(flow)
    if f.ndim != 3 or f.shape[2] != 2 or f.shape[0] < 1 or f.shape[1] < 1:
        raise InvalidInputError(f"flow must be (H, W, 2), got {f.shape}")
    f = f.astype("<f4")
    if not np.isfinite(f).all():
        raise InvalidInputError("flow contains non-finite values")
    h, w = f.shape[:2]
    header = np.array([FLO_MAGIC], "<f4").tobytes() + np.array([w, h], "<i4").tobytes()
    Path(path).write_bytes(header + np.ascontiguousarray(f).tobytes())

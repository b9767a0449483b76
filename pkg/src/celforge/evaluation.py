"""Prediction-vs-ground-truth scoring and table-style aggregation."""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import EmptySketchError, FormatError, InvalidInputError
from .imgproc import as_image, read_png, to_grayscale
from .linework import NEDT_TAU, SketchParams, chamfer, chamfer_from_fields, edt, extract_sketch, normalize_edt

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
CD_DISPLAY_SCALE = 1e5


def _pair(pred, gt, channels=None):
    a = as_image(pred, channels=channels, name="pred")
    b = as_image(gt, channels=channels, name="gt")
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: pred {a.shape} vs gt {b.shape}")
    return a, b


def psnr(pred, gt) -> float:
    """Peak signal-to-noise ratio in dB for images in [0, 1]; ``inf`` when identical."""
    a, b = _pair(pred, gt)
    d = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(d * d))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def ssim_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def ssim(pred, gt, data_range: float = 1.0) -> float:
    """Mean structural similarity over all full 11x11 Gaussian windows.

    RGB inputs are compared on luma.
    """
    a, b = _pair(pred, gt, channels=(1, 3))
    if a.shape[2] == 3:
        a, b = to_grayscale(a), to_grayscale(b)
    x = a[:, :, 0].astype(np.float64)
    y = b[:, :, 0].astype(np.float64)
    h, w = x.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise InvalidInputError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}")
    g = ssim_window()
    r = SSIM_WINDOW // 2

    def local_mean(img):
        out = ndimage.correlate1d(img, g, axis=0, mode="constant")
        out = ndimage.correlate1d(out, g, axis=1, mode="constant")
        return out[r:h - r, r:w - r]

    mx, my = local_mean(x), local_mean(y)
    vx = local_mean(x * x) - mx * mx
    vy = local_mean(y * y) - my * my
    cxy = local_mean(x * y) - mx * my
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    smap = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    return float(smap.mean())


def chamfer_eval(pred, gt, params: SketchParams = SketchParams(), diameter: str = "diagonal") -> float:
    """Chamfer distance between the DoG sketches of two frames."""
    a, b = _pair(pred, gt, channels=(1, 3))
    return chamfer(extract_sketch(a, params), extract_sketch(b, params), diameter)


def line_metrics(pred, gt, params: SketchParams = SketchParams(), tau: float = NEDT_TAU,
                 diameter: str = "diagonal") -> dict:
    """One full line-metric pass: both sketches, their distance fields, NEDTs and chamfer.

    Each distance transform is computed once and shared by NEDT and CD.
    """
    a, b = _pair(pred, gt, channels=(1, 3))
    xa, xb = extract_sketch(a, params), extract_sketch(b, params)
    da, db = edt(xa), edt(xb)
    h = a.shape[0]
    out = {"nedt_pred": normalize_edt(da, h, tau), "nedt_gt": normalize_edt(db, h, tau), "cd": None}
    if xa.any() and xb.any():
        out["cd"] = chamfer_from_fields(xa, xb, da, db, diameter)
    return out


@dataclass
class SampleRow:
    sample_id: str
    cd: float | None
    psnr: float
    ssim: float
    tags: tuple[str, ...] = ()
    error: str | None = None

    def to_json(self) -> dict:
        d = asdict(self)
        d["tags"] = list(self.tags)
        if math.isinf(self.psnr):
            d["psnr"] = "inf"
        return d


@dataclass
class GroupStats:
    group: str
    count: int
    cd_mean: float | None
    cd_count: int
    psnr_mean: float | None
    psnr_count: int
    psnr_inf: int
    ssim_mean: float | None

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class MetricReport:
    rows: list[SampleRow]
    groups: list[GroupStats] = field(default_factory=list)

    def group(self, name: str) -> GroupStats:
        for g in self.groups:
            if g.group == name:
                return g
        raise KeyError(name)

    def to_jsonl(self) -> str:
        lines = [json.dumps({"type": "sample", **r.to_json()}) for r in self.rows]
        lines += [json.dumps({"type": "aggregate", **g.to_json()}) for g in self.groups]
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        header = ("group", "n", "CD(1e5)", "PSNR", "SSIM(1e2)", "inf", "no-CD")
        body = []
        for g in self.groups:
            body.append((
                g.group,
                str(g.count),
                _fmt(None if g.cd_mean is None else g.cd_mean * CD_DISPLAY_SCALE, 3),
                _fmt(g.psnr_mean, 3),
                _fmt(None if g.ssim_mean is None else g.ssim_mean * 100.0, 2),
                str(g.psnr_inf),
                str(g.count - g.cd_count),
            ))
        widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
        fmt_row = lambda r: "  ".join(c.rjust(wd) if i else c.ljust(wd) for i, (c, wd) in enumerate(zip(r, widths)))
        out = [fmt_row(header), "  ".join("-" * wd for wd in widths)]
        out += [fmt_row(r) for r in body]
        return "\n".join(out) + "\n"


def _fmt(v, digits):
    return "-" if v is None else f"{v:.{digits}f}"


def _mean(values):
    values = list(values)
    return math.fsum(values) / len(values) if values else None


def _group_stats(name, rows) -> GroupStats:
    cds = [r.cd for r in rows if r.cd is not None]
    finite = [r.psnr for r in rows if not math.isinf(r.psnr)]
    return GroupStats(
        group=name,
        count=len(rows),
        cd_mean=_mean(cds),
        cd_count=len(cds),
        psnr_mean=_mean(finite),
        psnr_count=len(finite),
        psnr_inf=len(rows) - len(finite),
        ssim_mean=_mean(r.ssim for r in rows),
    )


def aggregate(rows, tag_map=None) -> MetricReport:
    """Overall and per-tag means.

    Rows without a chamfer value are left out of the CD mean; infinite PSNR
    values are left out of the PSNR mean and counted in ``psnr_inf``.
    ``tag_map`` (sample_id -> tags) overrides tags stored on the rows.
    """
    rows = sorted(rows, key=lambda r: r.sample_id)
    if tag_map is not None:
        rows = [
            SampleRow(r.sample_id, r.cd, r.psnr, r.ssim, tuple(tag_map.get(r.sample_id, ())), r.error)
            for r in rows
        ]
    groups = [_group_stats("all", rows)]
    for tag in sorted({t for r in rows for t in r.tags}):
        groups.append(_group_stats(tag, [r for r in rows if tag in r.tags]))
    return MetricReport(rows, groups)


def evaluate_pair(sample_id, pred, gt, params: SketchParams = SketchParams(), crop=None, tags=()) -> SampleRow:
    """Score one prediction; an empty sketch is recorded on the row instead of raised.

    ``crop`` is an optional ``(x, y, w, h)`` rectangle applied to both images.
    """
    a, b = _pair(pred, gt, channels=(1, 3))
    if crop is not None:
        x, y, w, h = crop
        a, b = a[y:y + h, x:x + w], b[y:y + h, x:x + w]
    try:
        cd = chamfer_eval(a, b, params)
        err = None
    except EmptySketchError:
        cd, err = None, "empty_sketch"
    return SampleRow(str(sample_id), cd, psnr(a, b), ssim(a, b), tuple(tags), err)


def read_tags(path) -> dict[str, tuple[str, ...]]:
    """``sample_id,tag[,tag...]`` per line; blank lines and ``#`` comments skipped."""
    tags: dict[str, tuple[str, ...]] = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if not parts[0]:
            raise FormatError(f"{path}:{n}: missing sample id")
        tags[parts[0]] = tuple(p for p in parts[1:] if p)
    return tags


def evaluate_dirs(pred_dir, gt_dir, tag_map=None, params: SketchParams = SketchParams(), crop=None, workers: int = 1) -> MetricReport:
    """Score every ground-truth PNG against the same-named prediction."""
    gt_files = sorted(Path(gt_dir).glob("*.png"))
    if not gt_files:
        raise FormatError(f"no PNG files in {gt_dir}")
    missing = [p.name for p in gt_files if not (Path(pred_dir) / p.name).exists()]
    if missing:
        raise FormatError(f"predictions missing for: {', '.join(missing[:5])}")

    def score(p):
        return evaluate_pair(p.stem, read_png(Path(pred_dir) / p.name), read_png(p), params, crop)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(score, gt_files))
    else:
        rows = [score(p) for p in gt_files]
    return aggregate(rows, tag_map)

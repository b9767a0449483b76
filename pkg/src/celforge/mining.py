"""Automated training-triplet mining from animation frame sequences.

Triplets are scored from two flow fields estimated *from the middle frame*
to each end frame.  A triplet is kept when its relative linear discrepancy
is under a cutoff and it is not a camera pan; duplicate frames are removed
before triplets are formed, and at most one surviving triplet is picked per
cut.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import FitError, FormatError, InvalidInputError, InvalidParameterError, NoValidPixelsError
from .evaluation import ssim
from .flo import read_flo
from .imgproc import as_image, check_same_size, read_png, rgb_to_lab
from .warp import as_flow

RRLD_THRESHOLD = 0.3
MIN_FLOW_NORM = 2.0
NAIVE_SSIM_BOUNDS = (0.75, 0.95)


@dataclass(frozen=True)
class TripletFlows:
    flow_to_prev: np.ndarray
    flow_to_next: np.ndarray

    def __post_init__(self):
        p = as_flow(self.flow_to_prev, "flow_to_prev")
        n = as_flow(self.flow_to_next, "flow_to_next")
        if p.shape != n.shape:
            raise InvalidInputError(f"flow shapes differ: {p.shape} vs {n.shape}")
        object.__setattr__(self, "flow_to_prev", p)
        object.__setattr__(self, "flow_to_next", n)

    @property
    def shape(self) -> tuple[int, int]:
        return self.flow_to_prev.shape[:2]


def _lands_inside(flow: np.ndarray) -> np.ndarray:
    h, w = flow.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w]
    dx = xx + flow[..., 0].astype(np.float64)
    dy = yy + flow[..., 1].astype(np.float64)
    return (dx >= 0) & (dx < w) & (dy >= 0) & (dy < h)


def _norm(flow: np.ndarray) -> np.ndarray:
    f = flow.astype(np.float64)
    return np.hypot(f[..., 0], f[..., 1])


def restricted_set(flows: TripletFlows, min_norm: float = MIN_FLOW_NORM) -> np.ndarray:
    """Pixels where both flows move more than ``min_norm`` and both stay in frame."""
    if min_norm < 0:
        raise InvalidParameterError(f"min_norm must be >= 0, got {min_norm}")
    p, n = flows.flow_to_prev, flows.flow_to_next
    return (_norm(p) > min_norm) & (_norm(n) > min_norm) & _lands_inside(p) & _lands_inside(n)


def rrld(flows: TripletFlows, min_norm: float = MIN_FLOW_NORM, omega=None) -> float:
    """Mean of ``(||p + n|| / 2) / ||p - n||`` over the restricted pixel set.

    ``p`` and ``n`` are the middle-to-previous and middle-to-next flows.  A
    perfectly halfway middle frame scores 0.  Pixels with ``p == n`` are left
    out; raises NoValidPixelsError when nothing remains.  Pass ``omega`` to
    reuse a precomputed restricted set.
    """
    if omega is None:
        omega = restricted_set(flows, min_norm)
    p = flows.flow_to_prev.astype(np.float64)
    n = flows.flow_to_next.astype(np.float64)
    s = p + n
    d = p - n
    num = np.hypot(s[..., 0], s[..., 1]) / 2.0
    den = np.hypot(d[..., 0], d[..., 1])
    valid = np.asarray(omega, bool) & (den > 0)
    if not valid.any():
        raise NoValidPixelsError("no pixels left to rate this triplet")
    return float(np.mean(num[valid] / den[valid]))


@dataclass(frozen=True)
class PanParams:
    """Camera-pan rejection thresholds.

    ``mag_min`` is in pixels at ``reference_height`` and scales with the
    actual frame height; set ``reference_height=None`` to use it as-is.
    """

    frac_min: float = 0.5
    mag_min: float = 10.0
    var_max: float = 1.0
    reference_height: int | None = 540

    def magnitude_threshold(self, height: int) -> float:
        if self.reference_height is None:
            return self.mag_min
        return self.mag_min * height / self.reference_height


def detect_pan(flows: TripletFlows, omega, params: PanParams = PanParams()) -> bool:
    """Large restricted set, large mean motion and near-uniform flow mean a pan."""
    omega = np.asarray(omega, bool)
    h, w = flows.shape
    count = int(omega.sum())
    if count == 0:
        return False
    if count / (h * w) <= params.frac_min:
        return False
    fields_ = (flows.flow_to_prev.astype(np.float64), flows.flow_to_next.astype(np.float64))
    mag = np.mean([_norm(f)[omega].mean() for f in fields_])
    if mag <= params.magnitude_threshold(h):
        return False
    return all(f[..., c][omega].var() < params.var_max for f in fields_ for c in (0, 1))


def dedup_features(a, b) -> tuple[float, float]:
    """Mean and max per-pixel L2 distance between two frames in LAB."""
    x = as_image(a, channels=3, name="a")
    y = as_image(b, channels=3, name="b")
    check_same_size(("a", x), ("b", y))
    d = rgb_to_lab(x).astype(np.float64) - rgb_to_lab(y).astype(np.float64)
    dist = np.sqrt((d * d).sum(axis=2))
    return float(dist.mean()), float(dist.max())


@dataclass(frozen=True)
class DedupModel:
    bias: float
    w_mean: float
    w_max: float
    threshold: float = 0.5

    def score(self, mean: float, max_: float) -> float:
        return self.bias + self.w_mean * mean + self.w_max * max_

    def is_duplicate(self, features) -> bool:
        mean, max_ = features
        return self.score(mean, max_) > self.threshold

    def save(self, path) -> None:
        Path(path).write_text("".join(f"{v!r}\n" for v in (self.bias, self.w_mean, self.w_max, self.threshold)))

    @classmethod
    def load(cls, path) -> "DedupModel":
        parts = Path(path).read_text().split()
        if len(parts) != 4:
            raise FormatError(f"{path}: expected 4 numbers, found {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None
        if not all(math.isfinite(v) for v in vals):
            raise FormatError(f"{path}: non-finite coefficient")
        return cls(*vals)


def fit_dedup(samples) -> DedupModel:
    """Least-squares fit of 0/1 duplicate labels on ``(1, mean, max)``.

    ``samples`` is an iterable of ``((mean, max), label)``.
    """
    samples = list(samples)
    if len(samples) < 3:
        raise FitError(f"need at least 3 samples, got {len(samples)}")
    X = np.array([[1.0, float(m), float(mx)] for (m, mx), _ in samples])
    y = np.array([1.0 if lab else 0.0 for _, lab in samples])
    if y.min() == y.max():
        raise FitError("both duplicate and non-duplicate samples are required")
    if np.linalg.matrix_rank(X) < 3:
        raise FitError("features are degenerate (design matrix is rank deficient)")
    w, *_ = np.linalg.lstsq(X, y, rcond=None)
    return DedupModel(float(w[0]), float(w[1]), float(w[2]), 0.5)


def naive_ssim_filter(i_prev, i_mid, i_next, bounds=NAIVE_SSIM_BOUNDS, pairs: str = "all") -> bool:
    """Accept when frame-pair SSIM stays inside ``bounds``.

    ``pairs="all"`` checks all three pairs, ``"consecutive"`` only
    prev/mid and mid/next.
    """
    check_same_size(("i_prev", i_prev), ("i_mid", i_mid), ("i_next", i_next))
    lo, hi = bounds
    checks = [(i_prev, i_mid), (i_mid, i_next)]
    if pairs == "all":
        checks.append((i_prev, i_next))
    elif pairs != "consecutive":
        raise InvalidParameterError(f"pairs must be 'all' or 'consecutive', got {pairs!r}")
    return all(lo <= ssim(a, b) <= hi for a, b in checks)


@dataclass(frozen=True)
class Cut:
    cut_id: int
    start: int
    end: int  # inclusive


def read_cuts(path) -> list[Cut]:
    """Parse ``cut_id,start_frame,end_frame`` lines (inclusive, zero-based)."""
    cuts = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        try:
            cid, start, end = (int(p) for p in parts)
        except ValueError:
            raise FormatError(f"{path}:{n}: expected 'cut_id,start,end', got {line!r}") from None
        if start < 0 or end < start:
            raise FormatError(f"{path}:{n}: bad frame range {start}..{end}")
        cuts.append(Cut(cid, start, end))
    return cuts


def write_cuts(cuts, path) -> None:
    Path(path).write_text("".join(f"{c.cut_id},{c.start},{c.end}\n" for c in cuts))


@dataclass
class TripletRecord:
    prev: str
    mid: str
    next: str
    rrld: float | None
    omega_fraction: float
    is_pan: bool
    has_duplicate: bool
    cut_id: int
    accepted: bool
    reject_reason: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, line: str) -> "TripletRecord":
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"bad manifest line: {exc}") from None
        names = {f.name for f in fields(cls)}
        if set(d) != names:
            raise FormatError(f"manifest fields {sorted(d)} do not match {sorted(names)}")
        return cls(**d)


def write_manifest(records, path) -> None:
    Path(path).write_text("".join(r.to_json() + "\n" for r in records))


def read_manifest(path) -> list[TripletRecord]:
    return [TripletRecord.from_json(l) for l in Path(path).read_text().splitlines() if l.strip()]


FlowSource = Callable[[str, str], np.ndarray]


class FlowDir:
    """Flow files named ``<src>_to_<dst>.flo`` after the frame file stems."""

    def __init__(self, root):
        self.root = Path(root)

    def path(self, src: str, dst: str) -> Path:
        return self.root / f"{Path(src).stem}_to_{Path(dst).stem}.flo"

    def __call__(self, src: str, dst: str) -> np.ndarray:
        return read_flo(self.path(src, dst))


@dataclass(frozen=True)
class TripletScore:
    rrld: float | None
    omega_fraction: float
    is_pan: bool
    reason: str | None  # None when the triplet passes both filters


def score_triplet(flows: TripletFlows, rrld_threshold: float = RRLD_THRESHOLD,
                  min_norm: float = MIN_FLOW_NORM, pan: PanParams = PanParams()) -> TripletScore:
    omega = restricted_set(flows, min_norm)
    h, w = flows.shape
    frac = float(omega.sum()) / (h * w)
    is_pan = detect_pan(flows, omega, pan)
    try:
        value = rrld(flows, min_norm, omega)
    except NoValidPixelsError:
        return TripletScore(None, frac, is_pan, "no_valid_pixels")
    if not value < rrld_threshold:
        reason = "rrld_above_threshold"
    elif is_pan:
        reason = "pan"
    else:
        reason = None
    return TripletScore(value, frac, is_pan, reason)


def _pmap(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def mine(frames: Sequence, flows: FlowSource, cuts: Sequence[Cut], rrld_threshold: float = RRLD_THRESHOLD,
         seed: int = 0, dedup: DedupModel | None = None, min_norm: float = MIN_FLOW_NORM,
         pan: PanParams = PanParams(), workers: int = 1,
         load_frame: Callable[[str], np.ndarray] = read_png) -> list[TripletRecord]:
    """Score every candidate triplet and pick one accepted triplet per cut.

    ``frames`` is the ordered frame list (paths or names understood by
    ``load_frame``); ``flows(src, dst)`` returns the flow from frame ``src``
    to frame ``dst`` and may raise FileNotFoundError.  Without a ``dedup``
    model no frames are dropped.

    Every candidate is reported: dropped duplicates, filtered triplets,
    triplets that passed but were not drawn (``not_selected``) and the drawn
    one (``accepted=True``).  Records come out ordered by cut then middle
    frame, and the draw for a cut depends only on ``seed`` and its id, so
    output does not depend on ``workers``.
    """
    names = [str(f) for f in frames]
    if len(names) < 3:
        raise InvalidInputError(f"need at least 3 frames, got {len(names)}")
    for c in cuts:
        if c.end >= len(names):
            raise InvalidInputError(f"cut {c.cut_id} ends at frame {c.end} but only {len(names)} frames exist")

    records: list[TripletRecord] = []
    for cut in sorted(cuts, key=lambda c: (c.start, c.cut_id)):
        idx = list(range(cut.start, cut.end + 1))
        dup_rows: list[tuple[int, TripletRecord]] = []
        if dedup is not None and len(idx) > 1:
            pairs = list(zip(idx[:-1], idx[1:]))
            feats = _pmap(lambda ij: dedup_features(load_frame(names[ij[0]]), load_frame(names[ij[1]])), pairs, workers)
            dropped = {j for (_, j), f in zip(pairs, feats) if dedup.is_duplicate(f)}
            for j in sorted(dropped):
                nxt = names[j + 1] if j + 1 <= cut.end else ""
                dup_rows.append((j, TripletRecord(names[j - 1], names[j], nxt, None, 0.0, False, True,
                                                  cut.cut_id, False, "duplicate")))
            kept = [i for i in idx if i not in dropped]
        else:
            kept = idx

        triplets = [(kept[j - 1], kept[j], kept[j + 1]) for j in range(1, len(kept) - 1)]

        def evaluate(tri):
            a, m, b = (names[i] for i in tri)
            try:
                tf = TripletFlows(flows(m, a), flows(m, b))
            except (FileNotFoundError, FormatError):
                return TripletScore(None, 0.0, False, "missing_flow")
            return score_triplet(tf, rrld_threshold, min_norm, pan)

        scores = _pmap(evaluate, triplets, workers)
        tri_rows = [
            (m, TripletRecord(names[a], names[m], names[b], s.rrld, s.omega_fraction, s.is_pan, False,
                              cut.cut_id, False, s.reason))
            for (a, m, b), s in zip(triplets, scores)
        ]
        eligible = [r for _, r in tri_rows if r.reject_reason is None]
        if eligible:
            rng = np.random.default_rng([seed, cut.cut_id])
            pick = int(rng.integers(len(eligible)))
            for k, r in enumerate(eligible):
                if k == pick:
                    r.accepted = True
                else:
                    r.reject_reason = "not_selected"
        records.extend(r for _, r in sorted(dup_rows + tri_rows, key=lambda t: t[0]))
    return records

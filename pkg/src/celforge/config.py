"""Pipeline configuration: defaults, JSON loading and command-line overrides."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import FormatError
from .linework import NEDT_TAU, SketchParams
from .mining import MIN_FLOW_NORM, NAIVE_SSIM_BOUNDS, RRLD_THRESHOLD, PanParams
from .warp import OPEN_KERNEL


@dataclass(frozen=True)
class Config:
    rrld_threshold: float = RRLD_THRESHOLD
    min_norm: float = MIN_FLOW_NORM
    dog: SketchParams = field(default_factory=SketchParams)
    nedt_tau: float = NEDT_TAU
    open_kernel: int = OPEN_KERNEL
    pan: PanParams = field(default_factory=PanParams)
    naive_ssim_bounds: tuple[float, float] = NAIVE_SSIM_BOUNDS
    workers: int | None = None
    seed: int = 0

    @classmethod
    def from_mapping(cls, data: dict) -> "Config":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise FormatError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kw = dict(data)
        try:
            if "dog" in kw:
                kw["dog"] = SketchParams(**kw["dog"])
            if "pan" in kw:
                kw["pan"] = PanParams(**kw["pan"])
        except TypeError as exc:
            raise FormatError(f"bad config section: {exc}") from None
        if "naive_ssim_bounds" in kw:
            kw["naive_ssim_bounds"] = tuple(kw["naive_ssim_bounds"])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "Config":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise FormatError(f"{path}: top level must be an object")
        return cls.from_mapping(data)

    def override(self, **changes) -> "Config":
        """Copy with every non-None keyword applied."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

"""Pipeline configuration shared by every stage."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any


@dataclass(frozen=True)
class PipelineConfig:
    """Flat parameter set for preprocessing, matching, segmentation and scoring.

    Defaults are the usual SeqSLAM settings: 64x32 frames,
    patch window 4, +-10 px offset search, 15-frame sequences and a
    velocity band of 1 +- 0.2.
    """

    S_x: int = 64
    S_y: int = 32
    P: int = 4
    O: int = 10
    d_s: int = 15
    R: int = 10
    velocity_set: tuple[float, ...] = (0.8, 0.9, 1.0, 1.1, 1.2)
    mu: float = 0.0
    N: int = 3
    # None means "same as d_s"
    exclusion_window: int | None = None
    min_segment_len: int = 1
    seed: int = 0
    restarts: int = 10
    max_iters: int = 100
    tol_loglik: float = 1e-4
    gt_tolerance: int = 5

    def __post_init__(self) -> None:
        object.__setattr__(self, "velocity_set", tuple(float(v) for v in self.velocity_set))
        self.validate()

    def validate(self) -> None:
        if self.S_x < 1 or self.S_y < 1:
            raise ValueError(f"image size must be positive, got {self.S_x}x{self.S_y}")
        if self.P < 1:
            raise ValueError(f"patch size must be >= 1, got {self.P}")
        if self.S_x % self.P or self.S_y % self.P:
            raise ValueError(
                f"image size {self.S_x}x{self.S_y} is not divisible by patch size {self.P}"
            )
        if self.d_s < 1:
            raise ValueError(f"d_s must be >= 1, got {self.d_s}")
        if self.R < 1:
            raise ValueError(f"R must be >= 1, got {self.R}")
        if self.O < 0:
            raise ValueError(f"O must be >= 0, got {self.O}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if not self.velocity_set:
            raise ValueError("velocity_set must be nonempty")
        if any(not v > 0 for v in self.velocity_set):
            raise ValueError(f"velocities must be > 0, got {self.velocity_set}")
        if self.exclusion_window is not None and self.exclusion_window < 0:
            raise ValueError("exclusion_window must be >= 0")
        if self.min_segment_len < 0:
            raise ValueError("min_segment_len must be >= 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.gt_tolerance < 0:
            raise ValueError("gt_tolerance must be >= 0")

    @property
    def exclusion(self) -> int:
        return self.d_s if self.exclusion_window is None else self.exclusion_window

    def with_overrides(self, **overrides: Any) -> "PipelineConfig":
        clean = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **clean)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["velocity_set"] = list(self.velocity_set)
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

"""Precision/recall/F1 against ground truth with a frame tolerance.

Conventions:

* an accepted match is a true positive when its query has ground truth
  and the matched reference lies within ``tol`` frames of it; every other
  accepted match (including queries without ground truth) is a false
  positive;
* the recall denominator counts emitted matches whose query has ground
  truth (queries the matcher never emits, q < d_s - 1, are excluded).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .config import PipelineConfig
from .ingest import GroundTruth
from .search import TrajectoryMatch

TP, FP, MISS = "tp", "fp", "miss"


@dataclass(frozen=True)
class PRPoint:
    mu: float
    true_positives: int
    false_positives: int
    accepted_count: int
    precision: float
    recall: float
    f1: float


@dataclass
class EvaluationReport:
    curve: list[PRPoint]
    max_f1: float
    argmax_mu: float
    config_echo: PipelineConfig | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "curve": [vars(p) for p in self.curve],
            "max_f1": self.max_f1,
            "argmax_mu": self.argmax_mu,
            "config": None if self.config_echo is None else self.config_echo.to_dict(),
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EvaluationReport":
        cfg = d.get("config")
        return cls(
            curve=[PRPoint(**p) for p in d["curve"]],
            max_f1=d["max_f1"],
            argmax_mu=d["argmax_mu"],
            config_echo=None if cfg is None else PipelineConfig.from_dict(cfg),
            extra=d.get("extra", {}),
        )


def classify_match(m: TrajectoryMatch, gt: GroundTruth, tol: int) -> str:
    if tol < 0:
        raise ValueError("tolerance must be >= 0")
    if not m.accepted:
        return MISS
    ref = gt.get(m.query_index)
    if ref is not None and abs(m.ref_index - ref) <= tol:
        return TP
    return FP


def _scores(tp: int, fp: int, n_gt: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / n_gt if n_gt else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def default_mu_grid(matches: Sequence[TrajectoryMatch], points: int = 101) -> list[float]:
    """``points`` evenly spaced thresholds from 0 to the largest finite margin."""
    finite = [m.margin for m in matches if math.isfinite(m.margin)]
    top = max(finite) if finite else 0.0
    if top <= 0.0:
        return [0.0]
    return np.linspace(0.0, top, points).tolist()


def pr_curve(
    matches: Sequence[TrajectoryMatch],
    gt: GroundTruth,
    tol: int = 5,
    mu_grid: Sequence[float] | None = None,
) -> list[PRPoint]:
    """Score the matches at every threshold; acceptance is re-derived as margin >= mu."""
    if not matches:
        raise ValueError("no matches to evaluate")
    if tol < 0:
        raise ValueError("tolerance must be >= 0")
    grid = np.asarray(default_mu_grid(matches) if mu_grid is None else mu_grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("mu grid must be sorted ascending")

    margins = np.array([m.margin for m in matches])
    gt_ref = [gt.get(m.query_index) for m in matches]
    has_gt = np.array([r is not None for r in gt_ref])
    correct = np.array(
        [r is not None and abs(m.ref_index - r) <= tol for m, r in zip(matches, gt_ref)]
    )
    n_gt = int(has_gt.sum())

    curve = []
    for mu in grid:
        acc = margins >= mu
        tp = int(np.count_nonzero(acc & correct))
        n_acc = int(np.count_nonzero(acc))
        fp = n_acc - tp
        p, r, f = _scores(tp, fp, n_gt)
        curve.append(PRPoint(float(mu), tp, fp, n_acc, p, r, f))
    return curve


def max_f1(curve: Sequence[PRPoint]) -> tuple[float, float]:
    """Best F1 on the curve and the smallest mu attaining it."""
    if not curve:
        raise ValueError("empty PR curve")
    best = max(p.f1 for p in curve)
    mu = min(p.mu for p in curve if p.f1 == best)
    return best, mu


def evaluate(
    matches: Sequence[TrajectoryMatch],
    gt: GroundTruth,
    cfg: PipelineConfig | None = None,
    tol: int | None = None,
    mu_grid: Sequence[float] | None = None,
) -> EvaluationReport:
    tol = (cfg.gt_tolerance if cfg else 5) if tol is None else tol
    curve = pr_curve(matches, gt, tol, mu_grid)
    best, mu = max_f1(curve)
    return EvaluationReport(curve, best, mu, cfg)

"""Constant-velocity trajectory search over a normalized difference matrix."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import PipelineConfig


@dataclass(frozen=True)
class TrajectoryMatch:
    query_index: int
    ref_index: int
    score: float
    # second-best score outside the exclusion window minus the best; inf if none
    margin: float
    accepted: bool


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def trajectory_offsets(v: float, d_s: int) -> np.ndarray:
    """Row offsets, relative to the end row, of a length-``d_s`` trajectory.

    Step k (0 = oldest query column) sits at ``r_start + round(v*k)`` with
    ``r_start = r_end - round(v*(d_s-1))``.
    """
    span = round_half_up(v * (d_s - 1))
    return np.array([round_half_up(v * k) - span for k in range(d_s)], dtype=np.int64)


def trajectory_score(
    Dn: np.ndarray, q_end: int, r_end: int, v: float, d_s: int
) -> float | None:
    """Mean normalized difference along one trajectory, or None if it leaves the matrix."""
    if q_end < d_s - 1 or q_end >= Dn.shape[1]:
        raise ValueError(f"query {q_end} cannot end a trajectory of length {d_s}")
    rows = r_end + trajectory_offsets(v, d_s)
    if rows.min() < 0 or rows.max() >= Dn.shape[0]:
        return None
    q_start = q_end - d_s + 1
    total = 0.0
    for k in range(d_s):
        total += Dn[rows[k], q_start + k]
    return total / d_s


def row_scores(Dn: np.ndarray, q_end: int, cfg: PipelineConfig) -> np.ndarray:
    """Best (lowest) trajectory score ending at each reference row; inf if none valid."""
    n_ref = Dn.shape[0]
    d_s = cfg.d_s
    q_start = q_end - d_s + 1
    r_end = np.arange(n_ref)
    best = np.full(n_ref, np.inf)
    for v in cfg.velocity_set:
        rows = r_end[:, None] + trajectory_offsets(v, d_s)[None, :]
        valid = (rows.min(axis=1) >= 0) & (rows.max(axis=1) < n_ref)
        rows = np.clip(rows, 0, n_ref - 1)
        # accumulate in trajectory order so scores match a scalar walk bit-for-bit
        total = np.zeros(n_ref)
        for k in range(d_s):
            total += Dn[rows[:, k], q_start + k]
        score = np.where(valid, total / d_s, np.inf)
        best = np.minimum(best, score)
    return best


def match_query(Dn: np.ndarray, q_end: int, cfg: PipelineConfig) -> TrajectoryMatch:
    Dn = np.asarray(Dn, dtype=np.float64)
    if q_end < cfg.d_s - 1 or q_end >= Dn.shape[1]:
        raise ValueError(f"query {q_end} cannot end a trajectory of length {cfg.d_s}")
    scores = row_scores(Dn, q_end, cfg)
    if not np.isfinite(scores).any():
        raise ValueError(f"no valid trajectory for query {q_end}")
    best = int(np.argmin(scores))
    rows = np.arange(len(scores))
    outside = np.abs(rows - best) > cfg.exclusion
    rivals = scores[outside]
    second = rivals.min() if rivals.size else np.inf
    margin = float(second - scores[best]) if np.isfinite(second) else math.inf
    return TrajectoryMatch(
        query_index=q_end,
        ref_index=best,
        score=float(scores[best]),
        margin=margin,
        accepted=margin >= cfg.mu,
    )


def match_sequence(Dn: np.ndarray, cfg: PipelineConfig) -> list[TrajectoryMatch]:
    Dn = np.asarray(Dn, dtype=np.float64)
    n_query = Dn.shape[1]
    if n_query < cfg.d_s:
        raise ValueError(f"query sequence of {n_query} frames is shorter than d_s={cfg.d_s}")
    return [match_query(Dn, q, cfg) for q in range(cfg.d_s - 1, n_query)]


MATCH_COLUMNS = ("query_index", "ref_index", "score", "margin", "accepted")


def write_matches_csv(matches: Sequence[TrajectoryMatch], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MATCH_COLUMNS)
        for m in matches:
            w.writerow([m.query_index, m.ref_index, repr(m.score), repr(m.margin), int(m.accepted)])


def read_matches_csv(path: str | Path) -> list[TrajectoryMatch]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != MATCH_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [
            TrajectoryMatch(
                query_index=int(r["query_index"]),
                ref_index=int(r["ref_index"]),
                score=float(r["score"]),
                margin=float(r["margin"]),
                accepted=r["accepted"].strip().lower() in ("1", "true"),
            )
            for r in reader
        ]

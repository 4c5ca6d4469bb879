"""End-to-end compositions of the individual stages."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import PipelineConfig
from .diffmatrix import build_difference_matrix
from .evaluate import EvaluationReport, evaluate
from .hmm import HmmParams, baum_welch, normalize_features, posterior_decode
from .ingest import GrayFrame, GroundTruth
from .normalize import segment_normalize, sliding_window_normalize
from .preprocess import preprocess_sequence
from .search import TrajectoryMatch, match_sequence
from .segmentation import SegmentSet, labels_to_segments, merge_short_segments

METHODS = ("vanilla", "semantic")


@dataclass
class SegmentationResult:
    segments: SegmentSet
    labels: np.ndarray
    params: HmmParams
    history: list[float]


def segment_reference(
    attributes: np.ndarray, cfg: PipelineConfig, N: int | None = None
) -> SegmentationResult:
    """Min-max scale the attributes, fit the HMM, decode and cut into segments."""
    X = normalize_features(attributes)
    params, history = baum_welch(X, cfg.N if N is None else N, cfg)
    labels = posterior_decode(params, X)
    segments = merge_short_segments(labels_to_segments(labels), cfg.min_segment_len)
    return SegmentationResult(segments, labels, params, history)


def difference_matrix(
    ref_frames: Sequence[GrayFrame], query_frames: Sequence[GrayFrame], cfg: PipelineConfig
) -> np.ndarray:
    refs = preprocess_sequence(ref_frames, cfg)
    queries = preprocess_sequence(query_frames, cfg)
    return build_difference_matrix(refs, queries, cfg)


def normalize_matrix(
    D: np.ndarray,
    method: str,
    cfg: PipelineConfig,
    segments: SegmentSet | None = None,
) -> np.ndarray:
    if method == "vanilla":
        return sliding_window_normalize(D, cfg.R)
    if method == "semantic":
        if segments is None:
            raise ValueError("semantic normalization requires a segment set")
        return segment_normalize(D, segments)
    raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")


def match(
    D: np.ndarray, method: str, cfg: PipelineConfig, segments: SegmentSet | None = None
) -> list[TrajectoryMatch]:
    return match_sequence(normalize_matrix(D, method, cfg, segments), cfg)


def match_and_evaluate(
    D: np.ndarray,
    gt: GroundTruth,
    method: str,
    cfg: PipelineConfig,
    segments: SegmentSet | None = None,
    mu_grid: Sequence[float] | None = None,
) -> tuple[list[TrajectoryMatch], EvaluationReport]:
    matches = match(D, method, cfg, segments)
    return matches, evaluate(matches, gt, cfg, mu_grid=mu_grid)

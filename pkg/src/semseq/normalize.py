"""Neighbourhood normalization of the difference matrix along the reference axis.

Two window rules are provided: a fixed centred window of R rows, and the
segment containing each reference row. Both z-score every query column
with the population statistics of the window; windows whose std is below
``DEGENERATE_STD`` produce zeros.
"""

from __future__ import annotations

import numpy as np

from .segmentation import SegmentSet

DEGENERATE_STD = 1e-12


def _region_stats(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise mean and population std of ``block`` (rows x queries).

    Every normalization path goes through this function so equal windows
    give bitwise-equal statistics.
    """
    mean = block.mean(axis=0)
    centered = block - mean
    std = np.sqrt((centered * centered).mean(axis=0))
    return mean, std


def _zscore(rows: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    degenerate = std < DEGENERATE_STD
    z = (rows - mean) / np.where(degenerate, 1.0, std)
    return np.where(degenerate, 0.0, z)


def window_bounds(i: int, n_ref: int, R: int) -> tuple[int, int]:
    """Centred window ``[i - R//2, i + ceil(R/2))`` truncated to the matrix."""
    return max(0, i - R // 2), min(n_ref, i + (R + 1) // 2)


def sliding_window_normalize(D: np.ndarray, R: int) -> np.ndarray:
    D = np.asarray(D, dtype=np.float64)
    if R < 1:
        raise ValueError(f"window size must be >= 1, got {R}")
    n_ref = D.shape[0]
    out = np.empty_like(D)
    cached: tuple[tuple[int, int], np.ndarray, np.ndarray] | None = None
    for i in range(n_ref):
        lo, hi = window_bounds(i, n_ref, R)
        if cached is None or cached[0] != (lo, hi):
            mean, std = _region_stats(D[lo:hi])
            cached = ((lo, hi), mean, std)
        _, mean, std = cached
        out[i] = _zscore(D[i], mean, std)
    return out


def segment_normalize(D: np.ndarray, segments: SegmentSet) -> np.ndarray:
    D = np.asarray(D, dtype=np.float64)
    if segments.T != D.shape[0]:
        raise ValueError(
            f"segments tile [0, {segments.T}) but the matrix has {D.shape[0]} reference rows"
        )
    out = np.empty_like(D)
    for lo, hi in segments:
        mean, std = _region_stats(D[lo:hi])
        out[lo:hi] = _zscore(D[lo:hi], mean, std)
    return out


def region_violations(
    Dn: np.ndarray, D: np.ndarray, segments: SegmentSet, atol: float = 1e-9
) -> list[tuple[int, int, int]]:
    """List ``(start, end, column)`` regions whose normalized output is not
    zero-mean / unit-std (or all zeros where the input slice was constant)."""
    bad = []
    for lo, hi in segments:
        _, std_in = _region_stats(D[lo:hi])
        mean, std = _region_stats(Dn[lo:hi])
        for j in range(D.shape[1]):
            if std_in[j] < DEGENERATE_STD:
                ok = bool(np.all(Dn[lo:hi, j] == 0.0))
            else:
                ok = abs(mean[j]) <= atol and abs(std[j] - 1.0) <= atol
            if not ok:
                bad.append((lo, hi, j))
    return bad

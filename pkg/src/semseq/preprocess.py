"""Frame downsampling and patch normalization.

A preprocessed frame is a float64 array of shape ``(S_y, S_x)``; a
preprocessed sequence is stacked into ``(n, S_y, S_x)``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .config import PipelineConfig
from .ingest import GrayFrame

# tiles with a population std below this are treated as constant
DEGENERATE_STD = 1e-12


def _bin_edges(size: int, bins: int) -> np.ndarray:
    return (np.arange(bins, dtype=np.int64) * size) // bins


def downsample(frame: GrayFrame | np.ndarray, S_x: int, S_y: int) -> np.ndarray:
    """Area-average ``frame`` onto an ``S_y`` x ``S_x`` grid.

    Output cell (y, x) is the mean of source rows ``[floor(y*H/S_y),
    floor((y+1)*H/S_y))`` and the analogous column range.
    """
    px = frame.pixels if isinstance(frame, GrayFrame) else np.asarray(frame)
    px = px.astype(np.float64)
    h, w = px.shape
    if w < S_x or h < S_y:
        raise ValueError(f"cannot upsample {w}x{h} frame to {S_x}x{S_y}")
    if (w, h) == (S_x, S_y):
        return px.copy()
    if w % S_x == 0 and h % S_y == 0:
        return px.reshape(S_y, h // S_y, S_x, w // S_x).mean(axis=(1, 3))
    ry = _bin_edges(h, S_y)
    rx = _bin_edges(w, S_x)
    sums = np.add.reduceat(np.add.reduceat(px, ry, axis=0), rx, axis=1)
    counts = np.outer(np.diff(np.append(ry, h)), np.diff(np.append(rx, w)))
    return sums / counts


def patch_normalize(m: np.ndarray, P: int) -> np.ndarray:
    """Z-score each non-overlapping P x P tile; constant tiles become zeros."""
    m = np.asarray(m, dtype=np.float64)
    h, w = m.shape
    if P < 1 or h % P or w % P:
        raise ValueError(f"{w}x{h} matrix is not divisible into {P}x{P} patches")
    tiles = m.reshape(h // P, P, w // P, P)
    mean = tiles.mean(axis=(1, 3), keepdims=True)
    centered = tiles - mean
    std = np.sqrt((centered**2).mean(axis=(1, 3), keepdims=True))
    degenerate = std < DEGENERATE_STD
    out = np.where(degenerate, 0.0, centered / np.where(degenerate, 1.0, std))
    return out.reshape(h, w)


def preprocess_frame(frame: GrayFrame, cfg: PipelineConfig) -> np.ndarray:
    return patch_normalize(downsample(frame, cfg.S_x, cfg.S_y), cfg.P)


def preprocess_sequence(frames: Sequence[GrayFrame], cfg: PipelineConfig) -> np.ndarray:
    """Preprocess every frame; returns an ``(n, S_y, S_x)`` stack."""
    if len(frames) == 0:
        raise ValueError("empty frame sequence")
    shape = frames[0].pixels.shape
    for i, fr in enumerate(frames):
        if fr.pixels.shape != shape:
            raise ValueError(f"frame {i} has shape {fr.pixels.shape}, expected {shape}")
    return np.stack([preprocess_frame(fr, cfg) for fr in frames])

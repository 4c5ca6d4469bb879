"""Sum-of-absolute-differences matrix between reference and query frames."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .config import PipelineConfig


def offset_order(O: int) -> list[int]:
    """Shifts in tie-break order: 0, -1, +1, -2, +2, ..."""
    order = [0]
    for k in range(1, O + 1):
        order += [-k, k]
    return order


def _overlap(width: int, o: int) -> tuple[slice, slice]:
    # reference column x is compared against query column x + o
    if o >= 0:
        return slice(0, width - o), slice(o, width)
    return slice(-o, width), slice(0, width + o)


def sad(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute difference of two equally-sized preprocessed frames."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")
    return float(np.abs(b - a).mean())


def best_offset(a: np.ndarray, b: np.ndarray, O: int) -> tuple[float, int]:
    """Return ``(score, shift)`` minimising the overlap-mean SAD over |shift| <= O."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")
    width = a.shape[1]
    if O < 0 or O >= width:
        raise ValueError(f"offset range {O} leaves no overlap for width {width}")
    best, best_o = np.inf, 0
    for o in offset_order(O):
        sa, sb = _overlap(width, o)
        score = float(np.abs(b[:, sb] - a[:, sa]).mean())
        if score < best:
            best, best_o = score, o
    return best, best_o


def sad_with_offset(a: np.ndarray, b: np.ndarray, O: int) -> float:
    return best_offset(a, b, O)[0]


def build_difference_matrix(
    refs: np.ndarray, queries: np.ndarray, cfg: PipelineConfig | int
) -> np.ndarray:
    """``D[i, j]`` = offset-tolerant SAD between reference i and query j.

    ``cfg`` may be a config or a bare offset range.
    """
    O = cfg if isinstance(cfg, int) else cfg.O
    refs = np.asarray(refs, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    if refs.ndim != 3 or queries.ndim != 3 or len(refs) == 0 or len(queries) == 0:
        raise ValueError("expected nonempty (n, S_y, S_x) frame stacks")
    if refs.shape[1:] != queries.shape[1:]:
        raise ValueError(f"frame shapes differ: {refs.shape[1:]} vs {queries.shape[1:]}")
    height, width = refs.shape[1:]
    if O < 0 or O >= width:
        raise ValueError(f"offset range {O} leaves no overlap for width {width}")
    D = None
    for o in offset_order(O):
        sa, sb = _overlap(width, o)
        a = refs[:, :, sa].reshape(len(refs), -1)
        b = queries[:, :, sb].reshape(len(queries), -1)
        Do = cdist(a, b, metric="cityblock") / a.shape[1]
        D = Do if D is None else np.minimum(D, Do)
    return D


def write_matrix_csv(M: np.ndarray, path: str | Path) -> None:
    """Headerless CSV, one reference row per line."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(M, dtype=float):
            w.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        return np.array([[float(c) for c in row] for row in csv.reader(fh) if row])

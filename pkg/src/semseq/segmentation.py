"""Temporal segments of the reference traversal derived from HMM labels."""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class SegmentSet:
    """Half-open intervals ``[start, end)`` that exactly tile ``[0, T)``.

    ``labels`` optionally carries the HMM label of each interval.
    """

    intervals: tuple[tuple[int, int], ...]
    labels: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        iv = tuple((int(s), int(e)) for s, e in self.intervals)
        object.__setattr__(self, "intervals", iv)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(int(x) for x in self.labels))
            if len(self.labels) != len(iv):
                raise ValueError("one label per interval required")
        if not iv:
            raise ValueError("segment set must contain at least one interval")
        if iv[0][0] != 0:
            raise ValueError(f"first segment must start at 0, got {iv[0][0]}")
        for k, (s, e) in enumerate(iv):
            if e <= s:
                raise ValueError(f"empty or inverted segment {(s, e)}")
            if k and iv[k - 1][1] != s:
                raise ValueError(f"segments {iv[k - 1]} and {(s, e)} do not abut")

    @property
    def T(self) -> int:
        return self.intervals[-1][1]

    @property
    def starts(self) -> list[int]:
        return [s for s, _ in self.intervals]

    def __len__(self) -> int:
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    @classmethod
    def whole(cls, T: int) -> "SegmentSet":
        return cls(((0, T),))


def labels_to_segments(labels: Sequence[int]) -> SegmentSet:
    """Split the label sequence into maximal runs of equal labels."""
    L = np.asarray(labels)
    if L.ndim != 1 or L.size == 0:
        raise ValueError("label sequence must be a nonempty 1-D sequence")
    cuts = np.flatnonzero(L[1:] != L[:-1]) + 1
    bounds = np.concatenate(([0], cuts, [L.size]))
    intervals = tuple(zip(bounds[:-1].tolist(), bounds[1:].tolist()))
    return SegmentSet(intervals, tuple(L[bounds[:-1]].tolist()))


def merge_short_segments(s: SegmentSet, min_len: int) -> SegmentSet:
    """Fold every interval shorter than ``min_len`` into its left neighbour.

    A short leading interval is folded into the one after it. Merged
    intervals keep the label of the interval that absorbed them.
    """
    if min_len <= 1 or len(s) == 1:
        return s
    labels = list(s.labels) if s.labels is not None else [None] * len(s)
    out: list[list] = []
    for (start, end), lab in zip(s.intervals, labels):
        if out and end - start < min_len:
            out[-1][1] = end
        else:
            out.append([start, end, lab])
    # a short first interval has no left neighbour
    if len(out) > 1 and out[0][1] - out[0][0] < min_len:
        out[1][0] = out[0][0]
        out.pop(0)
    merged_labels = None if s.labels is None else tuple(x[2] for x in out)
    return SegmentSet(tuple((a, b) for a, b, _ in out), merged_labels)


def segment_of(s: SegmentSet, t: int) -> tuple[int, int]:
    if not 0 <= t < s.T:
        raise IndexError(f"frame {t} outside [0, {s.T})")
    k = bisect.bisect_right(s.starts, t) - 1
    return s.intervals[k]


def write_segments_csv(s: SegmentSet, path: str | Path) -> None:
    """CSV ``start,end,label``; the label column is blank when unknown."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["start", "end", "label"])
        labels = s.labels if s.labels is not None else [""] * len(s)
        for (a, b), lab in zip(s.intervals, labels):
            w.writerow([a, b, lab])


def read_segments_csv(path: str | Path) -> SegmentSet:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no segments")
    intervals = tuple((int(r["start"]), int(r["end"])) for r in rows)
    raw = [r.get("label", "") for r in rows]
    labels = None if any(x in ("", None) for x in raw) else tuple(int(x) for x in raw)
    return SegmentSet(intervals, labels)

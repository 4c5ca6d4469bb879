"""Readers and writers for frames, attribute vectors, ground truth and reports.

File formats:

* frames: a directory of binary PGM (P5, maxval 255) files named by
  zero-padded frame number, e.g. ``000000.pgm``;
* attributes: headerless CSV, one frame per row, values in [0, 1];
* ground truth: headerless CSV ``query_index,reference_index`` (0-based);
* reports: CSV ``mu,precision,recall,f1`` with a trailing ``max_f1`` row,
  plus a JSON mirror carrying the full report.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from .evaluate import EvaluationReport

_FRAME_NAME = re.compile(r"^(\d+)\.pgm$")


@dataclass(frozen=True, eq=False)
class GrayFrame:
    """8-bit grayscale image, stored as an (height, width) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"frame must be a nonempty 2-D array, got shape {px.shape}")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255) or np.any(px != np.round(px)):
                raise ValueError("frame intensities must be integers in [0, 255]")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def intensities(self) -> bytes:
        """Row-major raw bytes."""
        return self.pixels.tobytes()

    @classmethod
    def from_bytes(cls, width: int, height: int, data: bytes) -> "GrayFrame":
        if len(data) != width * height:
            raise ValueError(f"expected {width * height} bytes, got {len(data)}")
        return cls(np.frombuffer(data, dtype=np.uint8).reshape(height, width))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrayFrame):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None  # type: ignore[assignment]


# ---------------------------------------------------------------------------
# PGM frames
# ---------------------------------------------------------------------------


def _pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Pull ``count`` whitespace-separated header tokens, skipping comments."""
    tokens: list[bytes] = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path: str | Path) -> GrayFrame:
    data = Path(path).read_bytes()
    tokens, pos = _pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file, magic {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ValueError(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise ValueError(f"{path}: maxval must be 255, got {maxval}")
    if width < 1 or height < 1:
        raise ValueError(f"{path}: invalid dimensions {width}x{height}")
    # exactly one whitespace byte separates the header from the raster
    raster = data[pos + 1 : pos + 1 + width * height]
    if len(raster) != width * height:
        raise ValueError(f"{path}: truncated raster")
    return GrayFrame.from_bytes(width, height, raster)


def write_pgm(frame: GrayFrame, path: str | Path) -> None:
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + frame.intensities)


def load_frame_dir(path: str | Path) -> list[GrayFrame]:
    """Load every ``NNNNNN.pgm`` in ``path``, ordered by frame number."""
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"frame directory not found: {root}")
    numbered = []
    for entry in root.iterdir():
        m = _FRAME_NAME.match(entry.name)
        if m and entry.is_file():
            numbered.append((int(m.group(1)), entry))
    if not numbered:
        raise ValueError(f"no frames in {root}")
    numbered.sort()
    frames = [read_pgm(p) for _, p in numbered]
    shape = frames[0].pixels.shape
    for (idx, p), fr in zip(numbered, frames):
        if fr.pixels.shape != shape:
            raise ValueError(
                f"{p.name}: dimension mismatch, {fr.width}x{fr.height} "
                f"vs {shape[1]}x{shape[0]}"
            )
    return frames


def write_frame_dir(frames: Sequence[GrayFrame], path: str | Path) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    for i, fr in enumerate(frames):
        write_pgm(fr, root / f"{i:06d}.pgm")


# ---------------------------------------------------------------------------
# Attribute vectors
# ---------------------------------------------------------------------------


def _read_numeric_rows(path: str | Path) -> list[list[float]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric cell") from exc
    return rows


def load_attributes(path: str | Path) -> np.ndarray:
    """Read a T x K attribute-probability matrix."""
    rows = _read_numeric_rows(path)
    if not rows:
        raise ValueError(f"{path}: no attribute rows")
    k = len(rows[0])
    for lineno, row in enumerate(rows, start=1):
        if len(row) != k:
            raise ValueError(f"{path}: ragged row {lineno}, {len(row)} columns, expected {k}")
    values = np.array(rows, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{path}: non-finite attribute value")
    bad = np.argwhere((values < 0.0) | (values > 1.0))
    if bad.size:
        r, c = bad[0]
        raise ValueError(
            f"{path}: attribute value {values[r, c]!r} at row {r}, column {c} "
            "outside [0, 1]"
        )
    return values


def write_attributes(values: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(values, dtype=float):
            w.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# Ground truth
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroundTruth:
    """Query -> reference correspondences, at most one reference per query."""

    pairs: dict[int, int] = field(default_factory=dict)

    @classmethod
    def from_pairs(
        cls,
        pairs: Iterable[tuple[int, int]],
        n_query: int | None = None,
        n_ref: int | None = None,
    ) -> "GroundTruth":
        mapping: dict[int, int] = {}
        for q, r in pairs:
            q, r = int(q), int(r)
            if q in mapping:
                raise ValueError(f"duplicate ground truth for query {q}")
            if q < 0 or (n_query is not None and q >= n_query):
                raise ValueError(f"query index {q} out of range")
            if r < 0 or (n_ref is not None and r >= n_ref):
                raise ValueError(f"reference index {r} out of range")
            mapping[q] = r
        return cls(mapping)

    @classmethod
    def identity(cls, n: int) -> "GroundTruth":
        return cls({i: i for i in range(n)})

    def get(self, query_index: int) -> int | None:
        return self.pairs.get(query_index)

    def __contains__(self, query_index: object) -> bool:
        return query_index in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)


def load_ground_truth(
    path: str | Path, n_query: int | None = None, n_ref: int | None = None
) -> GroundTruth:
    pairs = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                pairs.append((int(row[0]), int(row[1])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer index") from exc
    return GroundTruth.from_pairs(pairs, n_query=n_query, n_ref=n_ref)


def write_ground_truth(gt: GroundTruth, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for q in sorted(gt.pairs):
            w.writerow([q, gt.pairs[q]])


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

REPORT_COLUMNS = ("mu", "precision", "recall", "f1")


def write_report(report: "EvaluationReport", path: str | Path, format: str = "csv") -> None:
    """Write a report as CSV (PR curve + summary row) or JSON (everything).

    Floats are written with ``repr`` so they round-trip exactly.
    """
    path = Path(path)
    if format == "json":
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        return
    if format != "csv":
        raise ValueError(f"unknown report format {format!r}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for pt in report.curve:
            w.writerow([repr(pt.mu), repr(pt.precision), repr(pt.recall), repr(pt.f1)])
        if report.curve:
            w.writerow(["max_f1", repr(report.argmax_mu), "", repr(report.max_f1)])


def read_report_csv(path: str | Path) -> tuple[list[tuple[float, float, float, float]], tuple[float, float] | None]:
    """Parse a report CSV back into ``(curve_rows, (argmax_mu, max_f1))``."""
    curve = []
    summary = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != REPORT_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            if row[0] == "max_f1":
                summary = (float(row[1]), float(row[3]))
            else:
                curve.append(tuple(float(c) for c in row))
    return curve, summary


def read_report_json(path: str | Path) -> "EvaluationReport":
    from .evaluate import EvaluationReport

    with open(path, encoding="utf-8") as fh:
        return EvaluationReport.from_dict(json.load(fh))

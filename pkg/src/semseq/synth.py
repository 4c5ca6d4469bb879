"""Synthetic reference/query traversals with per-zone appearance changes.

Every frame index gets its own seeded texture, so places are
distinguishable. Zones apply a contrast gain about mid-grey and a
brightness offset, ``v' = gain * (v - 128) + 128 + offset``, before pixel
noise and clipping to [0, 255]. Base textures stay within 128 +- 32, so
gains up to 2 with offsets up to +-60 never clip.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.ndimage import uniform_filter

from .ingest import (
    GrayFrame,
    GroundTruth,
    load_attributes,
    load_frame_dir,
    load_ground_truth,
    write_attributes,
    write_frame_dir,
    write_ground_truth,
)

MID_GREY = 128.0
# base textures are clipped to this many standard deviations
_PATTERN_Z_CLIP = 3.2

# stream tags for seed derivation
_ATTR_STREAM = 1
_REF_NOISE_STREAM = 2
_QUERY_NOISE_STREAM = 3


@dataclass(frozen=True)
class Zone:
    start: int
    end: int
    brightness_offset: float = 0.0
    contrast_gain: float = 1.0
    attribute_profile: tuple[float, ...] = ()


@dataclass(frozen=True)
class ZoneTransform:
    start: int
    end: int
    contrast_gain: float = 1.0
    brightness_offset: float = 0.0


@dataclass(frozen=True)
class SynthSpec:
    n_frames: int
    zones: tuple[Zone, ...]
    pattern_seed: int = 0
    noise_sigma: float = 0.0
    lateral_offset: int = 0
    width: int = 64
    height: int = 32
    attribute_noise: float = 0.05
    pattern_amplitude: float = 10.0
    smoothing: int = 3
    # correlation between consecutive base textures (0 = independent places)
    continuity: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "zones", tuple(self.zones))
        self.validate()

    @property
    def K(self) -> int:
        return len(self.zones[0].attribute_profile)

    def validate(self) -> None:
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        if not self.zones:
            raise ValueError("at least one zone required")
        _check_tiling([(z.start, z.end) for z in self.zones], self.n_frames)
        k = len(self.zones[0].attribute_profile)
        for z in self.zones:
            if not z.contrast_gain > 0:
                raise ValueError(f"contrast_gain must be > 0, got {z.contrast_gain}")
            if len(z.attribute_profile) != k:
                raise ValueError("all zones need attribute profiles of the same length")
            if any(not 0.0 <= a <= 1.0 for a in z.attribute_profile):
                raise ValueError("attribute profile values must lie in [0, 1]")
        if self.noise_sigma < 0 or self.attribute_noise < 0:
            raise ValueError("noise levels must be >= 0")
        if self.lateral_offset < 0 or self.lateral_offset >= self.width:
            raise ValueError("lateral_offset must be in [0, width)")
        if self.width < 1 or self.height < 1 or self.smoothing < 1:
            raise ValueError("invalid frame geometry")
        if not 0.0 <= self.continuity < 1.0:
            raise ValueError("continuity must be in [0, 1)")

    def zone_labels(self) -> np.ndarray:
        labels = np.empty(self.n_frames, dtype=np.int64)
        for k, z in enumerate(self.zones):
            labels[z.start : z.end] = k
        return labels


def _check_tiling(intervals: Sequence[tuple[int, int]], n: int) -> None:
    pos = 0
    for s, e in intervals:
        if s != pos or e <= s:
            raise ValueError(f"zones must tile [0, {n}) without gaps, got {list(intervals)}")
        pos = e
    if pos != n:
        raise ValueError(f"zones end at {pos}, expected {n}")


def base_patterns(spec: SynthSpec) -> np.ndarray:
    """Untransformed textures, ``(n_frames, height, width + 2*lateral_offset)``."""
    pad = spec.lateral_offset
    shape = (spec.height, spec.width + 2 * pad)
    out = np.empty((spec.n_frames,) + shape)
    rho = spec.continuity
    prev = None
    for t in range(spec.n_frames):
        rng = np.random.default_rng([spec.pattern_seed, t])
        z = uniform_filter(rng.standard_normal(shape), size=spec.smoothing, mode="wrap")
        z /= z.std()
        if prev is not None and rho > 0:
            z = rho * prev + np.sqrt(1.0 - rho * rho) * z
        prev = z
        out[t] = MID_GREY + spec.pattern_amplitude * np.clip(z, -_PATTERN_Z_CLIP, _PATTERN_Z_CLIP)
    return out


def _render(
    base: np.ndarray, gain: float, offset: float, noise_sigma: float, rng: np.random.Generator
) -> GrayFrame:
    v = gain * (base - MID_GREY) + MID_GREY + offset
    if noise_sigma > 0:
        v = v + rng.normal(0.0, noise_sigma, size=v.shape)
    return GrayFrame(np.round(np.clip(v, 0.0, 255.0)).astype(np.uint8))


def _crop(pattern: np.ndarray, spec: SynthSpec, shift: int) -> np.ndarray:
    left = spec.lateral_offset - shift
    return pattern[:, left : left + spec.width]


def generate_attributes(spec: SynthSpec) -> np.ndarray:
    rng = np.random.default_rng([spec.pattern_seed, _ATTR_STREAM])
    labels = spec.zone_labels()
    profiles = np.array([z.attribute_profile for z in spec.zones], dtype=float)
    if profiles.shape[1] == 0:
        return np.zeros((spec.n_frames, 0))
    sigma = spec.attribute_noise
    noise = np.clip(rng.normal(0.0, 1.0, (spec.n_frames, profiles.shape[1])), -3.0, 3.0) * sigma
    return np.clip(profiles[labels] + noise, 0.0, 1.0)


def generate_traversal(spec: SynthSpec) -> tuple[list[GrayFrame], np.ndarray, np.ndarray]:
    """Reference frames, their attribute vectors, and the true zone labels."""
    spec.validate()
    base = base_patterns(spec)
    labels = spec.zone_labels()
    frames = []
    for t in range(spec.n_frames):
        z = spec.zones[labels[t]]
        rng = np.random.default_rng([spec.pattern_seed, _REF_NOISE_STREAM, t])
        frames.append(
            _render(_crop(base[t], spec, 0), z.contrast_gain, z.brightness_offset, spec.noise_sigma, rng)
        )
    return frames, generate_attributes(spec), labels


def generate_query(
    spec: SynthSpec,
    ref_frames: Sequence[GrayFrame],
    query_transform: Sequence[ZoneTransform],
    noise_seed: int | None = None,
) -> tuple[list[GrayFrame], GroundTruth]:
    """Re-traverse the same places under per-zone gain/offset overrides.

    Query frame t shows reference place t shifted right by
    ``spec.lateral_offset`` pixels; ground truth is the identity pairing.
    """
    if len(ref_frames) != spec.n_frames:
        raise ValueError(f"expected {spec.n_frames} reference frames, got {len(ref_frames)}")
    bounds = [(tr.start, tr.end) for tr in query_transform]
    if bounds != [(z.start, z.end) for z in spec.zones]:
        raise ValueError("query transforms must use the reference zone boundaries")
    for tr in query_transform:
        if not tr.contrast_gain > 0:
            raise ValueError("contrast_gain must be > 0")
    base = base_patterns(spec)
    labels = spec.zone_labels()
    seed = spec.pattern_seed if noise_seed is None else noise_seed
    frames = []
    for t in range(spec.n_frames):
        tr = query_transform[labels[t]]
        rng = np.random.default_rng([seed, _QUERY_NOISE_STREAM, t])
        frames.append(
            _render(
                _crop(base[t], spec, spec.lateral_offset),
                tr.contrast_gain,
                tr.brightness_offset,
                spec.noise_sigma,
                rng,
            )
        )
    return frames, GroundTruth.identity(spec.n_frames)


def same_transforms(spec: SynthSpec) -> list[ZoneTransform]:
    return [ZoneTransform(z.start, z.end, z.contrast_gain, z.brightness_offset) for z in spec.zones]


# ---------------------------------------------------------------------------
# corpora
# ---------------------------------------------------------------------------


@dataclass
class Corpus:
    ref_frames: list[GrayFrame]
    query_frames: list[GrayFrame]
    attributes: np.ndarray
    ground_truth: GroundTruth
    zone_labels: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def make_corpus(
    spec: SynthSpec, query_transform: Sequence[ZoneTransform] | None = None
) -> Corpus:
    refs, attrs, labels = generate_traversal(spec)
    qt = same_transforms(spec) if query_transform is None else query_transform
    queries, gt = generate_query(spec, refs, qt)
    return Corpus(refs, queries, attrs, gt, labels)


def write_corpus(corpus: Corpus, root: str | Path) -> None:
    """Write a corpus directory: ``ref/``, ``query/``, ``attributes.csv``,
    ``ground_truth.csv`` and, when known, ``zones.csv``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    write_frame_dir(corpus.ref_frames, root / "ref")
    write_frame_dir(corpus.query_frames, root / "query")
    write_attributes(corpus.attributes, root / "attributes.csv")
    write_ground_truth(corpus.ground_truth, root / "ground_truth.csv")
    if corpus.zone_labels is not None:
        np.savetxt(root / "zones.csv", corpus.zone_labels, fmt="%d")


def load_corpus(root: str | Path) -> Corpus:
    root = Path(root)
    refs = load_frame_dir(root / "ref")
    queries = load_frame_dir(root / "query")
    attrs = load_attributes(root / "attributes.csv")
    gt = load_ground_truth(root / "ground_truth.csv", n_query=len(queries), n_ref=len(refs))
    zones = root / "zones.csv"
    labels = np.loadtxt(zones, dtype=np.int64, ndmin=1) if zones.exists() else None
    return Corpus(refs, queries, attrs, gt, labels)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def zone_profiles(
    n_zones: int,
    K: int,
    n_active: int,
    rng: np.random.Generator,
    levels: Sequence[float] = (0.1, 0.45, 0.8),
) -> list[tuple[float, ...]]:
    """Attribute profiles whose active dimensions differ by >= 0.35 across zones.

    Each active dimension assigns the zones a random permutation of
    ``levels``; inactive dimensions share one random level.
    """
    if n_zones > len(levels):
        raise ValueError(f"at most {len(levels)} zones supported with these levels")
    prof = np.tile(rng.uniform(0.1, 0.9, size=K), (n_zones, 1))
    for k in range(n_active):
        prof[:, k] = np.asarray(levels)[rng.permutation(len(levels))[:n_zones]]
    return [tuple(float(x) for x in row) for row in prof]


def even_bounds(n_frames: int, n_zones: int) -> list[tuple[int, int]]:
    edges = [(k * n_frames) // n_zones for k in range(n_zones + 1)]
    return list(zip(edges[:-1], edges[1:]))


def inversion_preset(seed: int = 1, n_frames: int = 200, K: int = 102) -> tuple[SynthSpec, list[ZoneTransform]]:
    """Outdoor-then-indoor route: bright/dark in the reference, dark/bright in the query.

    Both conditions saturate a large share of pixels, and consecutive
    places are strongly correlated.
    """
    rng = np.random.default_rng([seed, 7])
    bounds = even_bounds(n_frames, 2)
    profiles = zone_profiles(2, K, 20, rng)
    bright, dark = (1.0, 125.0), (1.0, -135.0)
    zones = tuple(
        Zone(s, e, off, gain, prof)
        for (s, e), (gain, off), prof in zip(bounds, (bright, dark), profiles)
    )
    spec = SynthSpec(n_frames, zones, pattern_seed=seed, noise_sigma=2.0, continuity=0.9)
    query = [ZoneTransform(s, e, g, o) for (s, e), (g, o) in zip(bounds, (dark, bright))]
    return spec, query


def invariance_preset(
    seed: int = 1, n_frames: int = 200, n_zones: int = 3, K: int = 102
) -> tuple[SynthSpec, list[ZoneTransform]]:
    """Noise-free route whose query zones get random gains in [0.5, 2] and
    offsets in [-60, 60], all inside the unclipped range."""
    rng = np.random.default_rng([seed, 11])
    bounds = even_bounds(n_frames, n_zones)
    profiles = zone_profiles(n_zones, K, 20, rng)
    zones = tuple(Zone(s, e, 0.0, 1.0, p) for (s, e), p in zip(bounds, profiles))
    spec = SynthSpec(n_frames, zones, pattern_seed=seed, noise_sigma=0.0, continuity=0.9)
    query = [
        ZoneTransform(s, e, float(rng.uniform(0.5, 2.0)), float(rng.uniform(-60.0, 60.0)))
        for s, e in bounds
    ]
    return spec, query


PRESETS = {"inversion": inversion_preset, "invariance": invariance_preset}


def spec_from_dict(d: dict) -> tuple[SynthSpec, list[ZoneTransform] | None]:
    """Parse a JSON-style synth description.

    ``zones`` entries carry ``start, end, brightness_offset, contrast_gain,
    attribute_profile``; an optional ``query_transform`` list carries
    ``start, end, contrast_gain, brightness_offset``.
    """
    d = dict(d)
    zones = tuple(
        Zone(
            int(z["start"]),
            int(z["end"]),
            float(z.get("brightness_offset", 0.0)),
            float(z.get("contrast_gain", 1.0)),
            tuple(float(a) for a in z.get("attribute_profile", ())),
        )
        for z in d.pop("zones")
    )
    qt = d.pop("query_transform", None)
    query = None
    if qt is not None:
        query = [
            ZoneTransform(
                int(z["start"]),
                int(z["end"]),
                float(z.get("contrast_gain", 1.0)),
                float(z.get("brightness_offset", 0.0)),
            )
            for z in qt
        ]
    return SynthSpec(zones=zones, **d), query

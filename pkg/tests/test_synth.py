import numpy as np
import pytest

from semseq.config import PipelineConfig
from semseq.diffmatrix import build_difference_matrix, sad
from semseq.pipeline import difference_matrix
from semseq.synth import (
    SynthSpec,
    Zone,
    ZoneTransform,
    base_patterns,
    generate_query,
    generate_traversal,
    inversion_preset,
    invariance_preset,
    load_corpus,
    make_corpus,
    same_transforms,
    spec_from_dict,
    write_corpus,
)


def two_zone_spec(**kw):
    zones = (Zone(0, 10, 0.0, 1.0, (0.2, 0.8)), Zone(10, 20, 80.0, 1.0, (0.8, 0.2)))
    return SynthSpec(20, zones, **kw)


def pix(frames):
    return np.stack([f.pixels.astype(float) for f in frames])


class TestTraversal:
    def test_deterministic(self):
        a, attrs_a, _ = generate_traversal(two_zone_spec(noise_sigma=3.0))
        b, attrs_b, _ = generate_traversal(two_zone_spec(noise_sigma=3.0))
        assert a == b
        assert np.array_equal(attrs_a, attrs_b)

    def test_seed_changes_output(self):
        a, _, _ = generate_traversal(two_zone_spec(pattern_seed=0))
        b, _, _ = generate_traversal(two_zone_spec(pattern_seed=1))
        assert a != b

    def test_brightness_offset_shifts_mean(self):
        frames, _, labels = generate_traversal(two_zone_spec())
        px = pix(frames)
        # textures stay in 128 +- 32, so +80 never clips
        assert abs(px[labels == 0].mean() - 128.0) < 2.0
        assert abs(px[labels == 1].mean() - px[labels == 0].mean() - 80.0) < 2.0

    def test_textures_within_band(self):
        base = base_patterns(two_zone_spec(continuity=0.9))
        assert base.min() >= 128 - 32 and base.max() <= 128 + 32

    def test_continuity_correlates_neighbours(self):
        base = base_patterns(two_zone_spec(continuity=0.9))
        c = np.corrcoef(base[4].ravel(), base[5].ravel())[0, 1]
        assert c > 0.8
        base0 = base_patterns(two_zone_spec())
        assert abs(np.corrcoef(base0[4].ravel(), base0[5].ravel())[0, 1]) < 0.2

    def test_attributes_follow_zones(self):
        _, attrs, labels = generate_traversal(two_zone_spec(attribute_noise=0.02))
        assert attrs.shape == (20, 2)
        np.testing.assert_allclose(attrs[labels == 0].mean(axis=0), [0.2, 0.8], atol=0.03)
        assert attrs.min() >= 0 and attrs.max() <= 1


class TestQuery:
    def test_same_transform_noise_free_equals_reference(self):
        spec = two_zone_spec()
        refs, _, _ = generate_traversal(spec)
        queries, gt = generate_query(spec, refs, same_transforms(spec))
        assert queries == refs
        assert [gt.get(i) for i in range(20)] == list(range(20))

    def test_lateral_offset_recovered_by_offset_search(self):
        spec = two_zone_spec(lateral_offset=3)
        refs, _, _ = generate_traversal(spec)
        queries, _ = generate_query(spec, refs, same_transforms(spec))
        R, Q = pix(refs), pix(queries)
        D = build_difference_matrix(R, Q, 3)
        assert np.all(np.diag(D) == 0.0)
        assert all(sad(R[t], Q[t]) > 0 for t in range(20))

    def test_transform_boundaries_checked(self):
        spec = two_zone_spec()
        refs, _, _ = generate_traversal(spec)
        with pytest.raises(ValueError):
            generate_query(spec, refs, [ZoneTransform(0, 12), ZoneTransform(12, 20)])

    def test_affine_query_clean_in_preset(self):
        spec, qt = invariance_preset(seed=2, n_frames=60)
        refs, _, _ = generate_traversal(spec)
        queries, _ = generate_query(spec, refs, qt)
        px = pix(queries)
        assert px.min() > 0 and px.max() < 255


class TestSpecValidation:
    @pytest.mark.parametrize(
        "zones",
        [
            (Zone(0, 5), Zone(6, 20)),
            (Zone(0, 10), Zone(10, 19)),
            (Zone(0, 20, contrast_gain=0.0),),
            (Zone(0, 10, attribute_profile=(0.1,)), Zone(10, 20, attribute_profile=(0.1, 0.2))),
            (Zone(0, 20, attribute_profile=(1.5,)),),
        ],
    )
    def test_rejects(self, zones):
        with pytest.raises(ValueError):
            SynthSpec(20, zones)

    def test_lateral_offset_bounds(self):
        with pytest.raises(ValueError):
            two_zone_spec(lateral_offset=64)

    def test_from_dict(self):
        spec, qt = spec_from_dict(
            {
                "n_frames": 6,
                "zones": [{"start": 0, "end": 6, "attribute_profile": [0.5]}],
                "query_transform": [{"start": 0, "end": 6, "contrast_gain": 2.0}],
                "noise_sigma": 1.0,
            }
        )
        assert spec.n_frames == 6 and spec.noise_sigma == 1.0
        assert qt == [ZoneTransform(0, 6, 2.0, 0.0)]


class TestCorpus:
    def test_roundtrip(self, tmp_path):
        corpus = make_corpus(two_zone_spec(noise_sigma=1.0))
        write_corpus(corpus, tmp_path / "c")
        back = load_corpus(tmp_path / "c")
        assert back.ref_frames == corpus.ref_frames
        assert back.query_frames == corpus.query_frames
        np.testing.assert_array_equal(back.attributes, corpus.attributes)
        np.testing.assert_array_equal(back.zone_labels, corpus.zone_labels)
        assert len(back.ground_truth) == 20


class TestPresets:
    def test_inversion_swaps_conditions(self):
        spec, qt = inversion_preset(n_frames=40)
        assert [z.brightness_offset for z in spec.zones] == [qt[1].brightness_offset, qt[0].brightness_offset]

    def test_inversion_is_clipped(self):
        corpus = make_corpus(*inversion_preset(n_frames=40))
        px = pix(corpus.ref_frames)
        assert np.mean(px[:20] == 255) > 0.1
        assert np.mean(px[20:] == 0) > 0.1

    def test_preset_difference_matrix_shape(self):
        corpus = make_corpus(*invariance_preset(n_frames=30))
        D = difference_matrix(corpus.ref_frames, corpus.query_frames, PipelineConfig(O=0))
        assert D.shape == (30, 30)
        assert np.all(np.argmin(D, axis=0) == np.arange(30))


def test_identity_zone_renders_raw_patterns():
    spec = SynthSpec(8, (Zone(0, 8),), pattern_seed=4)
    frames, _, _ = generate_traversal(spec)
    np.testing.assert_array_equal(pix(frames), np.round(base_patterns(spec)))


def test_noise_free_self_match_recovers_identity():
    from semseq.pipeline import match
    from semseq.segmentation import SegmentSet

    spec = SynthSpec(40, (Zone(0, 20), Zone(20, 40, 30.0)), pattern_seed=2, continuity=0.9)
    corpus = make_corpus(spec)
    cfg = PipelineConfig(d_s=8)
    D = difference_matrix(corpus.ref_frames, corpus.query_frames, cfg)
    segments = SegmentSet(((0, 20), (20, 40)))
    for method, seg in (("vanilla", None), ("semantic", segments)):
        ms = match(D, method, cfg.with_overrides(R=10), seg)
        assert all(m.ref_index == m.query_index and m.margin > 0 for m in ms), method

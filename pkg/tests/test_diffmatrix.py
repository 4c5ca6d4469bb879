import numpy as np
import pytest

from semseq.diffmatrix import (
    best_offset,
    build_difference_matrix,
    read_matrix_csv,
    sad,
    sad_with_offset,
    write_matrix_csv,
)


def naive_overlap_sad(a, b, o):
    """Mean |b[y, x+o] - a[y, x]| over columns where both exist."""
    h, w = a.shape
    total, count = 0.0, 0
    for y in range(h):
        for x in range(w):
            if 0 <= x + o < w:
                total += abs(b[y, x + o] - a[y, x])
                count += 1
    return total / count


def rand_frames(n, shape=(8, 16), seed=0):
    return np.random.default_rng(seed).standard_normal((n,) + shape)


class TestSad:
    def test_identical(self):
        a = rand_frames(1)[0]
        assert sad(a, a) == 0.0

    def test_symmetric(self):
        a, b = rand_frames(2)
        assert sad(a, b) == sad(b, a)

    def test_hand_example(self):
        a = np.zeros((2, 2))
        b = np.array([[4.0, 8.0], [12.0, 16.0]])
        assert sad(a, b) == 10.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            sad(np.zeros((2, 2)), np.zeros((2, 3)))


class TestSadWithOffset:
    def test_zero_offset_is_sad(self):
        a, b = rand_frames(2)
        assert sad_with_offset(a, b, 0) == sad(a, b)

    def test_exact_shift(self):
        a = rand_frames(1, (8, 32), seed=3)[0]
        b = np.zeros_like(a)
        b[:, 3:] = a[:, :-3]
        score, o = best_offset(a, b, 10)
        assert score == 0.0 and o == 3

    def test_random_pair_matches_oracle(self):
        a, b = rand_frames(2, (4, 8), seed=5)
        want = min(naive_overlap_sad(a, b, o) for o in range(-2, 3))
        assert sad_with_offset(a, b, 2) == pytest.approx(want, abs=1e-12)

    def test_never_exceeds_plain_sad(self):
        for seed in range(20):
            a, b = rand_frames(2, seed=seed)
            assert sad_with_offset(a, b, 4) <= sad(a, b)

    def test_offset_too_large(self):
        a, b = rand_frames(2, (4, 8))
        with pytest.raises(ValueError):
            sad_with_offset(a, b, 8)

    def test_tie_prefers_small_then_negative(self):
        a = np.zeros((2, 6))
        b = np.zeros((2, 6))
        assert best_offset(a, b, 3) == (0.0, 0)
        # period-2 stripes align exactly at both -1 and +1
        a = np.array([[0.0, 1, 0, 1, 0, 1]])
        b = np.array([[1.0, 0, 1, 0, 1, 0]])
        assert naive_overlap_sad(a, b, -1) == naive_overlap_sad(a, b, 1) == 0.0
        assert best_offset(a, b, 1) == (0.0, -1)


class TestBuildMatrix:
    def test_self_zero_diagonal(self):
        f = rand_frames(6)
        D = build_difference_matrix(f, f, 0)
        assert np.all(np.diag(D) == 0.0)
        assert np.all(D >= 0)

    def test_single_pair(self):
        f = rand_frames(2)
        assert build_difference_matrix(f[:1], f[1:], 0).shape == (1, 1)

    @pytest.mark.parametrize("O", [0, 2, 5])
    def test_matches_naive_double_loop(self, O):
        refs, queries = rand_frames(5, seed=7), rand_frames(4, seed=8)
        D = build_difference_matrix(refs, queries, O)
        assert D.shape == (5, 4)
        for i in range(5):
            for j in range(4):
                want = min(naive_overlap_sad(refs[i], queries[j], o) for o in range(-O, O + 1))
                assert D[i, j] == pytest.approx(want, abs=1e-12)

    def test_deterministic(self):
        refs, queries = rand_frames(5, seed=1), rand_frames(7, seed=2)
        a = build_difference_matrix(refs, queries, 3)
        b = build_difference_matrix(refs.copy(), queries.copy(), 3)
        assert np.array_equal(a, b)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            build_difference_matrix(rand_frames(2, (4, 8)), rand_frames(2, (4, 6)), 0)

    def test_csv_roundtrip(self, tmp_path):
        D = np.random.default_rng(0).uniform(size=(4, 3))
        write_matrix_csv(D, tmp_path / "D.csv")
        assert np.array_equal(read_matrix_csv(tmp_path / "D.csv"), D)

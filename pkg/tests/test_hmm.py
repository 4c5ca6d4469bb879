import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semseq.config import PipelineConfig
from semseq.hmm import (
    VAR_FLOOR,
    HmmParams,
    baum_welch,
    brute_force_likelihood,
    brute_force_posteriors,
    emission_logprob,
    fit_em,
    forward_backward,
    normalize_features,
    posterior_decode,
)


def random_params(rng, N, K):
    return HmmParams(
        pi=rng.dirichlet(np.ones(N)),
        A=rng.dirichlet(np.ones(N), size=N),
        means=rng.uniform(0, 1, (N, K)),
        vars=rng.uniform(0.05, 0.5, (N, K)),
    )


def gauss_logpdf(x, mean, var):
    return sum(-0.5 * (math.log(2 * math.pi * v) + (xi - m) ** 2 / v) for xi, m, v in zip(x, mean, var))


class TestNormalizeFeatures:
    def test_range(self):
        f = np.random.default_rng(0).normal(size=(20, 4)) * [1, 10, 100, 0.1]
        out = normalize_features(f)
        np.testing.assert_allclose(out.min(axis=0), 0.0)
        np.testing.assert_allclose(out.max(axis=0), 1.0)

    def test_constant_dimension(self):
        f = np.column_stack([np.linspace(0, 1, 5), np.full(5, 0.3)])
        assert np.all(normalize_features(f)[:, 1] == 0.0)

    def test_single_frame(self):
        with pytest.raises(ValueError):
            normalize_features(np.zeros((1, 3)))


class TestEmission:
    def test_matches_scalar_formula(self):
        rng = np.random.default_rng(1)
        p = random_params(rng, 3, 4)
        X = rng.uniform(size=(5, 4))
        logB = emission_logprob(p, X)
        for t in range(5):
            for i in range(3):
                assert logB[t, i] == pytest.approx(gauss_logpdf(X[t], p.means[i], p.vars[i]), rel=1e-12)

    def test_wrong_dimension(self):
        p = random_params(np.random.default_rng(0), 2, 3)
        with pytest.raises(ValueError):
            emission_logprob(p, np.zeros((4, 2)))


class TestForwardBackward:
    def test_single_state_likelihood_is_product(self):
        rng = np.random.default_rng(2)
        p = HmmParams([1.0], [[1.0]], [[0.3, 0.6]], [[0.1, 0.2]])
        X = rng.uniform(size=(7, 2))
        ll, gamma, _ = forward_backward(p, X)
        want = sum(gauss_logpdf(x, p.means[0], p.vars[0]) for x in X)
        assert ll == pytest.approx(want, rel=1e-12)
        assert np.all(gamma == 1.0)

    def test_single_frame(self):
        rng = np.random.default_rng(3)
        p = random_params(rng, 3, 2)
        X = rng.uniform(size=(1, 2))
        ll, gamma, xi = forward_backward(p, X)
        assert ll == pytest.approx(brute_force_likelihood(p, X), rel=1e-12)
        assert xi.shape == (3, 3) and np.all(xi == 0)

    def test_exhaustive_t4(self):
        rng = np.random.default_rng(4)
        p = random_params(rng, 3, 2)
        X = rng.uniform(size=(4, 2))
        ll, gamma, _ = forward_backward(p, X)
        assert ll == pytest.approx(brute_force_likelihood(p, X), rel=1e-12)
        np.testing.assert_allclose(gamma, brute_force_posteriors(p, X), atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), N=st.integers(1, 3), T=st.integers(1, 6), K=st.integers(1, 2))
    def test_against_enumeration(self, seed, N, T, K):
        rng = np.random.default_rng(seed)
        p = random_params(rng, N, K)
        X = rng.uniform(size=(T, K))
        ll, gamma, _ = forward_backward(p, X)
        assert ll == pytest.approx(brute_force_likelihood(p, X), rel=1e-9)
        np.testing.assert_allclose(gamma, brute_force_posteriors(p, X), atol=1e-9)

    def test_posteriors_normalized(self):
        rng = np.random.default_rng(5)
        p = random_params(rng, 4, 6)
        _, gamma, _ = forward_backward(p, rng.uniform(size=(300, 6)))
        assert np.max(np.abs(gamma.sum(axis=1) - 1.0)) <= 1e-10
        assert np.all(gamma >= 0)

    def test_xi_marginalizes_to_gamma(self):
        rng = np.random.default_rng(6)
        p = random_params(rng, 3, 2)
        X = rng.uniform(size=(30, 2))
        _, gamma, xi = forward_backward(p, X)
        # summing pairwise posteriors over the successor gives gamma over t < T-1
        np.testing.assert_allclose(xi.sum(axis=1), gamma[:-1].sum(axis=0), atol=1e-9)
        np.testing.assert_allclose(xi.sum(axis=0), gamma[1:].sum(axis=0), atol=1e-9)

    def test_long_sequence_no_underflow(self):
        rng = np.random.default_rng(7)
        p = random_params(rng, 3, 50)
        ll, gamma, _ = forward_backward(p, rng.uniform(size=(2000, 50)))
        assert math.isfinite(ll)
        assert np.all(np.isfinite(gamma))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(8)
        p = random_params(rng, 3, 2)
        X = rng.uniform(size=(12, 2))
        perm = [2, 0, 1]
        ll, gamma, _ = forward_backward(p, X)
        ll_p, gamma_p, _ = forward_backward(p.permuted(perm), X)
        assert ll_p == pytest.approx(ll, rel=1e-12)
        np.testing.assert_allclose(gamma_p, gamma[:, perm], atol=1e-12)


class TestEm:
    def test_monotone(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            X = rng.uniform(size=(60, 5))
            _, hist = baum_welch(X, 3, PipelineConfig(seed=seed, restarts=1, tol_loglik=0.0, max_iters=40))
            assert np.all(np.diff(hist) >= -1e-8)

    def test_single_state_closed_form(self):
        X = np.random.default_rng(9).uniform(size=(40, 3))
        p, _ = baum_welch(X, 1, PipelineConfig(restarts=2))
        np.testing.assert_allclose(p.means[0], X.mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(p.vars[0], X.var(axis=0), atol=1e-12)
        assert p.A[0, 0] == 1.0 and p.pi[0] == 1.0

    def test_variance_floor(self):
        X = np.zeros((10, 2))
        X[5:] = 1.0
        p, _ = baum_welch(X, 2, PipelineConfig(restarts=3))
        assert np.all(p.vars >= VAR_FLOOR)
        p.validate()

    def test_deterministic(self):
        X = np.random.default_rng(10).uniform(size=(50, 4))
        cfg = PipelineConfig(seed=3, restarts=4)
        a, ha = baum_welch(X, 3, cfg)
        b, hb = baum_welch(X, 3, cfg)
        assert ha == hb
        assert a.to_dict() == b.to_dict()

    def test_best_restart_wins(self):
        X = np.random.default_rng(11).uniform(size=(50, 4))
        _, best = baum_welch(X, 3, PipelineConfig(seed=0, restarts=5))
        for r in range(5):
            _, h = baum_welch(X, 3, PipelineConfig(seed=0, restarts=r + 1))
            assert h[-1] <= best[-1]

    def test_history_starts_at_init(self):
        rng = np.random.default_rng(12)
        X = rng.uniform(size=(20, 2))
        p0 = random_params(rng, 2, 2)
        _, hist = fit_em(p0, X, max_iters=5, tol=-np.inf)
        assert len(hist) == 6
        assert hist[0] == forward_backward(p0, X)[0]

    def test_too_few_frames(self):
        with pytest.raises(ValueError):
            baum_welch(np.zeros((2, 3)), 3)

    def test_two_block_recovery(self):
        rng = np.random.default_rng(13)
        X = np.vstack([rng.normal(0.2, 0.05, (50, 6)), rng.normal(0.8, 0.05, (50, 6))])
        p, _ = baum_welch(X, 2, PipelineConfig(seed=0))
        labels = posterior_decode(p, X)
        truth = np.repeat([0, 1], 50)
        agree = max(np.mean(labels == truth), np.mean(labels == 1 - truth))
        assert agree >= 0.95


class TestParams:
    def test_json_roundtrip(self, tmp_path):
        p = random_params(np.random.default_rng(0), 3, 4)
        p.to_json(tmp_path / "m.json")
        q = HmmParams.from_json(tmp_path / "m.json")
        for name in ("pi", "A", "means", "vars"):
            np.testing.assert_array_equal(getattr(q, name), getattr(p, name))

    def test_validate_rejects_bad_rows(self):
        with pytest.raises(ValueError):
            HmmParams([1.0, 0.0], [[0.5, 0.6], [0.5, 0.5]], np.zeros((2, 1)), np.ones((2, 1))).validate()

    def test_posterior_decode_ties_lowest(self):
        # two identical states: every posterior ties, so state 0 is chosen
        p = HmmParams([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], np.zeros((2, 1)), np.ones((2, 1)))
        assert np.all(posterior_decode(p, np.zeros((4, 1))) == 0)

"""Diagonal-Gaussian hidden Markov model over per-frame attribute vectors.

Training is Baum-Welch with per-step scaled forward-backward; decoding
takes the per-frame argmax of the state posteriors (not Viterbi).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from scipy.special import logsumexp

from .config import PipelineConfig

VAR_FLOOR = 1e-6
# states or transition rows with less total responsibility keep their old parameters
_MIN_WEIGHT = 1e-12
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class HmmParams:
    pi: np.ndarray
    A: np.ndarray
    means: np.ndarray
    vars: np.ndarray

    def __post_init__(self) -> None:
        self.pi = np.asarray(self.pi, dtype=np.float64)
        self.A = np.asarray(self.A, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.vars = np.asarray(self.vars, dtype=np.float64)

    @property
    def N(self) -> int:
        return self.pi.shape[0]

    @property
    def K(self) -> int:
        return self.means.shape[1]

    def validate(self, atol: float = 1e-9) -> None:
        N = self.N
        if self.pi.shape != (N,) or self.A.shape != (N, N):
            raise ValueError(f"inconsistent shapes: pi {self.pi.shape}, A {self.A.shape}")
        if self.means.ndim != 2 or self.means.shape[0] != N or self.vars.shape != self.means.shape:
            raise ValueError(
                f"inconsistent emission shapes: means {self.means.shape}, vars {self.vars.shape}"
            )
        if np.any(self.pi < 0) or np.any(self.A < 0):
            raise ValueError("negative probability")
        if abs(self.pi.sum() - 1.0) > atol:
            raise ValueError(f"pi sums to {self.pi.sum()}")
        if np.any(np.abs(self.A.sum(axis=1) - 1.0) > atol):
            raise ValueError("transition rows must sum to 1")
        if not np.all(np.isfinite(self.means)):
            raise ValueError("non-finite means")
        if np.any(~np.isfinite(self.vars)) or np.any(self.vars < VAR_FLOOR):
            raise ValueError(f"variances must be finite and >= {VAR_FLOOR}")

    def permuted(self, perm: Any) -> "HmmParams":
        """Relabel states so that new state k is old state ``perm[k]``."""
        p = np.asarray(perm)
        return HmmParams(self.pi[p], self.A[np.ix_(p, p)], self.means[p], self.vars[p])

    def to_dict(self) -> dict[str, Any]:
        return {
            "N": self.N,
            "K": self.K,
            "pi": self.pi.tolist(),
            "A": self.A.tolist(),
            "means": self.means.tolist(),
            "vars": self.vars.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "HmmParams":
        params = cls(d["pi"], d["A"], d["means"], d["vars"])
        if params.N != d.get("N", params.N) or params.K != d.get("K", params.K):
            raise ValueError("N/K do not match array shapes")
        params.validate()
        return params

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_json(cls, path: str | Path) -> "HmmParams":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def normalize_features(f: np.ndarray) -> np.ndarray:
    """Per-dimension min-max scaling to [0, 1]; constant dimensions map to 0."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 2:
        raise ValueError("feature matrix must be 2-D")
    if f.shape[0] < 2:
        raise ValueError("need at least 2 frames to normalize features")
    lo = f.min(axis=0)
    span = f.max(axis=0) - lo
    flat = span == 0
    out = (f - lo) / np.where(flat, 1.0, span)
    out[:, flat] = 0.0
    return out


def emission_logprob(params: HmmParams, X: np.ndarray) -> np.ndarray:
    """``(T, N)`` matrix of log b_i(x_t) under the diagonal Gaussians."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.K:
        raise ValueError(f"features have shape {X.shape}, model expects K={params.K}")
    diff = X[:, None, :] - params.means[None, :, :]
    quad = (diff**2 / params.vars[None, :, :]).sum(axis=2)
    log_norm = (np.log(params.vars) + _LOG_2PI).sum(axis=1)
    return -0.5 * (quad + log_norm[None, :])


def forward_backward(
    params: HmmParams, X: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Scaled forward-backward pass.

    Returns ``(log P(X), gamma, xi_sums)`` where ``gamma[t, i]`` is the
    posterior of state i at frame t and ``xi_sums[i, j]`` sums the pairwise
    posteriors p(z_t=i, z_t+1=j | X) over t.
    """
    logB = emission_logprob(params, X)
    if not np.all(np.isfinite(logB)):
        raise FloatingPointError("emission density evaluated to a non-finite value")
    T, N = logB.shape
    # rescale each row so its largest emission is exactly 1
    shift = logB.max(axis=1)
    B = np.exp(logB - shift[:, None])
    A = params.A

    alpha = np.empty((T, N))
    scale = np.empty(T)
    a = params.pi * B[0]
    for t in range(T):
        if t:
            a = (alpha[t - 1] @ A) * B[t]
        c = a.sum()
        if not c > 0.0:
            raise FloatingPointError(f"observation sequence has zero likelihood at t={t}")
        alpha[t] = a / c
        scale[t] = c

    beta = np.empty((T, N))
    beta[T - 1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = (A @ (B[t + 1] * beta[t + 1])) / scale[t + 1]

    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)

    if T > 1:
        weighted = B[1:] * beta[1:] / scale[1:, None]
        xi_sums = A * (alpha[:-1].T @ weighted)
    else:
        xi_sums = np.zeros((N, N))

    log_likelihood = float(np.log(scale).sum() + shift.sum())
    return log_likelihood, gamma, xi_sums


def _m_step(
    params: HmmParams, X: np.ndarray, gamma: np.ndarray, xi_sums: np.ndarray
) -> HmmParams:
    N = params.N
    pi = gamma[0] / gamma[0].sum()

    A = params.A.copy()
    row_sums = xi_sums.sum(axis=1)
    for i in range(N):
        if row_sums[i] > _MIN_WEIGHT:
            A[i] = xi_sums[i] / row_sums[i]

    means = params.means.copy()
    variances = params.vars.copy()
    weights = gamma.sum(axis=0)
    for i in range(N):
        w = weights[i]
        if w <= _MIN_WEIGHT:
            continue
        g = gamma[:, i]
        mu = g @ X / w
        diff = X - mu
        means[i] = mu
        variances[i] = np.maximum(g @ (diff * diff) / w, VAR_FLOOR)
    return HmmParams(pi, A, means, variances)


def _random_init(X: np.ndarray, N: int, rng: np.random.Generator) -> HmmParams:
    T, K = X.shape
    pi = rng.dirichlet(np.ones(N))
    A = rng.dirichlet(np.ones(N), size=N)
    means = X[rng.choice(T, size=N, replace=False)].copy()
    global_var = np.maximum(X.var(axis=0), VAR_FLOOR)
    variances = np.tile(global_var, (N, 1))
    return HmmParams(pi, A, means, variances)


def fit_em(
    params: HmmParams, X: np.ndarray, max_iters: int = 100, tol: float = 1e-4
) -> tuple[HmmParams, list[float]]:
    """Run EM from ``params``; history[k] is log P(X) after k M-steps."""
    ll, gamma, xi = forward_backward(params, X)
    history = [ll]
    for _ in range(max_iters):
        params = _m_step(params, X, gamma, xi)
        ll, gamma, xi = forward_backward(params, X)
        history.append(ll)
        if history[-1] - history[-2] < tol:
            break
    return params, history


def baum_welch(
    X: np.ndarray, N: int, cfg: PipelineConfig | None = None
) -> tuple[HmmParams, list[float]]:
    """Fit an N-state model with ``cfg.restarts`` seeded random restarts.

    The restart with the highest final log-likelihood wins (earliest
    restart on ties), so results depend only on ``cfg.seed``.
    """
    cfg = cfg or PipelineConfig()
    X = np.asarray(X, dtype=np.float64)
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if X.ndim != 2:
        raise ValueError("feature matrix must be 2-D")
    T = X.shape[0]
    if T < N:
        raise ValueError(f"need at least N={N} frames, got T={T}")

    best: tuple[HmmParams, list[float]] | None = None
    for restart in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, restart])
        params, history = fit_em(_random_init(X, N, rng), X, cfg.max_iters, cfg.tol_loglik)
        if best is None or history[-1] > best[1][-1]:
            best = (params, history)
    assert best is not None
    return best


def posterior_decode(params: HmmParams, X: np.ndarray) -> np.ndarray:
    """Per-frame most probable state; ties go to the lowest index."""
    _, gamma, _ = forward_backward(params, X)
    return np.argmax(gamma, axis=1)


# ---------------------------------------------------------------------------
# exhaustive oracles
# ---------------------------------------------------------------------------

BRUTE_FORCE_LIMIT = 10**6


def _path_log_joint(params: HmmParams, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    T = X.shape[0]
    N = params.N
    if N**T > BRUTE_FORCE_LIMIT:
        raise ValueError(f"{N}^{T} state paths exceed the enumeration limit")
    logB = emission_logprob(params, X)
    paths = np.array(list(itertools.product(range(N), repeat=T)), dtype=np.int64)
    with np.errstate(divide="ignore"):
        log_pi = np.log(params.pi)
        log_A = np.log(params.A)
    joint = log_pi[paths[:, 0]] + logB[0, paths[:, 0]]
    for t in range(1, T):
        joint = joint + log_A[paths[:, t - 1], paths[:, t]] + logB[t, paths[:, t]]
    return paths, joint


def brute_force_likelihood(params: HmmParams, X: np.ndarray) -> float:
    """log P(X) by summing the joint over every state path."""
    _, joint = _path_log_joint(params, X)
    return float(logsumexp(joint))


def brute_force_posteriors(params: HmmParams, X: np.ndarray) -> np.ndarray:
    """Per-frame state marginals by exhaustive path enumeration."""
    paths, joint = _path_log_joint(params, X)
    weights = np.exp(joint - logsumexp(joint))
    T = paths.shape[1]
    post = np.zeros((T, params.N))
    for t in range(T):
        np.add.at(post[t], paths[:, t], weights)
    return post

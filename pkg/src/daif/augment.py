"""On-the-fly augmentation tokens for the inverted forecaster.

Every strategy maps a lookback window ``X`` of shape (..., T, N) to one or
more groups of extra tokens, each group a (..., M_g, J_g) array whose rows
are embedded next to the N variate tokens. Leading axes are batch axes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from daif.spectral import frequency_filter, max_top_k

__all__ = [
    "Strategy", "TokenGroup", "AugmentedTokens", "AugmentationConfig",
    "cross_variation_patch", "frequency_filter_augment", "jitter", "scaling",
    "augment", "augment_windows", "token_layout",
]


class Strategy(str, enum.Enum):
    NONE = "none"
    CVP = "cvp"
    FF = "ff"
    JITTER = "jitter"
    SCALING = "scaling"
    COMPOUND = "compound"

    @property
    def stochastic(self) -> bool:
        return self in (Strategy.JITTER, Strategy.SCALING)


@dataclass(frozen=True)
class TokenGroup:
    tag: Strategy
    tokens: np.ndarray

    @property
    def count(self) -> int:
        return self.tokens.shape[-2]

    @property
    def token_length(self) -> int:
        return self.tokens.shape[-1]


@dataclass(frozen=True)
class AugmentedTokens:
    """Augmented tokens, kept per group so each group gets its own embedding."""

    groups: tuple[TokenGroup, ...]
    strategy_tag: Strategy

    @property
    def count(self) -> int:
        return sum(g.count for g in self.groups)

    @property
    def token_length(self) -> int | None:
        lengths = {g.token_length for g in self.groups}
        return lengths.pop() if len(lengths) == 1 else None

    @property
    def tokens(self) -> np.ndarray:
        """All tokens as one (..., M, J) matrix; needs a uniform token length."""
        if not self.groups:
            return np.zeros((0, 0))
        if self.token_length is None:
            raise ValueError("token groups have different lengths; use .groups")
        return np.concatenate([g.tokens for g in self.groups], axis=-2)


@dataclass
class AugmentationConfig:
    strategy: Strategy = Strategy.NONE
    patch_length: int = 16
    top_k: int = 5
    jitter_sigma: float = 0.03
    scaling_sigma: float = 0.1
    rng_seed: int = 0
    keep_dc: bool = False

    def __post_init__(self):
        self.strategy = Strategy(self.strategy)
        if self.patch_length < 1:
            raise ValueError("patch_length must be >= 1")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.jitter_sigma < 0 or self.scaling_sigma < 0:
            raise ValueError("sigmas must be >= 0")

    def validate_for(self, lookback: int) -> None:
        s = self.strategy
        if s in (Strategy.CVP, Strategy.COMPOUND) and self.patch_length > lookback:
            raise ValueError(
                f"patch_length {self.patch_length} exceeds lookback {lookback}")
        if s in (Strategy.FF, Strategy.COMPOUND) and self.top_k > max_top_k(lookback):
            raise ValueError(
                f"top_k {self.top_k} exceeds {max_top_k(lookback)} bins for lookback {lookback}")


def token_layout(config: AugmentationConfig, lookback: int, n_vars: int) -> list[tuple[Strategy, int, int]]:
    """(tag, count, token_length) of every group ``augment`` will emit."""
    s = config.strategy
    cvp = (Strategy.CVP, lookback // config.patch_length, config.patch_length * n_vars)
    if s is Strategy.NONE:
        return []
    if s is Strategy.CVP:
        return [cvp]
    if s is Strategy.COMPOUND:
        return [cvp, (Strategy.FF, n_vars, lookback)]
    return [(s, n_vars, lookback)]


def _variate_tokens(tag: Strategy, cols: np.ndarray) -> AugmentedTokens:
    return AugmentedTokens((TokenGroup(tag, np.swapaxes(cols, -1, -2)),), tag)


def cross_variation_patch(X, patch_length: int) -> AugmentedTokens:
    """Cut ``X`` into floor(T/P) blocks of P timesteps and flatten each block.

    Flattening is time-major: token k is ``X[kP], X[kP+1], ...`` with all N
    values of a timestep kept together. Trailing T mod P steps are dropped.
    """
    X = np.asarray(X, dtype=np.float64)
    T, N = X.shape[-2:]
    if not 1 <= patch_length <= T:
        raise ValueError(f"patch_length {patch_length} must lie in [1, {T}]")
    m = T // patch_length
    tokens = X[..., : m * patch_length, :].reshape(*X.shape[:-2], m, patch_length * N)
    return AugmentedTokens((TokenGroup(Strategy.CVP, tokens),), Strategy.CVP)


def frequency_filter_augment(X, top_k: int, keep_dc: bool = False) -> AugmentedTokens:
    X = np.asarray(X, dtype=np.float64)
    cols = frequency_filter(np.swapaxes(X, -1, -2), top_k, keep_dc=keep_dc)
    return AugmentedTokens((TokenGroup(Strategy.FF, cols),), Strategy.FF)


def jitter(X, sigma: float, rng: np.random.Generator) -> AugmentedTokens:
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    X = np.asarray(X, dtype=np.float64)
    noisy = X + sigma * rng.standard_normal(X.shape) if sigma > 0 else X.copy()
    return _variate_tokens(Strategy.JITTER, noisy)


def scaling(X, sigma: float, rng: np.random.Generator) -> AugmentedTokens:
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    X = np.asarray(X, dtype=np.float64)
    shape = (*X.shape[:-2], 1, X.shape[-1])
    factors = 1.0 + sigma * rng.standard_normal(shape) if sigma > 0 else np.ones(shape)
    return _variate_tokens(Strategy.SCALING, X * factors)


def augment(X, config: AugmentationConfig, rng: np.random.Generator | None = None) -> AugmentedTokens:
    """Dispatch on ``config.strategy``.

    Stochastic strategies draw from ``rng``, or from a generator seeded with
    ``config.rng_seed`` when none is given, so the call stays pure.
    """
    X = np.asarray(X, dtype=np.float64)
    s = config.strategy
    if s is Strategy.NONE:
        return AugmentedTokens((), s)
    if s is Strategy.CVP:
        return cross_variation_patch(X, config.patch_length)
    if s is Strategy.FF:
        return frequency_filter_augment(X, config.top_k, config.keep_dc)
    if s is Strategy.COMPOUND:
        cvp = cross_variation_patch(X, config.patch_length)
        ff = frequency_filter_augment(X, config.top_k, config.keep_dc)
        return AugmentedTokens(cvp.groups + ff.groups, s)
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    if s is Strategy.JITTER:
        return jitter(X, config.jitter_sigma, rng)
    return scaling(X, config.scaling_sigma, rng)


def augment_windows(X, config: AugmentationConfig, streams: list[list[int]] | None = None) -> AugmentedTokens:
    """Augment a (B, T, N) batch.

    For stochastic strategies ``streams`` gives one seed sequence per window
    so that every window's draw is independent of batch composition.
    """
    X = np.asarray(X, dtype=np.float64)
    if not config.strategy.stochastic:
        return augment(X, config)
    if streams is None:
        streams = [[config.rng_seed, i] for i in range(X.shape[0])]
    parts = [augment(x, config, np.random.default_rng(seq)) for x, seq in zip(X, streams)]
    tag = config.strategy
    stacked = np.stack([p.groups[0].tokens for p in parts])
    return AugmentedTokens((TokenGroup(tag, stacked),), tag)

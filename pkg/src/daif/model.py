"""Inverted sequence-to-sequence forecaster with augmentation tokens.

Each variate's whole lookback series becomes one token. Augmented tokens are
embedded with their own per-group affine maps and appended after the N
variate tokens; the blocks mix (or, for the MLP backbone, ignore) the full
N + M token set, and the projection keeps only the first N rows.
"""
from __future__ import annotations

import enum
import json
import math
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from daif.augment import (AugmentationConfig, AugmentedTokens, Strategy,
                          augment, token_layout)
from daif.tensor import Tensor, concat, gelu, layer_norm, softmax

CHECKPOINT_FORMAT = "daif-checkpoint"
CHECKPOINT_VERSION = 1


class Backbone(str, enum.Enum):
    ATTENTION = "attention"
    MLP = "mlp"


class DataError(ValueError):
    """Model input contains NaN or Inf."""


class ConfigurationError(ValueError):
    pass


@dataclass
class ModelConfig:
    backbone: Backbone = Backbone.ATTENTION
    lookback: int = 96
    horizon: int = 96
    d_model: int = 128
    d_ff: int = 256
    layers: int = 2
    heads: int = 8
    augmentation: AugmentationConfig = field(default_factory=AugmentationConfig)
    # FF tokens have length T; reuse the variate embedding for them instead
    share_embedding: bool = False

    def __post_init__(self):
        self.backbone = Backbone(self.backbone)
        if isinstance(self.augmentation, dict):
            self.augmentation = AugmentationConfig(**self.augmentation)
        for name in ("lookback", "horizon", "d_model", "layers", "heads", "d_ff"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.backbone is Backbone.ATTENTION and self.d_model % self.heads:
            raise ConfigurationError(
                f"heads={self.heads} does not divide d_model={self.d_model}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["backbone"] = self.backbone.value
        d["augmentation"]["strategy"] = self.augmentation.strategy.value
        return d


@dataclass
class InvertedModelParams:
    """Named parameter tensors plus the variate count they were built for."""

    n_vars: int
    tensors: dict[str, Tensor]

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors.values())

    def named(self):
        return self.tensors.items()

    def count(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.tensors.items()}

    def load(self, arrays: dict[str, np.ndarray]) -> None:
        for k, t in self.tensors.items():
            t.data = np.array(arrays[k], dtype=np.float64)


def _embed_key(tag: Strategy) -> str:
    return f"embed.{tag.value}"


def _uniform(rng, fan_in, shape):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_params(config: ModelConfig, n_vars: int, seed: int = 0) -> InvertedModelParams:
    """Fan-in scaled uniform init for affine maps; layer norms start at (1, 0).

    Each affine map draws from its own stream keyed by (seed, name), so adding
    an augmentation group never shifts the values of shared parameters.
    """
    D, F = config.d_model, config.d_ff
    out: dict[str, Tensor] = {}

    def affine(name, fan_in, fan_out):
        rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
        out[f"{name}.w"] = Tensor(_uniform(rng, fan_in, (fan_in, fan_out)), name=f"{name}.w")
        out[f"{name}.b"] = Tensor(_uniform(rng, fan_in, (fan_out,)), name=f"{name}.b")

    def norm(name):
        out[f"{name}.g"] = Tensor(np.ones(D), name=f"{name}.g")
        out[f"{name}.b"] = Tensor(np.zeros(D), name=f"{name}.b")

    affine("embed.orig", config.lookback, D)
    for tag, _, length in token_layout(config.augmentation, config.lookback, n_vars):
        if config.share_embedding and length == config.lookback and tag is not Strategy.CVP:
            continue
        affine(_embed_key(tag), length, D)
    for l in range(config.layers):
        pre = f"blocks.{l}"
        if config.backbone is Backbone.ATTENTION:
            norm(f"{pre}.ln1")
            for part in ("q", "k", "v", "o"):
                affine(f"{pre}.attn.{part}", D, D)
            norm(f"{pre}.ln2")
        else:
            norm(f"{pre}.ln")
        affine(f"{pre}.ff1", D, F)
        affine(f"{pre}.ff2", F, D)
    affine("proj", D, config.horizon)
    return InvertedModelParams(n_vars, out)


def _linear(x: Tensor, params, name: str) -> Tensor:
    return x @ params[f"{name}.w"] + params[f"{name}.b"]


def embed_segments(X, aug: AugmentedTokens, params: InvertedModelParams) -> list[Tensor]:
    """Variate embeddings first, then one (..., M_g, D) block per augmented group."""
    X = np.asarray(X, dtype=np.float64)
    parts = [_linear(Tensor(np.swapaxes(X, -1, -2)), params, "embed.orig")]
    for group in aug.groups:
        key = _embed_key(group.tag)
        if f"{key}.w" not in params.tensors:
            if group.token_length == X.shape[-2] and group.tag is not Strategy.CVP:
                key = "embed.orig"
            else:
                raise ConfigurationError(
                    f"no embedding registered for {group.tag.value} tokens of length {group.token_length}")
        w = params[f"{key}.w"]
        if w.shape[0] != group.token_length:
            raise ConfigurationError(
                f"{group.tag.value} tokens have length {group.token_length}, "
                f"embedding expects {w.shape[0]}")
        parts.append(_linear(Tensor(group.tokens), params, key))
    return parts


def embed_tokens(X, aug: AugmentedTokens, params: InvertedModelParams) -> Tensor:
    """Stack variate embeddings and per-group augmented embeddings on the token axis.

    ``X`` is (..., T, N); the result is (..., N + M, D). No positional
    information is added.
    """
    return concat(embed_segments(X, aug, params), axis=-2)


def _attention(H: Tensor, params, pre: str, heads: int) -> tuple[Tensor, Tensor]:
    *lead, n, d = H.shape
    dh = d // heads
    a = layer_norm(H, params[f"{pre}.ln1.g"], params[f"{pre}.ln1.b"])

    def split(name):
        t = _linear(a, params, f"{pre}.attn.{name}").reshape(*lead, n, heads, dh)
        return t.swapaxes(-2, -3)

    q, k, v = split("q"), split("k"), split("v")
    weights = softmax((q @ k.swapaxes(-1, -2)) * (1.0 / math.sqrt(dh)))
    ctx = (weights @ v).swapaxes(-2, -3).reshape(*lead, n, d)
    return _linear(ctx, params, f"{pre}.attn.o"), weights


def attention_weights(H: Tensor, params: InvertedModelParams, layer: int, heads: int) -> np.ndarray:
    """Attention probabilities (..., heads, tokens, tokens) of one block."""
    return _attention(H, params, f"blocks.{layer}", heads)[1].data


def attention_block(H: Tensor, params: InvertedModelParams, layer: int, heads: int) -> Tensor:
    """Pre-norm multi-head self-attention over tokens, then a pre-norm GELU FFN."""
    pre = f"blocks.{layer}"
    attn, _ = _attention(H, params, pre, heads)
    H = H + attn
    f = layer_norm(H, params[f"{pre}.ln2.g"], params[f"{pre}.ln2.b"])
    return H + _linear(gelu(_linear(f, params, f"{pre}.ff1")), params, f"{pre}.ff2")


def mlp_block(H: Tensor, params: InvertedModelParams, layer: int) -> Tensor:
    """Per-token residual MLP; tokens never see each other."""
    pre = f"blocks.{layer}"
    f = layer_norm(H, params[f"{pre}.ln.g"], params[f"{pre}.ln.b"])
    return H + _linear(gelu(_linear(f, params, f"{pre}.ff1")), params, f"{pre}.ff2")


def project_select(H: Tensor, params: InvertedModelParams, n_vars: int) -> Tensor:
    """Project every token to the horizon, then keep the first ``n_vars`` rows."""
    if n_vars > H.shape[-2]:
        raise ValueError(f"cannot select {n_vars} tokens out of {H.shape[-2]}")
    out = _linear(H, params, "proj")
    return out[..., :n_vars, :]


def _block(H: Tensor, config: ModelConfig, params: InvertedModelParams, layer: int) -> Tensor:
    if config.backbone is Backbone.ATTENTION:
        out = attention_block(H, params, layer, config.heads)
    else:
        out = mlp_block(H, params, layer)
    if out.shape != H.shape:
        raise AssertionError(f"block {layer} changed token shape {H.shape} -> {out.shape}")
    return out


def run_blocks(H: Tensor, config: ModelConfig, params: InvertedModelParams) -> Tensor:
    for l in range(config.layers):
        H = _block(H, config, params, l)
    return H


def _token_shape(segments: list[Tensor]) -> tuple[int, ...]:
    first = segments[0].shape
    return (*first[:-2], sum(h.shape[-2] for h in segments), first[-1])


def forward(X, config: ModelConfig, params: InvertedModelParams,
            aug: AugmentedTokens | None = None, trace: list | None = None) -> Tensor:
    """Predict an (..., N, S) forecast from an (..., T, N) normalized lookback.

    ``aug`` overrides the tokens ``augment`` would produce, which is how the
    trainer injects per-window random streams for stochastic strategies.
    ``trace`` collects the token-set shape after embedding and every block.
    """
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise DataError("input window contains NaN or Inf")
    if X.shape[-2] != config.lookback:
        raise ValueError(f"lookback {X.shape[-2]} does not match config {config.lookback}")
    n_vars = X.shape[-1]
    if aug is None:
        aug = augment(X, config.augmentation)
    segments = embed_segments(X, aug, params)
    if config.backbone is Backbone.ATTENTION:
        segments = [concat(segments, axis=-2)]
    # The MLP backbone maps each token on its own, so segments run separately:
    # same function, and the variate rows' BLAS calls do not depend on M.
    if trace is not None:
        trace.append(_token_shape(segments))
    for l in range(config.layers):
        segments = [_block(h, config, params, l) for h in segments]
        if trace is not None:
            trace.append(_token_shape(segments))
    out = concat([_linear(h, params, "proj") for h in segments], axis=-2)
    return out[..., :n_vars, :]


# checkpoints -------------------------------------------------------------

def save_checkpoint(path, config: ModelConfig, params: InvertedModelParams, meta: dict | None = None) -> None:
    """JSON checkpoint: format tag, version, config, and every array with its shape.

    Values are written with ``repr`` precision so a reload is bit-exact.
    """
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "n_vars": params.n_vars,
        "meta": meta or {},
        "params": {
            k: {"shape": list(t.shape), "data": t.data.ravel().tolist()}
            for k, t in params.named()
        },
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> tuple[ModelConfig, InvertedModelParams, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a checkpoint file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    config = ModelConfig(**doc["config"])
    tensors = {}
    for k, entry in doc["params"].items():
        arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        tensors[k] = Tensor(arr, name=k)
    return config, InvertedModelParams(doc["n_vars"], tensors), doc.get("meta", {})

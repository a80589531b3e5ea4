"""Loss, metrics, Adam, the training loop, evaluation and correlation export."""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from daif.augment import AugmentationConfig, augment_windows
from daif.data import Splits, WindowSet
from daif.model import InvertedModelParams, ModelConfig, forward, init_params
from daif.tensor import DimensionError, Tape, Tensor, as_tensor, backward

log = logging.getLogger(__name__)

# stream id used for augmentation randomness at evaluation time; training
# epochs use epoch + 1
EVAL_STREAM = 0


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch: int, batch: int, value: float):
        super().__init__(f"loss became {value} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 10
    patience: int = 3
    seed: int = 1
    gradient_clip: float | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass
class EvalReport:
    mse: float
    mae: float
    per_horizon: list[float]
    window_count: int
    wall_seconds: float = 0.0


@dataclass
class HistoryRow:
    epoch: int
    train_mse: float
    val_mse: float
    seconds: float


@dataclass
class TrainResult:
    params: InvertedModelParams
    history: list[HistoryRow]
    best_epoch: int
    best_val_mse: float
    steps: int
    seconds: float = 0.0


def mse_loss(pred: Tensor, target) -> Tensor:
    target = as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"mse_loss: prediction {pred.shape} vs target {target.shape}")
    d = pred - target
    return (d * d).mean()


def mae_metric(pred, target) -> float:
    pred = np.asarray(pred.data if isinstance(pred, Tensor) else pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"mae_metric: prediction {pred.shape} vs target {target.shape}")
    return float(np.abs(pred - target).mean())


# optimizer -----------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict[str, Tensor] | InvertedModelParams, grads: dict[str, np.ndarray],
              state: AdamState, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, t: int | None = None) -> None:
    """Bias-corrected Adam, updating ``params`` and ``state`` in place."""
    items = params.named() if isinstance(params, InvertedModelParams) else params.items()
    state.t = state.t + 1 if t is None else t
    if state.t < 1:
        raise ValueError("Adam step counter must be >= 1")
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for name, p in items:
        g = grads[name]
        if g.shape != p.shape:
            raise DimensionError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        if m.shape != p.shape:
            raise DimensionError(f"optimizer state for {name} has shape {m.shape}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)


def _clip(grads: dict[str, np.ndarray], max_norm: float) -> None:
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / (total + 1e-12)
        for k in grads:
            grads[k] = grads[k] * scale


# evaluation ---------------------------------------------------------------

Predictor = Callable[[np.ndarray, np.ndarray], np.ndarray]


def model_predictor(params: InvertedModelParams, config: ModelConfig, seed: int = 0) -> Predictor:
    """Wrap the model as ``(X batch, window indices) -> (B, N, S)``."""
    aug_cfg = config.augmentation

    def predict(X, indices):
        aug = _batch_augment(X, indices, aug_cfg, seed, EVAL_STREAM)
        return forward(X, config, params, aug).data

    return predict


def _batch_augment(X, indices, aug_cfg: AugmentationConfig, seed: int, stream: int):
    if aug_cfg.strategy.stochastic:
        streams = [[seed, stream, int(i)] for i in indices]
        return augment_windows(X, aug_cfg, streams)
    return augment_windows(X, aug_cfg)


def evaluate_predictor(predict: Predictor, windows: WindowSet, batch_size: int = 256) -> EvalReport:
    """Mean MSE/MAE over every window in normalized space.

    Per-window errors are summed with ``math.fsum`` so the report does not
    depend on the order windows are visited in.
    """
    if len(windows) < 1:
        raise ValueError("evaluation needs at least one window")
    start = time.perf_counter()
    sq, ab, horizon = [], [], []
    for lo in range(0, len(windows), batch_size):
        idx = np.arange(lo, min(lo + batch_size, len(windows)))
        X, Y = windows.batch(idx)
        err = predict(X, idx) - np.swapaxes(Y, -1, -2)
        sq.append((err * err).mean(axis=(-1, -2)))
        ab.append(np.abs(err).mean(axis=(-1, -2)))
        horizon.append((err * err).mean(axis=-2))
    sq, ab, horizon = np.concatenate(sq), np.concatenate(ab), np.concatenate(horizon)
    n = len(sq)
    return EvalReport(
        mse=math.fsum(sq) / n,
        mae=math.fsum(ab) / n,
        per_horizon=[math.fsum(col) / n for col in horizon.T],
        window_count=n,
        wall_seconds=time.perf_counter() - start,
    )


def evaluate(params: InvertedModelParams, windows: WindowSet, model_config: ModelConfig,
             seed: int = 0, batch_size: int = 256) -> EvalReport:
    return evaluate_predictor(model_predictor(params, model_config, seed), windows, batch_size)


# training -----------------------------------------------------------------

def train_model(splits: Splits, model_config: ModelConfig, train_config: TrainConfig,
                callback: Callable[[HistoryRow], None] | None = None) -> TrainResult:
    """Mini-batch Adam on normalized MSE with early stopping on validation MSE.

    Augmentation is recomputed for every batch. Stochastic strategies seed
    window i of epoch e with (seed, e + 1, i), so runs are reproducible.
    The returned parameters are those of the best validation epoch.
    """
    cfg, tc = model_config, train_config
    T, S = cfg.lookback, cfg.horizon
    cfg.augmentation.validate_for(T)
    train_ws = WindowSet(splits.train, T, S)
    val_ws = WindowSet(splits.val, T, S)
    n_vars = splits.train.shape[1]
    params = init_params(cfg, n_vars, tc.seed)
    state = AdamState()
    history: list[HistoryRow] = []
    best_val, best_epoch, best = math.inf, -1, params.snapshot()
    stale = 0
    steps = 0
    t_start = time.perf_counter()

    for epoch in range(tc.max_epochs):
        t0 = time.perf_counter()
        order = np.random.default_rng([tc.seed, epoch + 1]).permutation(len(train_ws))
        losses = []
        for b, lo in enumerate(range(0, len(order), tc.batch_size)):
            idx = order[lo: lo + tc.batch_size]
            X, Y = train_ws.batch(idx)
            aug = _batch_augment(X, idx, cfg.augmentation, tc.seed, epoch + 1)
            with Tape(params) as tape:
                loss = mse_loss(forward(X, cfg, params, aug), np.swapaxes(Y, -1, -2))
                value = loss.item()
                if not math.isfinite(value):
                    raise TrainingDiverged(epoch + 1, b + 1, value)
                backward(loss, tape)
            grads = {k: p.grad for k, p in params.named()}
            if tc.gradient_clip is not None:
                _clip(grads, tc.gradient_clip)
            adam_step(params, grads, state, tc.learning_rate)
            steps += 1
            losses.append(value * len(idx))
        train_mse = math.fsum(losses) / len(order)
        val_mse = evaluate(params, val_ws, cfg, tc.seed).mse
        row = HistoryRow(epoch + 1, train_mse, val_mse, time.perf_counter() - t0)
        history.append(row)
        log.info("epoch %d train_mse %.6f val_mse %.6f (%.1fs)",
                 row.epoch, train_mse, val_mse, row.seconds)
        if callback is not None:
            callback(row)
        if val_mse < best_val:
            best_val, best_epoch, best = val_mse, epoch + 1, params.snapshot()
            stale = 0
        else:
            stale += 1
            # patience 0 still tolerates nothing: stop at the first stale epoch
            if stale >= max(tc.patience, 1):
                break

    params.load(best)
    return TrainResult(params, history, best_epoch, best_val, steps,
                       time.perf_counter() - t_start)


# correlation --------------------------------------------------------------

def pearson_rows(rows) -> np.ndarray:
    """Pairwise Pearson correlation of equal-length rows.

    Constant rows correlate 0 with everything, themselves included.
    """
    rows = np.asarray(rows, dtype=np.float64)
    c = rows - rows.mean(axis=1, keepdims=True)
    norm = np.sqrt((c * c).sum(axis=1))
    live = norm > 0
    z = np.zeros_like(c)
    z[live] = c[live] / norm[live, None]
    return z @ z.T


def correlation_matrix(X, tokens) -> np.ndarray:
    """Correlations among the N variate series of ``X`` (T, N) and ``tokens`` (M, T)."""
    X = np.asarray(X, dtype=np.float64)
    tokens = np.asarray(tokens, dtype=np.float64)
    if tokens.size == 0:
        tokens = tokens.reshape(0, X.shape[0])
    if tokens.shape[-1] != X.shape[0]:
        raise ValueError(
            f"tokens have length {tokens.shape[-1]}, series have length {X.shape[0]}")
    return pearson_rows(np.concatenate([X.T, tokens], axis=0))


def write_matrix_csv(path, matrix: np.ndarray, labels: Sequence[str]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(labels))
        for label, row in zip(labels, matrix):
            w.writerow([label] + [f"{v:.6f}" for v in row])


def write_history_csv(path, history: Sequence[HistoryRow], timing: bool = False) -> None:
    """History table; ``seconds`` is zero unless ``timing`` so reruns compare byte-equal."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_mse", "val_mse", "seconds"])
        for r in history:
            w.writerow([r.epoch, f"{r.train_mse:.6f}", f"{r.val_mse:.6f}",
                        f"{r.seconds if timing else 0.0:.3f}"])

"""Small shared builders for model-level tests."""
import numpy as np

from daif.augment import AugmentationConfig, Strategy
from daif.model import ModelConfig, forward, init_params
from daif.tensor import Tape, backward
from daif.train import mse_loss
from oracles import central_differences, max_relative_error


def tiny_config(backbone="attention", strategy="none", **kw):
    aug = AugmentationConfig(Strategy(strategy), patch_length=kw.pop("patch_length", 4),
                             top_k=kw.pop("top_k", 3))
    base = dict(lookback=16, horizon=4, d_model=8, d_ff=16, layers=1, heads=2)
    base.update(kw)
    return ModelConfig(backbone=backbone, augmentation=aug, **base)


def randomize(params, seed, scale=0.5):
    """Overwrite every tensor with random values so no gradient is trivially zero."""
    rng = np.random.default_rng(seed)
    for name, t in params.named():
        t.data = rng.normal(scale=scale, size=t.shape) + (1.0 if name.endswith(".g") else 0.0)


def model_gradient_error(config, n_vars=3, batch=2, seed=0, h=1e-5):
    """Worst relative error between tape gradients and central differences."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(batch, config.lookback, n_vars))
    Y = rng.normal(size=(batch, n_vars, config.horizon))
    params = init_params(config, n_vars, seed)
    randomize(params, seed + 1)

    def loss():
        return mse_loss(forward(X, config, params), Y)

    with Tape(params) as tape:
        backward(loss(), tape)
    analytic = [p.grad.copy() for _, p in params.named()]
    numeric = central_differences(lambda: loss().item(), [p.data for _, p in params.named()], h)
    return max_relative_error(analytic, numeric)

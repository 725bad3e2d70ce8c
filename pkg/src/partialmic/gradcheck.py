"""Central finite-difference check of the analytic model gradients."""

from __future__ import annotations

import numpy as np

from .losses import LossConfig, focal_loss, map_labels_to_targets
from .model import ModelConfig, ModelParams, init_params, model_backward, model_forward

TINY_CONFIG = ModelConfig(input_dim=3, hidden=2, num_classes=2)


def random_batch(config: ModelConfig, seed: int, batch: int = 2, timesteps: int = 4):
    """Random features and three-valued labels with every example partly observed."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((batch, timesteps, config.input_dim))
    labels = rng.choice([-1, 0, 1], size=(batch, config.num_classes))
    labels[:, 0] = rng.choice([-1, 1], size=batch)
    return x, labels


def batch_loss(params: ModelParams, x, labels, model_config: ModelConfig,
               loss_config: LossConfig = LossConfig()) -> float:
    preds, _ = model_forward(params, x, model_config)
    loss, _ = focal_loss(preds.clip_probs, map_labels_to_targets(labels), loss_config)
    return float(loss.mean())


def batch_loss_and_grad(params, x, labels, model_config, loss_config=LossConfig()):
    preds, cache = model_forward(params, x, model_config)
    loss, dp = focal_loss(preds.clip_probs, map_labels_to_targets(labels), loss_config)
    grads = model_backward(params, cache, dp / len(x))
    return float(loss.mean()), grads


def numeric_gradient(params: ModelParams, x, labels, model_config, loss_config, eps):
    base = params.flat()
    g = np.empty_like(base)
    for k in range(base.size):
        orig = base[k]
        base[k] = orig + eps
        up = batch_loss(ModelParams.from_flat(base, params), x, labels, model_config, loss_config)
        base[k] = orig - eps
        down = batch_loss(ModelParams.from_flat(base, params), x, labels, model_config,
                          loss_config)
        base[k] = orig
        g[k] = (up - down) / (2.0 * eps)
    return g


def relative_error(analytic, numeric, floor: float = 1e-8) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def finite_difference_check(config: ModelConfig = TINY_CONFIG,
                            loss_config: LossConfig = LossConfig(),
                            batch=None, seed: int = 0, eps: float = 1e-5,
                            grad_transform=None) -> float:
    """Max relative error between analytic and central-difference gradients.

    Parameters come from ``init_params(config, seed)`` and the loss is the
    batch-mean focal loss in eval mode. ``batch`` is an optional
    ``(features, labels)`` pair; by default a random one is drawn from
    ``seed``. ``grad_transform`` lets callers corrupt the analytic
    gradients (used for mutation testing).
    """
    params = init_params(config, seed)
    if batch is None:
        batch = random_batch(config, seed)
    x, labels = batch
    _, grads = batch_loss_and_grad(params, x, labels, config, loss_config)
    if grad_transform is not None:
        grads = grad_transform(grads)
    analytic = grads.flat()
    numeric = numeric_gradient(params, x, labels, config, loss_config, eps)
    return float(relative_error(analytic, numeric).max())

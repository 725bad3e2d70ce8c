"""Masked focal loss over soft targets.

Unknown labels (0) carry a zero mask and never enter the loss value or its
gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class TargetMask:
    targets: np.ndarray  # (..., C) in [0, 1]
    mask: np.ndarray  # (..., C) in {0, 1}


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.75
    gamma: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")


def map_labels_to_targets(labels) -> TargetMask:
    """+1 -> (1, observed), -1 -> (0, observed), 0 -> (0, unobserved)."""
    labels = np.asarray(labels)
    return TargetMask(
        targets=(labels == 1).astype(np.float64),
        mask=(labels != 0).astype(np.float64),
    )


def focal_loss(probs, tm: TargetMask, config: LossConfig = LossConfig()):
    """Focal loss and its gradient with respect to ``probs``.

    Per class, with target t and weight a = config.alpha::

        l = -t a (1-p)^g log p - (1-t) (1-a) p^g log(1-p)

    Observed classes are summed and divided by max(1, number observed).
    Works on a single (C,) vector or on a (..., C) stack, in which case the
    loss has the leading shape.

    Returns ``(loss, dloss_dprobs)``.
    """
    p = np.asarray(probs, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise ValueError("focal_loss received non-finite probabilities")
    observed = np.asarray(tm.mask) != 0
    t = np.where(observed, np.asarray(tm.targets, dtype=np.float64), 0.0)
    alpha, gamma = config.alpha, config.gamma

    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    q = 1.0 - p
    log_p, log_q = np.log(p), np.log(q)

    pos = -alpha * q ** gamma * log_p
    neg = -(1.0 - alpha) * p ** gamma * log_q
    d_pos = alpha * (gamma * q ** (gamma - 1.0) * log_p - q ** gamma / p)
    d_neg = -(1.0 - alpha) * (gamma * p ** (gamma - 1.0) * log_q - p ** gamma / q)

    per_class = np.where(observed, t * pos + (1.0 - t) * neg, 0.0)
    grad = np.where(observed, t * d_pos + (1.0 - t) * d_neg, 0.0)

    norm = np.maximum(1.0, observed.sum(axis=-1))
    loss = per_class.sum(axis=-1) / norm
    grad = grad / np.expand_dims(norm, -1)
    return loss, grad

"""Mix-up and concatenation augmentation for three-valued labels.

Mix-up works in (target, mask) space: targets are interpolated and a class
stays supervised only if both sources observe it. Concatenation stacks two
clips in time and fuses their labels with a Kleene OR, where +1 dominates
and -1 survives only if both sides are -1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import Batch, Example
from .losses import TargetMask, map_labels_to_targets


@dataclass(frozen=True)
class AugmentConfig:
    beta_alpha: float = 0.2
    mixup_prob: float = 0.5
    concat_prob: float = 0.5

    def __post_init__(self):
        if self.beta_alpha <= 0:
            raise ValueError(f"beta_alpha must be > 0, got {self.beta_alpha}")
        for name in ("mixup_prob", "concat_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class SoftExample:
    features: np.ndarray  # (T, D)
    targets: TargetMask


@dataclass(frozen=True)
class SoftBatch:
    """Equal-length training items with soft targets, ready for the model."""
    features: np.ndarray  # (B, T, D)
    targets: np.ndarray  # (B, C)
    mask: np.ndarray  # (B, C)

    def __len__(self):
        return self.features.shape[0]


def sample_mixup_weight(beta_alpha: float, rng) -> float:
    if beta_alpha <= 0:
        raise ValueError(f"beta_alpha must be > 0, got {beta_alpha}")
    return float(rng.beta(beta_alpha, beta_alpha))


def _as_targets(item) -> TargetMask:
    if isinstance(item, SoftExample):
        return item.targets
    return map_labels_to_targets(item.labels)


def mixup(a, b, lam: float) -> SoftExample:
    """``lam * a + (1 - lam) * b`` for features and targets; mask is ``a AND b``."""
    if a.features.shape != b.features.shape:
        raise ValueError(f"cannot mix shapes {a.features.shape} and {b.features.shape}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"mixing weight must lie in [0, 1], got {lam}")
    ta, tb = _as_targets(a), _as_targets(b)
    xa = np.asarray(a.features, dtype=np.float64)
    xb = np.asarray(b.features, dtype=np.float64)
    # wa + wb == 1 exactly, and swapping (a, b, lam) -> (b, a, 1 - lam)
    # swaps the two weights bit for bit
    wb = 1.0 - lam
    wa = 1.0 - wb
    return SoftExample(
        # clamp removes one-ulp rounding excursions outside the segment
        features=np.clip(wa * xa + wb * xb, np.minimum(xa, xb), np.maximum(xa, xb)),
        targets=TargetMask(
            targets=wa * ta.targets + wb * tb.targets,
            mask=ta.mask * tb.mask,
        ),
    )


def label_or(a, b) -> np.ndarray:
    """Three-valued OR over {-1, 0, +1}."""
    a, b = np.asarray(a), np.asarray(b)
    return np.where((a == 1) | (b == 1), 1, np.where((a == -1) & (b == -1), -1, 0)).astype(np.int8)


def concat_augment(a: Example, b: Example) -> Example:
    if a.features.shape[1] != b.features.shape[1]:
        raise ValueError(
            f"feature dims differ: {a.features.shape[1]} vs {b.features.shape[1]}")
    return Example(
        clip_id=f"{a.clip_id}+{b.clip_id}",
        features=np.concatenate([a.features, b.features], axis=0),
        labels=label_or(a.labels, b.labels),
        split=a.split,
    )


def _other(rng, n, i):
    """Uniform index in range(n) other than i (i itself when n == 1)."""
    if n == 1:
        return i
    j = int(rng.integers(n - 1))
    return j + (j >= i)


def augment_batch(batch: Batch, config: AugmentConfig, rng) -> list[SoftBatch]:
    """Apply concatenation, then mix-up, to one batch.

    Each example is, with probability ``concat_prob``, stacked in time with
    another example from the batch. Items are then grouped by length; each
    item is, with probability ``mixup_prob``, replaced by its mix with
    another item of the same length under a fresh weight. Returns one
    ``SoftBatch`` per length, shortest first.
    """
    examples = list(batch.examples)
    n = len(examples)
    items = []
    for i, ex in enumerate(examples):
        if rng.random() < config.concat_prob:
            ex = concat_augment(ex, examples[_other(rng, n, i)])
        items.append(ex)

    groups: dict[int, list] = {}
    for ex in items:
        groups.setdefault(ex.timesteps, []).append(ex)

    out = []
    for T in sorted(groups):
        group = groups[T]
        mixed = []
        for i, ex in enumerate(group):
            if len(group) > 1 and rng.random() < config.mixup_prob:
                partner = group[_other(rng, len(group), i)]
                lam = sample_mixup_weight(config.beta_alpha, rng)
                mixed.append(mixup(ex, partner, lam))
            else:
                mixed.append(SoftExample(np.asarray(ex.features, dtype=np.float64),
                                         map_labels_to_targets(ex.labels)))
        out.append(SoftBatch(
            features=np.stack([m.features for m in mixed]),
            targets=np.stack([m.targets.targets for m in mixed]),
            mask=np.stack([m.targets.mask for m in mixed]),
        ))
    return out

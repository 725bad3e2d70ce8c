"""
Mix-up and concatenation with unknown labels
============================================

Both augmentations have to say what happens to a label that one of the two
source clips never had annotated.
"""

import itertools

import numpy as np

from partialmic import AugmentConfig, Batch, Example, augment_batch, concat_augment, label_or, \
    mixup

###############################################################################
# Concatenation plays two clips back to back. A class is present if it is
# present in either half, absent only if both halves say absent, and unknown
# otherwise.

names = {-1: "absent", 0: "unknown", 1: "present"}
for a, b in itertools.product((-1, 0, 1), repeat=2):
    print("%-8s OR %-8s -> %s" % (names[a], names[b], names[int(label_or(a, b))]))

rng = np.random.default_rng(0)
drums = Example("drums", rng.standard_normal((3, 2)), np.array([1, -1, 0], dtype=np.int8))
voice = Example("voice", rng.standard_normal((4, 2)), np.array([-1, 0, -1], dtype=np.int8))
both = concat_augment(drums, voice)
print(both.clip_id, "timesteps", both.timesteps, "labels", both.labels)

###############################################################################
# Mix-up blends two clips of equal length. Targets are blended too, but a
# class keeps contributing to the loss only if both clips observed it.

a = Example("a", np.zeros((3, 2)), np.array([1, -1, 0], dtype=np.int8))
b = Example("b", np.ones((3, 2)), np.array([-1, -1, 1], dtype=np.int8))
for lam in (1.0, 0.7, 0.0):
    out = mixup(a, b, lam)
    print("lam %.1f  feature %.2f  targets %s  mask %s"
          % (lam, out.features[0, 0], out.targets.targets, out.targets.mask))

###############################################################################
# During training both are applied at random to each batch. Concatenated
# items are twice as long, so the batch comes back split by length.

batch = Batch(tuple(Example(f"c{i}", rng.standard_normal((5, 2)),
                            rng.choice([-1, 0, 1], 3).astype(np.int8)) for i in range(6)))
for sub in augment_batch(batch, AugmentConfig(), np.random.default_rng(1)):
    print("length %d: %d items, observed share %.2f"
          % (sub.features.shape[1], len(sub), sub.mask.mean()))

"""
Checking the hand-written backward pass
=======================================

The BiLSTM, the attention pooling and the focal loss all have hand-written
gradients. Here they are compared against central finite differences on a
tiny network, then a deliberately broken gradient shows what a failure
looks like.
"""

import dataclasses

import numpy as np

from partialmic.gradcheck import (TINY_CONFIG, batch_loss_and_grad, finite_difference_check,
                                  numeric_gradient, random_batch, relative_error)
from partialmic.losses import LossConfig
from partialmic.model import ModelParams, init_params

print("tiny config:", TINY_CONFIG)

###############################################################################
# Max relative error over every parameter, for a handful of seeds.

for seed in range(5):
    print("seed %d  max relative error %.2e" % (seed, finite_difference_check(seed=seed)))

###############################################################################
# The same comparison, one parameter block at a time.

params = init_params(TINY_CONFIG, 0)
x, labels = random_batch(TINY_CONFIG, 0)
loss_config = LossConfig()
_, analytic = batch_loss_and_grad(params, x, labels, TINY_CONFIG, loss_config)
numeric = ModelParams.from_flat(
    numeric_gradient(params, x, labels, TINY_CONFIG, loss_config, eps=1e-5), params)
for name, g in analytic.items():
    err = relative_error(g, getattr(numeric, name)).max()
    print("%-6s shape %-8s max relative error %.2e" % (name, g.shape, err))

###############################################################################
# Zeroing one block of the analytic gradient is caught immediately.

broken = finite_difference_check(
    seed=0, grad_transform=lambda g: dataclasses.replace(g, U_bwd=np.zeros_like(g.U_bwd)))
print("with U_bwd gradient zeroed: %.2e" % broken)

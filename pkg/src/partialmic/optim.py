"""Adam over named parameter blocks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state: AdamState):
    """One bias-corrected Adam update.

    ``params`` and ``grads`` are mappings (or objects with ``items()``) from
    block name to array. Moments for a block are created as zeros the first
    time it is seen. Returns ``(new_params_dict, state)``; the input arrays
    are not modified.
    """
    params = dict(params.items())
    grads = dict(grads.items())
    if params.keys() != grads.keys():
        raise ValueError(f"parameter/gradient blocks differ: {sorted(params)} vs {sorted(grads)}")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step

    out = {}
    for name, theta in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != theta.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {theta.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"{name}: non-finite gradient")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(theta, dtype=np.float64)
            v = np.zeros_like(theta, dtype=np.float64)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name], state.v[name] = m, v
        out[name] = theta - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return out, state

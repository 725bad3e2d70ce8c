"""BiLSTM encoder with per-class attention pooling, in float64 numpy.

Forward and backward passes are batched over examples of equal length.
Gate blocks inside every ``W``/``U``/``b`` are ordered input, forget,
output, candidate.

Shapes: B examples, T timesteps, D input features, H hidden units per
direction, C classes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = b"PLAB"
CHECKPOINT_VERSION = 1

PARAM_NAMES = (
    "W_fwd", "U_fwd", "b_fwd",
    "W_bwd", "U_bwd", "b_bwd",
    "W_att", "b_att",
    "W_cla", "b_cla",
)


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 128
    hidden: int = 64
    num_classes: int = 20
    dropout: float = 0.2
    recurrent_dropout: float = 0.2
    attention_clip: float = 10.0

    def __post_init__(self):
        if min(self.input_dim, self.hidden, self.num_classes) < 1:
            raise ValueError("model dimensions must be >= 1")
        for name in ("dropout", "recurrent_dropout"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {rate}")
        if self.attention_clip <= 0:
            raise ValueError("attention_clip must be > 0")


@dataclass
class ModelParams:
    W_fwd: np.ndarray  # (4H, D)
    U_fwd: np.ndarray  # (4H, H)
    b_fwd: np.ndarray  # (4H,)
    W_bwd: np.ndarray
    U_bwd: np.ndarray
    b_bwd: np.ndarray
    W_att: np.ndarray  # (C, 2H)
    b_att: np.ndarray  # (C,)
    W_cla: np.ndarray  # (C, 2H)
    b_cla: np.ndarray  # (C,)

    @property
    def dims(self) -> tuple[int, int, int]:
        """(D, H, C)."""
        return self.W_fwd.shape[1], self.U_fwd.shape[1], self.W_att.shape[0]

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: v.copy() for k, v in self.items()})

    def zeros_like(self) -> "ModelParams":
        return ModelParams(**{k: np.zeros_like(v) for k, v in self.items()})

    def direction(self, name: str):
        return getattr(self, f"W_{name}"), getattr(self, f"U_{name}"), getattr(self, f"b_{name}")

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for _, v in self.items()])

    @classmethod
    def from_flat(cls, vec, like: "ModelParams") -> "ModelParams":
        out, pos = {}, 0
        for k, v in like.items():
            out[k] = np.asarray(vec[pos:pos + v.size], dtype=np.float64).reshape(v.shape).copy()
            pos += v.size
        return cls(**out)

    @property
    def size(self) -> int:
        return sum(v.size for _, v in self.items())


def _glorot(rng, fan_out, fan_in):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def init_params(config: ModelConfig, seed: int = 0) -> ModelParams:
    """Glorot-uniform input and head weights, orthogonal recurrent blocks
    (one n x n orthogonal matrix per gate), zero biases with forget bias 1."""
    rng = np.random.default_rng(seed)
    D, H, C = config.input_dim, config.hidden, config.num_classes
    blocks = {}
    for d in ("fwd", "bwd"):
        blocks[f"W_{d}"] = np.concatenate([_glorot(rng, H, D) for _ in range(4)])
        blocks[f"U_{d}"] = np.concatenate([_orthogonal(rng, H) for _ in range(4)])
        b = np.zeros(4 * H)
        b[H:2 * H] = 1.0
        blocks[f"b_{d}"] = b
    blocks["W_att"] = _glorot(rng, C, 2 * H)
    blocks["b_att"] = np.zeros(C)
    blocks["W_cla"] = _glorot(rng, C, 2 * H)
    blocks["b_cla"] = np.zeros(C)
    return ModelParams(**blocks)


def _sigmoid(x):
    return 0.5 + 0.5 * np.tanh(0.5 * x)


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DropoutMasks:
    """Per-sequence dropout masks, entries 0 or 1/(1-rate)."""
    inputs: np.ndarray  # (B, D)
    rec_fwd: np.ndarray  # (B, H)
    rec_bwd: np.ndarray  # (B, H)

    @classmethod
    def identity(cls, batch: int, input_dim: int, hidden: int) -> "DropoutMasks":
        return cls(np.ones((batch, input_dim)), np.ones((batch, hidden)), np.ones((batch, hidden)))

    @classmethod
    def sample(cls, rng, batch, input_dim, hidden, rate, recurrent_rate) -> "DropoutMasks":
        def draw(shape, r):
            if r == 0.0:
                return np.ones(shape)
            return (rng.random(shape) >= r) / (1.0 - r)
        return cls(draw((batch, input_dim), rate),
                   draw((batch, hidden), recurrent_rate),
                   draw((batch, hidden), recurrent_rate))


def lstm_cell_forward(W, U, b, x_t, h_prev, c_prev, input_mask=None, rec_mask=None):
    """Single LSTM step. Works on (D,) or (B, D) inputs. Returns (h_t, c_t)."""
    H = U.shape[1]
    if input_mask is not None:
        x_t = x_t * input_mask
    if rec_mask is not None:
        h_prev = h_prev * rec_mask
    z = x_t @ W.T + h_prev @ U.T + b
    i = _sigmoid(z[..., :H])
    f = _sigmoid(z[..., H:2 * H])
    o = _sigmoid(z[..., 2 * H:3 * H])
    g = np.tanh(z[..., 3 * H:])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def _stacked(params):
    """Direction-stacked weights: W (2, 4H, D), U (2, 4H, H), b (2, 4H)."""
    return (np.stack([params.W_fwd, params.W_bwd]),
            np.stack([params.U_fwd, params.U_bwd]),
            np.stack([params.b_fwd, params.b_bwd]))


def _scan(W, U, b, x, masks, hook=None):
    """Both directions at once. Index 0 of the leading axis runs over x, index 1
    over x reversed in time; both start from zero state."""
    B, T, _ = x.shape
    H = U.shape[2]
    xm = x * masks.inputs[:, None, :]
    xs = np.stack([xm, xm[:, ::-1]])  # (2, B, T, D)
    zx = xs @ W.transpose(0, 2, 1)[:, None] + b[:, None, None, :]  # (2, B, T, 4H)
    rec = np.stack([masks.rec_fwd, masks.rec_bwd])  # (2, B, H)
    Ut = U.transpose(0, 2, 1)
    gates = np.empty((2, B, T, 4 * H))
    cs = np.empty((2, B, T, H))
    hs = np.empty((2, B, T, H))
    h = np.zeros((2, B, H))
    c = np.zeros((2, B, H))
    for t in range(T):
        hm = h * rec
        if hook is not None:
            hook("fwd", t, xs[0, :, t], hm[0])
            hook("bwd", t, xs[1, :, t], hm[1])
        z = zx[:, :, t] + hm @ Ut
        s = _sigmoid(z[..., :3 * H])
        g = np.tanh(z[..., 3 * H:])
        c = s[..., H:2 * H] * c + s[..., :H] * g
        h = s[..., 2 * H:] * np.tanh(c)
        gates[:, :, t, :3 * H] = s
        gates[:, :, t, 3 * H:] = g
        cs[:, :, t] = c
        hs[:, :, t] = h
    return hs, {"xs": xs, "gates": gates, "c": cs, "h": hs, "rec": rec}


def _scan_backward(U, cache, dh_seq):
    """Reverse pass of ``_scan`` given dL/dh of shape (2, B, T, H).

    Returns stacked (dW, dU, db)."""
    xs, gates, cs, hs, rec = (cache[k] for k in ("xs", "gates", "c", "h", "rec"))
    _, B, T, H = hs.shape
    i, f = gates[..., :H], gates[..., H:2 * H]
    o, g = gates[..., 2 * H:3 * H], gates[..., 3 * H:]
    tc = np.tanh(cs)
    c_prev = np.concatenate([np.zeros((2, B, 1, H)), cs[:, :, :-1]], axis=2)
    h_prev = np.concatenate([np.zeros((2, B, 1, H)), hs[:, :, :-1]], axis=2) * rec[:, :, None]
    # local derivatives of the pre-activations: dz = [dc, dc, dh, dc] * local
    local = np.concatenate([
        g * i * (1.0 - i),
        c_prev * f * (1.0 - f),
        tc * o * (1.0 - o),
        i * (1.0 - g * g),
    ], axis=-1)
    dh_to_dc = o * (1.0 - tc * tc)

    dz_all = np.empty((2, B, T, 4 * H))
    dh_next = np.zeros((2, B, H))
    dc_next = np.zeros((2, B, H))
    for t in range(T - 1, -1, -1):
        dh = dh_seq[:, :, t] + dh_next
        dc = dc_next + dh * dh_to_dc[:, :, t]
        dz = np.concatenate([dc, dc, dh, dc], axis=-1) * local[:, :, t]
        dz_all[:, :, t] = dz
        dh_next = (dz @ U) * rec
        dc_next = dc * f[:, :, t]
    dz_flat = dz_all.reshape(2, B * T, 4 * H).transpose(0, 2, 1)
    dW = dz_flat @ xs.reshape(2, B * T, -1)
    dU = dz_flat @ h_prev.reshape(2, B * T, H)
    db = dz_all.sum(axis=(1, 2))
    return dW, dU, db


def bilstm_forward(params: ModelParams, x, masks: DropoutMasks | None = None, hook=None):
    """Hidden sequence (B, T, 2H) = [forward states | backward states].

    ``x`` may be (T, D) for a single sequence, in which case the output is
    (T, 2H). ``hook(direction, t, masked_input, masked_h_prev)`` is called
    at every step when given; backward-direction ``t`` counts along the
    reversed sequence.
    """
    hidden, _ = _bilstm(params, x, masks, hook)
    return hidden


def _bilstm(params, x, masks, hook=None):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    B, _, D = x.shape
    H = params.U_fwd.shape[1]
    if masks is None:
        masks = DropoutMasks.identity(B, D, H)
    hs, cache = _scan(*_stacked(params), x, masks, hook)
    hidden = np.concatenate([hs[0], hs[1][:, ::-1]], axis=-1)
    if single:
        hidden = hidden[0]
    return hidden, cache

# ---------------------------------------------------------------------------
# Attention pooling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Predictions:
    clip_probs: np.ndarray  # (B, C)
    step_probs: np.ndarray  # (B, T, C)
    attention: np.ndarray  # (B, T, C)


def attention_forward(params: ModelParams, hidden, attention_clip: float = 10.0):
    """Per-class softmax-over-time pooling of per-step sigmoid outputs.

    Accepts hidden of shape (T, 2H) or (B, T, 2H).
    """
    preds, _ = _attention(params, hidden, attention_clip)
    return preds


def _attention(params, hidden, kappa):
    hidden = np.asarray(hidden, dtype=np.float64)
    single = hidden.ndim == 2
    if single:
        hidden = hidden[None]
    u = hidden @ params.W_att.T  # (B, T, C)
    scores = u + params.b_att
    z = np.clip(scores, -kappa, kappa)
    # where no step is clipped the bias cancels in the softmax; centring u
    # directly keeps that cancellation exact in floating point
    unclipped = (np.abs(scores) < kappa).all(axis=1, keepdims=True)
    z = np.where(unclipped, u - u.max(axis=1, keepdims=True), z - z.max(axis=1, keepdims=True))
    e = np.exp(z)
    a = e / e.sum(axis=1, keepdims=True)
    q = _sigmoid(hidden @ params.W_cla.T + params.b_cla)
    p = (a * q).sum(axis=1)
    cache = {"hidden": hidden, "scores": scores, "a": a, "q": q, "kappa": kappa}
    if single:
        return Predictions(p[0], q[0], a[0]), cache
    return Predictions(p, q, a), cache


def _attention_backward(params, cache, dp):
    hidden, scores, a, q, kappa = (cache[k] for k in ("hidden", "scores", "a", "q", "kappa"))
    dp = dp[:, None, :]
    dq = a * dp
    da = q * dp
    dz = a * (da - (a * da).sum(axis=1, keepdims=True))
    ds = dz * (np.abs(scores) < kappa)
    dl = dq * q * (1.0 - q)
    grads = {
        "W_att": np.einsum("btc,bth->ch", ds, hidden),
        "b_att": ds.sum(axis=(0, 1)),
        "W_cla": np.einsum("btc,bth->ch", dl, hidden),
        "b_cla": dl.sum(axis=(0, 1)),
    }
    dhidden = ds @ params.W_att + dl @ params.W_cla
    return grads, dhidden


# ---------------------------------------------------------------------------
# Full model
# ---------------------------------------------------------------------------

@dataclass
class ForwardCache:
    params_id: int
    masks: DropoutMasks
    lstm: dict
    attention: dict


def model_forward(params: ModelParams, features, config: ModelConfig, train: bool = False,
                  rng=None, hook=None):
    """Forward pass over a (B, T, D) stack of equal-length sequences.

    Eval mode (``train=False``) uses identity dropout masks. Train mode
    draws one set of masks per example from ``rng``. Returns
    ``(Predictions, ForwardCache)``.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"features must be (B, T, D), got shape {x.shape}")
    B, T, D = x.shape
    if D != params.dims[0]:
        raise ValueError(f"feature dim {D} does not match model input dim {params.dims[0]}")
    if T < 1:
        raise ValueError("sequences must have at least one timestep")
    H = params.dims[1]
    if train and (config.dropout > 0 or config.recurrent_dropout > 0):
        if rng is None:
            raise ValueError("train mode with dropout needs an rng")
        masks = DropoutMasks.sample(rng, B, D, H, config.dropout, config.recurrent_dropout)
    else:
        masks = DropoutMasks.identity(B, D, H)
    hidden, lstm_cache = _bilstm(params, x, masks, hook)
    preds, att_cache = _attention(params, hidden, config.attention_clip)
    return preds, ForwardCache(id(params), masks, lstm_cache, att_cache)


def model_backward(params: ModelParams, cache: ForwardCache, d_clip_probs) -> ModelParams:
    """Gradients of sum_b <d_clip_probs[b], p[b]> with respect to every parameter."""
    if not isinstance(cache, ForwardCache):
        raise ValueError("model_backward needs the ForwardCache from model_forward")
    if cache.params_id != id(params):
        raise ValueError("forward cache was produced with different parameters")
    dp = np.asarray(d_clip_probs, dtype=np.float64)
    if dp.shape != cache.attention["a"][:, 0, :].shape:
        raise ValueError(f"upstream gradient shape {dp.shape} does not match predictions")
    H = params.dims[1]
    grads, dhidden = _attention_backward(params, cache.attention, dp)
    dh_seq = np.stack([dhidden[..., :H], dhidden[:, ::-1, H:]])
    dW, dU, db = _scan_backward(_stacked(params)[1], cache.lstm, dh_seq)
    for k, d in enumerate(("fwd", "bwd")):
        grads[f"W_{d}"], grads[f"U_{d}"], grads[f"b_{d}"] = dW[k], dU[k], db[k]
    return ModelParams(**{name: grads[name] for name in PARAM_NAMES})


def predict(params: ModelParams, features, config: ModelConfig, batch_size: int = 256):
    """Eval-mode clip probabilities for an (N, T, D) stack, in chunks."""
    features = np.asarray(features)
    out = [model_forward(params, features[s:s + batch_size], config)[0].clip_probs
           for s in range(0, len(features), batch_size)]
    if not out:
        return np.zeros((0, params.dims[2]))
    return np.concatenate(out)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(params: ModelParams, path) -> None:
    D, H, C = params.dims
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<4I", CHECKPOINT_VERSION, D, H, C))
        for name in PARAM_NAMES:
            f.write(np.ascontiguousarray(getattr(params, name), dtype="<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    version, D, H, C = struct.unpack("<4I", raw[4:20])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    shapes = {
        "W_fwd": (4 * H, D), "U_fwd": (4 * H, H), "b_fwd": (4 * H,),
        "W_bwd": (4 * H, D), "U_bwd": (4 * H, H), "b_bwd": (4 * H,),
        "W_att": (C, 2 * H), "b_att": (C,), "W_cla": (C, 2 * H), "b_cla": (C,),
    }
    expected = 20 + 8 * sum(int(np.prod(s)) for s in shapes.values())
    if len(raw) != expected:
        raise ValueError(f"{path}: {len(raw)} bytes, expected {expected}")
    blocks, pos = {}, 20
    for name in PARAM_NAMES:
        n = int(np.prod(shapes[name]))
        blocks[name] = np.frombuffer(raw, dtype="<f8", count=n, offset=pos).reshape(
            shapes[name]).astype(np.float64)
        pos += 8 * n
    return ModelParams(**blocks)

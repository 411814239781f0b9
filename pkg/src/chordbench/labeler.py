"""Trainable self-attention sequence labeler with exact manual gradients.

A deliberately small encoder-only network for frame-wise chord
classification, written directly in numpy so the whole forward/backward
path is inspectable and checkable against finite differences:

    input projection -> sinusoidal positional encoding ->
    n_layers x [multi-head self-attention + residual + layer norm,
                2-layer feed-forward + residual + layer norm] ->
    linear classifier (one score row per frame)

The feed-forward hidden width is twice the model width.  Loss is masked
mean softmax cross-entropy over frames; padded frames are excluded.  All
computation runs in the dtype of the parameters, so float64 is available
for gradient checking and float32 for training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import FeatureMatrix, frames_to_track

LN_EPS = 1e-5


class TrainingError(RuntimeError):
    """Raised when optimization produces a non-finite loss."""


@dataclass(frozen=True)
class LabelerConfig:
    input_dim: int
    model_dim: int = 64
    n_layers: int = 2
    n_heads: int = 4
    context_frames: int = 108
    n_classes: int = 25
    seed: int = 0

    def __post_init__(self):
        for name in ("input_dim", "model_dim", "n_layers", "n_heads",
                     "context_frames", "n_classes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.model_dim % self.n_heads != 0:
            raise ValueError("model_dim must be divisible by n_heads")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.n_heads

    @property
    def ff_dim(self) -> int:
        return 2 * self.model_dim


@dataclass
class SequenceExample:
    """One training sequence: inputs (frames x dims), targets, valid mask."""

    inputs: np.ndarray
    targets: np.ndarray
    mask: np.ndarray | None = None

    def valid_mask(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(len(self.targets), dtype=bool)
        return np.asarray(self.mask, dtype=bool)


@dataclass
class TrainReport:
    """Per-epoch training trace."""

    losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    accuracies: list = field(default_factory=list)
    epochs_run: int = 0
    workers: int = 1
    bit_reproducible: bool = True


def init_params(config: LabelerConfig, dtype=np.float32) -> dict:
    """Seeded parameter initialization; weights ~ N(0, 1/fan_in)."""
    rng = np.random.Generator(np.random.PCG64(config.seed))

    def w(n_in, n_out):
        return (rng.standard_normal((n_in, n_out)) / np.sqrt(n_in)).astype(dtype)

    def b(n):
        return np.zeros(n, dtype=dtype)

    d, f = config.model_dim, config.ff_dim
    params = {"in_proj.w": w(config.input_dim, d), "in_proj.b": b(d)}
    for i in range(config.n_layers):
        p = f"layers.{i}"
        for name in ("wq", "wk", "wv", "wo"):
            params[f"{p}.attn.{name}"] = w(d, d)
        for name in ("bq", "bk", "bv", "bo"):
            params[f"{p}.attn.{name}"] = b(d)
        params[f"{p}.ln1.g"] = np.ones(d, dtype=dtype)
        params[f"{p}.ln1.b"] = b(d)
        params[f"{p}.ff.w1"] = w(d, f)
        params[f"{p}.ff.b1"] = b(f)
        params[f"{p}.ff.w2"] = w(f, d)
        params[f"{p}.ff.b2"] = b(d)
        params[f"{p}.ln2.g"] = np.ones(d, dtype=dtype)
        params[f"{p}.ln2.b"] = b(d)
    params["classifier.w"] = w(d, config.n_classes)
    params["classifier.b"] = b(config.n_classes)
    return params


def count_params(params: dict) -> int:
    return sum(v.size for v in params.values())


def flatten_params(params: dict) -> np.ndarray:
    return np.concatenate([params[k].ravel() for k in params])


def unflatten_params(template: dict, vector: np.ndarray) -> dict:
    out = {}
    offset = 0
    for k, v in template.items():
        out[k] = vector[offset:offset + v.size].reshape(v.shape).astype(v.dtype)
        offset += v.size
    return out


def positional_encoding(n_frames: int, dim: int, dtype=np.float64) -> np.ndarray:
    """Sinusoidal position features, shape (n_frames, dim)."""
    pos = np.arange(n_frames)[:, None].astype(np.float64)
    idx = np.arange(0, dim, 2).astype(np.float64)
    rates = np.exp(-idx * np.log(10000.0) / dim)
    pe = np.zeros((n_frames, dim))
    pe[:, 0::2] = np.sin(pos * rates)
    pe[:, 1::2] = np.cos(pos * rates[: pe[:, 1::2].shape[1]])
    return pe.astype(dtype)


def _layer_norm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv
    return g * xhat + b, (xhat, inv, g)


def _layer_norm_backward(dy, cache):
    xhat, inv, g = cache
    dxhat = dy * g
    dg = (dy * xhat).sum(axis=0)
    db = dy.sum(axis=0)
    mean_dxhat = dxhat.mean(axis=-1, keepdims=True)
    mean_dxhat_xhat = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)
    return dx, dg, db


def _softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _split_heads(x, n_heads):
    t, d = x.shape
    return x.reshape(t, n_heads, d // n_heads).transpose(1, 0, 2)


def _merge_heads(x):
    h, t, dh = x.shape
    return x.transpose(1, 0, 2).reshape(t, h * dh)


def forward(params: dict, config: LabelerConfig, inputs: np.ndarray,
            return_state: bool = False):
    """Per-frame class scores, shape (frames, n_classes).

    With ``return_state`` also returns the cache of intermediate values
    (including per-layer attention weights under key ``attn.{i}``) used by
    the backward pass.
    """
    x = np.asarray(inputs, dtype=params["in_proj.w"].dtype)
    if x.ndim != 2 or x.shape[1] != config.input_dim:
        raise ValueError(
            f"expected (frames, {config.input_dim}) inputs, got {x.shape}")
    state = {"x": x}
    h = x @ params["in_proj.w"] + params["in_proj.b"]
    h = h + positional_encoding(h.shape[0], config.model_dim, h.dtype)
    scale = 1.0 / np.sqrt(config.head_dim)
    for i in range(config.n_layers):
        p = f"layers.{i}"
        state[f"h_in.{i}"] = h
        q = h @ params[f"{p}.attn.wq"] + params[f"{p}.attn.bq"]
        k = h @ params[f"{p}.attn.wk"] + params[f"{p}.attn.bk"]
        v = h @ params[f"{p}.attn.wv"] + params[f"{p}.attn.bv"]
        qh = _split_heads(q, config.n_heads)
        kh = _split_heads(k, config.n_heads)
        vh = _split_heads(v, config.n_heads)
        attn = _softmax(qh @ kh.transpose(0, 2, 1) * scale)
        ctx = _merge_heads(attn @ vh)
        out = ctx @ params[f"{p}.attn.wo"] + params[f"{p}.attn.bo"]
        h1, ln1_cache = _layer_norm(h + out, params[f"{p}.ln1.g"],
                                    params[f"{p}.ln1.b"])
        z1 = h1 @ params[f"{p}.ff.w1"] + params[f"{p}.ff.b1"]
        u = np.maximum(z1, 0.0)
        z2 = u @ params[f"{p}.ff.w2"] + params[f"{p}.ff.b2"]
        h2, ln2_cache = _layer_norm(h1 + z2, params[f"{p}.ln2.g"],
                                    params[f"{p}.ln2.b"])
        state[f"attn.{i}"] = attn
        state[f"layer.{i}"] = (qh, kh, vh, ctx, ln1_cache, h1, z1, u, ln2_cache)
        h = h2
    state["h_final"] = h
    scores = h @ params["classifier.w"] + params["classifier.b"]
    if return_state:
        return scores, state
    return scores


def _backward(params, config, state, dscores):
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    h = state["h_final"]
    grads["classifier.w"] = h.T @ dscores
    grads["classifier.b"] = dscores.sum(axis=0)
    dh = dscores @ params["classifier.w"].T
    scale = 1.0 / np.sqrt(config.head_dim)
    for i in reversed(range(config.n_layers)):
        p = f"layers.{i}"
        qh, kh, vh, ctx, ln1_cache, h1, z1, u, ln2_cache = state[f"layer.{i}"]
        attn = state[f"attn.{i}"]

        dr2, dg2, db2 = _layer_norm_backward(dh, ln2_cache)
        grads[f"{p}.ln2.g"] = dg2
        grads[f"{p}.ln2.b"] = db2
        # r2 = h1 + relu(h1 W1 + b1) W2 + b2
        dz2 = dr2
        grads[f"{p}.ff.w2"] = u.T @ dz2
        grads[f"{p}.ff.b2"] = dz2.sum(axis=0)
        du = dz2 @ params[f"{p}.ff.w2"].T
        dz1 = du * (z1 > 0)
        grads[f"{p}.ff.w1"] = h1.T @ dz1
        grads[f"{p}.ff.b1"] = dz1.sum(axis=0)
        dh1 = dr2 + dz1 @ params[f"{p}.ff.w1"].T

        dr1, dg1, db1 = _layer_norm_backward(dh1, ln1_cache)
        grads[f"{p}.ln1.g"] = dg1
        grads[f"{p}.ln1.b"] = db1
        # r1 = h_in + (attn context) Wo + bo
        dout = dr1
        grads[f"{p}.attn.wo"] = ctx.T @ dout
        grads[f"{p}.attn.bo"] = dout.sum(axis=0)
        dctx = dout @ params[f"{p}.attn.wo"].T
        dctx_h = _split_heads(dctx, config.n_heads)
        dattn = dctx_h @ vh.transpose(0, 2, 1)
        dvh = attn.transpose(0, 2, 1) @ dctx_h
        dscores_attn = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
        dqh = dscores_attn @ kh * scale
        dkh = dscores_attn.transpose(0, 2, 1) @ qh * scale
        dq = _merge_heads(dqh)
        dk = _merge_heads(dkh)
        dv = _merge_heads(dvh)

        h_in = state[f"h_in.{i}"]
        grads[f"{p}.attn.wq"] = h_in.T @ dq
        grads[f"{p}.attn.bq"] = dq.sum(axis=0)
        grads[f"{p}.attn.wk"] = h_in.T @ dk
        grads[f"{p}.attn.bk"] = dk.sum(axis=0)
        grads[f"{p}.attn.wv"] = h_in.T @ dv
        grads[f"{p}.attn.bv"] = dv.sum(axis=0)
        dh = (dr1 + dq @ params[f"{p}.attn.wq"].T
              + dk @ params[f"{p}.attn.wk"].T
              + dv @ params[f"{p}.attn.wv"].T)
    grads["in_proj.w"] = state["x"].T @ dh
    grads["in_proj.b"] = dh.sum(axis=0)
    return grads


def class_probabilities(scores: np.ndarray) -> np.ndarray:
    """Softmax over the class axis of a score matrix."""
    return _softmax(np.asarray(scores, dtype=np.float64))


def loss_value(params: dict, config: LabelerConfig, batch) -> float:
    """Masked mean cross-entropy of a batch of :class:`SequenceExample`."""
    total, n_valid = 0.0, 0
    for item in batch:
        scores = forward(params, config, item.inputs)
        mask = item.valid_mask()
        total += _cross_entropy_sum(scores, item.targets, mask)
        n_valid += int(mask.sum())
    if n_valid == 0:
        raise ValueError("batch has no valid frames")
    return total / n_valid


def _cross_entropy_sum(scores, targets, mask) -> float:
    s = np.asarray(scores, dtype=np.float64)
    z = s - s.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    picked = logp[np.arange(len(targets)), targets]
    return float(-(picked * mask).sum())


def loss_and_grad(params: dict, config: LabelerConfig, batch):
    """Loss plus its exact gradient with respect to every parameter."""
    batch = list(batch)
    n_valid = sum(int(item.valid_mask().sum()) for item in batch)
    if n_valid == 0:
        raise ValueError("batch has no valid frames")
    total = 0.0
    grads = None
    for item in batch:
        if len(item.targets) != len(item.inputs):
            raise ValueError("targets length does not match input frames")
        scores, state = forward(params, config, item.inputs, return_state=True)
        mask = item.valid_mask()
        total += _cross_entropy_sum(scores, item.targets, mask)
        probs = _softmax(np.asarray(scores, dtype=np.float64))
        dscores = probs
        dscores[np.arange(len(item.targets)), item.targets] -= 1.0
        dscores *= mask[:, None]
        dscores /= n_valid
        item_grads = _backward(params, config, state,
                               dscores.astype(scores.dtype))
        if grads is None:
            grads = item_grads
        else:
            for k in grads:
                grads[k] += item_grads[k]
    loss = total / n_valid
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite loss: {loss}")
    return loss, grads


class AdamOptimizer:
    """Adaptive moment estimation over a named parameter dict."""

    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for k in params:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            mhat = self.m[k] / b1c
            vhat = self.v[k] / b2c
            params[k] -= (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(
                params[k].dtype)


def frame_accuracy(params: dict, config: LabelerConfig, items) -> float:
    correct, total = 0, 0
    for item in items:
        scores = forward(params, config, item.inputs)
        pred = scores.argmax(axis=1)
        mask = item.valid_mask()
        correct += int(((pred == item.targets) & mask).sum())
        total += int(mask.sum())
    return correct / total if total else 0.0


def train(config: LabelerConfig, train_items, val_items=None, lr=1e-3,
          batch_size=8, max_epochs=100, patience=10, dtype=np.float32):
    """Adam training with early stopping on validation loss.

    Stops once the monitored loss (validation loss, or training loss when no
    validation items are given) has failed to improve for more than
    ``patience`` consecutive epochs, and returns the parameters from the
    best epoch.  Deterministic given ``config.seed`` with a single worker.
    """
    train_items = list(train_items)
    if not train_items:
        raise ValueError("empty training set")
    monitor_items = list(val_items) if val_items else train_items
    params = init_params(config, dtype=dtype)
    optimizer = AdamOptimizer(params, lr=lr)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    report = TrainReport()
    best_loss = np.inf
    best_params = {k: v.copy() for k, v in params.items()}
    epochs_since_best = 0
    for _ in range(max_epochs):
        order = rng.permutation(len(train_items))
        epoch_loss, n_batches = 0.0, 0
        for start in range(0, len(order), batch_size):
            batch = [train_items[j] for j in order[start:start + batch_size]]
            loss, grads = loss_and_grad(params, config, batch)
            optimizer.step(params, grads)
            epoch_loss += loss
            n_batches += 1
        report.losses.append(epoch_loss / n_batches)
        report.accuracies.append(frame_accuracy(params, config, train_items))
        monitored = loss_value(params, config, monitor_items)
        report.val_losses.append(monitored)
        report.epochs_run += 1
        if not np.isfinite(monitored):
            raise TrainingError(f"non-finite validation loss: {monitored}")
        if monitored < best_loss:
            best_loss = monitored
            best_params = {k: v.copy() for k, v in params.items()}
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best > patience:
                break
    return best_params, report


def predict_classes(params: dict, config: LabelerConfig,
                    inputs: np.ndarray) -> np.ndarray:
    """Per-frame argmax class indices."""
    return forward(params, config, inputs).argmax(axis=1).astype(np.int64)


def predict_track(params: dict, config: LabelerConfig, features: FeatureMatrix,
                  source_id: str = ""):
    """Label a whole track and merge equal consecutive frames into segments."""
    classes = predict_classes(params, config, features.values)
    return frames_to_track(classes, features.hop_samples,
                           features.sample_rate_hz, source_id)

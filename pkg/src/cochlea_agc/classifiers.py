"""Speech-vs-noise classifiers: logistic regression and a 2x64 MLP.

Both are plain numpy. Logistic regression runs in float64 with full-batch
gradient descent; the MLP runs in float32 with Adam, dropout after each
ReLU and early stopping on validation accuracy.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_labels(y):
    y = np.asarray(y).astype(int).ravel()
    if np.unique(y).size < 2:
        raise ValueError("training data must contain both classes")
    return y


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 5e-5
    dropout: float = 0.3
    val_fraction: float = 0.25
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    l2: float = 1e-4
    max_iter: int = 2000
    tol: float = 1e-6

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class LrModel:
    weights: np.ndarray
    bias: float
    n_iter: int = 0
    grad_norm: float = float("nan")

    def decision_function(self, x):
        return np.asarray(x, dtype=np.float64) @ self.weights + self.bias

    def predict_proba(self, x):
        return sigmoid(self.decision_function(x))

    def predict(self, x):
        return (self.decision_function(x) > 0).astype(int)


def lr_loss_grad(w, b, x, y, l2):
    z = x @ w + b
    # log(1 + e^z) - y z, computed stably
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(w, w)
    r = (sigmoid(z) - y) / len(y)
    return loss, x.T @ r + l2 * w, r.sum()


def lr_train(features, labels, config: TrainConfig | None = None) -> LrModel:
    """L2-regularised logistic regression by gradient descent with Armijo backtracking."""
    config = config or TrainConfig()
    x = np.asarray(features, dtype=np.float64)
    y = _check_labels(labels).astype(np.float64)
    w = np.zeros(x.shape[1])
    b = 0.0
    step = 1.0
    loss, gw, gb = lr_loss_grad(w, b, x, y, config.l2)
    it = 0
    gnorm = np.sqrt(gw @ gw + gb * gb)
    while it < config.max_iter and gnorm > config.tol:
        g2 = gnorm * gnorm
        while True:
            w_new = w - step * gw
            b_new = b - step * gb
            loss_new, gw_new, gb_new = lr_loss_grad(w_new, b_new, x, y, config.l2)
            if loss_new <= loss - 0.5 * step * g2 or step < 1e-12:
                break
            step *= 0.5
        w, b, loss, gw, gb = w_new, b_new, loss_new, gw_new, gb_new
        gnorm = np.sqrt(gw @ gw + gb * gb)
        step = min(step * 2.0, 1e3)
        it += 1
    return LrModel(w, float(b), it, float(gnorm))


LAYER_SIZES = (152, 64, 64, 2)


@dataclass
class DnnModel:
    """152 -> 64 -> 64 -> 2 MLP, ReLU hidden units, float32 parameters."""

    params: dict = field(default_factory=dict)
    sizes: tuple = LAYER_SIZES
    val_history: list = field(default_factory=list)
    best_epoch: int = -1

    @classmethod
    def init(cls, rng: np.random.Generator, sizes=LAYER_SIZES) -> "DnnModel":
        params = {}
        for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:]), start=1):
            bound = np.sqrt(6.0 / fan_in)
            params[f"W{k}"] = rng.uniform(-bound, bound, (fan_in, fan_out)).astype(np.float32)
            params[f"b{k}"] = np.zeros(fan_out, dtype=np.float32)
        return cls(params, tuple(sizes))

    @property
    def n_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def forward(self, x, rng: np.random.Generator | None = None, dropout: float = 0.0):
        """Logits and the activations needed for gradients; dropout only when ``rng`` is given."""
        p = self.params
        h = np.asarray(x, dtype=p["W1"].dtype)
        cache = {"a0": h}
        n_layers = len(self.sizes) - 1
        for k in range(1, n_layers):
            pre = h @ p[f"W{k}"] + p[f"b{k}"]
            h = np.maximum(pre, 0)
            mask = None
            if rng is not None and dropout > 0:
                keep = 1.0 - dropout
                mask = (rng.random(h.shape) < keep).astype(np.float32) / np.float32(keep)
                h = h * mask
            cache[f"pre{k}"] = pre
            cache[f"mask{k}"] = mask
            cache[f"a{k}"] = h
        logits = h @ p[f"W{n_layers}"] + p[f"b{n_layers}"]
        return logits, cache

    def loss_and_grads(self, x, y, rng=None, dropout=0.0):
        """Mean cross-entropy and its gradient w.r.t. every parameter."""
        logits, cache = self.forward(x, rng, dropout)
        y = np.asarray(y).astype(int)
        n = len(y)
        shifted = logits - logits.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        loss = -logp[np.arange(n), y].mean()
        d = np.exp(logp)
        d[np.arange(n), y] -= 1
        d /= n
        grads = {}
        n_layers = len(self.sizes) - 1
        for k in range(n_layers, 0, -1):
            a_prev = cache[f"a{k - 1}"]
            grads[f"W{k}"] = a_prev.T @ d
            grads[f"b{k}"] = d.sum(axis=0)
            if k > 1:
                d = d @ self.params[f"W{k}"].T
                if cache[f"mask{k - 1}"] is not None:
                    d = d * cache[f"mask{k - 1}"]
                d = d * (cache[f"pre{k - 1}"] > 0)
        return float(loss), grads

    def predict(self, x):
        logits, _ = self.forward(x)
        return logits.argmax(axis=1)


def _split(n, val_fraction, rng):
    idx = rng.permutation(n)
    n_val = int(round(n * val_fraction))
    return idx[n_val:], idx[:n_val]


def dnn_train(features, labels, config: TrainConfig | None = None) -> DnnModel:
    """Adam training with early stopping on validation accuracy.

    A quarter of the data (``val_fraction``) is held out. The parameter
    snapshot from the epoch with the best validation accuracy is returned;
    ties keep the earliest.
    """
    config = config or TrainConfig()
    x = np.asarray(features, dtype=np.float32)
    y = _check_labels(labels)
    rng = np.random.default_rng(config.seed)
    tr, va = _split(len(y), config.val_fraction, rng)
    if len(va) == 0:
        va = tr
    model = DnnModel.init(rng, (x.shape[1],) + LAYER_SIZES[1:])
    m = {k: np.zeros_like(v) for k, v in model.params.items()}
    v = {k: np.zeros_like(v) for k, v in model.params.items()}
    b1, b2 = np.float32(config.beta1), np.float32(config.beta2)
    lr, eps = np.float32(config.learning_rate), np.float32(config.eps)
    best = (-1.0, None, -1)
    t = 0
    for epoch in range(config.epochs):
        order = rng.permutation(tr)
        for s in range(0, len(order), config.batch_size):
            batch = order[s:s + config.batch_size]
            _, grads = model.loss_and_grads(x[batch], y[batch], rng, config.dropout)
            t += 1
            c1 = np.float32(1 - config.beta1 ** t)
            c2 = np.float32(1 - config.beta2 ** t)
            for k, g in grads.items():
                m[k] = b1 * m[k] + (1 - b1) * g
                v[k] = b2 * v[k] + (1 - b2) * g * g
                model.params[k] -= lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + eps)
        acc = float(np.mean(model.predict(x[va]) == y[va]))
        model.val_history.append(acc)
        if acc > best[0]:
            best = (acc, {k: p.copy() for k, p in model.params.items()}, epoch)
    model.params = best[1]
    model.best_epoch = best[2]
    return model


@dataclass
class Evaluation:
    accuracy: float
    per_amplitude: dict
    mean_over_amplitudes: float
    n: int


def evaluate(model, features, labels, amplitudes=None) -> Evaluation:
    """Overall accuracy, accuracy per amplitude, and their unweighted mean."""
    y = np.asarray(labels).astype(int)
    if y.size == 0:
        raise ValueError("cannot evaluate on an empty set")
    pred = np.asarray(model.predict(features)).astype(int)
    correct = pred == y
    if amplitudes is None:
        amplitudes = np.zeros(len(y))
    amplitudes = np.asarray(amplitudes, dtype=float)
    per = {float(a): float(correct[amplitudes == a].mean()) for a in np.unique(amplitudes)}
    return Evaluation(float(correct.mean()), per, float(np.mean(list(per.values()))), int(y.size))


def relative_error_decrease(acc_agc: float, acc_non_agc: float) -> float:
    """Percent reduction of the error rate when switching to AGC features."""
    err_non = 1.0 - acc_non_agc
    if err_non <= 0:
        raise ValueError("relative error decrease undefined when non-AGC accuracy is 1")
    return 100.0 * (err_non - (1.0 - acc_agc)) / err_non


def save_checkpoint(model, path: str | Path, seed: int = 0, config: TrainConfig | None = None,
                    extra: dict | None = None) -> None:
    """JSON checkpoint: a header (kind, dims, seed, config hash) and flat parameters.

    ``extra`` is stored verbatim (e.g. normaliser statistics).
    """
    config = config or TrainConfig(seed=seed)
    if isinstance(model, LrModel):
        header = {"kind": "lr", "dims": [int(model.weights.size), 1]}
        params = {"weights": model.weights.tolist(), "bias": [model.bias]}
    else:
        header = {"kind": "dnn", "dims": list(model.sizes)}
        params = {k: np.asarray(v, dtype=np.float64).ravel().tolist() for k, v in model.params.items()}
    header.update(seed=seed, config_hash=config.digest())
    blob = {"header": header, "params": params}
    if extra:
        blob["extra"] = extra
    Path(path).write_text(json.dumps(blob))


def load_checkpoint(path: str | Path, with_extra: bool = False):
    """Model from a checkpoint; ``with_extra=True`` returns ``(model, extra)``."""
    blob = json.loads(Path(path).read_text())
    model = _model_from_blob(blob)
    return (model, blob.get("extra", {})) if with_extra else model


def _model_from_blob(blob):
    header, params = blob["header"], blob["params"]
    if header["kind"] == "lr":
        return LrModel(np.asarray(params["weights"], dtype=np.float64), float(params["bias"][0]))
    sizes = tuple(header["dims"])
    shaped = {}
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:]), start=1):
        shaped[f"W{k}"] = np.asarray(params[f"W{k}"], dtype=np.float32).reshape(fan_in, fan_out)
        shaped[f"b{k}"] = np.asarray(params[f"b{k}"], dtype=np.float32)
    return DnnModel(shaped, sizes)

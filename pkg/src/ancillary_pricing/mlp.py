"""Small from-scratch multilayer perceptron.

Rectifier hidden layers, a single sigmoid output unit, inverted dropout,
and plain SGD with a decaying learning rate. Gradients are verified
against central finite differences by ``grad_check``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import EncodedDataset
from .errors import (
    BadArchitecture,
    DimensionMismatch,
    NonFiniteLoss,
    SingleClassDataset,
)

PROB_CLAMP = 1e-7  # keeps log losses finite; stated so tests can be exact


@dataclass(frozen=True)
class MlpModel:
    sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.sizes[0]

    def parameter_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


@dataclass(frozen=True)
class TrainConfig:
    """SGD settings; the step index t counts mini-batch updates, not epochs."""

    learning_rate: float = 0.1
    decay: float = 1e-3  # lr_t = learning_rate / (1 + decay * t)
    batch_size: int = 64
    epochs: int = 30
    dropout_rate: float = 0.0
    pos_weight: float | None = None  # None: use n_negatives / n_positives
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.decay < 0:
            raise ValueError("decay must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.pos_weight is not None and self.pos_weight <= 0:
            raise ValueError("pos_weight must be positive")


def learning_rate_at(config: TrainConfig, step: int) -> float:
    return config.learning_rate / (1.0 + config.decay * step)


def init_mlp(sizes: Sequence[int], seed: int = 0) -> MlpModel:
    """Uniform Glorot initialization, biases zero, deterministic per seed."""
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 3:
        raise BadArchitecture("need at least one hidden layer")
    if any(s < 1 for s in sizes):
        raise BadArchitecture(f"layer sizes must be >= 1, got {sizes}")
    if sizes[-1] != 1:
        raise BadArchitecture("output layer must have exactly one unit")

    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(sizes=sizes, weights=weights, biases=biases, seed=seed)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return np.clip(out, 1e-12, 1.0 - 1e-12)


def _forward_cached(model: MlpModel, inputs: np.ndarray, *, train: bool,
                    dropout_rate: float, rng: np.random.Generator | None):
    """All layer activations plus the dropout masks actually applied.

    Hidden activations are stored post-dropout (inverted scaling folded in),
    so they are exactly what the next layer consumed.
    """
    a = inputs
    activations = [a]
    masks: list[np.ndarray | None] = []
    for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        if layer < model.n_layers - 1:
            a = np.maximum(z, 0.0)
            if train and dropout_rate > 0.0:
                keep = rng.random(a.shape) >= dropout_rate
                mask = keep / (1.0 - dropout_rate)  # inverted dropout scaling
                a = a * mask
                masks.append(mask)
            else:
                masks.append(None)
        else:
            a = _sigmoid(z)
        activations.append(a)
    return activations, masks


def forward(model: MlpModel, inputs: np.ndarray, *, train: bool = False,
            dropout_rate: float = 0.0, rng: np.random.Generator | None = None):
    """Probability output in (0, 1) for one row or a batch of rows.

    Inference mode is deterministic; train mode applies inverted dropout to
    hidden activations using ``rng``.
    """
    arr = np.atleast_2d(np.asarray(inputs, dtype=float))
    if arr.shape[1] != model.input_dim:
        raise DimensionMismatch(f"expected input dim {model.input_dim}, got {arr.shape[1]}")
    if train and dropout_rate > 0.0 and rng is None:
        raise ValueError("train-mode dropout requires an rng")
    acts, _ = _forward_cached(model, arr, train=train, dropout_rate=dropout_rate, rng=rng)
    out = acts[-1][:, 0]
    return out if np.ndim(inputs) > 1 else float(out[0])


def _backward(model: MlpModel, activations: list[np.ndarray],
              masks: list[np.ndarray | None], dloss_dout: np.ndarray):
    """Gradients for every weight/bias given d(total loss)/d(output)."""
    out = activations[-1]
    delta = (dloss_dout * out[:, 0] * (1.0 - out[:, 0]))[:, None]  # through the sigmoid
    grads_w = [None] * model.n_layers
    grads_b = [None] * model.n_layers
    for layer in range(model.n_layers - 1, -1, -1):
        grads_w[layer] = activations[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = delta @ model.weights[layer].T
            gate = activations[layer] > 0  # rectifier; zero for dropped units too
            if masks[layer - 1] is not None:
                delta = delta * gate * masks[layer - 1]
            else:
                delta = delta * gate
    return grads_w, grads_b


def weighted_ce_loss(p, y, pos_weight: float = 1.0):
    """Class-weighted cross entropy and its derivative pointwise in p.

    Probabilities are clamped to [PROB_CLAMP, 1 - PROB_CLAMP] first; the
    derivative is taken at the clamped point.
    """
    pc = np.clip(np.asarray(p, dtype=float), PROB_CLAMP, 1.0 - PROB_CLAMP)
    ya = np.asarray(y, dtype=float)
    loss = -(pos_weight * ya * np.log(pc) + (1.0 - ya) * np.log(1.0 - pc))
    dloss_dp = -pos_weight * ya / pc + (1.0 - ya) / (1.0 - pc)
    if np.ndim(p) == 0:
        return float(loss), float(dloss_dp)
    return loss, dloss_dp


@dataclass(frozen=True)
class AppTrainResult:
    model: MlpModel
    epoch_mean_loss: list[float] = field(default_factory=list)
    pos_weight: float = 1.0


def train_app(train: EncodedDataset, hidden: Sequence[int] = (64, 32),
              config: TrainConfig = TrainConfig()) -> AppTrainResult:
    """Train the purchase-probability network on features plus price.

    The offered price (normalized by p_max) is appended as the last input
    column. Shuffling, dropout, and initialization all derive from
    ``config.seed``, so identical configs yield bit-identical weights.
    """
    y = train.labels.astype(float)
    n1 = int(train.labels.sum())
    n0 = len(y) - n1
    if n0 == 0 or n1 == 0:
        raise SingleClassDataset("training data must contain both classes")
    pos_weight = config.pos_weight if config.pos_weight is not None else n0 / n1

    inputs = np.column_stack([train.features, train.prices / train.p_max])
    model = init_mlp([inputs.shape[1], *hidden, 1], seed=config.seed)
    rng = np.random.default_rng([config.seed, 1])  # separate stream from init

    step = 0
    trace: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(y))
        epoch_loss = 0.0
        for start in range(0, len(y), config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = inputs[idx], y[idx]
            acts, masks = _forward_cached(model, xb, train=True,
                                          dropout_rate=config.dropout_rate, rng=rng)
            loss_vec, dloss_dp = weighted_ce_loss(acts[-1][:, 0], yb, pos_weight)
            batch_loss = float(loss_vec.sum())
            if not np.isfinite(batch_loss):
                raise NonFiniteLoss(f"non-finite loss at epoch {epoch}, step {step}")
            epoch_loss += batch_loss
            grads_w, grads_b = _backward(model, acts, masks, dloss_dp / len(idx))
            lr = learning_rate_at(config, step)
            for w, b, gw, gb in zip(model.weights, model.biases, grads_w, grads_b):
                w -= lr * gw
                b -= lr * gb
            step += 1
        trace.append(epoch_loss / len(y))
    return AppTrainResult(model=model, epoch_mean_loss=trace, pos_weight=pos_weight)


@dataclass(frozen=True)
class MlpDemandModel:
    """DemandModel adapter: appends the normalized price column."""

    mlp: MlpModel
    p_max: float

    @property
    def n_features(self) -> int:
        return self.mlp.input_dim - 1

    def predict_proba(self, features: np.ndarray, price: float) -> float:
        row = np.append(features, price / self.p_max)
        return float(forward(self.mlp, row))

    def predict_proba_grid(self, features: np.ndarray, prices: np.ndarray) -> np.ndarray:
        prices = np.asarray(prices, dtype=float)
        rows = np.column_stack([
            np.broadcast_to(features, (len(prices), len(features))),
            prices / self.p_max,
        ])
        return forward(self.mlp, rows)

    def predict_proba_rows(self, features: np.ndarray, prices: np.ndarray) -> np.ndarray:
        rows = np.column_stack([features, np.asarray(prices, dtype=float) / self.p_max])
        return forward(self.mlp, rows)


def grad_check(model: MlpModel, loss_fn: Callable, inputs: np.ndarray,
               step: float = 1e-5) -> float:
    """Worst relative error between analytic and central-difference gradients.

    ``loss_fn`` maps the network output vector to (per-sample loss vector,
    d loss/d output vector); the total objective is the mean per-sample
    loss. Dropout must be off. Where both gradients are ~0 the comparison
    falls back to absolute error.
    """
    arr = np.atleast_2d(np.asarray(inputs, dtype=float))
    n = len(arr)

    acts, masks = _forward_cached(model, arr, train=False, dropout_rate=0.0, rng=None)
    _, dloss_dout = loss_fn(acts[-1][:, 0])
    grads_w, grads_b = _backward(model, acts, masks, np.asarray(dloss_dout, dtype=float) / n)

    def total_loss() -> float:
        out, _ = _forward_cached(model, arr, train=False, dropout_rate=0.0, rng=None)
        loss_vec, _ = loss_fn(out[-1][:, 0])
        return float(np.mean(loss_vec))

    worst = 0.0
    params = list(zip(model.weights, grads_w)) + list(zip(model.biases, grads_b))
    for tensor, grad in params:
        flat = tensor.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = total_loss()
            flat[i] = orig - step
            down = total_loss()
            flat[i] = orig
            numeric = (up - down) / (2.0 * step)
            analytic = gflat[i]
            scale = max(abs(numeric), abs(analytic))
            err = abs(numeric - analytic) if scale < 1e-10 else abs(numeric - analytic) / scale
            worst = max(worst, err)
    return worst

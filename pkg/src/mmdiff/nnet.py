"""Dense tanh network trained with Adam on labeled (y, x) pairs.

Backpropagation is written out by hand for the fixed architecture
``Linear -> tanh -> ... -> Linear``.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import Stage, stream

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class MlpModel:
    weights: list   # W_l with shape (fan_in, fan_out)
    biases: list

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise ValueError(f"layer {l}: bias shape {b.shape} does not match weight {W.shape}")
            if l and W.shape[0] != self.weights[l - 1].shape[1]:
                raise ValueError(f"layer {l}: input size {W.shape[0]} != previous output size")

    @property
    def layer_dims(self) -> list:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def params(self) -> list:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "MlpModel":
        return MlpModel([W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params())


def mlp_init(layer_dims, seed: int, component: int = 0) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    dims = [int(v) for v in layer_dims]
    if len(dims) < 2 or min(dims) < 1:
        raise ValueError(f"invalid layer dims {layer_dims}")
    gen = stream(seed, Stage.NNET, component, 0)
    Ws, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        Ws.append(gen.uniform(-bound, bound, size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return MlpModel(Ws, bs)


def mlp_forward(model: MlpModel, y):
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != model.in_dim:
        raise ValueError(f"expected input dimension {model.in_dim}, got {y.shape[-1]}")
    h = y
    last = len(model.weights) - 1
    for l, (W, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ W + b
        if l < last:
            np.tanh(h, out=h)
    return h


def mlp_loss_and_grad(model: MlpModel, Y, X):
    """Mean over rows of the squared error summed over output dims, and its gradient.

    Returns ``(loss, grads)`` with ``grads`` ordered like ``model.params()``.
    """
    acts = [Y]
    h = Y
    last = len(model.weights) - 1
    for l, (W, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ W + b
        if l < last:
            np.tanh(h, out=h)
        acts.append(h)
    resid = acts[-1] - X
    n = len(Y)
    loss = float(np.einsum("ij,ij->", resid, resid)) / n
    delta = resid * (2.0 / n)
    grads = [None] * (2 * len(model.weights))
    for l in range(last, -1, -1):
        grads[2 * l] = acts[l].T @ delta
        grads[2 * l + 1] = delta.sum(axis=0)
        if l:
            delta = delta @ model.weights[l].T
            delta *= 1.0 - acts[l] * acts[l]
    return loss, grads


class Adam:
    """Adam with bias correction, in the update form used by PyTorch."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads, lr):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainConfig:
    initial_lr: float = 1e-3
    lr_halving_period: int = 500
    epochs: int = 1000
    batch_size: int = 1500
    train_fraction: float = 0.8
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 0 or self.lr_halving_period < 1:
            raise ValueError("batch_size, epochs and lr_halving_period must be positive")

    def learning_rate(self, epoch: int) -> float:
        return self.initial_lr * 2.0 ** (-(epoch // self.lr_halving_period))


@dataclass
class TrainReport:
    train_mse: list = field(default_factory=list)
    val_mse: list = field(default_factory=list)
    lr: list = field(default_factory=list)

    def write_csv(self, path) -> Path:
        path = Path(path)
        rows = ["epoch,lr,train_mse,val_mse"]
        rows += [f"{e},{lr!r},{tr!r},{va!r}"
                 for e, (lr, tr, va) in enumerate(zip(self.lr, self.train_mse, self.val_mse))]
        path.write_text("\n".join(rows) + "\n")
        return path


def mlp_train(model: MlpModel, pairs, cfg: TrainConfig, log_every: int = 0):
    """Minibatch Adam on the mean squared error; returns ``(model, report)``.

    The pairs are shuffled once and split into training and validation
    parts; every epoch reshuffles the training part.  The last short batch
    is kept.  The returned model holds the final-epoch parameters.
    """
    Y = np.asarray(pairs.y, dtype=float)
    X = np.asarray(pairs.x, dtype=float)
    n = len(Y)
    if n < 2:
        raise ValueError("need at least two labeled pairs")
    if Y.shape[1] != model.in_dim or X.shape[1] != model.out_dim:
        raise ValueError("pair dimensions do not match the network")
    gen = stream(cfg.seed, Stage.NNET, int(getattr(pairs, "component", 0)), 1)
    perm = gen.permutation(n)
    n_train = min(n - 1, max(1, int(round(cfg.train_fraction * n))))
    tr, va = perm[:n_train], perm[n_train:]
    if cfg.batch_size > n_train:
        raise ValueError(f"batch_size {cfg.batch_size} exceeds the {n_train} training pairs")
    Ytr, Xtr, Yva, Xva = Y[tr], X[tr], Y[va], X[va]

    model = model.copy()
    opt = Adam(model.params(), cfg.beta1, cfg.beta2, cfg.adam_eps)
    report = TrainReport()
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate(epoch)
        order = gen.permutation(n_train)
        total = 0.0
        for b, lo in enumerate(range(0, n_train, cfg.batch_size)):
            idx = order[lo:lo + cfg.batch_size]
            loss, grads = mlp_loss_and_grad(model, Ytr[idx], Xtr[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b} (lr={lr:g})")
            opt.step(grads, lr)
            total += loss * len(idx)
        resid = mlp_forward(model, Yva) - Xva
        report.train_mse.append(total / n_train)
        report.val_mse.append(float(np.mean(np.sum(resid * resid, axis=1))))
        report.lr.append(lr)
        if log_every and (epoch + 1) % log_every == 0:
            log.info("epoch %d lr %.3g train %.3e val %.3e", epoch + 1, lr,
                     report.train_mse[-1], report.val_mse[-1])
    if not model.all_finite():
        raise TrainingError("training produced non-finite parameters")
    return model, report

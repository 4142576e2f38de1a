"""Small numpy MLP velocity field trained with conditional flow matching.

The network maps ``(x, t)`` to a velocity, with ``t`` appended as a raw input
feature. Training regresses ``v(x_t, t)`` onto ``x_1 - x_0`` for
``x_t = (1 - t) x_0 + t x_1`` with ``x_0 ~ N(0, I)`` drawn independently of
the data.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

__all__ = ["MlpVelocityField", "TrainingDiverged", "cfm_loss", "cfm_train", "mlp_denoise",
           "MlpFlowDenoiser"]

log = logging.getLogger(__name__)

HEADER_TAG = "mlp-velocity"


class TrainingDiverged(RuntimeError):
    pass


def _silu(a):
    return a * expit(a)


def _silu_grad(a):
    s = expit(a)
    return s * (1.0 + a * (1.0 - s))


class MlpVelocityField:
    """Fully connected SiLU network ``R^{d+1} -> R^d``.

    Parameters
    ----------
    dim : int
        Signal dimension ``d``.
    hidden : sequence of int
        Hidden layer widths.
    seed : int
        Seed of the initialization.
    """

    activation = "silu"

    def __init__(self, dim: int, hidden: Sequence[int] = (128, 128, 128), seed: int = 0):
        self.dim = int(dim)
        self.widths = [self.dim + 1, *[int(h) for h in hidden], self.dim]
        rng = np.random.default_rng(seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for i, (n_in, n_out) in enumerate(zip(self.widths[:-1], self.widths[1:])):
            bound = math.sqrt(6.0 / n_in)
            if i == len(self.widths) - 2:
                bound *= 0.1
            self.weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
            self.biases.append(np.zeros(n_out))
        self.history = np.empty(0)

    def copy(self) -> "MlpVelocityField":
        new = object.__new__(MlpVelocityField)
        new.dim = self.dim
        new.widths = list(self.widths)
        new.weights = [w.copy() for w in self.weights]
        new.biases = [b.copy() for b in self.biases]
        new.history = self.history.copy()
        return new

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def _inputs(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        t = np.broadcast_to(np.asarray(t, dtype=np.float64).reshape(-1, 1), (x.shape[0], 1))
        return np.concatenate([x, t], axis=1)

    def forward(self, x, t) -> np.ndarray:
        """Batched velocity: ``x`` is ``(B, d)``, ``t`` scalar or ``(B,)``."""
        h = self._inputs(x, t)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = _silu(h)
        return h

    def velocity(self, x, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return self.forward(x.reshape(1, -1), t).reshape(x.shape)

    def loss_and_grads(self, x, t, target):
        """Mean over the batch of ``||v(x, t) - target||^2`` and its parameter gradients."""
        h = self._inputs(x, t)
        acts, pre = [h], []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = h @ w + b
            pre.append(a)
            h = _silu(a) if i < last else a
            acts.append(h)
        diff = h - target
        n = diff.shape[0]
        loss = float((diff**2).sum() / n)
        delta = 2.0 * diff / n
        gw = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        for i in range(last, -1, -1):
            if i < last:
                delta = delta * _silu_grad(pre[i])
            gw[i] = acts[i].T @ delta
            gb[i] = delta.sum(axis=0)
            if i > 0:
                delta = delta @ self.weights[i].T
        grads = []
        for a, b in zip(gw, gb):
            grads += [a, b]
        return loss, grads

    def save(self, path) -> None:
        header = (f"# {HEADER_TAG} v1 widths={','.join(map(str, self.widths))} "
                  f"activation={self.activation}")
        flat = np.concatenate([p.ravel() for p in self.params])
        lines = [header] + [repr(float(v)) for v in flat]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "MlpVelocityField":
        lines = Path(path).read_text().splitlines()
        head = lines[0].split()
        if len(head) < 3 or head[0] != "#" or head[1] != HEADER_TAG:
            raise ValueError("not an mlp-velocity parameter file")
        fields = dict(tok.split("=", 1) for tok in head[3:])
        if fields.get("activation", cls.activation) != cls.activation:
            raise ValueError(f"unsupported activation {fields['activation']!r}")
        widths = [int(w) for w in fields["widths"].split(",")]
        values = np.array([float(v) for v in lines[1:] if v.strip()])
        net = object.__new__(cls)
        net.dim = widths[-1]
        net.widths = widths
        net.weights, net.biases = [], []
        pos = 0
        for n_in, n_out in zip(widths[:-1], widths[1:]):
            net.weights.append(values[pos:pos + n_in * n_out].reshape(n_in, n_out).copy())
            pos += n_in * n_out
            net.biases.append(values[pos:pos + n_out].copy())
            pos += n_out
        if pos != values.size:
            raise ValueError(f"parameter count mismatch: header implies {pos}, file has {values.size}")
        net.history = np.empty(0)
        return net


def cfm_loss(net: MlpVelocityField, x1: np.ndarray, rng: np.random.Generator) -> float:
    """Monte-Carlo estimate of the CFM objective on the batch ``x1``."""
    x0 = rng.standard_normal(x1.shape)
    t = rng.uniform(size=x1.shape[0])
    xt = (1.0 - t)[:, None] * x0 + t[:, None] * x1
    v = net.forward(xt, t)
    return float(((v - (x1 - x0)) ** 2).sum() / x1.shape[0])


def cfm_train(prior_samples: np.ndarray, net: MlpVelocityField, steps: int, batch: int = 256,
              learning_rate: float = 1e-3, seed: int = 0, final_lr_fraction: float = 0.05,
              betas=(0.9, 0.999), eps: float = 1e-8) -> MlpVelocityField:
    """Fit ``net`` by Adam on the CFM loss and return the trained copy.

    The learning rate follows a cosine decay to ``final_lr_fraction`` of its
    initial value. Per-step losses are stored in ``history`` of the result.
    """
    data = np.atleast_2d(np.asarray(prior_samples, dtype=np.float64))
    if data.shape[0] == 0:
        raise ValueError("training set is empty")
    if data.shape[1] != net.dim:
        raise ValueError(f"samples have dim {data.shape[1]}, network expects {net.dim}")
    net = net.copy()
    if steps <= 0:
        return net
    rng = np.random.default_rng(seed)
    params = net.params
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2 = betas
    losses = np.empty(steps)
    for k in range(steps):
        x1 = data[rng.integers(0, data.shape[0], size=batch)]
        x0 = rng.standard_normal(x1.shape)
        t = rng.uniform(size=batch)
        xt = (1.0 - t)[:, None] * x0 + t[:, None] * x1
        loss, grads = net.loss_and_grads(xt, t, x1 - x0)
        if not math.isfinite(loss):
            raise TrainingDiverged(f"CFM loss became non-finite at step {k}")
        losses[k] = loss
        frac = final_lr_fraction + (1 - final_lr_fraction) * 0.5 * (1 + math.cos(math.pi * k / steps))
        lr = learning_rate * frac
        c1 = 1.0 - b1 ** (k + 1)
        c2 = 1.0 - b2 ** (k + 1)
        for p, g, mi, vi in zip(params, grads, m, v):
            mi *= b1
            mi += (1 - b1) * g
            vi *= b2
            vi += (1 - b2) * g * g
            p -= lr * (mi / c1) / (np.sqrt(vi / c2) + eps)
        if k % 5000 == 0:
            log.debug("cfm step %d loss %.5f", k, loss)
    net.history = np.concatenate([net.history, losses])
    return net


def mlp_denoise(net: MlpVelocityField, x, t: float) -> np.ndarray:
    """``x + (1 - t) v(x, t)``; exactly ``x`` at ``t = 1``."""
    x = np.asarray(x, dtype=np.float64)
    if t == 1.0:
        return x.copy()
    return x + (1.0 - t) * net.velocity(x, t)


class MlpFlowDenoiser:
    def __init__(self, net: MlpVelocityField):
        self.net = net

    def denoise(self, x, t: float) -> np.ndarray:
        return mlp_denoise(self.net, x, t)

    def velocity(self, x, t: float) -> np.ndarray:
        return self.net.velocity(x, t)

    __call__ = denoise

"""Learned factor functions for biases without a closed-form split.

Two small networks map source coordinates to R-dimensional factors; their
outer product is trained to match a dense target bias. Each network is
three linear layers with tanh between the first two (input -> hidden ->
hidden -> R). The loss is the mean squared entry-wise error of
factors_q @ factors_k.T against the target, minimized with full-batch Adam
and a stepwise learning-rate decay. Everything here is plain numpy with
hand-written backpropagation; runs are deterministic for a fixed seed.
"""

from __future__ import annotations

from typing import List, Tuple

import numpy as np

from .bias import FactoredBias
from .core import as_matrix, check_finite
from .errors import ShapeError, TrainingError, ValidationError
from .rng import Rng


class Mlp:
    """Three linear layers with tanh after the first and second."""

    def __init__(self, weights: List[np.ndarray], biases: List[np.ndarray]):
        self.weights = weights
        self.biases = biases

    @classmethod
    def init(cls, rng: Rng, dims: Tuple[int, int, int, int]) -> "Mlp":
        """Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero
        biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append((rng.uniform(fan_in, fan_out) * 2.0 - 1.0) * limit)
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    def params(self) -> List[np.ndarray]:
        return [*self.weights, *self.biases]

    def forward(self, x: np.ndarray):
        h1 = np.tanh(x @ self.weights[0] + self.biases[0])
        h2 = np.tanh(h1 @ self.weights[1] + self.biases[1])
        y = h2 @ self.weights[2] + self.biases[2]
        return y, (x, h1, h2)

    def backward(self, cache, dy: np.ndarray) -> List[np.ndarray]:
        """Gradients in params() order for upstream gradient dy."""
        x, h1, h2 = cache
        dw3 = h2.T @ dy
        db3 = dy.sum(axis=0)
        dh2 = (dy @ self.weights[2].T) * (1.0 - h2 * h2)
        dw2 = h1.T @ dh2
        db2 = dh2.sum(axis=0)
        dh1 = (dh2 @ self.weights[1].T) * (1.0 - h1 * h1)
        dw1 = x.T @ dh1
        db1 = dh1.sum(axis=0)
        return [dw1, dw2, dw3, db1, db2, db3]


class FactorNetworks:
    """The query/key network pair plus its training-loss plumbing."""

    def __init__(self, q_net: Mlp, k_net: Mlp):
        self.q_net = q_net
        self.k_net = k_net

    @classmethod
    def init(cls, rng: Rng, in_dim: int, hidden: int, rank: int) -> "FactorNetworks":
        dims = (in_dim, hidden, hidden, rank)
        return cls(Mlp.init(rng, dims), Mlp.init(rng, dims))

    def factors(self, xq: np.ndarray, xk: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self.q_net.forward(xq)[0], self.k_net.forward(xk)[0]

    def params(self) -> List[np.ndarray]:
        return self.q_net.params() + self.k_net.params()

    def loss(self, xq, xk, target) -> float:
        yq, _ = self.q_net.forward(xq)
        yk, _ = self.k_net.forward(xk)
        diff = yq @ yk.T - target
        return float(np.mean(diff * diff))

    def loss_and_grads(self, xq, xk, target):
        """Loss plus gradients (params() order) by backprop through the
        factor product."""
        yq, cq = self.q_net.forward(xq)
        yk, ck = self.k_net.forward(xk)
        diff = yq @ yk.T - target
        loss = float(np.mean(diff * diff))
        g = (2.0 / diff.size) * diff
        grads_q = self.q_net.backward(cq, g @ yk)
        grads_k = self.k_net.backward(ck, g.T @ yq)
        return loss, grads_q + grads_k


def neural_decompose(xq, xk, target, rank: int, hidden: int, iters: int,
                     lr: float = 1e-3, lr_decay: Tuple[float, int] = (0.95, 50),
                     seed: int = 0):
    """Fit factor networks to a dense target bias.

    Adam with beta1=0.9, beta2=0.999, eps=1e-8; the learning rate is
    multiplied by lr_decay[0] every lr_decay[1] iterations. Returns the
    factored bias evaluated at the final parameters, the trained network
    pair, and the per-iteration loss trace. Raises TrainingError (with the
    iteration index) if the loss stops being finite.
    """
    xq = as_matrix(xq, "xq")
    xk = as_matrix(xk, "xk")
    target = as_matrix(target, "target")
    check_finite(target, "target")
    if xq.shape[1] != xk.shape[1]:
        raise ShapeError(f"xq and xk feature dims differ: {xq.shape[1]} vs {xk.shape[1]}")
    if target.shape != (xq.shape[0], xk.shape[0]):
        raise ShapeError(
            f"target shape {target.shape} does not match ({xq.shape[0]}, {xk.shape[0]})"
        )
    if iters < 1:
        raise ValidationError("iters must be >= 1")
    if rank < 1 or hidden < 1:
        raise ValidationError("rank and hidden must be >= 1")
    decay_factor, decay_every = lr_decay
    if decay_every < 1 or decay_factor <= 0:
        raise ValidationError("lr_decay must be (positive factor, every >= 1)")

    nets = FactorNetworks.init(Rng(seed), xq.shape[1], hidden, rank)
    params = nets.params()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    losses = []

    for it in range(iters):
        loss, grads = nets.loss_and_grads(xq, xk, target)
        if not np.isfinite(loss):
            raise TrainingError("loss became non-finite", it)
        losses.append(loss)
        t = it + 1
        lr_t = lr * decay_factor ** (it // decay_every)
        for i, g in enumerate(grads):
            m[i] = beta1 * m[i] + (1 - beta1) * g
            v[i] = beta2 * v[i] + (1 - beta2) * (g * g)
            m_hat = m[i] / (1 - beta1 ** t)
            v_hat = v[i] / (1 - beta2 ** t)
            params[i] -= lr_t * m_hat / (np.sqrt(v_hat) + eps)

    fq, fk = nets.factors(xq, xk)
    fb = FactoredBias(fq, fk, origin="neural",
                      descriptor=f"mlp(rank={rank},hidden={hidden},iters={iters},seed={seed})")
    return fb, nets, losses

"""Backpropagation fine-tuning with Adam, and the random-init baseline.

Training operates on the raw node parametrization (a_n, b_n, c_n); the
unit-norm constraint on inner weights is not maintained while optimizing.
The mean-squared-error loss keeps the learning-rate scale independent of
batch size, and the learning rate decays exponentially per epoch.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import Dataset, ShallowNetwork, batch_eval, preactivations, rescale_node
from .sampling import substream

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10_000
    batch_size: int = 32
    initial_lr: float = 1e-3
    decay_rate: float = 4.6e-4
    seed: int = 0
    shuffle: bool = True
    train_outer_only: bool = False  # freeze (a, b); convex in c, used for sanity runs

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.initial_lr <= 0.0:
            raise ValueError("initial_lr must be positive")
        if self.decay_rate < 0.0:
            raise ValueError("decay_rate must be >= 0")


@dataclass(frozen=True)
class InitSpec:
    kind: str = "truncated-normal"
    stddev: float = 0.05
    truncation: float = 2.0  # in units of stddev
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gsn-network", "truncated-normal"):
            raise ValueError(f"unknown init kind {self.kind!r}")
        if self.stddev <= 0.0:
            raise ValueError("stddev must be positive")


@dataclass
class NetParams:
    """Unconstrained node parameters: rows of A pair with b and c entries."""

    A: np.ndarray  # (n_nodes, d)
    b: np.ndarray  # (n_nodes,)
    c: np.ndarray  # (n_nodes,)

    def copy(self) -> "NetParams":
        return NetParams(self.A.copy(), self.b.copy(), self.c.copy())

    @property
    def n_nodes(self) -> int:
        return self.b.size


def params_from_network(net: ShallowNetwork) -> NetParams:
    return NetParams(net.node_a.copy(), net.node_b.copy(), net.node_c.copy())


def params_to_network(params: NetParams, input_dim: int) -> ShallowNetwork:
    """Rescale raw nodes back onto the sphere; exact-zero nodes drop out."""
    nodes = []
    for a, b, c in zip(params.A, params.b, params.c):
        if np.dot(a, a) + b * b == 0.0:
            continue  # contributes relu(0) = 0 everywhere
        nodes.append(rescale_node(a, b, c))
    return ShallowNetwork(tuple(nodes), input_dim)


def predict(params: NetParams, inputs: np.ndarray) -> np.ndarray:
    return np.maximum(inputs @ params.A.T + params.b, 0.0) @ params.c


def loss_and_gradients(net: ShallowNetwork, batch: Dataset) -> tuple[float, NetParams]:
    """Mean-squared-error loss and its gradients for every node parameter.

    The ReLU subgradient at zero is taken as 0, so a node whose
    pre-activations are all non-positive receives zero gradients. The
    forward pass shares batch_eval's accumulation order, so a network that
    reproduces the targets exactly gets exactly zero loss and gradients.
    """
    if batch.n_points == 0:
        raise ValueError("batch is empty")
    params = params_from_network(net)
    n = batch.n_points
    X, y = batch.inputs, batch.targets
    err = batch_eval(net, X) - y
    loss = float(np.dot(err, err) / n)
    z = preactivations(X, params.A, params.b)
    gate = z > 0.0
    act = np.where(gate, z, 0.0)
    coef = (2.0 / n) * err
    gc = act.T @ coef
    P = gate * coef[:, None]                 # (n, nodes)
    gA = (P.T @ X) * params.c[:, None]
    gb = P.sum(axis=0) * params.c
    return loss, NetParams(gA, gb, gc)


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Exponentially decayed learning rate, indexed by epoch."""
    return cfg.initial_lr * math.exp(-cfg.decay_rate * epoch)


@dataclass
class OptimizerState:
    """Adam moment accumulators over a flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n_params: int) -> "OptimizerState":
        return cls(np.zeros(n_params), np.zeros(n_params))


def adam_update(state: OptimizerState, params: np.ndarray, grads: np.ndarray,
                lr: float) -> tuple[OptimizerState, np.ndarray]:
    """One bias-corrected Adam step; returns updated (state, params)."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("parameter, gradient and state shapes must match")
    state.step += 1
    state.m *= ADAM_BETA1
    state.m += (1.0 - ADAM_BETA1) * grads
    state.v *= ADAM_BETA2
    state.v += (1.0 - ADAM_BETA2) * (grads * grads)
    mhat = state.m / (1.0 - ADAM_BETA1**state.step)
    vhat = state.v / (1.0 - ADAM_BETA2**state.step)
    params = params - lr * mhat / (np.sqrt(vhat) + ADAM_EPS)
    return state, params


def train_params(params: NetParams, train_set: Dataset, cfg: TrainConfig) -> tuple[NetParams, np.ndarray]:
    """Mini-batch Adam loop on raw parameters; returns per-epoch train loss."""
    n_nodes, d = params.A.shape
    n = train_set.n_points
    X, y = train_set.inputs, train_set.targets
    batch = min(cfg.batch_size, n)
    rng = substream(cfg.seed, "shuffle")

    theta = np.concatenate([params.A.ravel(), params.b, params.c])
    A = theta[: n_nodes * d].reshape(n_nodes, d)
    b = theta[n_nodes * d: n_nodes * (d + 1)]
    c = theta[n_nodes * (d + 1):]
    grad = np.zeros_like(theta)
    gA = grad[: n_nodes * d].reshape(n_nodes, d)
    gb = grad[n_nodes * d: n_nodes * (d + 1)]
    gc = grad[n_nodes * (d + 1):]
    mom = np.zeros_like(theta)
    vel = np.zeros_like(theta)
    inner = not cfg.train_outer_only

    curve = np.empty(cfg.epochs)
    t = 0
    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg)
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        for lo in range(0, n, batch):
            idx = order[lo: lo + batch]
            Xb = X[idx]
            z = Xb @ A.T + b
            gate = z > 0.0
            act = np.where(gate, z, 0.0)
            err = act @ c - y[idx]
            coef = (2.0 / idx.size) * err
            np.matmul(act.T, coef, out=gc)
            P = gate * coef[:, None]
            if inner:
                np.matmul(P.T, Xb, out=gA)
                gA *= c[:, None]
                gb[:] = P.sum(axis=0)
                gb *= c
            # Adam step over the flat parameter vector (same arithmetic as
            # adam_update, inlined to keep the hot loop allocation-light)
            t += 1
            mom *= ADAM_BETA1
            mom += (1.0 - ADAM_BETA1) * grad
            vel *= ADAM_BETA2
            vel += (1.0 - ADAM_BETA2) * (grad * grad)
            mhat = mom / (1.0 - ADAM_BETA1**t)
            vhat = vel / (1.0 - ADAM_BETA2**t)
            theta -= lr * mhat / (np.sqrt(vhat) + ADAM_EPS)
        full_err = np.maximum(X @ A.T + b, 0.0) @ c - y
        curve[epoch] = np.dot(full_err, full_err) / n
    return NetParams(A.copy(), b.copy(), c.copy()), curve


def train(net0: ShallowNetwork, train_set: Dataset, val_set: Dataset | None,
          cfg: TrainConfig) -> tuple[ShallowNetwork, np.ndarray]:
    """Fine-tune a network; returns the final network and the loss curve."""
    if net0.input_dim != train_set.dim:
        raise ValueError("network and training set dimensions differ")
    if val_set is not None and val_set.dim != train_set.dim:
        raise ValueError("validation set dimension differs from training set")
    if cfg.epochs == 0 or net0.n_nodes == 0:
        return net0, np.zeros(0)
    params, curve = train_params(params_from_network(net0), train_set, cfg)
    return params_to_network(params, train_set.dim), curve


def truncated_normal_params(n_nodes: int, input_dim: int, spec: InitSpec) -> NetParams:
    """Rejection-sampled truncated normal draws for every raw parameter."""
    rng = substream(spec.seed, "init")
    bound = spec.truncation * spec.stddev

    def draw(shape):
        out = rng.normal(0.0, spec.stddev, size=shape)
        bad = np.abs(out) > bound
        while np.any(bad):
            out[bad] = rng.normal(0.0, spec.stddev, size=int(bad.sum()))
            bad = np.abs(out) > bound
        return out

    return NetParams(draw((n_nodes, input_dim)), draw(n_nodes), draw(n_nodes))


@dataclass(frozen=True)
class RestartRecord:
    restart: int
    init_seed: int
    test_error: float
    final_train_loss: float


def multi_restart(n_nodes: int, train_set: Dataset, val_set: Dataset | None,
                  test_set: Dataset, cfg: TrainConfig, init: InitSpec,
                  n_restarts: int, base_seed: int | None = None,
                  ) -> tuple[ShallowNetwork, list[RestartRecord], np.ndarray]:
    """Best-of-n randomly initialized training runs.

    Restart r draws its init from seed base_seed + r; the shuffle stream
    comes from cfg.seed for every restart. Returns the network with the
    lowest test RMSE, the per-restart table, and the best run's loss curve.
    """
    if n_restarts < 1:
        raise ValueError("n_restarts must be >= 1")
    if init.kind != "truncated-normal":
        raise ValueError("restart baselines draw truncated-normal initializations")
    base = init.seed if base_seed is None else base_seed
    best_net, best_curve, records = None, None, []
    best_err = np.inf
    sqrt_n = np.sqrt(test_set.n_points)
    for r in range(n_restarts):
        seed_r = base + r
        params = truncated_normal_params(n_nodes, train_set.dim, replace(init, seed=seed_r))
        if cfg.epochs > 0:
            params, curve = train_params(params, train_set, cfg)
        else:
            curve = np.zeros(0)
        net = params_to_network(params, train_set.dim)
        err = float(np.linalg.norm(batch_eval(net, test_set.inputs) - test_set.targets) / sqrt_n)
        final_loss = float(curve[-1]) if curve.size else float("nan")
        records.append(RestartRecord(r, seed_r, err, final_loss))
        if err < best_err:
            best_err, best_net, best_curve = err, net, curve
    return best_net, records, best_curve


def save_loss_csv(curve: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss"])
        for epoch, value in enumerate(curve):
            writer.writerow([epoch, repr(float(value))])

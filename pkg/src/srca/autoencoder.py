"""Graph auto-encoder scoring node health by reconstruction error.

Four attention layers: an encoder (D -> h, h -> h) and a mirrored
decoder (h -> h, h -> D); all but the last use ReLU, the output layer
is linear.  Training minimizes the squared Frobenius reconstruction
error with Adam over shuffled mini-batches, where a batch is the
disjoint union of its graphs and the objective is the mean per-graph
error.  A node's anomaly score is the L2 norm of its reconstruction
residual row.

Everything is seeded: parameter init and the per-epoch shuffle derive
from the config seed, so a rerun reproduces the model bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .gat import (
    GatLayerParams,
    GraphTopology,
    build_topology,
    combine_topologies,
    init_layer,
    layer_backward,
    layer_forward,
)

N_LAYERS = 4


@dataclass
class GatAutoEncoder:
    layers: list[GatLayerParams]
    d_in: int
    d_hidden: int


@dataclass
class TrainConfig:
    d_hidden: int = 32
    lr: float = 0.004
    epochs: int = 100
    batch_size: int = 128
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0


def init_model(d_in: int, d_hidden: int, seed: int) -> GatAutoEncoder:
    if d_in < 1 or d_hidden < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    dims = [(d_in, d_hidden), (d_hidden, d_hidden),
            (d_hidden, d_hidden), (d_hidden, d_in)]
    layers = [init_layer(rng, a, b) for a, b in dims]
    return GatAutoEncoder(layers, d_in, d_hidden)


def forward(model: GatAutoEncoder, x: np.ndarray,
            topo: GraphTopology) -> tuple[np.ndarray, list]:
    """Reconstruct ``x``; returns (x_hat, per-layer caches)."""
    caches = []
    h = np.asarray(x, dtype=np.float64)
    last = len(model.layers) - 1
    for i, layer in enumerate(model.layers):
        h, cache = layer_forward(layer, h, topo, relu=(i != last))
        caches.append(cache)
    return h, caches


def reconstruction(model: GatAutoEncoder, x: np.ndarray,
                   topo: GraphTopology) -> np.ndarray:
    return forward(model, x, topo)[0]


def loss_value(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Squared Frobenius norm of the reconstruction residual."""
    resid = x_hat - x
    return float(np.sum(resid * resid))


def grad(model: GatAutoEncoder, x: np.ndarray, topo: GraphTopology,
         scale: float = 1.0):
    """Loss and parameter gradients of ``scale * ||x - x_hat||_F^2``.

    Returns (loss, grads) with grads[i] = (d_w, d_a) for layer i.
    """
    x = np.asarray(x, dtype=np.float64)
    x_hat, caches = forward(model, x, topo)
    resid = x_hat - x
    loss = scale * float(np.sum(resid * resid))
    d_h = (2.0 * scale) * resid
    grads: list = [None] * len(model.layers)
    for i in range(len(model.layers) - 1, -1, -1):
        d_h, d_w, d_a = layer_backward(model.layers[i], caches[i], topo, d_h)
        grads[i] = (d_w, d_a)
    return loss, grads


class AdamState:
    """First/second moment buffers for every parameter array."""

    def __init__(self, model: GatAutoEncoder):
        self.t = 0
        self.m = [(np.zeros_like(l.w), np.zeros_like(l.a)) for l in model.layers]
        self.v = [(np.zeros_like(l.w), np.zeros_like(l.a)) for l in model.layers]

    def step(self, model: GatAutoEncoder, grads, cfg: TrainConfig) -> None:
        self.t += 1
        bc1 = 1.0 - cfg.beta1 ** self.t
        bc2 = 1.0 - cfg.beta2 ** self.t
        for i, layer in enumerate(model.layers):
            for j, (param, g) in enumerate(((layer.w, grads[i][0]),
                                            (layer.a, grads[i][1]))):
                m, v = self.m[i][j], self.v[i][j]
                m *= cfg.beta1
                m += (1.0 - cfg.beta1) * g
                v *= cfg.beta2
                v += (1.0 - cfg.beta2) * (g * g)
                param -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)


def train(graphs, cfg: TrainConfig, log_fn=None) -> tuple[GatAutoEncoder, list[float]]:
    """Fit the auto-encoder on attributed graphs.

    Returns the model and the per-epoch mean per-graph loss history.
    ``log_fn(epoch, mean_loss)`` is called after each epoch if given.
    """
    graphs = list(graphs)
    if not graphs:
        raise ValueError("no graphs to train on")
    xs = [np.asarray(g.x, dtype=np.float64) for g in graphs]
    d_in = xs[0].shape[1]
    if any(x.shape[1] != d_in for x in xs):
        raise ValueError("inconsistent attribute dimensions across graphs")
    topos = [build_topology(g.n_nodes, g.edges) for g in graphs]

    model = init_model(d_in, cfg.d_hidden, cfg.seed)
    adam = AdamState(model)
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    n = len(graphs)
    history = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        epoch_sse = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            topo_u, _ = combine_topologies([topos[i] for i in batch])
            x_u = np.vstack([xs[i] for i in batch])
            loss, grads = grad(model, x_u, topo_u, scale=1.0 / len(batch))
            if not math.isfinite(loss):
                raise NumericError(
                    f"loss became non-finite at epoch {epoch}; "
                    f"lower the learning rate or check the input attributes")
            adam.step(model, grads, cfg)
            epoch_sse += loss * len(batch)
        mean_loss = epoch_sse / n
        history.append(mean_loss)
        if log_fn is not None:
            log_fn(epoch, mean_loss)
    return model, history


def node_scores(model: GatAutoEncoder, x: np.ndarray,
                topo: GraphTopology) -> np.ndarray:
    """Per-node anomaly score: L2 norm of the reconstruction residual."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = reconstruction(model, x, topo)
    return np.linalg.norm(x - x_hat, axis=1)


def score_graph(model: GatAutoEncoder, graph,
                topo: GraphTopology | None = None) -> np.ndarray:
    if topo is None:
        topo = build_topology(graph.n_nodes, graph.edges)
    return node_scores(model, graph.x, topo)

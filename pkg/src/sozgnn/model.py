"""Dual-task graph convolutional network with exact reverse-mode gradients.

Architecture, for a batch of graphs stacked block-diagonally:

    H0 = relu(X W_in + b_in)                   (dropout in training)
    H1 = relu(A H0 W1 + b1)                    (dropout in training)
    H2 = relu(A H1 W2 + b2)
    node_logits  = H2 W_node + b_node
    h_combined   = [mean_pool(H2) | g]
    graph_logits = relu(h_combined W_g1 + b_g1) W_g2 + b_g2

A is the symmetric-normalized binary adjacency with self loops.
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .features import N_FEATURES, N_GRAPH_FEATURES, GraphSample
from .graph import EdgeIndex


@dataclass(frozen=True)
class ModelConfig:
    in_dim: int = N_FEATURES
    hidden_dim: int = 64
    dropout: float = 0.2
    alpha: float = 0.5
    class_weights_node: tuple[float, float] = (1.0, 1.0)
    class_weights_graph: tuple[float, float] = (1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        for name in ("class_weights_node", "class_weights_graph"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if min(self.class_weights_node + self.class_weights_graph) <= 0:
            raise ValueError("class weights must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class_weights_node"] = list(self.class_weights_node)
        d["class_weights_graph"] = list(self.class_weights_graph)
        return d


def param_layout(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    D, F, G = cfg.hidden_dim, cfg.in_dim, N_GRAPH_FEATURES
    return [
        ("W_in", (F, D)), ("b_in", (D,)),
        ("W1", (D, D)), ("b1", (D,)),
        ("W2", (D, D)), ("b2", (D,)),
        ("W_node", (D, 2)), ("b_node", (2,)),
        ("W_g1", (D + G, D)), ("b_g1", (D,)),
        ("W_g2", (D, 2)), ("b_g2", (2,)),
    ]


class ModelParams:
    """All trainable weights as views into one flat float64 vector."""

    def __init__(self, cfg_or_layout, flat: np.ndarray | None = None):
        if isinstance(cfg_or_layout, ModelConfig):
            self.layout = param_layout(cfg_or_layout)
        else:
            self.layout = [(name, tuple(shape)) for name, shape in cfg_or_layout]
        size = sum(int(np.prod(s)) for _, s in self.layout)
        self.flat = np.zeros(size) if flat is None else np.asarray(flat, dtype=np.float64)
        if self.flat.shape != (size,):
            raise ValueError(f"expected {size} parameters, got {self.flat.shape}")
        self.views: dict[str, np.ndarray] = {}
        pos = 0
        for name, shape in self.layout:
            n = int(np.prod(shape))
            self.views[name] = self.flat[pos:pos + n].reshape(shape)
            pos += n

    def __getitem__(self, name) -> np.ndarray:
        return self.views[name]

    def copy(self) -> "ModelParams":
        return ModelParams(self.layout, self.flat.copy())

    def zeros_like(self) -> "ModelParams":
        return ModelParams(self.layout)

    @classmethod
    def init(cls, cfg: ModelConfig, seed: int | None = None) -> "ModelParams":
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(cfg.seed if seed is None else seed)
        p = cls(cfg)
        for name, shape in p.layout:
            if len(shape) == 2:
                limit = np.sqrt(6.0 / (shape[0] + shape[1]))
                p.views[name][...] = rng.uniform(-limit, limit, size=shape)
        return p


def gcn_normalize(edges: EdgeIndex, n_nodes: int | None = None) -> sp.csr_matrix:
    """D^-1/2 (A + I) D^-1/2 with A the binary edge support."""
    n = edges.n_nodes if n_nodes is None else n_nodes
    i, j = edges.pairs[:, 0], edges.pairs[:, 1]
    rows = np.concatenate([i, j, np.arange(n)])
    cols = np.concatenate([j, i, np.arange(n)])
    a = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    a.data[:] = 1.0  # collapse duplicate edges to binary
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv = 1.0 / np.sqrt(deg)
    return sp.csr_matrix(sp.diags(inv) @ a @ sp.diags(inv))


@dataclass
class GraphBatch:
    X: np.ndarray  # total_nodes x F
    A: sp.csr_matrix  # block-diagonal propagation matrix
    pool: sp.csr_matrix  # n_graphs x total_nodes, row-averaging
    batch: np.ndarray  # graph id per node
    g: np.ndarray  # n_graphs x 6
    node_labels: np.ndarray
    graph_labels: np.ndarray

    @property
    def n_graphs(self) -> int:
        return self.g.shape[0]


def make_batch(samples: Sequence[GraphSample], props: Sequence[sp.csr_matrix] | None = None) -> GraphBatch:
    if props is None:
        props = [gcn_normalize(s.edges) for s in samples]
    sizes = np.array([s.n_nodes for s in samples])
    batch = np.repeat(np.arange(len(samples)), sizes)
    pool = sp.csr_matrix(
        (1.0 / sizes[batch], (batch, np.arange(batch.size))), shape=(len(samples), batch.size)
    )
    return GraphBatch(
        X=np.concatenate([s.X for s in samples], axis=0),
        A=sp.block_diag(props, format="csr"),
        pool=pool,
        batch=batch,
        g=np.stack([s.g for s in samples]),
        node_labels=np.concatenate([s.node_labels for s in samples]).astype(np.int64),
        graph_labels=np.array([s.graph_label for s in samples], dtype=np.int64),
    )


@dataclass
class ForwardOutput:
    node_logits: np.ndarray
    graph_logits: np.ndarray
    cache: dict


def _relu(z):
    return np.maximum(z, 0.0)


def _dropout_mask(rng, shape, rate):
    if rate <= 0.0:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


def forward(params: ModelParams, batch: GraphBatch | GraphSample, cfg: ModelConfig,
            train_mode: bool = False, rng: np.random.Generator | None = None) -> ForwardOutput:
    if isinstance(batch, GraphSample):
        batch = make_batch([batch])
    if batch.X.shape[1] != cfg.in_dim:
        raise ValueError(f"node features have {batch.X.shape[1]} columns, model expects {cfg.in_dim}")
    p = params
    drop = train_mode and cfg.dropout > 0
    if drop and rng is None:
        raise ValueError("training-mode forward needs an rng for dropout")

    H0 = _relu(batch.X @ p["W_in"] + p["b_in"])
    m0 = _dropout_mask(rng, H0.shape, cfg.dropout) if drop else None
    H0d = H0 * m0 if m0 is not None else H0
    P1 = batch.A @ H0d
    H1 = _relu(P1 @ p["W1"] + p["b1"])
    m1 = _dropout_mask(rng, H1.shape, cfg.dropout) if drop else None
    H1d = H1 * m1 if m1 is not None else H1
    P2 = batch.A @ H1d
    H2 = _relu(P2 @ p["W2"] + p["b2"])
    node_logits = H2 @ p["W_node"] + p["b_node"]
    h_pool = batch.pool @ H2
    h_comb = np.concatenate([h_pool, batch.g], axis=1)
    Hg = _relu(h_comb @ p["W_g1"] + p["b_g1"])
    graph_logits = Hg @ p["W_g2"] + p["b_g2"]
    cache = dict(batch=batch, H0=H0, m0=m0, H0d=H0d, P1=P1, H1=H1, m1=m1, H1d=H1d,
                 P2=P2, H2=H2, h_comb=h_comb, Hg=Hg)
    return ForwardOutput(node_logits=node_logits, graph_logits=graph_logits, cache=cache)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def weighted_cross_entropy(logits, labels, class_weights) -> float:
    """Weighted mean of -log p_y: sum_i w_yi * nll_i / sum_i w_yi."""
    return _weighted_ce_and_grad(logits, labels, class_weights)[0]


def _weighted_ce_and_grad(logits, labels, class_weights):
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    if logits.shape[0] != labels.shape[0]:
        raise ValueError("logits and labels disagree on the number of rows")
    w = np.asarray(class_weights, dtype=np.float64)[labels]
    total = w.sum()
    logp = log_softmax(logits)
    rows = np.arange(labels.size)
    loss = float(np.sum(-w * logp[rows, labels]) / total)
    grad = np.exp(logp)
    grad[rows, labels] -= 1.0
    grad *= (w / total)[:, None]
    return loss, grad


def combined_loss(node_loss: float, graph_loss: float, alpha: float) -> float:
    return (1.0 - alpha) * graph_loss + alpha * node_loss


@dataclass
class LossParts:
    total: float
    node: float
    graph: float


def loss_and_grad(params: ModelParams, batch: GraphBatch, cfg: ModelConfig,
                  train_mode: bool = False, rng: np.random.Generator | None = None):
    """Combined loss and its gradient in the flat parameter layout."""
    out = forward(params, batch, cfg, train_mode, rng)
    ln, dnode = _weighted_ce_and_grad(out.node_logits, batch.node_labels, cfg.class_weights_node)
    lg, dgraph = _weighted_ce_and_grad(out.graph_logits, batch.graph_labels, cfg.class_weights_graph)
    a = cfg.alpha
    grads = backward(params, out, a * dnode, (1.0 - a) * dgraph)
    return LossParts(combined_loss(ln, lg, a), ln, lg), grads, out


def backward(params: ModelParams, out: ForwardOutput, d_node_logits: np.ndarray,
             d_graph_logits: np.ndarray) -> np.ndarray:
    c = out.cache
    p = params
    batch: GraphBatch = c["batch"]
    g = p.zeros_like()

    # graph head
    g["W_g2"][...] = c["Hg"].T @ d_graph_logits
    g["b_g2"][...] = d_graph_logits.sum(axis=0)
    dZg = (d_graph_logits @ p["W_g2"].T) * (c["Hg"] > 0)
    g["W_g1"][...] = c["h_comb"].T @ dZg
    g["b_g1"][...] = dZg.sum(axis=0)
    D = p["W1"].shape[0]
    d_pool = (dZg @ p["W_g1"].T)[:, :D]

    # node head + pooling into H2
    g["W_node"][...] = c["H2"].T @ d_node_logits
    g["b_node"][...] = d_node_logits.sum(axis=0)
    dH2 = d_node_logits @ p["W_node"].T + batch.pool.T @ d_pool

    dZ2 = dH2 * (c["H2"] > 0)
    g["W2"][...] = c["P2"].T @ dZ2
    g["b2"][...] = dZ2.sum(axis=0)
    dH1d = batch.A.T @ (dZ2 @ p["W2"].T)
    dH1 = dH1d * c["m1"] if c["m1"] is not None else dH1d

    dZ1 = dH1 * (c["H1"] > 0)
    g["W1"][...] = c["P1"].T @ dZ1
    g["b1"][...] = dZ1.sum(axis=0)
    dH0d = batch.A.T @ (dZ1 @ p["W1"].T)
    dH0 = dH0d * c["m0"] if c["m0"] is not None else dH0d

    dZ0 = dH0 * (c["H0"] > 0)
    g["W_in"][...] = batch.X.T @ dZ0
    g["b_in"][...] = dZ0.sum(axis=0)
    return g.flat


def predict(out: ForwardOutput) -> tuple[np.ndarray, np.ndarray]:
    """Argmax per row; ties resolve to class 0."""
    return np.argmax(out.node_logits, axis=1), np.argmax(out.graph_logits, axis=1)


# -- checkpoints ----------------------------------------------------------------
# File layout: b"SOZGNN\x00\x01" | uint64 LE header length | UTF-8 JSON header | float64 LE params

_MAGIC = b"SOZGNN\x00\x01"


def checkpoint_bytes(params: ModelParams, cfg: ModelConfig, extra: dict | None = None) -> bytes:
    header = {
        "config": cfg.to_dict(),
        "layout": [[name, list(shape)] for name, shape in params.layout],
        "seed": cfg.seed,
        "n_params": int(params.flat.size),
        "extra": extra or {},
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    return _MAGIC + struct.pack("<Q", len(hbytes)) + hbytes + params.flat.astype("<f8").tobytes()


def save_checkpoint(path: str | os.PathLike, params: ModelParams, cfg: ModelConfig, extra: dict | None = None) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(checkpoint_bytes(params, cfg, extra))
    os.replace(tmp, path)
    return path


def load_checkpoint(path: str | os.PathLike) -> tuple[ModelParams, ModelConfig, dict]:
    blob = Path(path).read_bytes()
    if blob[:8] != _MAGIC:
        raise ValueError(f"{path}: not a model checkpoint")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    header = json.loads(blob[16:16 + hlen])
    cfg = ModelConfig(**header["config"])
    flat = np.frombuffer(blob, dtype="<f8", offset=16 + hlen).astype(np.float64)
    if flat.size != header["n_params"]:
        raise ValueError(f"{path}: truncated parameter payload")
    return ModelParams(cfg, flat), cfg, header.get("extra", {})

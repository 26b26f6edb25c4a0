"""Correlation graphs: Pearson matrix, thresholded adjacency, edge lists."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TAU = 0.3


@dataclass(frozen=True, eq=False)
class Adjacency:
    weights: np.ndarray  # symmetric N x N, zero diagonal
    tau: float = DEFAULT_TAU

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    def binary(self) -> np.ndarray:
        return (self.weights > 0).astype(np.float64)


@dataclass(frozen=True, eq=False)
class EdgeIndex:
    n_nodes: int
    pairs: np.ndarray  # (E, 2) int, i < j, lexicographic
    weights: np.ndarray  # (E,)

    def __len__(self):
        return self.pairs.shape[0]


def pearson_matrix(window) -> np.ndarray:
    """Zero-lag Pearson correlation between rows.

    Rows with zero variance correlate 0 with everything (diagonal stays 1).
    """
    x = np.asarray(window, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("expected a channels x time matrix with at least 2 samples")
    centred = x - x.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", centred, centred))
    flat = norms <= np.finfo(float).tiny * x.shape[1]
    unit = centred / np.where(flat, 1.0, norms)[:, None]
    unit[flat] = 0.0
    corr = np.clip(unit @ unit.T, -1.0, 1.0)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    return corr


def threshold_adjacency(corr, tau: float = DEFAULT_TAU) -> Adjacency:
    """Keep |r| strictly above ``tau``; the diagonal is always zero."""
    corr = np.asarray(corr, dtype=np.float64)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise ValueError("correlation matrix must be square")
    mag = np.abs(corr)
    weights = np.where(mag > tau, mag, 0.0)
    np.fill_diagonal(weights, 0.0)
    return Adjacency(weights=weights, tau=tau)


def edge_index(adj: Adjacency) -> EdgeIndex:
    w = adj.weights
    i, j = np.nonzero(np.triu(w, k=1))  # row-major => lexicographic
    pairs = np.stack([i, j], axis=1).astype(np.int64) if i.size else np.zeros((0, 2), np.int64)
    return EdgeIndex(n_nodes=w.shape[0], pairs=pairs, weights=w[i, j].copy())


def adjacency_from_edges(edges: EdgeIndex, tau: float = DEFAULT_TAU) -> Adjacency:
    w = np.zeros((edges.n_nodes, edges.n_nodes))
    if len(edges):
        i, j = edges.pairs[:, 0], edges.pairs[:, 1]
        w[i, j] = edges.weights
        w[j, i] = edges.weights
    return Adjacency(weights=w, tau=tau)


def window_adjacency(window, tau: float = DEFAULT_TAU) -> Adjacency:
    return threshold_adjacency(pearson_matrix(window), tau)

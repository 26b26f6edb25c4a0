"""Phase-locking networks over short consecutive windows."""
from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from . import dsp, topology
from .data import Recording

DEFAULT_THETA = 0.65
EDGE_TRIM = 0.05


@dataclass(frozen=True, eq=False)
class PLVNetwork:
    plv: np.ndarray  # N x N, unit diagonal
    theta: float
    edges: np.ndarray  # (E, 2), i < j, plv > theta
    soz_mask: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.plv.shape[0]

    def weights(self) -> np.ndarray:
        """Supra-threshold PLV as a zero-diagonal weight matrix."""
        w = np.zeros_like(self.plv)
        i, j = self.edges[:, 0], self.edges[:, 1]
        w[i, j] = self.plv[i, j]
        w[j, i] = self.plv[i, j]
        return w


@dataclass(frozen=True)
class WindowNetworkMetrics:
    density: float
    avg_clustering: float
    avg_soz_degree: float
    avg_soz_plv: float


METRIC_COLUMNS = tuple(f.name for f in fields(WindowNetworkMetrics))


def plv_matrix(window, trim: float = EDGE_TRIM) -> np.ndarray:
    """|mean_t exp(i(phi_x - phi_y))| for every channel pair.

    The first and last ``trim`` fraction of samples are dropped from the average
    to avoid Hilbert edge effects. Constant channels get PLV 0 off the diagonal.
    """
    x = np.asarray(window, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 8:
        raise ValueError("expected a channels x time matrix with at least 8 samples")
    n = x.shape[1]
    cut = int(np.floor(trim * n))
    phase = dsp.instantaneous_phase(x)[:, cut:n - cut]
    z = np.exp(1j * phase)
    plv = np.abs(z @ z.conj().T) / z.shape[1]
    flat = np.ptp(x, axis=1) == 0
    plv[flat, :] = 0.0
    plv[:, flat] = 0.0
    plv = np.clip(0.5 * (plv + plv.T), 0.0, 1.0)
    np.fill_diagonal(plv, 1.0)
    return plv


def plv_network(plv, soz_mask, theta: float = DEFAULT_THETA) -> PLVNetwork:
    plv = np.asarray(plv, dtype=np.float64)
    i, j = np.nonzero(np.triu(plv > theta, k=1))
    edges = np.stack([i, j], axis=1) if i.size else np.zeros((0, 2), dtype=np.int64)
    return PLVNetwork(plv=plv, theta=theta, edges=edges.astype(np.int64),
                      soz_mask=np.asarray(soz_mask, dtype=bool))


def window_network_metrics(net: PLVNetwork) -> WindowNetworkMetrics:
    n = net.n_nodes
    n_edges = net.edges.shape[0]
    density = 2.0 * n_edges / (n * (n - 1)) if n > 1 else 0.0
    binary = (net.weights() > 0).astype(np.float64)
    degree = binary.sum(axis=1)
    soz = net.soz_mask
    avg_soz_degree = float(degree[soz].mean()) if soz.any() else 0.0
    if n_edges:
        i, j = net.edges[:, 0], net.edges[:, 1]
        touches = soz[i] | soz[j]
        avg_soz_plv = float(net.plv[i[touches], j[touches]].mean()) if touches.any() else 0.0
    else:
        avg_soz_plv = 0.0
    return WindowNetworkMetrics(
        density=float(density),
        avg_clustering=topology.avg_clustering(binary),
        avg_soz_degree=avg_soz_degree,
        avg_soz_plv=avg_soz_plv,
    )


@dataclass(frozen=True)
class DynamicsRow:
    window_index: int
    start_s: float
    metrics: WindowNetworkMetrics
    network: PLVNetwork

    def as_dict(self) -> dict:
        return {"window": self.window_index, "start_s": self.start_s,
                **dict(zip(METRIC_COLUMNS, astuple(self.metrics)))}


def dynamics_report(rec: Recording, window_s: float = 2.0, theta: float = DEFAULT_THETA) -> list[DynamicsRow]:
    """One metrics row per consecutive non-overlapping window of ``window_s`` seconds."""
    n_win = int(round(window_s * rec.fs))
    if n_win < 8:
        raise ValueError("window too short for phase estimation")
    rows = []
    for k in range(rec.samples.shape[1] // n_win):
        seg = rec.samples[:, k * n_win:(k + 1) * n_win]
        net = plv_network(plv_matrix(seg), rec.soz_mask, theta)
        rows.append(DynamicsRow(k, k * window_s, window_network_metrics(net), net))
    return rows


def top_degree_subset(rows: list[DynamicsRow], soz_mask, n_extra: int = 8) -> np.ndarray:
    """All SOZ nodes plus the non-SOZ nodes most often linked to them, chosen once per recording."""
    soz = np.asarray(soz_mask, dtype=bool)
    score = np.zeros(soz.size)
    for r in rows:
        b = (r.network.weights() > 0)
        score += b[:, soz].sum(axis=1)
    others = np.flatnonzero(~soz)
    ranked = others[np.lexsort((others, -score[others]))][:n_extra]
    return np.sort(np.concatenate([np.flatnonzero(soz), ranked]))

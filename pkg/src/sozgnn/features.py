"""Per-window node features, graph samples, normalization and ablation masks."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import dsp, topology
from .data import LabeledWindow, Recording, WindowSpec, segment_windows
from .graph import DEFAULT_TAU, Adjacency, EdgeIndex, edge_index, window_adjacency

FEATURE_FS = 128
N_PSD_BINS = 129

GROUPS: dict[str, tuple[int, int]] = {
    "psd": (0, 129),
    "moments": (129, 133),
    "hjorth": (133, 136),
    "wavelet": (136, 140),
    "local_graph": (140, 142),
}
GROUP_ORDER = tuple(GROUPS)
N_FEATURES = 142
N_GRAPH_FEATURES = 6


@dataclass(frozen=True, eq=False)
class GraphSample:
    X: np.ndarray  # N x 142
    edges: EdgeIndex
    g: np.ndarray  # (6,)
    node_labels: np.ndarray  # N, int
    graph_label: int
    source: tuple[str, str, int]

    @property
    def n_nodes(self) -> int:
        return self.X.shape[0]


def node_feature_matrix(window: LabeledWindow, adj: Adjacency | None = None, fs_out: int = FEATURE_FS) -> np.ndarray:
    """N x 142 matrix: PSD bins | moments | Hjorth | wavelet energies | strength, clustering."""
    raw = np.asarray(window.data, dtype=np.float64)
    if adj is None:
        adj = window_adjacency(raw)
    x = dsp.downsample(raw, window.fs, fs_out)
    psd = dsp.welch_psd(x, fs_out)
    mean, std, skew, kurt = dsp.statistical_moments(x)
    hj = dsp.hjorth(x)
    wav = dsp.dwt_energies(x)
    out = np.empty((raw.shape[0], N_FEATURES))
    out[:, 0:129] = psd.power
    out[:, 129:133] = np.stack([mean, std, skew, kurt], axis=1)
    out[:, 133:136] = np.stack([hj.activity, hj.mobility, hj.complexity], axis=1)
    out[:, 136:140] = wav.energies
    out[:, 140] = topology.node_strength(adj)
    out[:, 141] = topology.local_clustering(adj)
    return out


def assemble_sample(window: LabeledWindow, tau: float = DEFAULT_TAU, seed: int = 0, n_rand: int = 20) -> GraphSample:
    adj = window_adjacency(window.data, tau)
    X = node_feature_matrix(window, adj)
    g = topology.graph_feature_vector(adj, seed=seed, n_rand=n_rand).as_array()
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(g))):
        raise FloatingPointError(f"non-finite features in window {window.source}")
    return GraphSample(
        X=X,
        edges=edge_index(adj),
        g=g,
        node_labels=np.asarray(window.soz_mask, dtype=np.int64),
        graph_label=int(window.outcome),
        source=window.source,
    )


def featurize_recording(rec: Recording, spec: WindowSpec = WindowSpec(), tau: float = DEFAULT_TAU,
                        seed: int = 0, n_rand: int = 20) -> list[GraphSample]:
    return [assemble_sample(w, tau, seed, n_rand) for w in segment_windows(rec, spec)]


def featurize_recordings(recordings: Iterable[Recording], spec: WindowSpec = WindowSpec(),
                         tau: float = DEFAULT_TAU, seed: int = 0, n_rand: int = 20) -> list[GraphSample]:
    samples: list[GraphSample] = []
    for rec in recordings:
        samples.extend(featurize_recording(rec, spec, tau, seed, n_rand))
    return sorted(samples, key=lambda s: s.source)


# -- normalization ------------------------------------------------------------

STD_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class Normalizer:
    x_mean: np.ndarray
    x_std: np.ndarray
    g_mean: np.ndarray
    g_std: np.ndarray


def fit_normalizer(train: Sequence[GraphSample]) -> Normalizer:
    if len(train) == 0:
        raise ValueError("cannot fit a normalizer on an empty training set")
    X = np.concatenate([s.X for s in train], axis=0)
    G = np.stack([s.g for s in train])
    return Normalizer(
        x_mean=X.mean(axis=0),
        x_std=np.maximum(X.std(axis=0), STD_FLOOR),
        g_mean=G.mean(axis=0),
        g_std=np.maximum(G.std(axis=0), STD_FLOOR),
    )


def apply_normalizer(sample: GraphSample, norm: Normalizer) -> GraphSample:
    return replace(
        sample,
        X=(sample.X - norm.x_mean) / norm.x_std,
        g=(sample.g - norm.g_mean) / norm.g_std,
    )


def mask_feature_groups(sample: GraphSample, included: Iterable[str], keep_graph_features: bool = True) -> GraphSample:
    """Zero the columns of every group not in ``included``; shapes are unchanged."""
    included = set(included)
    unknown = included - set(GROUPS)
    if unknown:
        raise ValueError(f"unknown feature groups: {sorted(unknown)}")
    if included == set(GROUPS) and keep_graph_features:
        return sample
    X = sample.X.copy()
    for name, (lo, hi) in GROUPS.items():
        if name not in included:
            X[:, lo:hi] = 0.0
    g = sample.g if keep_graph_features else np.zeros_like(sample.g)
    return replace(sample, X=X, g=g)


# -- on-disk cache --------------------------------------------------------------
# windows.bin holds one little-endian record per window, back to back:
#   X      float64  n_nodes x 142, row-major
#   g      float64  6
#   labels uint8    n_nodes
#   pairs  int32    n_edges x 2
#   weight float64  n_edges
# index.json gives each record's offset, sizes, labels and source ids.

CACHE_VERSION = 1


def _record_bytes(s: GraphSample) -> bytes:
    return b"".join([
        np.ascontiguousarray(s.X, dtype="<f8").tobytes(),
        np.ascontiguousarray(s.g, dtype="<f8").tobytes(),
        np.ascontiguousarray(s.node_labels, dtype="u1").tobytes(),
        np.ascontiguousarray(s.edges.pairs, dtype="<i4").tobytes(),
        np.ascontiguousarray(s.edges.weights, dtype="<f8").tobytes(),
    ])


def save_cache(samples: Sequence[GraphSample], directory: str | os.PathLike, meta: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records = []
    offset = 0
    tmp_bin = directory / "windows.bin.tmp"
    with open(tmp_bin, "wb") as fh:
        for s in samples:
            blob = _record_bytes(s)
            fh.write(blob)
            records.append({
                "patient_id": s.source[0],
                "seizure_id": s.source[1],
                "window_index": int(s.source[2]),
                "n_nodes": int(s.n_nodes),
                "n_edges": int(len(s.edges)),
                "graph_label": int(s.graph_label),
                "offset": offset,
                "nbytes": len(blob),
            })
            offset += len(blob)
    index = {
        "version": CACHE_VERSION,
        "feature_dim": N_FEATURES,
        "graph_feature_dim": N_GRAPH_FEATURES,
        "groups": {k: list(v) for k, v in GROUPS.items()},
        "graph_features": list(topology.FEATURE_NAMES),
        "meta": meta or {},
        "records": records,
    }
    tmp_idx = directory / "index.json.tmp"
    tmp_idx.write_text(json.dumps(index, indent=1) + "\n")
    os.replace(tmp_bin, directory / "windows.bin")
    os.replace(tmp_idx, directory / "index.json")
    return directory


def load_cache(directory: str | os.PathLike) -> tuple[list[GraphSample], dict]:
    directory = Path(directory)
    index = json.loads((directory / "index.json").read_text())
    if index.get("version") != CACHE_VERSION or index.get("feature_dim") != N_FEATURES:
        raise ValueError(f"{directory}: unsupported feature cache")
    blob = (directory / "windows.bin").read_bytes()
    samples = []
    for r in index["records"]:
        n, e, pos = r["n_nodes"], r["n_edges"], r["offset"]

        def take(dtype, count):
            nonlocal pos
            arr = np.frombuffer(blob, dtype=dtype, count=count, offset=pos)
            pos += arr.nbytes
            return arr

        X = take("<f8", n * N_FEATURES).reshape(n, N_FEATURES).astype(np.float64)
        g = take("<f8", N_GRAPH_FEATURES).astype(np.float64)
        labels = take("u1", n).astype(np.int64)
        pairs = take("<i4", 2 * e).reshape(e, 2).astype(np.int64)
        weights = take("<f8", e).astype(np.float64)
        if pos - r["offset"] != r["nbytes"]:
            raise ValueError(f"{directory}: record size mismatch at offset {r['offset']}")
        samples.append(GraphSample(
            X=X,
            edges=EdgeIndex(n_nodes=n, pairs=pairs, weights=weights),
            g=g,
            node_labels=labels,
            graph_label=int(r["graph_label"]),
            source=(r["patient_id"], r["seizure_id"], int(r["window_index"])),
        ))
    return samples, index.get("meta", {})

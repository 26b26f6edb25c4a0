"""Local and global topology metrics on a thresholded weighted adjacency.

Path-based metrics use hop counts on the binarized support. Every metric is total:
undefined cases (no edges, zero variance, too few nodes) evaluate to 0.
"""
from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components, shortest_path

MERGE_TOL = 1e-12


@dataclass(frozen=True)
class GraphFeatures:
    global_efficiency: float
    char_path_length: float
    avg_clustering: float
    modularity: float
    small_world: float
    assortativity: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


FEATURE_NAMES = tuple(GraphFeatures.__dataclass_fields__)


def _weights(adj) -> np.ndarray:
    return np.asarray(getattr(adj, "weights", adj), dtype=np.float64)


def node_strength(adj) -> np.ndarray:
    return _weights(adj).sum(axis=1)


def local_clustering(adj) -> np.ndarray:
    """sum_{j,k} A_ij A_jk A_ki / sum_{j!=k} A_ij A_ik; nodes with < 2 neighbours get 0."""
    w = _weights(adj)
    closed = np.einsum("ij,jk,ki->i", w, w, w)
    s = w.sum(axis=1)
    wedges = s ** 2 - np.sum(w ** 2, axis=1)
    degree = (w > 0).sum(axis=1)
    ok = (degree >= 2) & (wedges > 0)
    return np.where(ok, closed / np.where(ok, wedges, 1.0), 0.0)


def avg_clustering(adj) -> float:
    w = _weights(adj)
    if w.shape[0] == 0:
        return 0.0
    return float(local_clustering(w).mean())


def hop_distances(adj) -> np.ndarray:
    w = _weights(adj)
    return shortest_path((w > 0).astype(np.float64), method="D", unweighted=True, directed=False)


def global_efficiency(adj) -> float:
    w = _weights(adj)
    n = w.shape[0]
    if n < 2:
        return 0.0
    d = hop_distances(w)
    off = ~np.eye(n, dtype=bool) & np.isfinite(d)
    return float(np.sum(1.0 / d[off]) / (n * (n - 1)))


def largest_component(adj) -> np.ndarray:
    """Node ids of the largest connected component; ties go to the one holding the lowest id."""
    w = _weights(adj)
    if w.shape[0] == 0:
        return np.zeros(0, dtype=int)
    _, labels = connected_components(w > 0, directed=False)
    sizes = np.bincount(labels)
    # labels are assigned in order of lowest member, so argmax picks the lowest id on ties
    return np.flatnonzero(labels == int(np.argmax(sizes)))


def char_path_length(adj) -> float:
    w = _weights(adj)
    if w.shape[0] < 2:
        return 0.0
    comp = largest_component(w)
    if comp.size < 2:
        return 0.0
    d = hop_distances(w[np.ix_(comp, comp)])
    off = ~np.eye(comp.size, dtype=bool)
    return float(d[off].mean())


def modularity(adj, communities) -> float:
    """Q = 1/(2m) sum_ij [A_ij - s_i s_j / (2m)] delta(c_i, c_j), with m the total edge weight."""
    w = _weights(adj)
    two_m = w.sum()
    if two_m <= 0:
        return 0.0
    labels = np.asarray(communities)
    same = labels[:, None] == labels[None, :]
    s = w.sum(axis=1)
    return float(np.sum((w - np.outer(s, s) / two_m) * same) / two_m)


def modularity_greedy(adj) -> tuple[float, np.ndarray]:
    """Agglomerative modularity maximization.

    Starts from singletons and repeatedly merges the connected pair of
    communities with the largest gain until no merge improves Q. Returns Q and
    a community label per node (labels are the lowest member id of each group).
    """
    w = _weights(adj)
    n = w.shape[0]
    labels = np.arange(n)
    two_m = w.sum()
    if n == 0 or two_m <= 0:
        return 0.0, labels
    e = w / two_m  # community-pair weight fractions, initially per node
    a = e.sum(axis=1)
    active = np.ones(n, dtype=bool)
    while True:
        idx = np.flatnonzero(active)
        sub = e[np.ix_(idx, idx)]
        gain = 2.0 * (sub - np.outer(a[idx], a[idx]))
        gain[sub <= 0] = -np.inf
        np.fill_diagonal(gain, -np.inf)
        gain = np.triu(gain, k=1) + np.tril(np.full_like(gain, -np.inf))
        if gain.size == 0:
            break
        flat = int(np.argmax(gain))
        best = gain.flat[flat]
        if not best > MERGE_TOL:
            break
        i, j = idx[flat // idx.size], idx[flat % idx.size]
        e[i, :] += e[j, :]
        e[:, i] += e[:, j]
        e[j, :] = 0.0
        e[:, j] = 0.0
        a[i] += a[j]
        a[j] = 0.0
        active[j] = False
        labels[labels == j] = i
    return modularity(w, labels), labels


def assortativity(adj) -> float:
    """Strength assortativity:

    r = sum_ij (A_ij - s_i s_j/2m) s_i s_j / sum_ij (s_i delta_ij - s_i s_j/2m) s_i s_j
    """
    w = _weights(adj)
    two_m = w.sum()
    if two_m <= 0:
        return 0.0
    s = w.sum(axis=1)
    ss = np.outer(s, s)
    num = np.sum((w - ss / two_m) * ss)
    den = np.sum(s ** 3) - np.sum(ss * ss) / two_m
    # regular graphs: the denominator vanishes up to rounding
    if abs(den) <= 1e-12 * max(np.sum(s ** 3), 1e-300):
        return 0.0
    return float(num / den)


def random_graph_like(adj, rng: np.random.Generator) -> np.ndarray:
    """Erdos-Renyi G(N, m) graph with the observed edge weights shuffled onto it."""
    w = _weights(adj)
    n = w.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    observed = w[iu, ju]
    observed = observed[observed > 0]
    chosen = rng.choice(iu.size, size=observed.size, replace=False)
    out = np.zeros_like(w)
    out[iu[chosen], ju[chosen]] = rng.permutation(observed)
    return out + out.T


def small_world_index(adj, n_rand: int = 20, seed: int = 0) -> float:
    """(C / C_rand) / (L / L_rand) against matched-edge-count random graphs."""
    w = _weights(adj)
    n = w.shape[0]
    if n < 4 or not np.any(w > 0):
        return 0.0
    c = avg_clustering(w)
    length = char_path_length(w)
    rng = np.random.default_rng(seed)
    c_rand, l_rand = [], []
    for _ in range(n_rand):
        r = random_graph_like(w, rng)
        c_rand.append(avg_clustering(r))
        l_rand.append(char_path_length(r))
    c_rand, l_rand = float(np.mean(c_rand)), float(np.mean(l_rand))
    if c_rand <= 0 or l_rand <= 0 or length <= 0:
        return 0.0
    return float((c / c_rand) / (length / l_rand))


def graph_feature_vector(adj, seed: int = 0, n_rand: int = 20) -> GraphFeatures:
    w = _weights(adj)
    q, _ = modularity_greedy(w)
    return GraphFeatures(
        global_efficiency=global_efficiency(w),
        char_path_length=char_path_length(w),
        avg_clustering=avg_clustering(w),
        modularity=q,
        small_world=small_world_index(w, n_rand=n_rand, seed=seed),
        assortativity=assortativity(w),
    )

"""Slow, direct reference implementations used only to check the package."""
from __future__ import annotations

import itertools
import math

import numpy as np


def floyd_warshall(binary: np.ndarray) -> np.ndarray:
    n = binary.shape[0]
    d = np.full((n, n), math.inf)
    for i in range(n):
        d[i, i] = 0.0
        for j in range(n):
            if i != j and binary[i, j]:
                d[i, j] = 1.0
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i, k] + d[k, j] < d[i, j]:
                    d[i, j] = d[i, k] + d[k, j]
    return d


def efficiency(w: np.ndarray) -> float:
    n = w.shape[0]
    if n < 2:
        return 0.0
    d = floyd_warshall(w > 0)
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i != j and math.isfinite(d[i, j]):
                total += 1.0 / d[i, j]
    return total / (n * (n - 1))


def components(binary: np.ndarray) -> list[list[int]]:
    n = binary.shape[0]
    seen, comps = set(), []
    for s in range(n):
        if s in seen:
            continue
        stack, comp = [s], []
        seen.add(s)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in range(n):
                if binary[u, v] and v not in seen:
                    seen.add(v)
                    stack.append(v)
        comps.append(sorted(comp))
    return comps


def path_length(w: np.ndarray) -> float:
    comps = components(w > 0)
    if not comps:
        return 0.0
    best = max(comps, key=lambda c: (len(c), -c[0]))
    if len(best) < 2:
        return 0.0
    d = floyd_warshall(w > 0)
    vals = [d[i, j] for i in best for j in best if i != j]
    return sum(vals) / len(vals)


def clustering(w: np.ndarray) -> np.ndarray:
    n = w.shape[0]
    out = np.zeros(n)
    for i in range(n):
        if np.count_nonzero(w[i]) < 2:
            continue
        num = den = 0.0
        for j in range(n):
            for k in range(n):
                num += w[i, j] * w[j, k] * w[k, i]
                if j != k:
                    den += w[i, j] * w[i, k]
        out[i] = num / den if den > 0 else 0.0
    return out


def modularity_of(w: np.ndarray, labels) -> float:
    """Edge-loop evaluation: sum over communities of (in-weight/2m - (tot/2m)^2)."""
    two_m = float(w.sum())
    if two_m <= 0:
        return 0.0
    s = w.sum(axis=1)
    q = 0.0
    for c in set(labels):
        members = [i for i, l in enumerate(labels) if l == c]
        inner = sum(w[i, j] for i in members for j in members)
        tot = sum(s[i] for i in members)
        q += inner / two_m - (tot / two_m) ** 2
    return q


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]
        yield [[first]] + part


def best_modularity(w: np.ndarray) -> float:
    n = w.shape[0]
    best = -math.inf
    for part in set_partitions(range(n)):
        labels = [0] * n
        for c, block in enumerate(part):
            for v in block:
                labels[v] = c
        best = max(best, modularity_of(w, labels))
    return best


def edge_pearson(w: np.ndarray) -> float:
    """Weighted Pearson correlation of end-point strengths over both directions of every edge."""
    s = w.sum(axis=1)
    xs, ys, ws = [], [], []
    n = w.shape[0]
    for i in range(n):
        for j in range(n):
            if w[i, j] > 0:
                xs.append(s[i])
                ys.append(s[j])
                ws.append(w[i, j])
    if not ws:
        return 0.0
    xs, ys, ws = map(np.asarray, (xs, ys, ws))
    mx = np.sum(ws * xs) / ws.sum()
    my = np.sum(ws * ys) / ws.sum()
    cov = np.sum(ws * (xs - mx) * (ys - my))
    vx = np.sum(ws * (xs - mx) ** 2)
    vy = np.sum(ws * (ys - my) ** 2)
    if vx <= 1e-12 * max(np.sum(ws * xs ** 2), 1e-300):
        return 0.0
    return float(cov / math.sqrt(vx * vy))


def pearson_direct(x: np.ndarray, y: np.ndarray) -> float:
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = sum((a - mx) ** 2 for a in x)
    vy = sum((b - my) ** 2 for b in y)
    return cov / math.sqrt(vx * vy)


def plv_direct(a: np.ndarray, b: np.ndarray, trim: float = 0.05) -> float:
    from scipy.signal import hilbert
    pa, pb = np.angle(hilbert(a)), np.angle(hilbert(b))
    cut = int(np.floor(trim * a.size))
    d = (pa - pb)[cut:a.size - cut]
    return float(abs(np.mean(np.exp(1j * d))))


def confusion_weighted_recall(y_true, y_pred) -> float:
    classes = sorted(set(y_true))
    total = len(y_true)
    r = 0.0
    for c in classes:
        idx = [i for i, t in enumerate(y_true) if t == c]
        hits = sum(1 for i in idx if y_pred[i] == c)
        r += len(idx) / total * hits / len(idx)
    return r


def all_graphs_upto(n_max: int):
    """Every non-isomorphic simple graph with 1..n_max nodes as a dense 0/1 matrix."""
    import networkx as nx
    for g in nx.graph_atlas_g():
        n = g.number_of_nodes()
        if 1 <= n <= n_max:
            yield nx.to_numpy_array(g, nodelist=sorted(g.nodes()))


def pairs(n):
    return itertools.combinations(range(n), 2)

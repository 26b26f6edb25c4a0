import numpy as np
import pytest

from oracles import pearson_direct
from sozgnn.graph import (Adjacency, adjacency_from_edges, edge_index, pearson_matrix,
                          threshold_adjacency, window_adjacency)


def test_pearson_basic(rng):
    x = rng.standard_normal(500)
    c = pearson_matrix(np.stack([x, -x, 2 * x + 1]))
    np.testing.assert_allclose(c, [[1, -1, 1], [-1, 1, -1], [1, -1, 1]], atol=1e-12)


def test_pearson_matches_direct_formula(rng):
    x = rng.standard_normal((4, 1280))
    c = pearson_matrix(x)
    for i in range(4):
        for j in range(4):
            if i != j:
                assert c[i, j] == pytest.approx(pearson_direct(x[i], x[j]), abs=1e-12)
    assert np.all(np.abs(c[np.triu_indices(4, 1)]) < 0.1)


def test_pearson_constant_channel(rng):
    x = rng.standard_normal((3, 100))
    x[1] = 4.0
    c = pearson_matrix(x)
    assert c[1, 1] == 1.0 and not np.any(c[1, [0, 2]]) and not np.any(c[[0, 2], 1])


def test_threshold_rules():
    corr = np.array([[1.0, 0.29, -0.8], [0.29, 1.0, 0.3], [-0.8, 0.3, 1.0]])
    w = threshold_adjacency(corr, 0.3).weights
    assert w[0, 1] == 0.0
    assert w[0, 2] == 0.8
    assert w[1, 2] == 0.0  # strict threshold
    assert not np.any(np.diag(w))
    np.testing.assert_array_equal(w, w.T)


def test_edge_index_cases(rng):
    assert len(edge_index(Adjacency(np.zeros((5, 5))))) == 0
    k4 = rng.uniform(0.4, 1, (4, 4))
    k4 = np.triu(k4, 1) + np.triu(k4, 1).T
    e = edge_index(Adjacency(k4))
    assert len(e) == 6
    assert e.pairs.tolist() == sorted(e.pairs.tolist())
    assert np.all(e.pairs[:, 0] < e.pairs[:, 1])


def test_edge_round_trip(rng):
    adj = window_adjacency(rng.standard_normal((8, 64)) + rng.standard_normal(64), tau=0.3)
    back = adjacency_from_edges(edge_index(adj), adj.tau)
    np.testing.assert_array_equal(back.weights, adj.weights)

import networkx as nx
import numpy as np
import pytest

import oracles
from sozgnn import topology as T


def sym(n, edges, w=1.0):
    a = np.zeros((n, n))
    for e in edges:
        i, j = e[0], e[1]
        a[i, j] = a[j, i] = e[2] if len(e) > 2 else w
    return a


TRI = sym(3, [(0, 1), (1, 2), (0, 2)])
STAR = sym(5, [(0, 1), (0, 2), (0, 3), (0, 4)])
P3 = sym(3, [(0, 1), (1, 2)])
P4 = sym(4, [(0, 1), (1, 2), (2, 3)])
K4 = np.ones((4, 4)) - np.eye(4)


def test_strength():
    np.testing.assert_allclose(T.node_strength(0.5 * TRI), 1.0)
    np.testing.assert_allclose(T.node_strength(sym(3, [(0, 1, 0.4), (1, 2, 0.6)])), [0.4, 1.0, 0.6])
    assert T.node_strength(sym(3, [(0, 1)]))[2] == 0.0


def test_local_clustering_cases():
    np.testing.assert_allclose(T.local_clustering(TRI), 1.0)
    assert T.local_clustering(STAR)[0] == 0.0
    np.testing.assert_allclose(T.local_clustering(0.5 * TRI), 0.5)


def test_avg_clustering_cases():
    assert T.avg_clustering(TRI) == 1.0
    assert T.avg_clustering(STAR) == 0.0
    pendant = sym(4, [(0, 1), (1, 2), (0, 2), (2, 3)])
    expected = (1 + 1 + 1 / 3 + 0) / 4
    assert T.avg_clustering(pendant) == pytest.approx(expected, abs=1e-12)
    assert T.avg_clustering(pendant) == pytest.approx(nx.average_clustering(nx.from_numpy_array(pendant)))


def test_efficiency_cases():
    assert T.global_efficiency(TRI) == 1.0
    assert T.global_efficiency(P3) == pytest.approx(5 / 6)
    assert T.global_efficiency(np.zeros((4, 4))) == 0.0


def test_path_length_cases():
    assert T.char_path_length(P3) == pytest.approx(4 / 3)
    assert T.char_path_length(K4) == 1.0
    assert T.char_path_length(sym(4, [(0, 1), (2, 3)])) == 1.0
    assert T.largest_component(sym(4, [(0, 1), (2, 3)])).tolist() == [0, 1]


def test_modularity_cases():
    two_tri = sym(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    assert T.modularity(two_tri, [0] * 6) == pytest.approx(0.0, abs=1e-15)
    assert T.modularity(two_tri, [0, 0, 0, 1, 1, 1]) == pytest.approx(0.5)
    assert oracles.best_modularity(two_tri) == pytest.approx(0.5)
    q, labels = T.modularity_greedy(two_tri)
    assert q == pytest.approx(0.5)
    assert labels.tolist() == [0, 0, 0, 3, 3, 3]
    q4, _ = T.modularity_greedy(K4)
    assert q4 == pytest.approx(0.0, abs=1e-15)
    assert oracles.best_modularity(K4) == pytest.approx(0.0, abs=1e-15)


def test_greedy_matches_networkx_value(rng):
    for _ in range(20):
        w = np.triu(rng.uniform(0.3, 1, (12, 12)) * (rng.random((12, 12)) < 0.3), 1)
        w = w + w.T
        if not w.any():
            continue
        q, labels = T.modularity_greedy(w)
        assert q == pytest.approx(oracles.modularity_of(w, labels.tolist()), abs=1e-12)
        g = nx.from_numpy_array(w)
        comms = nx.community.greedy_modularity_communities(g, weight="weight")
        assert q == pytest.approx(nx.community.modularity(g, comms, weight="weight"), abs=1e-9)


def test_assortativity_cases():
    assert T.assortativity(STAR) == pytest.approx(-1.0)
    assert T.assortativity(K4) == 0.0
    assert T.assortativity(P4) == pytest.approx(oracles.edge_pearson(P4), abs=1e-9)
    assert T.assortativity(P4) == pytest.approx(nx.degree_pearson_correlation_coefficient(nx.from_numpy_array(P4)))


def test_weighted_assortativity_oracle(rng):
    for _ in range(20):
        w = np.triu(rng.uniform(0.3, 1, (9, 9)) * (rng.random((9, 9)) < 0.5), 1)
        w = w + w.T
        assert T.assortativity(w) == pytest.approx(oracles.edge_pearson(w), abs=1e-9)


def test_small_world_cases():
    assert T.small_world_index(np.zeros((10, 10))) == 0.0
    ws = nx.to_numpy_array(nx.connected_watts_strogatz_graph(50, 4, 0.05, seed=1))
    assert T.small_world_index(ws, seed=0) > 1.0
    er = nx.to_numpy_array(nx.gnm_random_graph(50, 200, seed=2))
    assert abs(T.small_world_index(er, seed=0) - 1.0) <= 0.5


def test_small_world_deterministic(rng):
    w = nx.to_numpy_array(nx.gnm_random_graph(20, 50, seed=5))
    assert T.small_world_index(w, seed=3) == T.small_world_index(w, seed=3)


def test_random_graph_like_preserves_edges(rng):
    w = np.triu(rng.uniform(0.3, 1, (10, 10)) * (rng.random((10, 10)) < 0.4), 1)
    w = w + w.T
    r = T.random_graph_like(w, rng)
    np.testing.assert_array_equal(r, r.T)
    assert np.count_nonzero(r) == np.count_nonzero(w)
    np.testing.assert_allclose(np.sort(r[r > 0]), np.sort(w[w > 0]))


def test_feature_vector_cases():
    assert T.graph_feature_vector(np.zeros((5, 5))).as_array().tolist() == [0.0] * 6
    f = T.graph_feature_vector(K4)
    assert f.as_array().shape == (6,)
    assert (f.global_efficiency, f.char_path_length, f.avg_clustering, f.modularity, f.assortativity) == \
        (1.0, 1.0, 1.0, pytest.approx(0.0, abs=1e-15), 0.0)
    assert f.small_world == pytest.approx(1.0)  # every G(4, 6) is K4 itself
    assert len(T.FEATURE_NAMES) == 6


def check_against_oracles(w):
    assert T.global_efficiency(w) == pytest.approx(oracles.efficiency(w), rel=1e-9, abs=1e-15)
    assert T.char_path_length(w) == pytest.approx(oracles.path_length(w), rel=1e-9, abs=1e-15)
    np.testing.assert_allclose(T.local_clustering(w), oracles.clustering(w), rtol=1e-9, atol=1e-15)
    assert T.avg_clustering(w) == pytest.approx(float(np.mean(oracles.clustering(w))), rel=1e-9, abs=1e-15)
    np.testing.assert_allclose(T.node_strength(w), [sum(row) for row in w.tolist()], rtol=1e-12)
    q, labels = T.modularity_greedy(w)
    assert q == pytest.approx(oracles.modularity_of(w, labels.tolist()), rel=1e-9, abs=1e-12)
    assert q >= -1e-12
    assert T.assortativity(w) == pytest.approx(oracles.edge_pearson(w), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_atlas_small(n):
    for a in oracles.all_graphs_upto(n):
        if a.shape[0] == n:
            check_against_oracles(a)

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sozgnn import dsp, model, topology
from sozgnn.graph import adjacency_from_edges, edge_index, pearson_matrix, threshold_adjacency

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@st.composite
def weighted_graphs(draw, max_n=8):
    n = draw(st.integers(1, max_n))
    w = draw(arrays(np.float64, (n, n), elements=st.floats(0, 1)))
    keep = draw(arrays(np.bool_, (n, n)))
    w = np.triu(np.where(keep, w, 0.0), 1)
    return w + w.T


@settings(max_examples=60, deadline=None)
@given(weighted_graphs())
def test_metric_ranges(w):
    eff = topology.global_efficiency(w)
    assert 0.0 <= eff <= 1.0
    c = topology.local_clustering(w)
    assert np.all(c >= -1e-12) and np.all(c <= 1 + 1e-12)
    q, labels = topology.modularity_greedy(w)
    assert -0.5 - 1e-12 <= q <= 1.0
    assert q >= -1e-12
    r = topology.assortativity(w)
    assert -1 - 1e-9 <= r <= 1 + 1e-9
    assert np.all(np.isfinite(topology.graph_feature_vector(w, n_rand=2).as_array()))


@settings(max_examples=40, deadline=None)
@given(weighted_graphs(), st.randoms(use_true_random=False))
def test_metrics_relabel_invariant(w, rnd):
    n = w.shape[0]
    perm = np.array(rnd.sample(range(n), n))
    p = w[np.ix_(perm, perm)]
    assert topology.global_efficiency(p) == np.float64(topology.global_efficiency(w)) or \
        abs(topology.global_efficiency(p) - topology.global_efficiency(w)) < 1e-12
    assert abs(topology.avg_clustering(p) - topology.avg_clustering(w)) < 1e-12
    assert abs(topology.assortativity(p) - topology.assortativity(w)) < 1e-9
    np.testing.assert_allclose(topology.local_clustering(p), topology.local_clustering(w)[perm], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 5), st.integers(4, 40)), elements=finite),
       st.floats(0, 0.99))
def test_threshold_round_trip(x, tau):
    corr = pearson_matrix(x)
    assert np.all(np.abs(corr) <= 1.0)
    adj = threshold_adjacency(corr, tau)
    assert np.all((adj.weights == 0) | (adj.weights > tau))
    back = adjacency_from_edges(edge_index(adj), tau)
    np.testing.assert_array_equal(back.weights, adj.weights)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.integers(64, 400), elements=finite))
def test_dwt_energy_conservation(x):
    e = dsp.dwt_energies(x)
    n = x.size
    padded_total = np.sum(x ** 2)
    assert np.all(e.energies >= 0)
    if n % 16 == 0:
        assert abs(e.energies.sum() + e.approx - padded_total) <= 1e-6 * max(padded_total, 1e-300) + 1e-9


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(2, 3)), elements=st.floats(-30, 30)),
       st.floats(-50, 50))
def test_log_softmax_shift_invariant(logits, c):
    a = model.log_softmax(logits)
    b = model.log_softmax(logits + c)
    np.testing.assert_allclose(a, b, atol=1e-9)
    np.testing.assert_allclose(np.exp(a).sum(axis=1), 1.0, atol=1e-12)

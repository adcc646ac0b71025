import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from stccal.errors import ConfigError, ParameterError
from stccal.graph import (GRAPH_METHODS, MultiOrderConfig, adaptive_neighbor_graph, adaptive_weights,
                          baseline_graph, build_graph, high_order, laplacian_quadratic, multi_order,
                          normalize_affinity)

from oracles import dense_laplacian, multi_order_dense

PATH3 = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])


def _check_affinity(w):
    w = w.toarray()
    assert np.allclose(w, w.T, atol=1e-12)
    assert np.all(w >= 0) and not np.any(np.diag(w))


def test_adaptive_two_points():
    w = adaptive_neighbor_graph(np.array([[0.0, 2.0]]), 1)
    np.testing.assert_array_equal(w.toarray(), [[0, 1], [1, 0]])


def test_adaptive_duplicated_points():
    # 1-D points 0, 0, 1, 3 with k = 2; closed form evaluated by hand:
    # rows 0/1: far = 9, denom = 17 -> duplicate 9/17, point "1" 8/17
    # row 2: far = 4, denom = 6 -> 1/2 to each duplicate
    # row 3: far = 9, denom = 5 -> point "1" gets 1, tied duplicate gets 0
    x = np.array([[0.0, 0.0, 1.0, 3.0]])
    w = adaptive_neighbor_graph(x, 2).toarray()
    expected = np.array([
        [0.0, 9 / 17, (8 / 17 + 0.5) / 2, 0.0],
        [9 / 17, 0.0, (8 / 17 + 0.5) / 2, 0.0],
        [(8 / 17 + 0.5) / 2, (8 / 17 + 0.5) / 2, 0.0, 0.5],
        [0.0, 0.0, 0.5, 0.0],
    ])
    np.testing.assert_allclose(w, expected, atol=1e-15)
    assert w[0, 1] == w[0].max()


def test_adaptive_rows_have_k_nonzeros_before_symmetrization():
    x = np.random.default_rng(0).standard_normal((3, 10))
    a = adaptive_weights(x, 3)
    counts = np.diff(a.indptr)
    assert np.all(counts <= 3)
    np.testing.assert_allclose(np.asarray(a.sum(axis=1)).ravel(), 1.0, atol=1e-12)
    # the k-th neighbor gets a positive weight unless it ties with the (k+1)-th
    assert np.count_nonzero(counts == 3) >= 8


def test_adaptive_uniform_fallback_when_k_is_n_minus_1():
    a = adaptive_weights(np.array([[0.0, 1.0, 5.0]]), 2).toarray()
    np.testing.assert_allclose(a, (np.ones((3, 3)) - np.eye(3)) / 2)


def test_adaptive_k_out_of_range():
    with pytest.raises(ParameterError):
        adaptive_neighbor_graph(np.zeros((1, 4)), 4)
    with pytest.raises(ParameterError):
        adaptive_neighbor_graph(np.zeros((1, 4)), 0)


def test_baseline_examples():
    w = baseline_graph(np.array([[1.0, 1.0, 5.0]]), "gaussian", k=1, sigma=1.0).toarray()
    assert w[0, 1] == 1.0
    w = baseline_graph(np.array([[1.0, 0.0], [0.0, 1.0]]), "cosine", k=1).toarray()
    assert w[0, 1] == 0.0
    # 1-D points 0, 1, 10, k = 1: 0<->1 mutual, 10 -> 1 one-sided (halved by symmetrization)
    w = baseline_graph(np.array([[0.0, 1.0, 10.0]]), "knn", k=1).toarray()
    np.testing.assert_array_equal(w, [[0, 1, 0], [1, 0, 0.5], [0, 0.5, 0]])
    with pytest.raises(ParameterError):
        baseline_graph(np.zeros((1, 3)), "gaussian", k=1, sigma=-1.0)
    with pytest.raises(ParameterError):
        baseline_graph(np.zeros((1, 3)), "bogus", k=1)
    with pytest.raises(ParameterError):
        build_graph(np.zeros((1, 3)), "bogus")


def test_high_order_examples():
    np.testing.assert_array_equal(high_order(PATH3, 1), PATH3)
    w2 = high_order(PATH3, 2)
    assert w2[0, 2] == 1.0
    np.testing.assert_array_equal(w2, [[1, 0, 1], [0, 2, 0], [1, 0, 1]])
    blocks = np.kron(np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]]))
    for h in range(1, 6):
        p = high_order(blocks, h)
        assert not np.any(p[:2, 2:]) and not np.any(p[2:, :2])
    with pytest.raises(ParameterError):
        high_order(PATH3, 0)


def test_multi_order_examples():
    one = MultiOrderConfig(1, (1.0,))
    mo = multi_order(PATH3, one, normalize=False)
    np.testing.assert_array_equal(mo.w_multi, PATH3)
    assert np.array_equal(mo.laplacian, np.diag(PATH3.sum(axis=1)) - PATH3)
    assert not np.any(multi_order(np.zeros((3, 3)), one).laplacian)
    half = MultiOrderConfig(2, (0.5, 0.5))
    mo = multi_order(PATH3, half, normalize=False)
    np.testing.assert_allclose(mo.w_multi, [[0.5, 0.5, 0.5], [0.5, 1.0, 0.5], [0.5, 0.5, 0.5]])
    np.testing.assert_allclose(mo.laplacian, [[1.0, -0.5, -0.5], [-0.5, 1.0, -0.5], [-0.5, -0.5, 1.0]])
    # normalized: D^-1/2 W D^-1/2 has off-diagonals 1/sqrt 2, its square is [[.5,0,.5],[0,1,0],[.5,0,.5]]
    c = 0.5 / np.sqrt(2.0)
    mo = multi_order(PATH3, half)
    np.testing.assert_allclose(mo.w_multi, [[0.25, c, 0.25], [c, 0.5, c], [0.25, c, 0.25]], atol=1e-15)


def test_multi_order_config_validation():
    with pytest.raises(ConfigError):
        MultiOrderConfig(2, (0.5, 0.4))
    with pytest.raises(ConfigError):
        MultiOrderConfig(2, (1.0,))
    with pytest.raises(ConfigError):
        MultiOrderConfig(0, ())
    with pytest.raises(ConfigError):
        MultiOrderConfig(2, (1.5, -0.5))
    geo = MultiOrderConfig.geometric(4)
    assert abs(sum(geo.weights) - 1.0) <= 1e-15
    np.testing.assert_allclose(geo.weights, np.array([8, 4, 2, 1]) / 15, atol=1e-15)


def test_normalized_spectral_radius():
    x = np.random.default_rng(1).standard_normal((2, 25))
    for method in GRAPH_METHODS:
        wn = normalize_affinity(build_graph(x, method, k=4)).toarray()
        assert np.abs(np.linalg.eigvalsh(wn)).max() <= 1 + 1e-10
        assert np.abs(high_order(wn, 10)).max() <= 1 + 1e-10


def test_laplacian_quadratic_matches_dense():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((4, 30))
    cfg = MultiOrderConfig.geometric(3)
    for method in GRAPH_METHODS:
        g = build_graph(x, method, k=5)
        lap = dense_laplacian(multi_order_dense(g.toarray(), cfg.weights))
        np.testing.assert_allclose(laplacian_quadratic(x, g, cfg), x @ lap @ x.T, atol=1e-12)
        np.testing.assert_allclose(multi_order(g, cfg).laplacian, lap, atol=1e-14)


def test_graph_outputs_are_sparse_affinities():
    x = np.random.default_rng(3).standard_normal((3, 20))
    for method in GRAPH_METHODS:
        g = build_graph(x, method, k=3)
        assert sparse.issparse(g.weights)
        _check_affinity(g)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(GRAPH_METHODS), st.integers(1, 10), st.integers(1, 6), st.integers(0, 10_000))
def test_laplacian_psd_and_zero_row_sums(method, order, k, seed):
    x = np.random.default_rng(seed).standard_normal((3, 15))
    lap = multi_order(build_graph(x, method, k=k), MultiOrderConfig.geometric(order)).laplacian
    assert np.abs(lap.sum(axis=1)).max() <= 1e-10
    np.testing.assert_allclose(lap, lap.T, atol=1e-14)
    zs = np.random.default_rng(seed + 1).standard_normal((100, 15))
    assert np.einsum("ij,jk,ik->i", zs, lap, zs).min() >= -1e-10

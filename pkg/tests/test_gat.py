"""Attention layer: topology building, oracle equivalence, gradients."""

import numpy as np
import pytest

from conftest import random_graph
from oracles import (
    dense_layer_forward,
    in_neighbors,
    max_rel_error,
    numeric_gradient,
)
from srca.gat import (
    build_topology,
    combine_topologies,
    init_layer,
    layer_backward,
    layer_forward,
)


# -- topology ---------------------------------------------------------------

def test_build_topology_adds_self_loops_and_sorts():
    edges = np.array([[2, 0], [1, 0], [1, 0]])  # duplicate collapses
    topo = build_topology(3, edges)
    got = list(zip(topo.edge_dst.tolist(), topo.edge_src.tolist()))
    assert got == [(0, 0), (0, 1), (0, 2), (1, 1), (2, 2)]
    assert topo.row_ptr.tolist() == [0, 3, 4, 5]


def test_build_topology_matches_neighbor_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(1, 15))
        _, edges = random_graph(rng, n, int(rng.integers(0, 3 * n)), 4)
        topo = build_topology(n, edges)
        nbrs = in_neighbors(n, edges)
        for i in range(n):
            lo, hi = int(topo.row_ptr[i]), int(topo.row_ptr[i + 1])
            assert topo.edge_src[lo:hi].tolist() == nbrs[i]
            assert (topo.edge_dst[lo:hi] == i).all()


def test_build_topology_rejects_out_of_range():
    with pytest.raises(ValueError, match="out of range"):
        build_topology(3, np.array([[0, 3]]))
    with pytest.raises(ValueError, match="out of range"):
        build_topology(3, np.array([[-1, 0]]))


def test_combine_topologies_block_diagonal():
    rng = np.random.default_rng(1)
    x1, e1 = random_graph(rng, 4, 6, 5)
    x2, e2 = random_graph(rng, 3, 4, 5)
    t1, t2 = build_topology(4, e1), build_topology(3, e2)
    union, offsets = combine_topologies([t1, t2])
    assert offsets.tolist() == [0, 4, 7]
    assert union.n_nodes == 7
    assert union.n_edges == t1.n_edges + t2.n_edges
    # Per-graph forward equals the forward on the union, blockwise.
    params = init_layer(np.random.default_rng(2), 5, 3)
    out1, _ = layer_forward(params, x1, t1)
    out2, _ = layer_forward(params, x2, t2)
    out_u, _ = layer_forward(params, np.vstack([x1, x2]), union)
    np.testing.assert_allclose(out_u[:4], out1, atol=1e-12)
    np.testing.assert_allclose(out_u[4:], out2, atol=1e-12)


# -- forward oracle ---------------------------------------------------------

def test_layer_forward_matches_dense_oracle():
    rng = np.random.default_rng(3)
    for relu in (True, False):
        for _ in range(15):
            n = int(rng.integers(2, 10))
            d, h = int(rng.integers(3, 8)), int(rng.integers(2, 6))
            x, edges = random_graph(rng, n, int(rng.integers(0, 2 * n)), d)
            params = init_layer(rng, d, h)
            topo = build_topology(n, edges)
            out, cache = layer_forward(params, x, topo, relu=relu)
            expected, alpha = dense_layer_forward(params.w, params.a, x, n,
                                                  edges, relu=relu)
            np.testing.assert_allclose(out, expected, atol=1e-10)
            for k in range(topo.n_edges):
                key = (int(topo.edge_dst[k]), int(topo.edge_src[k]))
                assert cache.alpha[k] == pytest.approx(alpha[key], abs=1e-10)


def test_attention_rows_normalize():
    rng = np.random.default_rng(4)
    x, edges = random_graph(rng, 30, 80, 6)
    params = init_layer(rng, 6, 4)
    topo = build_topology(30, edges)
    _, cache = layer_forward(params, x, topo)
    sums = np.add.reduceat(cache.alpha, topo.row_ptr[:-1])
    np.testing.assert_allclose(sums, 1.0, atol=1e-12)
    assert (cache.alpha >= 0).all()


def test_message_passing_is_directed():
    """A node with no in-edges sees only itself, whatever happens downstream."""
    rng = np.random.default_rng(5)
    x = rng.normal(size=(4, 5))
    edges = np.array([[0, 1], [1, 2], [1, 3]])  # node 0 has no in-edges
    params = init_layer(rng, 5, 3)
    topo = build_topology(4, edges)
    out_a, _ = layer_forward(params, x, topo)
    x_mod = x.copy()
    x_mod[1:] += rng.normal(size=(3, 5)) * 10
    out_b, _ = layer_forward(params, x_mod, topo)
    np.testing.assert_array_equal(out_a[0], out_b[0])
    assert not np.allclose(out_a[1:], out_b[1:])


# -- backward ---------------------------------------------------------------

def test_layer_backward_matches_numeric_gradients():
    rng = np.random.default_rng(6)
    n, d, h = 6, 5, 4
    x, edges = random_graph(rng, n, 10, d)
    params = init_layer(rng, d, h)
    topo = build_topology(n, edges)
    probe = rng.normal(size=(n, h))

    def loss_fn():
        out, _ = layer_forward(params, x, topo)
        return float(np.sum(out * probe))

    out, cache = layer_forward(params, x, topo)
    d_x, d_w, d_a = layer_backward(params, cache, topo, probe)
    assert max_rel_error(d_w, numeric_gradient(loss_fn, params.w)) < 1e-4
    assert max_rel_error(d_a, numeric_gradient(loss_fn, params.a)) < 1e-4
    assert max_rel_error(d_x, numeric_gradient(loss_fn, x)) < 1e-4


def test_layer_backward_linear_output_gradients():
    rng = np.random.default_rng(7)
    n, d, h = 5, 4, 3
    x, edges = random_graph(rng, n, 8, d)
    params = init_layer(rng, d, h)
    topo = build_topology(n, edges)
    probe = rng.normal(size=(n, h))

    def loss_fn():
        out, _ = layer_forward(params, x, topo, relu=False)
        return float(np.sum(out * probe))

    _, cache = layer_forward(params, x, topo, relu=False)
    d_x, d_w, d_a = layer_backward(params, cache, topo, probe)
    assert max_rel_error(d_w, numeric_gradient(loss_fn, params.w)) < 1e-4
    assert max_rel_error(d_a, numeric_gradient(loss_fn, params.a)) < 1e-4
    assert max_rel_error(d_x, numeric_gradient(loss_fn, x)) < 1e-4

"""Single-head graph attention layer with explicit gradients.

Message passing runs over incoming edges plus a self-loop: a node
attends over {itself} U {in-neighbors}.  Edge scores are
LeakyReLU(a_dst . Wx_i + a_src . Wx_j) for edge j -> i, normalized by a
per-destination softmax, and the attended sum is passed through ReLU
(or left linear for a reconstruction output layer).

Edges live in CSR-by-destination arrays so the segment reductions can
run in the compiled kernels; the backward pass mirrors the forward
step by step instead of relying on an autograd framework.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ops

LEAKY_SLOPE = 0.2


@dataclass(frozen=True)
class GraphTopology:
    """Edge structure in CSR-by-destination form, self-loops included.

    Edges are sorted by (dst, src); ``row_ptr[i]:row_ptr[i+1]`` delimits
    the edges whose destination is node i.
    """

    n_nodes: int
    edge_src: np.ndarray
    edge_dst: np.ndarray
    row_ptr: np.ndarray

    @property
    def n_edges(self) -> int:
        return int(self.edge_src.shape[0])


def build_topology(n_nodes: int, edges: np.ndarray,
                   add_self_loops: bool = True) -> GraphTopology:
    """CSR-by-destination topology from an (E, 2) array of (src, dst) pairs."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n_nodes):
        raise ValueError("edge endpoint out of range")
    src, dst = edges[:, 0], edges[:, 1]
    if add_self_loops:
        loops = np.arange(n_nodes, dtype=np.int64)
        src = np.concatenate([src, loops])
        dst = np.concatenate([dst, loops])
    pairs = np.unique(np.stack([dst, src], axis=1), axis=0)
    edge_dst = np.ascontiguousarray(pairs[:, 0])
    edge_src = np.ascontiguousarray(pairs[:, 1])
    row_ptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(edge_dst, minlength=n_nodes), out=row_ptr[1:])
    return GraphTopology(n_nodes, edge_src, edge_dst, row_ptr)


def combine_topologies(topos) -> tuple[GraphTopology, np.ndarray]:
    """Disjoint union of graphs (block-diagonal adjacency) for batching.

    Returns the union topology and the node offsets array of length
    G + 1; graph g owns union nodes ``offsets[g]:offsets[g+1]``.
    """
    offsets = np.zeros(len(topos) + 1, dtype=np.int64)
    for g, topo in enumerate(topos):
        offsets[g + 1] = offsets[g] + topo.n_nodes
    n_total = int(offsets[-1])
    e_total = sum(t.n_edges for t in topos)

    edge_src = np.zeros(e_total, dtype=np.int64)
    edge_dst = np.zeros(e_total, dtype=np.int64)
    row_ptr = np.zeros(n_total + 1, dtype=np.int64)
    e_off = 0
    for g, topo in enumerate(topos):
        sl = slice(e_off, e_off + topo.n_edges)
        edge_src[sl] = topo.edge_src + offsets[g]
        edge_dst[sl] = topo.edge_dst + offsets[g]
        row_ptr[offsets[g] + 1:offsets[g + 1] + 1] = topo.row_ptr[1:] + e_off
        e_off += topo.n_edges
    return GraphTopology(n_total, edge_src, edge_dst, row_ptr), offsets


@dataclass
class GatLayerParams:
    """Learnable weights: feature transform ``w`` (d_in, d_out) and the
    attention vector ``a`` (2 * d_out,), destination half first."""

    w: np.ndarray
    a: np.ndarray

    @property
    def d_out(self) -> int:
        return self.w.shape[1]


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_layer(rng: np.random.Generator, d_in: int, d_out: int) -> GatLayerParams:
    w = glorot_uniform(rng, d_in, d_out, (d_in, d_out))
    a = glorot_uniform(rng, 2 * d_out, 1, (2 * d_out,))
    return GatLayerParams(w, a)


@dataclass
class LayerCache:
    """Forward intermediates needed by the backward pass."""

    x: np.ndarray
    p: np.ndarray
    z: np.ndarray
    alpha: np.ndarray
    agg: np.ndarray
    relu: bool


def layer_forward(params: GatLayerParams, x: np.ndarray, topo: GraphTopology,
                  relu: bool = True) -> tuple[np.ndarray, LayerCache]:
    h = params.d_out
    p = x @ params.w
    s_dst = p @ params.a[:h]
    s_src = p @ params.a[h:]
    z = s_dst[topo.edge_dst] + s_src[topo.edge_src]
    e = np.where(z > 0.0, z, LEAKY_SLOPE * z)
    alpha = ops.segment_softmax(e, topo.row_ptr)
    agg = ops.gather_weighted_sum(alpha, p, topo.edge_src, topo.row_ptr)
    out = np.maximum(agg, 0.0) if relu else agg
    return out, LayerCache(x, p, z, alpha, agg, relu)


def layer_backward(params: GatLayerParams, cache: LayerCache,
                   topo: GraphTopology, d_out: np.ndarray):
    """Gradients (d_x, d_w, d_a) for one layer given d(loss)/d(out)."""
    h = params.d_out
    d_agg = np.where(cache.agg > 0.0, d_out, 0.0) if cache.relu else d_out
    d_alpha, d_p = ops.gather_weighted_sum_backward(
        cache.alpha, cache.p, topo.edge_src, topo.row_ptr, d_agg)
    d_e = ops.segment_softmax_backward(cache.alpha, d_alpha, topo.row_ptr)
    d_z = d_e * np.where(cache.z > 0.0, 1.0, LEAKY_SLOPE)
    d_s_dst = ops.segment_sum(d_z, topo.row_ptr)
    d_s_src = ops.scatter_add_src(d_z, topo.edge_src, topo.n_nodes)
    d_p += np.outer(d_s_dst, params.a[:h]) + np.outer(d_s_src, params.a[h:])
    d_a = np.concatenate([cache.p.T @ d_s_dst, cache.p.T @ d_s_src])
    d_w = cache.x.T @ d_p
    d_x = d_p @ params.w.T
    return d_x, d_w, d_a

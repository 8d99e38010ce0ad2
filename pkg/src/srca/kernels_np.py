"""Pure-numpy segment reductions over CSR edge arrays.

Mirrors the compiled extension's interface exactly.  Edges are grouped
by destination node: ``row_ptr`` has length N+1 and edges
``row_ptr[i]:row_ptr[i+1]`` point at node i.  Segments must be
non-empty; the topology builder guarantees this by giving every node a
self-loop.
"""

from __future__ import annotations

import numpy as np


def _check_segments(row_ptr: np.ndarray) -> np.ndarray:
    counts = np.diff(row_ptr)
    if counts.size and counts.min() < 1:
        raise ValueError("empty edge segment; topology must include self-loops")
    return counts


def segment_softmax(e: np.ndarray, row_ptr: np.ndarray) -> np.ndarray:
    """Softmax of edge scores within each destination's segment."""
    if row_ptr.size <= 1:
        return np.zeros(0, dtype=np.float64)
    counts = _check_segments(row_ptr)
    starts = row_ptr[:-1]
    seg_max = np.maximum.reduceat(e, starts)
    ex = np.exp(e - np.repeat(seg_max, counts))
    seg_sum = np.add.reduceat(ex, starts)
    return ex / np.repeat(seg_sum, counts)


def segment_softmax_backward(alpha: np.ndarray, d_alpha: np.ndarray,
                             row_ptr: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. pre-softmax scores given d(loss)/d(alpha)."""
    if row_ptr.size <= 1:
        return np.zeros(0, dtype=np.float64)
    counts = _check_segments(row_ptr)
    inner = np.add.reduceat(alpha * d_alpha, row_ptr[:-1])
    return alpha * (d_alpha - np.repeat(inner, counts))


def gather_weighted_sum(alpha: np.ndarray, p: np.ndarray,
                        edge_src: np.ndarray, row_ptr: np.ndarray) -> np.ndarray:
    """out[i] = sum over i's segment of alpha[k] * p[edge_src[k]]."""
    n = row_ptr.size - 1
    if n <= 0 or p.shape[0] == 0:
        return np.zeros((max(n, 0), p.shape[1]), dtype=np.float64)
    _check_segments(row_ptr)
    weighted = alpha[:, None] * p[edge_src]
    return np.add.reduceat(weighted, row_ptr[:-1], axis=0)


def gather_weighted_sum_backward(alpha: np.ndarray, p: np.ndarray,
                                 edge_src: np.ndarray, row_ptr: np.ndarray,
                                 d_out: np.ndarray):
    """Gradients (d_alpha, d_p) of the weighted gather."""
    counts = _check_segments(row_ptr)
    d_out_edge = np.repeat(d_out, counts, axis=0)
    p_src = p[edge_src]
    d_alpha = np.einsum("eh,eh->e", p_src, d_out_edge)
    d_p = np.zeros_like(p)
    np.add.at(d_p, edge_src, alpha[:, None] * d_out_edge)
    return d_alpha, d_p


def segment_sum(x: np.ndarray, row_ptr: np.ndarray) -> np.ndarray:
    """Per-destination sum of per-edge scalars."""
    if row_ptr.size <= 1:
        return np.zeros(0, dtype=np.float64)
    _check_segments(row_ptr)
    return np.add.reduceat(x, row_ptr[:-1])


def scatter_add_src(x: np.ndarray, edge_src: np.ndarray, n: int) -> np.ndarray:
    """out[j] = sum of x[k] over edges with edge_src[k] == j."""
    return np.bincount(edge_src, weights=x, minlength=n).astype(np.float64)

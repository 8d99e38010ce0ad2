#!/usr/bin/env python3
"""Compare the compiled and numpy kernel backends.

Times the four attention-propagation kernels on random CSR topologies
of increasing size, plus one end-to-end forward/backward pass, and
prints a speedup table.  Run after an editable install:

    python benchmarks/bench_kernels.py [--sizes 1000,10000,100000] [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from srca import ops
from srca.autoencoder import TrainConfig, grad, init_model
from srca.gat import build_topology


def make_case(n_nodes: int, avg_degree: int, h: int, seed: int):
    rng = np.random.default_rng(seed)
    n_edges = n_nodes * avg_degree
    edges = rng.integers(0, n_nodes, size=(n_edges, 2))
    topo = build_topology(n_nodes, edges)
    e = topo.n_edges
    return {
        "topo": topo,
        "e": rng.standard_normal(e),
        "alpha": None,  # filled after a softmax pass
        "p": rng.standard_normal((n_nodes, h)),
        "d_out": rng.standard_normal((n_nodes, h)),
        "x": rng.standard_normal((n_nodes, 16)),
    }


def time_call(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_backend(backend: str, case: dict, repeat: int) -> dict[str, float]:
    ops.use_backend(backend)
    topo = case["topo"]
    alpha = ops.segment_softmax(case["e"], topo.row_ptr)
    case["alpha"] = alpha
    timings = {
        "segment_softmax": time_call(
            lambda: ops.segment_softmax(case["e"], topo.row_ptr), repeat),
        "softmax_backward": time_call(
            lambda: ops.segment_softmax_backward(alpha, case["e"], topo.row_ptr),
            repeat),
        "gather_weighted_sum": time_call(
            lambda: ops.gather_weighted_sum(alpha, case["p"], topo.edge_src,
                                            topo.row_ptr), repeat),
        "gather_backward": time_call(
            lambda: ops.gather_weighted_sum_backward(
                alpha, case["p"], topo.edge_src, topo.row_ptr, case["d_out"]),
            repeat),
    }
    model = init_model(case["x"].shape[1], 8, seed=0)
    timings["model_grad"] = time_call(lambda: grad(model, case["x"], topo), repeat)
    return timings


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="1000,10000,100000",
                        help="comma-separated node counts")
    parser.add_argument("--degree", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    available = ops.available_backends()
    print(f"available backends: {', '.join(available)}")
    if "cython" not in available:
        print("compiled extension not built; timing numpy only")

    for n in (int(s) for s in args.sizes.split(",")):
        case = make_case(n, args.degree, h=32, seed=7)
        print(f"\nnodes={n}  edges={case['topo'].n_edges}")
        results = {b: bench_backend(b, case, args.repeat) for b in available}
        kernels = list(next(iter(results.values())))
        width = max(len(k) for k in kernels)
        for kernel in kernels:
            line = f"  {kernel.ljust(width)}"
            for backend in available:
                line += f"  {backend}={results[backend][kernel] * 1e3:8.3f} ms"
            if len(available) == 2:
                ratio = results["numpy"][kernel] / results["cython"][kernel]
                line += f"  speedup={ratio:5.2f}x"
            print(line)
    ops.use_backend("auto")


if __name__ == "__main__":
    main()

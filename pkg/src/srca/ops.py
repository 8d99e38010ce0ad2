"""Kernel backend dispatch.

The segment reductions at the heart of attention propagation exist
twice: a compiled extension (``_kernels``) and a pure-numpy fallback
(``kernels_np``).  The active backend is chosen at import from the
``SRCA_KERNELS`` environment variable (``auto`` | ``cython`` |
``numpy``); ``use_backend`` switches it explicitly, which the benchmark
and the equivalence tests rely on.
"""

from __future__ import annotations

import os
import warnings

import numpy as np

from . import kernels_np

_BACKENDS = {"numpy": kernels_np}

try:
    from . import _kernels as _ext
except ImportError:
    _ext = None

if _ext is not None:
    try:
        # Smoke-test the buffer interface so a mis-built extension degrades
        # to numpy instead of failing on first real use.
        _ext.segment_sum(np.ones(2), np.array([0, 1, 2], dtype=np.int64))
        _BACKENDS["cython"] = _ext
    except (TypeError, ValueError) as exc:  # pragma: no cover
        warnings.warn(f"compiled kernels unusable ({exc}); using numpy")

_active = "numpy"


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def active_backend() -> str:
    return _active


def use_backend(name: str) -> str:
    """Select a backend by name; ``auto`` prefers the compiled one."""
    global _active
    if name == "auto":
        name = "cython" if "cython" in _BACKENDS else "numpy"
    if name not in _BACKENDS:
        raise ValueError(f"unknown or unavailable kernel backend '{name}' "
                         f"(available: {', '.join(available_backends())})")
    _active = name
    return _active


def _init_from_env() -> None:
    name = os.environ.get("SRCA_KERNELS", "auto")
    try:
        use_backend(name)
    except ValueError as exc:
        warnings.warn(f"SRCA_KERNELS: {exc}; falling back to auto")
        use_backend("auto")


_init_from_env()


def _f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def segment_softmax(e, row_ptr):
    return _BACKENDS[_active].segment_softmax(_f64(e), _i64(row_ptr))


def segment_softmax_backward(alpha, d_alpha, row_ptr):
    return _BACKENDS[_active].segment_softmax_backward(
        _f64(alpha), _f64(d_alpha), _i64(row_ptr))


def gather_weighted_sum(alpha, p, edge_src, row_ptr):
    return _BACKENDS[_active].gather_weighted_sum(
        _f64(alpha), _f64(p), _i64(edge_src), _i64(row_ptr))


def gather_weighted_sum_backward(alpha, p, edge_src, row_ptr, d_out):
    return _BACKENDS[_active].gather_weighted_sum_backward(
        _f64(alpha), _f64(p), _i64(edge_src), _i64(row_ptr), _f64(d_out))


def segment_sum(x, row_ptr):
    return _BACKENDS[_active].segment_sum(_f64(x), _i64(row_ptr))


def scatter_add_src(x, edge_src, n):
    return _BACKENDS[_active].scatter_add_src(_f64(x), _i64(edge_src), int(n))

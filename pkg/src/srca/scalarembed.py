"""Scalar telemetry embedding and node attribute fusion.

Instantaneous scalars (metric readings, span latencies) are projected
into d-dimensional vectors: the standardized scalar is mapped through a
frozen random affine transform to p logits, softmaxed into weights, and
used to mix the rows of a frozen random embedding matrix.  The per-node
attribute row concatenates the three log-channel vectors, the per-channel
metric vectors, and the latency vector in a fixed order.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError

STD_FLOOR = 1e-6
LATENCY_CHANNEL = "latency"


def _channel_rng(master_seed: int, channel_id: str) -> np.random.Generator:
    """Counter-based generator keyed by (master_seed, channel_id)."""
    digest = hashlib.blake2b(f"{master_seed}|{channel_id}".encode("utf-8"),
                             digest_size=16).digest()
    key = int.from_bytes(digest, "little")
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class ScalarProjector:
    """Frozen random projection of one scalar channel (never trained).

    ``mean``/``std`` standardize the raw scalar using training-set
    statistics before projection; the std is floored so constant channels
    stay finite.
    """

    channel_id: str
    weight: np.ndarray      # (p,)
    bias: np.ndarray        # (p,)
    embed_rows: np.ndarray  # (p, d)
    mean: float = 0.0
    std: float = 1.0

    @property
    def p(self) -> int:
        return self.weight.shape[0]

    @property
    def d(self) -> int:
        return self.embed_rows.shape[1]

    def with_standardizer(self, mean: float, std: float) -> "ScalarProjector":
        return replace(self, mean=float(mean), std=float(std))


def init_projector(channel_id: str, p: int, d: int,
                   master_seed: int) -> ScalarProjector:
    """Draw a projector's parameters i.i.d. uniform on [-0.5, 0.5]."""
    if p < 2 or d < 8:
        raise ValueError("need p >= 2 and d >= 8")
    rng = _channel_rng(master_seed, channel_id)
    weight = rng.uniform(-0.5, 0.5, size=p)
    bias = rng.uniform(-0.5, 0.5, size=p)
    embed_rows = rng.uniform(-0.5, 0.5, size=(p, d))
    return ScalarProjector(channel_id, weight, bias, embed_rows)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    e = np.exp(shifted)
    return e / e.sum()


def project_scalar(x: float, projector: ScalarProjector) -> np.ndarray:
    """Standardize ``x``, softmax the affine logits, and mix embedding rows."""
    if not math.isfinite(x):
        raise DataError(f"non-finite scalar for channel '{projector.channel_id}'")
    x_std = (x - projector.mean) / max(projector.std, STD_FLOOR)
    s = softmax(projector.weight * x_std + projector.bias)
    return s @ projector.embed_rows


def embed_latency(duration_us: int, projector: ScalarProjector) -> np.ndarray:
    """Project a span duration (microseconds in, milliseconds projected)."""
    return project_scalar(duration_us / 1000.0, projector)


def fit_standardizer(values) -> tuple[float, float]:
    """Mean and population std of the raw scalars seen in training data."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        return 0.0, 1.0
    return float(arr.mean()), float(arr.std())


@dataclass(frozen=True)
class AttributeLayout:
    """Fixed segment order of a node attribute row.

    Segments: audit | event | app log vectors (d_log each), one d-wide
    vector per metric channel, then the latency vector (d).
    """

    d_log: int
    d_scalar: int
    metric_channels: tuple[str, ...] = ("cpu", "memory")

    @property
    def total_dim(self) -> int:
        return 3 * self.d_log + (len(self.metric_channels) + 1) * self.d_scalar

    def segments(self) -> list[tuple[str, int]]:
        segs = [("audit", self.d_log), ("event", self.d_log), ("app", self.d_log)]
        segs += [(c, self.d_scalar) for c in self.metric_channels]
        segs.append((LATENCY_CHANNEL, self.d_scalar))
        return segs

    def segment_slice(self, name: str) -> slice:
        offset = 0
        for seg_name, width in self.segments():
            if seg_name == name:
                return slice(offset, offset + width)
            offset += width
        raise KeyError(f"unknown segment '{name}'")

    def to_dict(self) -> dict:
        return {"d_log": self.d_log, "d_scalar": self.d_scalar,
                "metric_channels": list(self.metric_channels)}

    @classmethod
    def from_dict(cls, data: dict) -> "AttributeLayout":
        return cls(d_log=data["d_log"], d_scalar=data["d_scalar"],
                   metric_channels=tuple(data["metric_channels"]))


def fuse_attributes(layout: AttributeLayout, log_vecs: dict,
                    metric_vecs: dict, latency_vec: np.ndarray) -> np.ndarray:
    """Concatenate channel vectors into one attribute row of fixed layout.

    Missing channels (value ``None``) become zero segments; a present
    vector with the wrong dimension is an error.
    """
    parts = []
    for name, width in layout.segments():
        if name == LATENCY_CHANNEL:
            vec = latency_vec
        elif name in ("audit", "event", "app"):
            vec = log_vecs.get(name)
        else:
            vec = metric_vecs.get(name)
        if vec is None:
            parts.append(np.zeros(width, dtype=np.float64))
            continue
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (width,):
            raise DataError(f"segment '{name}' has dimension {vec.shape}, "
                            f"expected ({width},)")
        parts.append(vec)
    return np.concatenate(parts)

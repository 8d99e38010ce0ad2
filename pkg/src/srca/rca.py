"""Fault localization from reconstruction scores.

A node's raw score is not comparable across node kinds (a pod
reconstructs differently from a function), so scores are first
profiled on healthy traffic: for every request type and node identity
the store keeps the mean and population standard deviation of the
score.  Localizing a trace ranks its nodes by z-score against those
patterns; a node identity never seen in healthy traffic for that
request type is maximally suspicious and ranks first.  The ``direct``
method skips the store and ranks raw scores, which is the ablation
baseline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autoencoder import reconstruction, score_graph
from .errors import DataError
from .fileio import atomic_write_text
from .gat import build_topology
from .graph import GlobalCallGraph, NodeIdentity, build_graph
from .modelio import ModelBundle
from .records import RequestBundle

STD_FLOOR = 1e-6
METHODS = ("zscore", "direct")

_STORE_HEADER = "# normal-patterns v1"


@dataclass(frozen=True)
class NormalPattern:
    count: int
    mean: float
    std: float


class NormalPatternStore:
    """Healthy-traffic score statistics per (request type, node identity)."""

    def __init__(self):
        self._patterns: dict[str, dict[str, NormalPattern]] = {}

    def add(self, request_type: str, node_key: str, pattern: NormalPattern) -> None:
        self._patterns.setdefault(request_type, {})[node_key] = pattern

    def request_types(self) -> list[str]:
        return sorted(self._patterns)

    def has_type(self, request_type: str) -> bool:
        return request_type in self._patterns

    def pattern(self, request_type: str, node_key: str) -> NormalPattern | None:
        return self._patterns.get(request_type, {}).get(node_key)

    def zscore(self, request_type: str, node_key: str, score: float) -> float:
        """Deviation of ``score`` from the healthy pattern; +inf if unseen."""
        pattern = self.pattern(request_type, node_key)
        if pattern is None:
            return float("inf")
        return (score - pattern.mean) / max(pattern.std, STD_FLOOR)

    def items(self):
        for request_type in sorted(self._patterns):
            for node_key in sorted(self._patterns[request_type]):
                yield request_type, node_key, self._patterns[request_type][node_key]


def score_trace(bundle_model: ModelBundle, request: RequestBundle,
                drop_segments: tuple[str, ...] = ()) -> tuple[GlobalCallGraph, np.ndarray]:
    """Build the request's graph (frozen templates) and score its nodes.

    ``drop_segments`` names attribute segments (say ``("cpu", "memory")``)
    whose evidence is excluded from the score: those dimensions are
    zeroed in both the attribute row and its reconstruction before the
    residual norm, so the remaining channels alone decide the score.
    Pass the same value when profiling healthy traffic and when
    localizing, or the z-scores compare different quantities.
    """
    graph = build_graph(request, bundle_model.stores, bundle_model.projectors,
                        bundle_model.layout, keys=bundle_model.classification_keys,
                        mine=False)
    if not drop_segments:
        return graph, score_graph(bundle_model.model, graph)
    topology = build_topology(graph.n_nodes, graph.edges)
    recon = reconstruction(bundle_model.model, graph.x, topology)
    x = graph.x.copy()
    for name in drop_segments:
        seg = bundle_model.layout.segment_slice(name)
        x[:, seg] = 0.0
        recon[:, seg] = 0.0
    return graph, np.linalg.norm(x - recon, axis=1)


def fit_normal_store(bundle_model: ModelBundle, requests,
                     drop_segments: tuple[str, ...] = ()) -> NormalPatternStore:
    """Profile healthy traffic: score every trace, pool per identity."""
    acc: dict[tuple[str, str], list[float]] = {}
    for request in requests:
        graph, scores = score_trace(bundle_model, request, drop_segments)
        for ident, score in zip(graph.nodes, scores):
            acc.setdefault((graph.request_type, ident.key()), []).append(float(score))
    if not acc:
        raise DataError("no healthy traces to fit normal patterns from")
    store = NormalPatternStore()
    for (request_type, node_key), values in acc.items():
        arr = np.asarray(values, dtype=np.float64)
        store.add(request_type, node_key,
                  NormalPattern(arr.size, float(arr.mean()), float(arr.std())))
    return store


@dataclass(frozen=True)
class RankedNode:
    identity: NodeIdentity
    score: float
    z: float | None


@dataclass
class Localization:
    trace_id: str
    request_type: str
    method: str
    ranking: list[RankedNode]

    def ranked_keys(self) -> list[str]:
        return [r.identity.key() for r in self.ranking]


def _rank(graph: GlobalCallGraph, scores: np.ndarray,
          zs: np.ndarray | None) -> list[RankedNode]:
    entries = []
    for i, ident in enumerate(graph.nodes):
        z = None if zs is None else float(zs[i])
        entries.append(RankedNode(ident, float(scores[i]), z))
    key_of = ((lambda r: (-r.z, r.identity)) if zs is not None
              else (lambda r: (-r.score, r.identity)))
    return sorted(entries, key=key_of)


def localize(bundle_model: ModelBundle, store: NormalPatternStore | None,
             request: RequestBundle, method: str = "zscore",
             drop_segments: tuple[str, ...] = ()) -> Localization:
    """Rank a trace's nodes from most to least suspicious."""
    if method not in METHODS:
        raise ValueError(f"unknown method '{method}' (choose from {METHODS})")
    graph, scores = score_trace(bundle_model, request, drop_segments)
    if method == "direct":
        return Localization(graph.trace_id, graph.request_type, method,
                            _rank(graph, scores, None))
    if store is None:
        raise ValueError("zscore method needs a fitted normal-pattern store")
    if not store.has_type(graph.request_type):
        raise DataError(f"request type '{graph.request_type}' has no healthy "
                        f"profile; fit the store on traffic of this type first")
    zs = np.array([store.zscore(graph.request_type, ident.key(), s)
                   for ident, s in zip(graph.nodes, scores)])
    return Localization(graph.trace_id, graph.request_type, method,
                        _rank(graph, scores, zs))


def write_store(store: NormalPatternStore, path) -> None:
    lines = [_STORE_HEADER,
             "request_type\tnode\tcount\tmean\tstd"]
    for request_type, node_key, p in store.items():
        lines.append(f"{request_type}\t{node_key}\t{p.count}\t"
                     f"{p.mean!r}\t{p.std!r}")
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_store(path) -> NormalPatternStore:
    path = Path(path)
    try:
        text = path.read_text("utf-8")
    except OSError as exc:
        raise DataError(f"cannot read pattern store: {exc}", path=str(path)) from exc
    lines = text.splitlines()
    if not lines or lines[0] != _STORE_HEADER:
        raise DataError("not a normal-pattern store (bad header)", path=str(path))
    store = NormalPatternStore()
    for lineno, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise DataError("expected 5 tab-separated fields",
                            path=str(path), line=lineno)
        request_type, node_key, count, mean, std = parts
        try:
            pattern = NormalPattern(int(count), float(mean), float(std))
        except ValueError as exc:
            raise DataError(f"bad numeric field: {exc}",
                            path=str(path), line=lineno) from exc
        store.add(request_type, node_key, pattern)
    return store


def localization_to_dict(loc: Localization) -> dict:
    entry = {
        "trace_id": loc.trace_id,
        "request_type": loc.request_type,
        "method": loc.method,
        "ranking": [],
    }
    for r in loc.ranking:
        item = {"node": r.identity.key(), "score": r.score}
        if r.z is not None:
            item["z"] = r.z
        entry["ranking"].append(item)
    return entry


def write_rankings(locs, path) -> None:
    """One JSON object per line.  Unseen-identity sentinels serialize as
    ``Infinity``, which ``json`` reads back; strict parsers should treat
    the token as "greater than every finite z"."""
    lines = [json.dumps(localization_to_dict(loc), sort_keys=True)
             for loc in locs]
    atomic_write_text(path, "".join(line + "\n" for line in lines))

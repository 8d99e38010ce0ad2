"""Attributed global call graph construction.

Each request trace becomes one directed graph.  Every function
contributes a platform provisioning chain (deployment -> replicaset ->
pod) that feeds its function node, function nodes are wired by the call
edges observed in the trace, and each caller additionally points at its
callee's deployment node (the call is what triggers provisioning).
Platform and application sides merge through the shared function name.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .fileio import atomic_write_text
from .logembed import TemplateStore, embed_log_sequence
from .records import PLATFORM_KINDS, RequestBundle
from .scalarembed import (
    AttributeLayout,
    LATENCY_CHANNEL,
    ScalarProjector,
    embed_latency,
    fuse_attributes,
    project_scalar,
)

DEFAULT_CLASSIFICATION_KEYS = ("http.host", "http.target", "branch")


@dataclass(frozen=True, order=True)
class NodeIdentity:
    """Stable identity of a graph node across traces."""

    side: str
    node_kind: str
    node_name: str

    @property
    def stage(self) -> str:
        """Lifecycle stage: platform nodes exist to create the function."""
        return "creation" if self.side == "platform" else "execution"

    def key(self) -> str:
        return f"{self.side}/{self.node_kind}/{self.node_name}"

    @classmethod
    def from_key(cls, key: str) -> "NodeIdentity":
        side, node_kind, node_name = key.split("/", 2)
        return cls(side, node_kind, node_name)

    @classmethod
    def platform(cls, node_kind: str, node_name: str) -> "NodeIdentity":
        return cls("platform", node_kind, node_name)

    @classmethod
    def function(cls, node_name: str) -> "NodeIdentity":
        return cls("application", "function", node_name)


def identity_for(node_kind: str, node_name: str) -> NodeIdentity:
    """Identity from a (kind, name) pair; the side is implied by the kind."""
    if node_kind == "function":
        return NodeIdentity.function(node_name)
    return NodeIdentity.platform(node_kind, node_name)


@dataclass
class GlobalCallGraph:
    """One attributed graph per request trace.

    ``edges`` is an (E, 2) int64 array of (src, dst) node indices;
    ``x`` is the (N, D) attribute matrix (None until attributes are
    attached).  ``ground_truth`` holds injected-fault node indices.
    """

    trace_id: str
    request_type: str
    nodes: tuple[NodeIdentity, ...]
    edges: np.ndarray
    x: np.ndarray | None = None
    ground_truth: tuple[int, ...] | None = None
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._index:
            self._index = {ident: i for i, ident in enumerate(self.nodes)}

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def node_index(self, ident: NodeIdentity) -> int:
        try:
            return self._index[ident]
        except KeyError:
            raise KeyError(f"node {ident.key()} not in graph {self.trace_id}") from None

    def truth_identities(self) -> list[NodeIdentity]:
        if self.ground_truth is None:
            return []
        return [self.nodes[i] for i in self.ground_truth]


def _application_names(bundle: RequestBundle) -> set[str]:
    return {s.node_name for s in bundle.spans if s.side == "application"}


def _platform_chains(bundle: RequestBundle) -> dict[str, set[str]]:
    """Platform span kinds observed per function name."""
    chains: dict[str, set[str]] = {}
    for s in bundle.spans:
        if s.side == "platform":
            chains.setdefault(s.node_name, set()).add(s.node_kind)
    return chains


def _app_spans_checked(bundle: RequestBundle) -> dict[str, object]:
    """Application spans by id; every non-empty parent must resolve."""
    app_spans = {s.span_id: s for s in bundle.spans if s.side == "application"}
    for span in app_spans.values():
        if span.parent_span_id and span.parent_span_id not in app_spans:
            raise DataError(
                f"trace {bundle.trace_id}: span {span.span_id} references "
                f"unknown parent span {span.parent_span_id}")
    return app_spans


def _call_pairs(bundle: RequestBundle) -> set[tuple[str, str]]:
    """Caller/callee function-name pairs from application span parentage."""
    app_spans = _app_spans_checked(bundle)
    pairs = set()
    for span in app_spans.values():
        parent = app_spans.get(span.parent_span_id)
        if parent is not None and parent.node_name != span.node_name:
            pairs.add((parent.node_name, span.node_name))
    return pairs


def root_span(bundle: RequestBundle):
    """The unique application span with no parent."""
    app_spans = _app_spans_checked(bundle)
    if not app_spans:
        raise DataError(f"trace {bundle.trace_id} has no application spans")
    roots = [s for s in app_spans.values() if not s.parent_span_id]
    if len(roots) != 1:
        raise DataError(f"trace {bundle.trace_id} has {len(roots)} root "
                        f"application spans, expected exactly 1")
    return roots[0]


def classify_request(bundle: RequestBundle,
                     keys=DEFAULT_CLASSIFICATION_KEYS) -> str:
    """Canonical request type from the entry span's parameters.

    Built from the classification keys present on the entry span as
    sorted ``k=v`` pairs joined with ``&``; a request carrying none of
    the keys cannot be grouped with its peers and is rejected.
    """
    root = root_span(bundle)
    parts = sorted(f"{k}={root.request_params[k]}" for k in keys
                   if k in root.request_params)
    if not parts:
        raise DataError(
            f"trace {bundle.trace_id}: entry span has none of the "
            f"classification keys {list(keys)}; cannot classify request")
    return "&".join(parts)


def _check_connected(n_nodes: int, edges: list[tuple[int, int]],
                     trace_id: str) -> None:
    """A request's lifecycle must form one weakly connected structure."""
    if n_nodes == 0:
        raise DataError(f"trace {trace_id} produced an empty graph")
    adj: list[list[int]] = [[] for _ in range(n_nodes)]
    for s, d in edges:
        adj[s].append(d)
        adj[d].append(s)
    seen = [False] * n_nodes
    stack = [0]
    seen[0] = True
    reached = 1
    while stack:
        for nxt in adj[stack.pop()]:
            if not seen[nxt]:
                seen[nxt] = True
                reached += 1
                stack.append(nxt)
    if reached != n_nodes:
        stray = next(i for i, ok in enumerate(seen) if not ok)
        raise DataError(f"trace {trace_id}: graph is disconnected "
                        f"(node index {stray} unreachable)")


def build_structure(bundle: RequestBundle,
                    keys=DEFAULT_CLASSIFICATION_KEYS) -> GlobalCallGraph:
    """Nodes and edges of a trace's graph, attributes not yet attached.

    Node order is the sort by (side, node_kind, node_name), so the same
    request shape always yields the same matrix layout regardless of
    record order in the input.
    """
    request_type = classify_request(bundle, keys)
    fn_names = _application_names(bundle)
    chains = _platform_chains(bundle)
    for name in sorted(fn_names):
        missing = [k for k in PLATFORM_KINDS if k not in chains.get(name, ())]
        if missing:
            raise DataError(
                f"trace {bundle.trace_id}: function {name} has an incomplete "
                f"platform chain (missing {', '.join(missing)})")
    for name in sorted(chains):
        if name not in fn_names:
            raise DataError(
                f"trace {bundle.trace_id}: platform chain for {name} has no "
                f"matching application span")

    nodes: list[NodeIdentity] = [NodeIdentity.function(n) for n in fn_names]
    nodes += [NodeIdentity.platform(kind, name)
              for name in fn_names for kind in PLATFORM_KINDS]
    nodes.sort()
    graph = GlobalCallGraph(
        trace_id=bundle.trace_id,
        request_type=request_type,
        nodes=tuple(nodes),
        edges=np.zeros((0, 2), dtype=np.int64),
    )

    edges: list[tuple[int, int]] = []
    for name in sorted(fn_names):
        dep = graph.node_index(NodeIdentity.platform("deployment", name))
        rs = graph.node_index(NodeIdentity.platform("replicaset", name))
        pod = graph.node_index(NodeIdentity.platform("pod", name))
        fn = graph.node_index(NodeIdentity.function(name))
        edges += [(dep, rs), (rs, pod), (pod, fn)]
    for caller, callee in sorted(_call_pairs(bundle)):
        src = graph.node_index(NodeIdentity.function(caller))
        edges.append((src, graph.node_index(NodeIdentity.function(callee))))
        edges.append((src, graph.node_index(
            NodeIdentity.platform("deployment", callee))))
    _check_connected(len(nodes), edges, bundle.trace_id)

    graph.edges = np.asarray(edges, dtype=np.int64)
    if bundle.ground_truth is not None:
        truth = []
        for kind, name in bundle.ground_truth:
            ident = identity_for(kind, name)
            if ident not in graph._index:
                raise DataError(
                    f"trace {bundle.trace_id}: labeled root cause "
                    f"{ident.key()} is not a node of the graph")
            truth.append(graph.node_index(ident))
        graph.ground_truth = tuple(sorted(truth))
    return graph


def node_latency_us(bundle: RequestBundle) -> dict[NodeIdentity, int]:
    """Total span duration per node identity (a node may run many spans)."""
    totals: dict[NodeIdentity, int] = {}
    for span in bundle.spans:
        ident = NodeIdentity(span.side, span.node_kind, span.node_name)
        totals[ident] = totals.get(ident, 0) + span.duration_us
    return totals


def attach_attributes(graph: GlobalCallGraph, bundle: RequestBundle,
                      stores: dict[str, TemplateStore],
                      projectors: dict[str, ScalarProjector],
                      layout: AttributeLayout, mine: bool = True) -> None:
    """Fill ``graph.x`` from the bundle's logs, metrics, and span latencies.

    Platform-originated log streams (audit, event) lack a node-kind
    field, so their per-function embedding is shared across that
    function's three platform nodes; application logs and metric
    readings land on the function node alone.  Latency is per node: the
    summed durations of the spans that ran on it.  ``mine`` lets the
    template stores grow (training); inference must pass False.
    """
    by_stream_name: dict[tuple[str, str], list] = {}
    for rec in bundle.logs:
        by_stream_name.setdefault((rec.stream, rec.node_name), []).append(rec)
    log_vecs = {
        key: embed_log_sequence(recs, key[0], layout.d_log, stores[key[0]],
                                update=mine)
        for key, recs in by_stream_name.items()
    }
    metric_vals = {(m.node_name, m.channel): m.value for m in bundle.metrics}
    latency_us = node_latency_us(bundle)
    lat_proj = projectors[LATENCY_CHANNEL]

    rows = []
    for ident in graph.nodes:
        name = ident.node_name
        if ident.side == "platform":
            logs = {s: log_vecs.get((s, name)) for s in ("audit", "event")}
            metrics = {}
        else:
            logs = {"app": log_vecs.get(("app", name))}
            metrics = {
                c: (project_scalar(metric_vals[(name, c)], projectors[c])
                    if (name, c) in metric_vals else None)
                for c in layout.metric_channels
            }
        us = latency_us.get(ident)
        lat_vec = None if us is None else embed_latency(us, lat_proj)
        rows.append(fuse_attributes(layout, logs, metrics, lat_vec))
    graph.x = np.vstack(rows)


def build_graph(bundle: RequestBundle, stores: dict[str, TemplateStore],
                projectors: dict[str, ScalarProjector],
                layout: AttributeLayout,
                keys=DEFAULT_CLASSIFICATION_KEYS,
                mine: bool = True) -> GlobalCallGraph:
    graph = build_structure(bundle, keys)
    attach_attributes(graph, bundle, stores, projectors, layout, mine=mine)
    return graph


def dump_graph(graph: GlobalCallGraph, path) -> None:
    """Write a node table and adjacency list as tab-separated text."""
    truth = set(graph.ground_truth or ())
    out: list[str] = [f"# graph\t{graph.trace_id}\t{graph.request_type}",
                      "# nodes\tindex\tside\tkind\tname\tstage\ttruth"]
    for i, n in enumerate(graph.nodes):
        flag = "1" if i in truth else "0"
        out.append(f"{i}\t{n.side}\t{n.node_kind}\t{n.node_name}"
                   f"\t{n.stage}\t{flag}")
    out.append("# edges\tsrc\tdst")
    for s, d in graph.edges:
        out.append(f"{int(s)}\t{int(d)}")
    atomic_write_text(path, "\n".join(out) + "\n")

"""Canonical data model for multi-modal observability records.

Three record kinds are ingested from line-delimited JSON files: spans
(timed operations carrying trace topology), log records, and metric
samples.  Records of one request are grouped into a ``RequestBundle``.

Parsing is strict: a malformed line or a missing field is a hard error
carrying the file name and line number.  Silently dropping telemetry
would silently degrade analysis quality downstream.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError
from .fileio import atomic_write_text

SIDES = ("platform", "application")
PLATFORM_KINDS = ("deployment", "replicaset", "pod")
NODE_KINDS = PLATFORM_KINDS + ("function",)
LOG_STREAMS = ("audit", "event", "app")
METRIC_CHANNELS = ("cpu", "memory")


@dataclass(frozen=True)
class Span:
    """One timed operation by a platform component or a function instance."""

    trace_id: str
    span_id: str
    side: str
    node_kind: str
    node_name: str
    start_us: int
    duration_us: int
    parent_span_id: str | None = None
    request_params: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "trace_id": self.trace_id,
            "span_id": self.span_id,
            "side": self.side,
            "node_kind": self.node_kind,
            "node_name": self.node_name,
            "start_us": self.start_us,
            "duration_us": self.duration_us,
        }
        if self.parent_span_id is not None:
            d["parent_span_id"] = self.parent_span_id
        if self.request_params:
            d["request_params"] = self.request_params
        return d


@dataclass(frozen=True)
class LogRecord:
    """A textual record attached to a node identity within one trace."""

    trace_id: str
    node_name: str
    stream: str
    timestamp_us: int
    message: str

    def to_dict(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "node_name": self.node_name,
            "stream": self.stream,
            "timestamp_us": self.timestamp_us,
            "message": self.message,
        }


@dataclass(frozen=True)
class MetricSample:
    """One instantaneous scalar reading for a node within one trace.

    ``value`` is a fraction of the limit for cpu and bytes for memory;
    there is at most one sample per (trace, node, channel).
    """

    trace_id: str
    node_name: str
    channel: str
    value: float

    def to_dict(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "node_name": self.node_name,
            "channel": self.channel,
            "value": self.value,
        }


@dataclass
class RequestBundle:
    """All telemetry of one request, plus optional root-cause labels.

    ``ground_truth`` is a list of (node_kind, node_name) pairs and is
    present iff the bundle is a labeled faulty one.
    """

    trace_id: str
    spans: list[Span]
    logs: list[LogRecord]
    metrics: list[MetricSample]
    ground_truth: list[tuple[str, str]] | None = None


# ---------------------------------------------------------------------------
# line-delimited JSON parsing

def _iter_jsonl(path):
    try:
        f = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read file: {exc}", path=path) from exc
    with f:
        for lineno, raw in enumerate(f, start=1):
            if raw.strip() == "":
                raise DataError("blank line (one JSON object per line expected)",
                                path=path, line=lineno)
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed JSON: {exc.msg}",
                                path=path, line=lineno) from exc
            if not isinstance(obj, dict):
                raise DataError("expected a JSON object", path=path, line=lineno)
            yield lineno, obj


def _get(obj, key, kind, path, lineno, optional=False):
    if key not in obj:
        if optional:
            return None
        raise DataError(f"missing required field '{key}'", path=path, line=lineno)
    value = obj[key]
    if kind is int and isinstance(value, bool):
        raise DataError(f"field '{key}' must be an integer", path=path, line=lineno)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind):
        raise DataError(f"field '{key}' has wrong type (expected {kind.__name__})",
                        path=path, line=lineno)
    return value


def _check_enum(value, allowed, name, path, lineno):
    if value not in allowed:
        raise DataError(f"invalid {name} '{value}' (expected one of {', '.join(allowed)})",
                        path=path, line=lineno)


def parse_spans(path) -> list[Span]:
    """Parse a spans.jsonl file; raise ``DataError`` on the first bad line."""
    spans = []
    for lineno, obj in _iter_jsonl(path):
        side = _get(obj, "side", str, path, lineno)
        _check_enum(side, SIDES, "side", path, lineno)
        kind = _get(obj, "node_kind", str, path, lineno)
        _check_enum(kind, NODE_KINDS, "node_kind", path, lineno)
        if side == "platform" and kind not in PLATFORM_KINDS:
            raise DataError(f"platform span must have node_kind in "
                            f"{{{', '.join(PLATFORM_KINDS)}}}, got '{kind}'",
                            path=path, line=lineno)
        if side == "application" and kind != "function":
            raise DataError(f"application span must have node_kind 'function', "
                            f"got '{kind}'", path=path, line=lineno)
        duration = _get(obj, "duration_us", int, path, lineno)
        if duration < 0:
            raise DataError(f"duration_us must be >= 0, got {duration}",
                            path=path, line=lineno)
        params = _get(obj, "request_params", dict, path, lineno, optional=True) or {}
        for k, v in params.items():
            if not isinstance(k, str) or not isinstance(v, str):
                raise DataError("request_params must map strings to strings",
                                path=path, line=lineno)
        spans.append(Span(
            trace_id=_get(obj, "trace_id", str, path, lineno),
            span_id=_get(obj, "span_id", str, path, lineno),
            parent_span_id=_get(obj, "parent_span_id", str, path, lineno, optional=True),
            side=side,
            node_kind=kind,
            node_name=_get(obj, "node_name", str, path, lineno),
            start_us=_get(obj, "start_us", int, path, lineno),
            duration_us=duration,
            request_params=params,
        ))
    return spans


def parse_logs(path) -> list[LogRecord]:
    """Parse a logs.jsonl file; raise ``DataError`` on the first bad line."""
    logs = []
    for lineno, obj in _iter_jsonl(path):
        stream = _get(obj, "stream", str, path, lineno)
        _check_enum(stream, LOG_STREAMS, "stream", path, lineno)
        message = _get(obj, "message", str, path, lineno)
        if message == "":
            raise DataError("message must be non-empty", path=path, line=lineno)
        logs.append(LogRecord(
            trace_id=_get(obj, "trace_id", str, path, lineno),
            node_name=_get(obj, "node_name", str, path, lineno),
            stream=stream,
            timestamp_us=_get(obj, "timestamp_us", int, path, lineno),
            message=message,
        ))
    return logs


def parse_metrics(path) -> list[MetricSample]:
    """Parse a metrics.jsonl file; raise ``DataError`` on the first bad line."""
    metrics = []
    for lineno, obj in _iter_jsonl(path):
        channel = _get(obj, "channel", str, path, lineno)
        _check_enum(channel, METRIC_CHANNELS, "channel", path, lineno)
        value = _get(obj, "value", float, path, lineno)
        if not math.isfinite(value):
            raise DataError("value must be finite", path=path, line=lineno)
        if value < 0:
            raise DataError(f"value must be non-negative, got {value}",
                            path=path, line=lineno)
        metrics.append(MetricSample(
            trace_id=_get(obj, "trace_id", str, path, lineno),
            node_name=_get(obj, "node_name", str, path, lineno),
            channel=channel,
            value=value,
        ))
    return metrics


# ---------------------------------------------------------------------------
# bundling

def group_into_bundles(spans, logs, metrics) -> list[RequestBundle]:
    """Partition parsed records into one bundle per trace_id.

    Every record lands in exactly one bundle; a log or metric whose trace
    has no spans is dangling telemetry and a hard error.  Cross-record
    invariants (span id uniqueness, parent references, one metric sample
    per channel) are enforced here.
    """
    by_trace: dict[str, RequestBundle] = {}
    for span in spans:
        bundle = by_trace.setdefault(span.trace_id,
                                     RequestBundle(span.trace_id, [], [], []))
        bundle.spans.append(span)

    for bundle in by_trace.values():
        ids = set()
        for span in bundle.spans:
            if span.span_id in ids:
                raise DataError(f"duplicate span_id '{span.span_id}' "
                                f"in trace '{bundle.trace_id}'")
            ids.add(span.span_id)
        for span in bundle.spans:
            if span.parent_span_id is not None and span.parent_span_id not in ids:
                raise DataError(f"span '{span.span_id}' in trace '{bundle.trace_id}' "
                                f"references unknown parent '{span.parent_span_id}'")

    for log in logs:
        if log.trace_id not in by_trace:
            raise DataError(f"log record for trace '{log.trace_id}' has no spans "
                            "(dangling telemetry)")
        by_trace[log.trace_id].logs.append(log)

    seen_samples = set()
    for sample in metrics:
        if sample.trace_id not in by_trace:
            raise DataError(f"metric sample for trace '{sample.trace_id}' has no spans "
                            "(dangling telemetry)")
        key = (sample.trace_id, sample.node_name, sample.channel)
        if key in seen_samples:
            raise DataError(f"duplicate metric sample for node '{sample.node_name}' "
                            f"channel '{sample.channel}' in trace '{sample.trace_id}'")
        seen_samples.add(key)
        by_trace[sample.trace_id].metrics.append(sample)

    return [by_trace[tid] for tid in sorted(by_trace)]


# ---------------------------------------------------------------------------
# dataset directory layout

def _dump_jsonl(records) -> str:
    lines = [json.dumps(r.to_dict(), sort_keys=True, separators=(",", ":"))
             for r in records]
    return "".join(line + "\n" for line in lines)


def write_bundle(bundle: RequestBundle, directory) -> None:
    """Write a bundle as ``<trace_id>.{spans,logs,metrics}.jsonl`` files."""
    directory = Path(directory)
    atomic_write_text(directory / f"{bundle.trace_id}.spans.jsonl",
                      _dump_jsonl(bundle.spans))
    atomic_write_text(directory / f"{bundle.trace_id}.logs.jsonl",
                      _dump_jsonl(bundle.logs))
    atomic_write_text(directory / f"{bundle.trace_id}.metrics.jsonl",
                      _dump_jsonl(bundle.metrics))


def write_labels(labels: dict[str, list[tuple[str, str]]], path) -> None:
    """Write a labels.jsonl file mapping trace_id to root-cause nodes."""
    lines = []
    for trace_id in sorted(labels):
        nodes = [{"node_kind": k, "node_name": n} for k, n in labels[trace_id]]
        lines.append(json.dumps({"trace_id": trace_id, "nodes": nodes},
                                sort_keys=True, separators=(",", ":")))
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_labels(path) -> dict[str, list[tuple[str, str]]]:
    labels = {}
    for lineno, obj in _iter_jsonl(path):
        trace_id = _get(obj, "trace_id", str, path, lineno)
        nodes = _get(obj, "nodes", list, path, lineno)
        if not nodes:
            raise DataError("label entry must name at least one node",
                            path=path, line=lineno)
        parsed = []
        for node in nodes:
            if not isinstance(node, dict):
                raise DataError("label nodes must be objects", path=path, line=lineno)
            kind = _get(node, "node_kind", str, path, lineno)
            _check_enum(kind, NODE_KINDS, "node_kind", path, lineno)
            parsed.append((kind, _get(node, "node_name", str, path, lineno)))
        labels[trace_id] = parsed
    return labels


def load_split(directory, labels_path=None) -> list[RequestBundle]:
    """Load every trace in a dataset split directory, sorted by trace_id.

    Missing logs/metrics files for a trace are treated as empty (spans are
    required).  When ``labels_path`` is given, every loaded bundle must be
    labeled there and gains its ground truth.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"not a directory: {directory}")
    span_files = sorted(directory.glob("*.spans.jsonl"))
    if not span_files:
        raise DataError(f"no *.spans.jsonl files in {directory}")
    labels = read_labels(labels_path) if labels_path is not None else None

    bundles = []
    for span_file in span_files:
        trace_id = span_file.name[:-len(".spans.jsonl")]
        spans = parse_spans(span_file)
        logs_file = directory / f"{trace_id}.logs.jsonl"
        metrics_file = directory / f"{trace_id}.metrics.jsonl"
        logs = parse_logs(logs_file) if logs_file.exists() else []
        metrics = parse_metrics(metrics_file) if metrics_file.exists() else []
        for rec in (*spans, *logs, *metrics):
            if rec.trace_id != trace_id:
                raise DataError(f"record trace_id '{rec.trace_id}' does not match "
                                f"file name trace '{trace_id}'", path=span_file.parent)
        grouped = group_into_bundles(spans, logs, metrics)
        if len(grouped) != 1:
            raise DataError(f"expected exactly one trace in files for '{trace_id}'")
        bundle = grouped[0]
        if labels is not None:
            if trace_id not in labels:
                raise DataError(f"trace '{trace_id}' missing from labels file "
                                f"{labels_path}")
            bundle.ground_truth = labels[trace_id]
        bundles.append(bundle)
    return bundles

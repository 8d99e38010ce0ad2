"""Synthetic serverless workload and fault injection.

Generates labeled telemetry for a small function-as-a-service app: per
request one trace with platform provisioning spans (deployment,
replicaset, pod), function execution spans, control-plane and
application logs, and per-function resource metrics.  Faults from a
fixed catalog perturb one function's telemetry and record the ground
truth node.

Every trace draws from its own counter-based random stream keyed by
(master seed, trace id), so regeneration is order-independent and
bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .fileio import atomic_write_text
from .graph import DEFAULT_CLASSIFICATION_KEYS
from .records import (
    PLATFORM_KINDS,
    LogRecord,
    MetricSample,
    RequestBundle,
    Span,
    write_bundle,
    write_labels,
)

# Every rollout step carries its own timing noise.
_DEFAULT_PLATFORM_SIGMA = {
    "deployment": 0.2,
    "replicaset": 0.2,
    "pod": 0.2,
}

FAULT_CATEGORIES = (
    "pod_failure",
    "replicaset_failure",
    "kube_scheduler_delay",
    "kubelet_delay",
    "network_failure",
    "code_defect",
    "memory_stress",
    "cpu_contention",
)
PLATFORM_FAULTS = FAULT_CATEGORIES[:5]
APPLICATION_FAULTS = FAULT_CATEGORIES[5:]
METRIC_FAULTS = ("memory_stress", "cpu_contention")

# Multiplier range drawn for each category's primary channel.  Wide
# enough to be unmistakable in a ranking, narrow enough that every
# injection still looks like telemetry rather than a sentinel value.
# A workload can override per category to study softer faults.
FAULT_MAGNITUDES = {
    "pod_failure": (6.0, 12.0),
    "replicaset_failure": (6.0, 12.0),
    "kube_scheduler_delay": (5.0, 20.0),
    "kubelet_delay": (5.0, 20.0),
    "network_failure": (4.0, 9.0),
    "code_defect": (3.0, 10.0),
    "memory_stress": (3.0, 8.0),
    "cpu_contention": (3.0, 8.0),
}
# network_failure also brushes the rest of the chain lightly.
_NETWORK_SIDE_RANGE = (1.3, 1.8)

# Node kind blamed by each category.
TRUTH_KIND = {
    "pod_failure": "pod",
    "replicaset_failure": "replicaset",
    "kube_scheduler_delay": "deployment",
    "kubelet_delay": "pod",
    "network_failure": "pod",
    "code_defect": "function",
    "memory_stress": "function",
    "cpu_contention": "function",
}


@dataclass(frozen=True)
class FunctionProfile:
    """Steady-state behavior of one function.

    ``cpu_fraction`` is utilization as a fraction of the limit,
    ``memory_bytes`` the working set.  ``log_rate`` is the per-request
    chance of the optional cache/retry chatter lines; left unset the
    function always logs the same text.
    """

    name: str
    base_latency_ms: float
    cpu_fraction: float
    memory_bytes: float
    calls: tuple[str, ...] = ()
    log_rate: float | None = None


@dataclass(frozen=True)
class RequestTypeSpec:
    name: str
    entry: str
    functions: tuple[FunctionProfile, ...]
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class WorkloadSpec:
    request_types: tuple[RequestTypeSpec, ...]
    platform_ms: dict
    platform_sigma: dict = field(
        default_factory=lambda: dict(_DEFAULT_PLATFORM_SIGMA))
    latency_sigma: float = 0.2
    metric_sigma: float = 0.05
    optional_log_rate: float = 0.5
    metric_gap_rate: float = 0.06
    fault_magnitudes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "latency_sigma": self.latency_sigma,
            "metric_sigma": self.metric_sigma,
            "optional_log_rate": self.optional_log_rate,
            "metric_gap_rate": self.metric_gap_rate,
            "platform_ms": dict(self.platform_ms),
            "platform_sigma": dict(self.platform_sigma),
            "fault_magnitudes": {k: list(v)
                                 for k, v in sorted(self.fault_magnitudes.items())},
            "request_type": [
                {
                    "name": rt.name,
                    "entry": rt.entry,
                    "params": dict(rt.params),
                    "function": [
                        {
                            "name": f.name,
                            "base_latency_ms": f.base_latency_ms,
                            "cpu_fraction": f.cpu_fraction,
                            "memory_bytes": f.memory_bytes,
                            "calls": list(f.calls),
                            **({} if f.log_rate is None
                               else {"log_rate": f.log_rate}),
                        }
                        for f in rt.functions
                    ],
                }
                for rt in self.request_types
            ],
        }


def workload_from_dict(data: dict) -> WorkloadSpec:
    try:
        platform_ms = {k: float(data["platform_ms"][k]) for k in PLATFORM_KINDS}
        types = []
        for rt in data["request_type"]:
            functions = tuple(
                FunctionProfile(
                    name=f["name"],
                    base_latency_ms=float(f["base_latency_ms"]),
                    cpu_fraction=float(f["cpu_fraction"]),
                    memory_bytes=float(f["memory_bytes"]),
                    calls=tuple(f.get("calls", ())),
                    log_rate=(None if f.get("log_rate") is None
                              else float(f["log_rate"])),
                )
                for f in rt["function"]
            )
            types.append(RequestTypeSpec(
                name=rt["name"], entry=rt["entry"], functions=functions,
                params=dict(rt.get("params", {}))))
        sigma_in = data.get("platform_sigma", {})
        platform_sigma = {k: float(sigma_in.get(k, _DEFAULT_PLATFORM_SIGMA[k]))
                          for k in PLATFORM_KINDS}
        magnitudes = {k: (float(v[0]), float(v[1]))
                      for k, v in data.get("fault_magnitudes", {}).items()}
        spec = WorkloadSpec(
            request_types=tuple(types),
            platform_ms=platform_ms,
            platform_sigma=platform_sigma,
            latency_sigma=float(data.get("latency_sigma", 0.2)),
            metric_sigma=float(data.get("metric_sigma", 0.05)),
            optional_log_rate=float(data.get("optional_log_rate", 0.5)),
            metric_gap_rate=float(data.get("metric_gap_rate", 0.06)),
            fault_magnitudes=magnitudes,
        )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise DataError(f"bad workload definition: {exc}") from exc
    validate_workload(spec)
    return spec


def load_workload(path) -> WorkloadSpec:
    """Read a workload definition from a TOML file."""
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except OSError as exc:
        raise DataError(f"cannot read workload file: {exc}", path=str(path)) from exc
    except tomllib.TOMLDecodeError as exc:
        raise DataError(f"bad TOML: {exc}", path=str(path)) from exc
    return workload_from_dict(data)


def validate_workload(spec: WorkloadSpec) -> None:
    if not spec.request_types:
        raise DataError("workload has no request types")
    if spec.latency_sigma <= 0 or spec.metric_sigma <= 0:
        raise DataError("latency_sigma and metric_sigma must be positive")
    if not 0.0 <= spec.optional_log_rate <= 1.0:
        raise DataError("optional_log_rate must be in [0, 1]")
    if not 0.0 <= spec.metric_gap_rate <= 1.0:
        raise DataError("metric_gap_rate must be in [0, 1]")
    for kind in PLATFORM_KINDS:
        if spec.platform_ms.get(kind, 0.0) <= 0:
            raise DataError(f"platform_ms.{kind} must be positive")
        if spec.platform_sigma.get(kind, 0.0) <= 0:
            raise DataError(f"platform_sigma.{kind} must be positive")
    for category, bounds in spec.fault_magnitudes.items():
        if category not in FAULT_CATEGORIES:
            raise DataError(f"fault_magnitudes names unknown category "
                            f"'{category}'")
        lo, hi = bounds
        if not 0.0 < lo <= hi:
            raise DataError(f"fault_magnitudes.{category} needs 0 < lo <= hi, "
                            f"got ({lo}, {hi})")
    seen_types = set()
    for rt in spec.request_types:
        if rt.name in seen_types:
            raise DataError(f"duplicate request type '{rt.name}'")
        seen_types.add(rt.name)
        if not any(k in rt.params for k in DEFAULT_CLASSIFICATION_KEYS):
            raise DataError(
                f"type '{rt.name}' has no classification key in params "
                f"(need one of {list(DEFAULT_CLASSIFICATION_KEYS)})")
        names = [f.name for f in rt.functions]
        if len(set(names)) != len(names):
            raise DataError(f"duplicate function name in type '{rt.name}'")
        for f in rt.functions:
            if f.log_rate is not None and not 0.0 <= f.log_rate <= 1.0:
                raise DataError(f"log_rate of '{f.name}' must be in [0, 1]")
        _call_order(rt)  # raises on unknown callees, cycles, unreachable


def _call_order(rt: RequestTypeSpec) -> list[str]:
    """Functions in entry-first depth-first call order."""
    profiles = {f.name: f for f in rt.functions}
    if rt.entry not in profiles:
        raise DataError(f"entry '{rt.entry}' is not a function of type '{rt.name}'")
    order: list[str] = []
    on_path: set[str] = set()

    def visit(name: str) -> None:
        if name in on_path:
            raise DataError(f"call cycle through '{name}' in type '{rt.name}'")
        if name not in profiles:
            raise DataError(f"unknown callee '{name}' in type '{rt.name}'")
        if name not in order:
            order.append(name)
        on_path.add(name)
        for callee in profiles[name].calls:
            visit(callee)
        on_path.remove(name)

    visit(rt.entry)
    unreachable = set(profiles) - set(order)
    if unreachable:
        raise DataError(f"functions never called in type '{rt.name}': "
                        f"{', '.join(sorted(unreachable))}")
    return order


def default_workload() -> WorkloadSpec:
    """Two request types over five functions; baselines deliberately make
    raw latencies ambiguous across node kinds (a slowed-down cheap node
    can look like a normal expensive one)."""
    checkout = RequestTypeSpec(
        name="checkout",
        entry="gateway",
        params={"http.host": "shop.local", "http.target": "/checkout"},
        functions=(
            FunctionProfile("gateway", 60.0, 0.20, 192e6,
                            calls=("validate", "charge")),
            FunctionProfile("validate", 40.0, 0.12, 128e6),
            FunctionProfile("charge", 150.0, 0.35, 384e6),
        ),
    )
    report = RequestTypeSpec(
        name="report",
        entry="collect",
        params={"http.host": "shop.local", "http.target": "/report"},
        functions=(
            FunctionProfile("collect", 90.0, 0.25, 256e6, calls=("render",)),
            FunctionProfile("render", 120.0, 0.40, 448e6),
        ),
    )
    return WorkloadSpec(
        request_types=(checkout, report),
        platform_ms={"deployment": 100.0, "replicaset": 100.0, "pod": 100.0},
    )


# ---------------------------------------------------------------------------
# per-trace generation

_AUDIT_LINES = (
    "apiserver create deployment {fn} accepted from controller",
    "apiserver scale replicaset {fn}-rs to 1 accepted",
)
_AUDIT_OPTIONAL = (
    "apiserver get status for deployment {fn} from watcher",
)
# Control-plane churn around a rollout: every creation drags a random
# slice of apiserver bookkeeping with it, so the audit stream is busy
# even on perfectly healthy requests.
_AUDIT_CHURN = (
    "endpoints controller syncing addresses for {fn} group {rnd}",
    "lease renewed for {fn} holder {rnd}",
    "hpa evaluated target utilization for {fn} at {rnd} percent",
    "configmap revision {rnd} projected into {fn}",
    "secret volume refreshed for {fn} serial {rnd}",
    "serviceaccount token rotated for {fn} epoch {rnd}",
    "endpointslice updated ports for {fn} build {rnd}",
    "resourcequota usage recomputed for {fn} window {rnd}",
)
_CHURN_DRAWS = 4
_EVENT_LINES = (
    "scheduler assigned pod {fn}-pod-{rnd} to worker-{rnd}",
    "kubelet pulling image registry.local/{fn}:stable",
    "kubelet started container {fn} in pod {fn}-pod-{rnd}",
)
_EVENT_OPTIONAL = (
    "kubelet readiness probe for {fn} ok after {rnd} ms",
    "scheduler scored {rnd} candidate nodes for pod {fn}-pod-{rnd}",
)
_APP_LINES = (
    "function {fn} handled request {path} status 200",
    "invocation {rnd} for {fn} completed in {rnd} ms",
)
_APP_OPTIONAL = (
    "cache lookup for key {rnd} missed",
    "retrying downstream call attempt {rnd}",
)

# Resource faults surface only in the metric channels; everything else
# also writes a distinctive line on the stream that observed it.
_FAULT_LOGS = {
    "pod_failure": (
        ("event", "kubelet back-off restarting failed container {fn} crashloopbackoff"),
    ),
    "replicaset_failure": (
        ("event", "replicaset {fn}-rs failed to create pod quota exceeded"),
    ),
    "kube_scheduler_delay": (
        ("event", "scheduler failed binding pod {fn}-pod-{rnd} retrying"),
    ),
    "kubelet_delay": (
        ("event", "kubelet pleg relist took {rnd} ms exceeding threshold"),
    ),
    "network_failure": (
        ("event", "cni timeout pulling image for pod {fn}-pod-{rnd}"),
    ),
    "code_defect": (
        ("app", "unhandled exception in {fn} handler"),
        ("app", "stack trace recorded for {fn} frame {rnd}"),
    ),
    "memory_stress": (),
    "cpu_contention": (),
}


@dataclass(frozen=True)
class FaultSpec:
    """One injected fault: a category aimed at one function.

    ``magnitude`` pins the primary-channel multiplier instead of drawing
    it from the category's range; useful for sweeping fault severity.
    """

    category: str
    function: str
    magnitude: float | None = None

    def truth_nodes(self) -> list[tuple[str, str]]:
        return [(TRUTH_KIND[self.category], self.function)]


@dataclass
class _FaultEffects:
    latency_mult: dict = field(default_factory=dict)   # node_kind -> factor
    metric_mult: dict = field(default_factory=dict)    # channel -> factor
    log_lines: tuple = ()


def _trace_rng(master_seed: int, trace_id: str) -> np.random.Generator:
    digest = hashlib.blake2b(f"{master_seed}|{trace_id}".encode("utf-8"),
                             digest_size=16).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest, "little")))


def _draw_effects(category: str, rng: np.random.Generator,
                  overrides: dict | None = None,
                  pinned: float | None = None) -> _FaultEffects:
    if category not in FAULT_MAGNITUDES:
        raise ValueError(f"unknown fault category '{category}'")
    if pinned is not None and pinned <= 0.0:
        raise ValueError(f"fault magnitude must be positive, got {pinned}")
    lo, hi = (overrides or {}).get(category, FAULT_MAGNITUDES[category])

    def primary() -> float:
        return pinned if pinned is not None else float(rng.uniform(lo, hi))

    eff = _FaultEffects(log_lines=_FAULT_LOGS[category])
    if category == "pod_failure":
        eff.latency_mult["pod"] = primary()
    elif category == "replicaset_failure":
        eff.latency_mult["replicaset"] = primary()
    elif category == "kube_scheduler_delay":
        eff.latency_mult["deployment"] = primary()
    elif category == "kubelet_delay":
        eff.latency_mult["pod"] = primary()
    elif category == "network_failure":
        # Everything crosses the wire, but image pull dominates.
        eff.latency_mult["deployment"] = rng.uniform(*_NETWORK_SIDE_RANGE)
        eff.latency_mult["replicaset"] = rng.uniform(*_NETWORK_SIDE_RANGE)
        eff.latency_mult["pod"] = primary()
    elif category == "code_defect":
        eff.latency_mult["function"] = primary()
    elif category == "memory_stress":
        eff.metric_mult["memory"] = primary()
    else:
        eff.metric_mult["cpu"] = primary()
    return eff


def _fill(template: str, rng: np.random.Generator, fn: str, path: str) -> str:
    out = template.replace("{fn}", fn).replace("{path}", path)
    while "{rnd}" in out:
        out = out.replace("{rnd}", str(int(rng.integers(10_000, 1_000_000))), 1)
    return out


def generate_trace(workload: WorkloadSpec, rt: RequestTypeSpec, trace_id: str,
                   master_seed: int, fault: FaultSpec | None = None) -> RequestBundle:
    """One request's telemetry; with ``fault``, perturbed and labeled."""
    rng = _trace_rng(master_seed, trace_id)
    effects = (_draw_effects(fault.category, rng, workload.fault_magnitudes,
                             fault.magnitude)
               if fault else _FaultEffects())
    profiles = {f.name: f for f in rt.functions}
    order = _call_order(rt)
    path = rt.params.get("http.target", "/" + rt.name)

    spans: list[Span] = []
    logs: list[LogRecord] = []
    metrics: list[MetricSample] = []
    counter = [0]

    def next_sid() -> str:
        counter[0] += 1
        return f"s{counter[0]:03d}"

    def mult_for(name: str, slot: str) -> float:
        if fault is not None and fault.function == name:
            return effects.latency_mult.get(slot, 1.0)
        return 1.0

    def draw_ms(base_ms: float, factor: float, sigma: float) -> int:
        ms = base_ms * factor * math.exp(rng.normal(0.0, sigma))
        return max(1, int(round(ms * 1000.0)))

    t0 = 1_600_000_000_000_000
    pod_ready: dict[str, int] = {}
    for name in order:
        parent = None
        t = t0
        for kind in PLATFORM_KINDS:
            dur = draw_ms(workload.platform_ms[kind], mult_for(name, kind),
                          workload.platform_sigma[kind])
            sid = next_sid()
            spans.append(Span(trace_id, sid, "platform", kind, name, t, dur, parent))
            parent = sid
            t += dur
        pod_ready[name] = t

    def emit_function(name: str, parent_id: str | None, invoke_t: int) -> None:
        dur = draw_ms(profiles[name].base_latency_ms, mult_for(name, "function"),
                      workload.latency_sigma)
        start = max(invoke_t, pod_ready[name]) + 500
        sid = next_sid()
        params = dict(rt.params) if parent_id is None else {}
        spans.append(Span(trace_id, sid, "application", "function", name,
                          start, dur, parent_id, params))
        child_t = start + 1000
        for callee in profiles[name].calls:
            emit_function(callee, sid, child_t)
            child_t += 2000

    emit_function(rt.entry, None, t0)

    for name in order:
        is_target = fault is not None and fault.function == name
        ts = t0
        for line in _AUDIT_LINES:
            logs.append(LogRecord(trace_id, name, "audit", ts,
                                  _fill(line, rng, name, path)))
            ts += 100
        for line in _AUDIT_OPTIONAL:
            if rng.random() < workload.optional_log_rate:
                logs.append(LogRecord(trace_id, name, "audit", ts,
                                      _fill(line, rng, name, path)))
            ts += 100
        for idx in rng.choice(len(_AUDIT_CHURN), size=_CHURN_DRAWS,
                              replace=False):
            logs.append(LogRecord(trace_id, name, "audit", ts,
                                  _fill(_AUDIT_CHURN[idx], rng, name, path)))
            ts += 100
        for line in _EVENT_LINES:
            logs.append(LogRecord(trace_id, name, "event", ts,
                                  _fill(line, rng, name, path)))
            ts += 100
        for line in _EVENT_OPTIONAL:
            if rng.random() < workload.optional_log_rate:
                logs.append(LogRecord(trace_id, name, "event", ts,
                                      _fill(line, rng, name, path)))
            ts += 100
        app_ts = pod_ready[name] + 500
        for line in _APP_LINES:
            logs.append(LogRecord(trace_id, name, "app", app_ts,
                                  _fill(line, rng, name, path)))
            app_ts += 100
        prof_rate = profiles[name].log_rate
        app_rate = 0.0 if prof_rate is None else prof_rate
        for line in _APP_OPTIONAL:
            if rng.random() < app_rate:
                logs.append(LogRecord(trace_id, name, "app", app_ts,
                                      _fill(line, rng, name, path)))
            app_ts += 100
        if is_target:
            for stream, line in effects.log_lines:
                logs.append(LogRecord(trace_id, name, stream, pod_ready[name],
                                      _fill(line, rng, name, path)))

    metric_fault = fault is not None and fault.category in METRIC_FAULTS
    gapped = {name for name in order
              if not profiles[name].calls and not metric_fault
              and rng.random() < workload.metric_gap_rate}
    for name in order:
        if name in gapped:
            continue
        prof = profiles[name]
        is_target = fault is not None and fault.function == name
        for channel, base in (("cpu", prof.cpu_fraction),
                              ("memory", prof.memory_bytes)):
            factor = effects.metric_mult.get(channel, 1.0) if is_target else 1.0
            value = base * factor * (1.0 + rng.normal(0.0, workload.metric_sigma))
            metrics.append(MetricSample(trace_id, name, channel, max(value, 0.0)))

    truth = fault.truth_nodes() if fault is not None else None
    return RequestBundle(trace_id, spans, logs, metrics, ground_truth=truth)


# ---------------------------------------------------------------------------
# dataset assembly

@dataclass(frozen=True)
class SplitCounts:
    train: int = 500
    fit: int = 500
    faulty: int = 400


def _category_schedule(n_faulty: int, fault_mix: dict | None,
                       n_types: int) -> list[str]:
    """Deterministic category sequence honoring the requested proportions.

    Quotas come from largest-remainder rounding of the weights; the
    sequence deals categories in catalog order, one block per request
    type at a time, so every category spreads over both types evenly.
    """
    if fault_mix is None:
        weights = {c: 1.0 for c in FAULT_CATEGORIES}
    else:
        unknown = sorted(set(fault_mix) - set(FAULT_CATEGORIES))
        if unknown:
            raise DataError(f"fault mix names unknown categories: "
                            f"{', '.join(unknown)}")
        weights = {c: float(fault_mix.get(c, 0.0)) for c in FAULT_CATEGORIES}
        if any(w < 0.0 for w in weights.values()):
            raise DataError("fault mix weights must be >= 0")
        if sum(weights.values()) <= 0.0:
            raise DataError("fault mix needs at least one positive weight")
    total = sum(weights.values())
    exact = {c: n_faulty * weights[c] / total for c in FAULT_CATEGORIES}
    quota = {c: int(exact[c]) for c in FAULT_CATEGORIES}
    leftover = n_faulty - sum(quota.values())
    by_fraction = sorted(FAULT_CATEGORIES,
                         key=lambda c: exact[c] - quota[c], reverse=True)
    for c in by_fraction[:leftover]:
        quota[c] += 1

    schedule: list[str] = []
    while len(schedule) < n_faulty:
        for c in FAULT_CATEGORIES:
            take = min(n_types, quota[c])
            quota[c] -= take
            schedule.extend([c] * take)
    return schedule[:n_faulty]


def generate_dataset(workload: WorkloadSpec, out_dir, master_seed: int,
                     counts: SplitCounts = SplitCounts(),
                     fault_mix: dict | None = None) -> dict:
    """Write a full dataset and return its manifest.

    Layout: ``normal/train`` and ``normal/fit`` hold healthy traces
    (model training and pattern fitting respectively), ``faulty`` holds
    labeled fault traces plus ``labels.jsonl``; ``manifest.json``
    records the workload, counts, and each fault's category.
    ``fault_mix`` weights the fault categories (default: uniform).
    """
    validate_workload(workload)
    if min(counts.train, counts.fit, counts.faulty) < 1:
        raise DataError("every split needs at least one trace")
    out = Path(out_dir)
    types = workload.request_types
    n_types = len(types)

    splits: dict[str, list[str]] = {}
    for split, tag, n in (("normal/train", "train", counts.train),
                          ("normal/fit", "fit", counts.fit)):
        directory = out / split
        ids = []
        for i in range(n):
            rt = types[i % n_types]
            trace_id = f"{rt.name}-{tag}-{i:05d}"
            write_bundle(generate_trace(workload, rt, trace_id, master_seed),
                         directory)
            ids.append(trace_id)
        splits[split] = ids

    faulty_dir = out / "faulty"
    schedule = _category_schedule(counts.faulty, fault_mix, n_types)
    labels: dict[str, list[tuple[str, str]]] = {}
    fault_entries = []
    ids = []
    for i in range(counts.faulty):
        rt = types[i % n_types]
        category = schedule[i]
        fn_index = (i // (n_types * len(FAULT_CATEGORIES))) % len(rt.functions)
        fault = FaultSpec(category, rt.functions[fn_index].name)
        trace_id = f"{rt.name}-fault-{category}-{i:05d}"
        bundle = generate_trace(workload, rt, trace_id, master_seed, fault)
        write_bundle(bundle, faulty_dir)
        labels[trace_id] = fault.truth_nodes()
        fault_entries.append({
            "trace_id": trace_id,
            "request_type": rt.name,
            "category": category,
            "function": fault.function,
            "nodes": [{"node_kind": k, "node_name": n} for k, n in labels[trace_id]],
        })
        ids.append(trace_id)
    splits["faulty"] = ids
    write_labels(labels, faulty_dir / "labels.jsonl")

    manifest = {
        "master_seed": master_seed,
        "counts": {"train": counts.train, "fit": counts.fit,
                   "faulty": counts.faulty},
        "workload": workload.to_dict(),
        "splits": {k: len(v) for k, v in splits.items()},
        "faults": fault_entries,
    }
    if fault_mix is not None:
        manifest["fault_mix"] = {k: float(v) for k, v in sorted(fault_mix.items())}
    atomic_write_text(out / "manifest.json",
                      json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest

"""Full-lifecycle root cause analysis for serverless applications.

Per request, platform provisioning telemetry and application telemetry
fuse into one attributed call graph; a graph attention auto-encoder
trained on healthy traffic scores each node by reconstruction error;
faults are localized by ranking how far each node's score deviates
from its healthy profile for that request type.
"""

from .autoencoder import GatAutoEncoder, TrainConfig, node_scores, score_graph, train
from .errors import DataError, NumericError, SrcaError, UsageError
from .evaluate import EvalCase, evaluate_cases, hr_at_k, ndcg_at_k
from .faultgen import (
    FAULT_CATEGORIES,
    FaultSpec,
    SplitCounts,
    WorkloadSpec,
    default_workload,
    generate_dataset,
    generate_trace,
)
from .graph import GlobalCallGraph, NodeIdentity, build_graph, classify_request
from .modelio import ModelBundle, load_model, save_model
from .pipeline import fit_model
from .rca import (
    Localization,
    NormalPatternStore,
    fit_normal_store,
    localize,
    read_store,
    write_store,
)
from .records import LogRecord, MetricSample, RequestBundle, Span, load_split

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "EvalCase",
    "FAULT_CATEGORIES",
    "FaultSpec",
    "GatAutoEncoder",
    "GlobalCallGraph",
    "Localization",
    "LogRecord",
    "MetricSample",
    "ModelBundle",
    "NodeIdentity",
    "NormalPatternStore",
    "NumericError",
    "RequestBundle",
    "Span",
    "SplitCounts",
    "SrcaError",
    "TrainConfig",
    "UsageError",
    "WorkloadSpec",
    "build_graph",
    "classify_request",
    "default_workload",
    "evaluate_cases",
    "fit_model",
    "fit_normal_store",
    "generate_dataset",
    "generate_trace",
    "hr_at_k",
    "load_model",
    "load_split",
    "localize",
    "ndcg_at_k",
    "node_scores",
    "read_store",
    "save_model",
    "score_graph",
    "train",
    "write_store",
]

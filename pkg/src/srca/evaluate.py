"""Ranking quality metrics for localization results.

Per faulty trace, the cutoff k defaults to the number of truly faulty
nodes; results are also reported at k+2 to show near-miss behavior.
HR@k asks whether any faulty node made the top k.  NDCG@k uses binary
relevance with gains (2^rel - 1) discounted by log2(rank + 1), each
trace normalized by its own ideal ranking, then averaged over traces.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .errors import DataError
from .fileio import atomic_write_text

ALL_TYPES = "(all)"


def hr_at_k(ranked, truth, k: int) -> float:
    """1.0 if any true fault appears in the top k entries, else 0.0."""
    if k < 1:
        raise ValueError("k must be >= 1")
    truth = set(truth)
    if not truth:
        raise ValueError("empty ground truth")
    return 1.0 if any(r in truth for r in ranked[:k]) else 0.0


def ndcg_at_k(ranked, truth, k: int) -> float:
    """Normalized discounted cumulative gain with binary relevance."""
    if k < 1:
        raise ValueError("k must be >= 1")
    truth = set(truth)
    if not truth:
        raise ValueError("empty ground truth")
    dcg = 0.0
    for i, node in enumerate(ranked[:k], start=1):
        if node in truth:
            dcg += 1.0 / math.log2(i + 1)  # (2^1 - 1) = 1 for a hit
    ideal_hits = min(k, len(truth))
    idcg = sum(1.0 / math.log2(i + 1) for i in range(1, ideal_hits + 1))
    return dcg / idcg


@dataclass
class EvalCase:
    """One faulty trace's ranking and its ground truth node keys."""

    request_type: str
    ranked: list[str]
    truth: list[str]


@dataclass
class MetricRow:
    request_type: str
    method: str
    n_cases: int
    hr_base: float
    hr_plus: float
    ndcg_base: float
    ndcg_plus: float


def _mean(values) -> float:
    values = list(values)
    return sum(values) / len(values)


def evaluate_cases(cases, method: str, extra_k: int = 2) -> list[MetricRow]:
    """Aggregate metrics per request type, plus an ``(all)`` row.

    The base cutoff is each case's |truth|; the second cutoff adds
    ``extra_k``, clamped to the ranking length.
    """
    cases = list(cases)
    if not cases:
        raise DataError("no faulty traces to evaluate")
    per_case = []
    for case in cases:
        k = len(case.truth)
        if k < 1:
            raise DataError(f"trace of type '{case.request_type}' has no "
                            f"ground-truth nodes")
        k_plus = min(k + extra_k, len(case.ranked))
        per_case.append((case.request_type,
                         hr_at_k(case.ranked, case.truth, k),
                         hr_at_k(case.ranked, case.truth, k_plus),
                         ndcg_at_k(case.ranked, case.truth, k),
                         ndcg_at_k(case.ranked, case.truth, k_plus)))

    rows = []
    groups = sorted({rt for rt, *_ in per_case})
    for group in groups + [ALL_TYPES]:
        selected = [p for p in per_case if group == ALL_TYPES or p[0] == group]
        rows.append(MetricRow(
            request_type=group,
            method=method,
            n_cases=len(selected),
            hr_base=_mean(p[1] for p in selected),
            hr_plus=_mean(p[2] for p in selected),
            ndcg_base=_mean(p[3] for p in selected),
            ndcg_plus=_mean(p[4] for p in selected),
        ))
    return rows


_COLUMNS = ("request_type", "method", "n_cases",
            "hr@k", "hr@k+2", "ndcg@k", "ndcg@k+2")


def write_metrics_csv(rows, path) -> None:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(_COLUMNS)
    for r in rows:
        writer.writerow([r.request_type, r.method, r.n_cases,
                         f"{r.hr_base:.4f}", f"{r.hr_plus:.4f}",
                         f"{r.ndcg_base:.4f}", f"{r.ndcg_plus:.4f}"])
    atomic_write_text(path, buf.getvalue())


def format_metrics_table(rows) -> str:
    """Fixed-width text table for terminal output."""
    table = [list(_COLUMNS)]
    for r in rows:
        table.append([r.request_type, r.method, str(r.n_cases),
                      f"{r.hr_base:.4f}", f"{r.hr_plus:.4f}",
                      f"{r.ndcg_base:.4f}", f"{r.ndcg_plus:.4f}"])
    widths = [max(len(row[c]) for row in table) for c in range(len(_COLUMNS))]
    lines = []
    for i, row in enumerate(table):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"

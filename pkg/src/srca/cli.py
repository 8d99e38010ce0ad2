"""Command-line interface.

Subcommands cover the full lifecycle: ``gen`` (synthetic dataset),
``train`` (auto-encoder fitting), ``fit-normal`` (healthy-traffic
profiling), ``localize`` (rank suspects for faulty traces), and
``eval`` (ranking metrics against labels).

Exit codes: 0 success, 1 usage error, 2 bad input data, 3 numeric
failure during training.  Every written artifact gets a sibling
``<name>.manifest.json`` recording the effective configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .autoencoder import TrainConfig
from .errors import EXIT_USAGE, SrcaError, UsageError
from .evaluate import (
    EvalCase,
    evaluate_cases,
    format_metrics_table,
    write_metrics_csv,
)
from .faultgen import (
    SplitCounts,
    default_workload,
    generate_dataset,
    load_workload,
)
from .fileio import atomic_write_text
from .graph import identity_for
from .modelio import load_model, save_model
from .pipeline import fit_model
from .rca import (
    METHODS,
    fit_normal_store,
    localize,
    read_store,
    write_rankings,
    write_store,
)
from .records import (
    group_into_bundles,
    load_split,
    parse_logs,
    parse_metrics,
    parse_spans,
)

DEFAULT_SEED = 1234


def _write_sidecar(out_path, command: str, config: dict) -> None:
    payload = {"command": command, "config": config}
    atomic_write_text(Path(str(out_path) + ".manifest.json"),
                      json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _check_segments(bundle_model, names) -> tuple[str, ...]:
    known = [name for name, _ in bundle_model.layout.segments()]
    for name in names:
        if name not in known:
            raise UsageError(f"unknown attribute segment '{name}' "
                             f"(choose from {', '.join(known)})")
    return tuple(names)


def _parse_fault_mix(raw: str | None) -> dict | None:
    if raw is None:
        return None
    mix = {}
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise UsageError(f"fault mix entry '{part}' is not category=weight")
        key, value = part.split("=", 1)
        try:
            mix[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"bad fault mix weight '{value.strip()}'") from None
    if not mix:
        raise UsageError("empty fault mix")
    return mix


def _parse_methods(raw: str) -> list[str]:
    methods = [m.strip() for m in raw.split(",") if m.strip()]
    if not methods:
        raise UsageError("no localization methods given")
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method '{m}' "
                             f"(choose from {', '.join(METHODS)})")
    return methods


def cmd_gen(args) -> int:
    workload = load_workload(args.config) if args.config else default_workload()
    counts = SplitCounts(train=args.train, fit=args.fit, faulty=args.faulty)
    manifest = generate_dataset(workload, args.out, args.seed, counts,
                                fault_mix=_parse_fault_mix(args.fault_mix))
    total = sum(manifest["splits"].values())
    print(f"generated {total} traces under {args.out} (seed {args.seed})")
    return 0


def cmd_train(args) -> int:
    bundles = load_split(Path(args.dataset) / "normal" / "train")
    cfg = TrainConfig(d_hidden=args.hidden, lr=args.lr, epochs=args.epochs,
                      batch_size=args.batch_size, seed=args.seed)

    def log(epoch: int, loss: float) -> None:
        print(f"epoch {epoch + 1:3d}/{cfg.epochs}  loss {loss:.6f}")

    bundle_model, history = fit_model(bundles, cfg, log_fn=log)
    save_model(args.out, bundle_model)
    _write_sidecar(args.out, "train", {
        "dataset": str(args.dataset), "seed": cfg.seed, "epochs": cfg.epochs,
        "batch_size": cfg.batch_size, "lr": cfg.lr, "hidden": cfg.d_hidden,
        "n_traces": len(bundles), "final_loss": history[-1],
    })
    print(f"model written to {args.out} (final loss {history[-1]:.6f})")
    return 0


def cmd_fit_normal(args) -> int:
    bundle_model = load_model(args.model)
    drop = _check_segments(bundle_model, args.drop_segments)
    bundles = load_split(Path(args.dataset) / "normal" / "fit")
    store = fit_normal_store(bundle_model, bundles, drop)
    write_store(store, args.out)
    _write_sidecar(args.out, "fit-normal", {
        "dataset": str(args.dataset), "model": str(args.model),
        "n_traces": len(bundles), "drop_segments": list(drop),
        "request_types": store.request_types(),
    })
    print(f"normal patterns for {len(store.request_types())} request types "
          f"written to {args.out}")
    return 0


def _load_single_trace(prefix: str):
    text = str(prefix)
    if text.endswith(".spans.jsonl"):
        text = text[:-len(".spans.jsonl")]
    spans_path = Path(text + ".spans.jsonl")
    logs_path = Path(text + ".logs.jsonl")
    metrics_path = Path(text + ".metrics.jsonl")
    spans = parse_spans(spans_path)
    logs = parse_logs(logs_path) if logs_path.exists() else []
    metrics = parse_metrics(metrics_path) if metrics_path.exists() else []
    bundles = group_into_bundles(spans, logs, metrics)
    if len(bundles) != 1:
        raise UsageError(f"expected one trace in {spans_path}, "
                         f"found {len(bundles)}")
    return bundles[0]


def cmd_localize(args) -> int:
    if (args.trace is None) == (args.dataset is None):
        raise UsageError("give exactly one of --dataset or --trace")
    methods = _parse_methods(args.methods)
    bundle_model = load_model(args.model)
    store = read_store(args.store) if args.store else None
    if "zscore" in methods and store is None:
        raise UsageError("the zscore method needs --store")

    if args.trace is not None:
        bundles = [_load_single_trace(args.trace)]
    else:
        bundles = load_split(Path(args.dataset) / "faulty")

    drop = _check_segments(bundle_model, args.drop_segments)
    locs = [localize(bundle_model, store, bundle, method, drop)
            for bundle in bundles for method in methods]
    if args.out:
        write_rankings(locs, args.out)
        _write_sidecar(args.out, "localize", {
            "model": str(args.model), "store": str(args.store),
            "methods": methods, "n_traces": len(bundles),
            "drop_segments": list(drop),
        })
        print(f"{len(locs)} rankings written to {args.out}")
    else:
        for loc in locs:
            top = loc.ranking[0]
            z = "" if top.z is None else f"  z={top.z:.2f}"
            print(f"{loc.trace_id}  [{loc.method}]  top suspect: "
                  f"{top.identity.key()}  score={top.score:.4f}{z}")
    return 0


def cmd_eval(args) -> int:
    methods = _parse_methods(args.methods)
    bundle_model = load_model(args.model)
    store = read_store(args.store) if args.store else None
    if "zscore" in methods and store is None:
        raise UsageError("the zscore method needs --store")
    faulty_dir = Path(args.dataset) / "faulty"
    bundles = load_split(faulty_dir, labels_path=faulty_dir / "labels.jsonl")
    drop = _check_segments(bundle_model, args.drop_segments)

    rows = []
    timings = []
    for method in methods:
        cases = []
        start = time.perf_counter()
        for bundle in bundles:
            loc = localize(bundle_model, store, bundle, method, drop)
            truth = [identity_for(kind, name).key()
                     for kind, name in bundle.ground_truth]
            cases.append(EvalCase(loc.request_type, loc.ranked_keys(), truth))
        elapsed_ms = (time.perf_counter() - start) * 1000.0 / len(bundles)
        timings.append((method, elapsed_ms))
        rows.extend(evaluate_cases(cases, method))

    print(format_metrics_table(rows), end="")
    for method, ms in timings:
        print(f"mean localization time [{method}]: {ms:.2f} ms/trace")
    if args.out:
        write_metrics_csv(rows, args.out)
        _write_sidecar(args.out, "eval", {
            "dataset": str(args.dataset), "model": str(args.model),
            "store": str(args.store), "methods": methods,
            "n_traces": len(bundles), "drop_segments": list(drop),
        })
        print(f"metrics written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srca",
        description="Root cause analysis for serverless request traces.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic labeled dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--config", help="workload definition TOML")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--train", type=int, default=500,
                   help="healthy traces for model training")
    p.add_argument("--fit", type=int, default=500,
                   help="healthy traces for pattern fitting")
    p.add_argument("--faulty", type=int, default=400)
    p.add_argument("--fault-mix", metavar="CAT=W,...",
                   help="category weights for the faulty split "
                        "(default: uniform over all categories)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the reconstruction model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=0.004)
    p.add_argument("--hidden", type=int, default=32)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("fit-normal",
                       help="profile healthy traffic score patterns")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="pattern store file to write")
    p.add_argument("--drop-segment", action="append", default=[],
                   dest="drop_segments", metavar="NAME",
                   help="leave this attribute segment out of the scores "
                        "(repeatable; use the same flags when localizing)")
    p.set_defaults(func=cmd_fit_normal)

    p = sub.add_parser("localize", help="rank suspect nodes per trace")
    p.add_argument("--dataset", help="dataset directory (uses its faulty split)")
    p.add_argument("--trace", help="path prefix of one trace's record files")
    p.add_argument("--model", required=True)
    p.add_argument("--store", help="pattern store (needed for zscore)")
    p.add_argument("--methods", default="zscore",
                   help="comma-separated: zscore, direct")
    p.add_argument("--drop-segment", action="append", default=[],
                   dest="drop_segments", metavar="NAME",
                   help="leave this attribute segment out of the scores "
                        "(repeatable; fit the store with the same flags)")
    p.add_argument("--out", help="rankings JSONL to write (default: print)")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("eval", help="score localization against labels")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--store", help="pattern store (needed for zscore)")
    p.add_argument("--methods", default="zscore,direct")
    p.add_argument("--drop-segment", action="append", default=[],
                   dest="drop_segments", metavar="NAME",
                   help="leave this attribute segment out of the scores "
                        "(repeatable; fit the store with the same flags)")
    p.add_argument("--out", help="metrics CSV to write")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except SrcaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

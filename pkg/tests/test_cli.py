"""Command-line driver: end-to-end pipeline and error reporting."""

import json
from dataclasses import dataclass
from pathlib import Path

import pytest

from srca.cli import main
from srca.evaluate import ALL_TYPES

_TINY_TOML = """
[platform_ms]
deployment = 50.0
replicaset = 50.0
pod = 50.0

[[request_type]]
name = "ping"
entry = "pong"

[request_type.params]
"http.host" = "svc"

[[request_type.function]]
name = "pong"
base_latency_ms = 10.0
cpu_fraction = 0.1
memory_bytes = 1e6
"""


@dataclass
class Workspace:
    dataset: Path
    model: Path
    store: Path
    manifest: dict


@pytest.fixture(scope="module")
def ws(tmp_path_factory) -> Workspace:
    """One tiny gen/train/fit-normal run shared by the command tests."""
    root = tmp_path_factory.mktemp("cli")
    dataset = root / "ds"
    model = root / "model.srca"
    store = root / "store.tsv"
    assert main(["gen", "--out", str(dataset), "--seed", "7",
                 "--train", "8", "--fit", "8", "--faulty", "8"]) == 0
    assert main(["train", "--dataset", str(dataset), "--out", str(model),
                 "--epochs", "2", "--seed", "7"]) == 0
    assert main(["fit-normal", "--dataset", str(dataset),
                 "--model", str(model), "--out", str(store)]) == 0
    manifest = json.loads((dataset / "manifest.json").read_text())
    return Workspace(dataset, model, store, manifest)


def test_gen_writes_dataset(ws, capsys):
    assert (ws.dataset / "normal" / "train").is_dir()
    assert (ws.dataset / "normal" / "fit").is_dir()
    assert (ws.dataset / "faulty" / "labels.jsonl").is_file()
    assert ws.manifest["splits"] == {"normal/train": 8, "normal/fit": 8,
                                     "faulty": 8}


def test_train_writes_model_and_sidecar(ws):
    assert ws.model.is_file()
    sidecar = json.loads(
        (ws.model.parent / (ws.model.name + ".manifest.json")).read_text())
    assert sidecar["command"] == "train"
    assert sidecar["config"]["epochs"] == 2
    assert sidecar["config"]["n_traces"] == 8
    assert sidecar["config"]["final_loss"] > 0


def test_fit_normal_writes_store_and_sidecar(ws):
    assert ws.store.read_text().startswith("# normal-patterns v1")
    sidecar = json.loads(
        (ws.store.parent / (ws.store.name + ".manifest.json")).read_text())
    assert sidecar["config"]["request_types"] == [
        "http.host=shop.local&http.target=/checkout",
        "http.host=shop.local&http.target=/report",
    ]
    assert sidecar["config"]["drop_segments"] == []


def test_localize_dataset_to_file(ws, tmp_path):
    out = tmp_path / "ranks.jsonl"
    code = main(["localize", "--dataset", str(ws.dataset),
                 "--model", str(ws.model), "--store", str(ws.store),
                 "--out", str(out)])
    assert code == 0
    lines = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(lines) == 8
    assert all(entry["method"] == "zscore" for entry in lines)
    assert all(entry["ranking"] for entry in lines)
    sidecar = json.loads(
        (tmp_path / "ranks.jsonl.manifest.json").read_text())
    assert sidecar["config"]["methods"] == ["zscore"]


def test_localize_single_trace_prints(ws, capsys):
    trace_id = ws.manifest["faults"][0]["trace_id"]
    prefix = ws.dataset / "faulty" / trace_id
    code = main(["localize", "--trace", str(prefix), "--model", str(ws.model),
                 "--store", str(ws.store)])
    assert code == 0
    out = capsys.readouterr().out
    assert f"{trace_id}  [zscore]  top suspect:" in out

    # the .spans.jsonl suffix is accepted too
    code = main(["localize", "--trace", str(prefix) + ".spans.jsonl",
                 "--model", str(ws.model), "--store", str(ws.store)])
    assert code == 0


def test_localize_both_methods(ws, tmp_path):
    out = tmp_path / "ranks.jsonl"
    assert main(["localize", "--dataset", str(ws.dataset),
                 "--model", str(ws.model), "--store", str(ws.store),
                 "--methods", "zscore,direct", "--out", str(out)]) == 0
    methods = [json.loads(line)["method"]
               for line in out.read_text().splitlines()]
    assert methods.count("zscore") == 8 and methods.count("direct") == 8


def test_eval_writes_metrics(ws, tmp_path, capsys):
    out = tmp_path / "metrics.csv"
    code = main(["eval", "--dataset", str(ws.dataset), "--model", str(ws.model),
                 "--store", str(ws.store), "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "hr@k" in printed
    assert "mean localization time [zscore]" in printed
    assert "mean localization time [direct]" in printed
    rows = out.read_text().splitlines()
    assert rows[0] == "request_type,method,n_cases,hr@k,hr@k+2,ndcg@k,ndcg@k+2"
    assert any(line.startswith(ALL_TYPES) for line in rows)
    assert (tmp_path / "metrics.csv.manifest.json").is_file()


def test_eval_with_drop_segment(ws, tmp_path):
    out = tmp_path / "metrics.csv"
    code = main(["eval", "--dataset", str(ws.dataset), "--model", str(ws.model),
                 "--store", str(ws.store), "--methods", "direct",
                 "--drop-segment", "cpu", "--drop-segment", "memory",
                 "--out", str(out)])
    assert code == 0
    sidecar = json.loads((tmp_path / "metrics.csv.manifest.json").read_text())
    assert sidecar["config"]["drop_segments"] == ["cpu", "memory"]


def test_gen_with_config_and_mix(tmp_path, capsys):
    config = tmp_path / "workload.toml"
    config.write_text(_TINY_TOML)
    out = tmp_path / "ds"
    code = main(["gen", "--out", str(out), "--config", str(config),
                 "--seed", "3", "--train", "2", "--fit", "1", "--faulty", "4",
                 "--fault-mix", "code_defect=3, pod_failure=1"])
    assert code == 0
    assert "generated 7 traces" in capsys.readouterr().out
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["fault_mix"] == {"code_defect": 3.0, "pod_failure": 1.0}
    assert [rt["name"] for rt in manifest["workload"]["request_type"]] == ["ping"]
    assert {f["category"] for f in manifest["faults"]} == \
        {"code_defect", "pod_failure"}


# -- error paths ------------------------------------------------------------

def _err(capsys) -> str:
    return capsys.readouterr().err


def test_localize_needs_exactly_one_source(ws, capsys):
    args = ["--model", str(ws.model), "--store", str(ws.store)]
    assert main(["localize", "--dataset", str(ws.dataset),
                 "--trace", "x"] + args) == 1
    assert "exactly one" in _err(capsys)
    assert main(["localize"] + args) == 1
    assert "exactly one" in _err(capsys)


def test_localize_zscore_needs_store(ws, capsys):
    assert main(["localize", "--dataset", str(ws.dataset),
                 "--model", str(ws.model)]) == 1
    assert "needs --store" in _err(capsys)


def test_unknown_method_rejected(ws, capsys):
    assert main(["eval", "--dataset", str(ws.dataset), "--model", str(ws.model),
                 "--store", str(ws.store), "--methods", "psychic"]) == 1
    assert "unknown method" in _err(capsys)
    assert main(["eval", "--dataset", str(ws.dataset), "--model", str(ws.model),
                 "--store", str(ws.store), "--methods", " , "]) == 1
    assert "no localization methods" in _err(capsys)


def test_unknown_segment_rejected(ws, capsys):
    assert main(["fit-normal", "--dataset", str(ws.dataset),
                 "--model", str(ws.model), "--out", "/tmp/unused.tsv",
                 "--drop-segment", "disk"]) == 1
    assert "unknown attribute segment 'disk'" in _err(capsys)


def test_missing_dataset_is_data_error(ws, tmp_path, capsys):
    assert main(["train", "--dataset", str(tmp_path / "nope"),
                 "--out", str(tmp_path / "m")]) == 2
    assert "error:" in _err(capsys)


def test_corrupt_store_is_data_error(ws, tmp_path, capsys):
    bad = tmp_path / "store.tsv"
    bad.write_text("scrambled\n")
    assert main(["localize", "--dataset", str(ws.dataset),
                 "--model", str(ws.model), "--store", str(bad)]) == 2
    assert "bad header" in _err(capsys)


def test_bad_fault_mix_rejected(tmp_path, capsys):
    base = ["gen", "--out", str(tmp_path / "ds")]
    assert main(base + ["--fault-mix", "code_defect"]) == 1
    assert "not category=weight" in _err(capsys)
    assert main(base + ["--fault-mix", "code_defect=lots"]) == 1
    assert "bad fault mix weight" in _err(capsys)
    assert main(base + ["--fault-mix", " , "]) == 1
    assert "empty fault mix" in _err(capsys)


def test_gen_missing_config_is_data_error(tmp_path, capsys):
    assert main(["gen", "--out", str(tmp_path / "ds"),
                 "--config", str(tmp_path / "absent.toml")]) == 2
    assert "cannot read workload" in _err(capsys)


def test_argparse_failures_map_to_usage_exit(capsys):
    assert main(["localize", "--bogus-flag"]) == 1
    assert main(["--help"]) == 0

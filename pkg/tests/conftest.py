import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from srca.autoencoder import TrainConfig
from srca.faultgen import SplitCounts, default_workload, generate_dataset
from srca.pipeline import fit_model
from srca.rca import NormalPatternStore, fit_normal_store
from srca.records import load_split

MASTER_SEED = 1234


def random_graph(rng: np.random.Generator, n_nodes: int, n_edges: int,
                 d: int) -> tuple[np.ndarray, np.ndarray]:
    """Random attributes and edge list for structural tests."""
    x = rng.standard_normal((n_nodes, d))
    edges = rng.integers(0, n_nodes, size=(n_edges, 2))
    return x, edges


@dataclass
class FullAssets:
    """Default dataset plus the model and pattern store fitted on it."""

    dataset_dir: Path
    manifest: dict
    train_bundles: list
    fit_bundles: list
    faulty_bundles: list
    model_bundle: object
    history: list
    store: NormalPatternStore


@pytest.fixture(scope="session")
def full_assets(tmp_path_factory) -> FullAssets:
    out = tmp_path_factory.mktemp("dataset")
    manifest = generate_dataset(default_workload(), out, MASTER_SEED,
                                SplitCounts(train=500, fit=500, faulty=400))
    train_bundles = load_split(out / "normal" / "train")
    fit_bundles = load_split(out / "normal" / "fit")
    faulty_bundles = load_split(out / "faulty",
                                labels_path=out / "faulty" / "labels.jsonl")
    model_bundle, history = fit_model(train_bundles, TrainConfig(seed=MASTER_SEED))
    store = fit_normal_store(model_bundle, fit_bundles)
    return FullAssets(out, manifest, train_bundles, fit_bundles, faulty_bundles,
                      model_bundle, history, store)


@pytest.fixture(scope="session")
def tiny_assets(tmp_path_factory) -> FullAssets:
    """Small, quickly trained end-to-end assets for plumbing tests."""
    out = tmp_path_factory.mktemp("tiny")
    manifest = generate_dataset(default_workload(), out, 99,
                                SplitCounts(train=16, fit=12, faulty=16))
    train_bundles = load_split(out / "normal" / "train")
    fit_bundles = load_split(out / "normal" / "fit")
    faulty_bundles = load_split(out / "faulty",
                                labels_path=out / "faulty" / "labels.jsonl")
    model_bundle, history = fit_model(train_bundles,
                                      TrainConfig(epochs=6, seed=99))
    store = fit_normal_store(model_bundle, fit_bundles)
    return FullAssets(out, manifest, train_bundles, fit_bundles, faulty_bundles,
                      model_bundle, history, store)

"""Score profiling, z-score ranking, and ranking serialization."""

import json
import math

import numpy as np
import pytest

from oracles import two_pass_mean_std
from srca.autoencoder import reconstruction
from srca.errors import DataError
from srca.gat import build_topology
from srca.graph import NodeIdentity, build_graph
from srca.rca import (
    STD_FLOOR,
    Localization,
    NormalPattern,
    NormalPatternStore,
    RankedNode,
    fit_normal_store,
    localize,
    localization_to_dict,
    read_store,
    score_trace,
    write_rankings,
    write_store,
)


# -- pattern store ----------------------------------------------------------

def test_store_zscore_math():
    store = NormalPatternStore()
    store.add("rt", "node", NormalPattern(10, 2.0, 0.5))
    assert store.zscore("rt", "node", 3.0) == pytest.approx(2.0)
    assert store.zscore("rt", "node", 1.0) == pytest.approx(-2.0)


def test_store_unseen_identity_is_infinitely_suspicious():
    store = NormalPatternStore()
    store.add("rt", "node", NormalPattern(10, 2.0, 0.5))
    assert store.zscore("rt", "other", 0.1) == math.inf
    assert store.pattern("rt", "other") is None
    assert not store.has_type("unknown-type")


def test_store_constant_scores_use_std_floor():
    store = NormalPatternStore()
    store.add("rt", "node", NormalPattern(10, 1.0, 0.0))
    assert store.zscore("rt", "node", 1.0 + STD_FLOOR) == pytest.approx(1.0)


def test_store_iteration_sorted():
    store = NormalPatternStore()
    store.add("b", "n2", NormalPattern(1, 0.0, 1.0))
    store.add("a", "n1", NormalPattern(1, 0.0, 1.0))
    store.add("a", "n0", NormalPattern(1, 0.0, 1.0))
    assert [(rt, key) for rt, key, _ in store.items()] == \
        [("a", "n0"), ("a", "n1"), ("b", "n2")]
    assert store.request_types() == ["a", "b"]


# -- profiling --------------------------------------------------------------

def test_fit_normal_store_pools_per_identity(tiny_assets):
    mb = tiny_assets.model_bundle
    expected: dict = {}
    for bundle in tiny_assets.fit_bundles:
        graph, scores = score_trace(mb, bundle)
        for ident, s in zip(graph.nodes, scores):
            expected.setdefault((graph.request_type, ident.key()),
                                []).append(float(s))
    store = fit_normal_store(mb, tiny_assets.fit_bundles)
    for (rt, key), values in expected.items():
        pattern = store.pattern(rt, key)
        mean, std = two_pass_mean_std(values)
        assert pattern.count == len(values)
        assert pattern.mean == pytest.approx(mean, rel=1e-12)
        assert pattern.std == pytest.approx(std, rel=1e-9)


def test_fit_normal_store_empty_rejected(tiny_assets):
    with pytest.raises(DataError, match="no healthy traces"):
        fit_normal_store(tiny_assets.model_bundle, [])


def test_score_trace_never_grows_templates(tiny_assets):
    mb = tiny_assets.model_bundle
    sizes = {k: len(v.templates) for k, v in mb.stores.items()}
    for bundle in tiny_assets.faulty_bundles:
        score_trace(mb, bundle)
    assert {k: len(v.templates) for k, v in mb.stores.items()} == sizes


# -- localization -----------------------------------------------------------

def test_localize_zscore_ranks_by_deviation(tiny_assets):
    mb = tiny_assets.model_bundle
    bundle = tiny_assets.faulty_bundles[0]
    loc = localize(mb, tiny_assets.store, bundle)
    assert loc.method == "zscore"
    zs = [r.z for r in loc.ranking]
    assert zs == sorted(zs, reverse=True)
    graph, scores = score_trace(mb, bundle)
    by_key = dict(zip((n.key() for n in graph.nodes), scores))
    for r in loc.ranking:
        assert r.score == pytest.approx(by_key[r.identity.key()])
        assert r.z == pytest.approx(tiny_assets.store.zscore(
            loc.request_type, r.identity.key(), r.score))


def test_localize_direct_ranks_by_raw_score(tiny_assets):
    loc = localize(tiny_assets.model_bundle, None,
                   tiny_assets.faulty_bundles[0], method="direct")
    scores = [r.score for r in loc.ranking]
    assert scores == sorted(scores, reverse=True)
    assert all(r.z is None for r in loc.ranking)


def test_localize_validates_method_and_store(tiny_assets):
    bundle = tiny_assets.faulty_bundles[0]
    with pytest.raises(ValueError, match="unknown method"):
        localize(tiny_assets.model_bundle, tiny_assets.store, bundle,
                 method="oracle")
    with pytest.raises(ValueError, match="needs a fitted"):
        localize(tiny_assets.model_bundle, None, bundle, method="zscore")


def test_localize_unseen_request_type_rejected(tiny_assets):
    empty = NormalPatternStore()
    empty.add("some-other-type", "n", NormalPattern(1, 0.0, 1.0))
    with pytest.raises(DataError, match="no healthy profile"):
        localize(tiny_assets.model_bundle, empty, tiny_assets.faulty_bundles[0])


def test_unseen_identity_ranks_first(tiny_assets):
    bundle = tiny_assets.faulty_bundles[0]
    graph, _ = score_trace(tiny_assets.model_bundle, bundle)
    rt = graph.request_type
    victim = graph.nodes[3].key()
    gutted = NormalPatternStore()
    for rt_, key, pattern in tiny_assets.store.items():
        if not (rt_ == rt and key == victim):
            gutted.add(rt_, key, pattern)
    loc = localize(tiny_assets.model_bundle, gutted, bundle)
    assert loc.ranking[0].identity.key() == victim
    assert loc.ranking[0].z == math.inf


def test_tie_break_is_deterministic():
    graph_nodes = (NodeIdentity.function("b"), NodeIdentity.function("a"))

    class G:
        trace_id = "t"
        request_type = "rt"
        nodes = graph_nodes

    from srca.rca import _rank
    ranking = _rank(G, np.array([1.0, 1.0]), None)
    assert [r.identity.node_name for r in ranking] == ["a", "b"]


# -- segment dropping -------------------------------------------------------

def test_drop_segments_matches_masked_residual(tiny_assets):
    mb = tiny_assets.model_bundle
    bundle = tiny_assets.faulty_bundles[0]
    graph, dropped = score_trace(mb, bundle, drop_segments=("cpu", "memory"))
    ref = build_graph(bundle, mb.stores, mb.projectors, mb.layout,
                      keys=mb.classification_keys, mine=False)
    topo = build_topology(ref.n_nodes, ref.edges)
    recon = reconstruction(mb.model, ref.x, topo)
    resid = ref.x - recon
    for name in ("cpu", "memory"):
        resid[:, mb.layout.segment_slice(name)] = 0.0
    np.testing.assert_allclose(dropped, np.linalg.norm(resid, axis=1),
                               atol=1e-12)


def test_drop_segments_never_increases_scores(tiny_assets):
    """Masking only removes residual components, so every node's score
    is bounded by its unmasked score."""
    mb = tiny_assets.model_bundle
    bundle = tiny_assets.fit_bundles[0]
    graph, base = score_trace(mb, bundle)
    _, dropped = score_trace(mb, bundle, drop_segments=("cpu", "memory"))
    for ident, s_base, s_drop in zip(graph.nodes, base, dropped):
        assert s_drop <= s_base + 1e-12


def test_drop_segments_unknown_name_raises(tiny_assets):
    with pytest.raises(KeyError, match="disk"):
        score_trace(tiny_assets.model_bundle, tiny_assets.fit_bundles[0],
                    drop_segments=("disk",))


# -- store persistence ------------------------------------------------------

def test_store_roundtrip_exact(tmp_path, tiny_assets):
    path = tmp_path / "store.tsv"
    write_store(tiny_assets.store, path)
    loaded = read_store(path)
    assert list(loaded.items()) == list(tiny_assets.store.items())


def test_store_rejects_bad_files(tmp_path):
    path = tmp_path / "store.tsv"
    path.write_text("not a store\n")
    with pytest.raises(DataError, match="bad header"):
        read_store(path)
    path.write_text("# normal-patterns v1\nheader\nrt\tnode\t3\n")
    with pytest.raises(DataError, match="5 tab-separated"):
        read_store(path)
    path.write_text("# normal-patterns v1\nheader\nrt\tnode\t3\tx\t1.0\n")
    with pytest.raises(DataError, match="bad numeric"):
        read_store(path)
    with pytest.raises(DataError, match="cannot read"):
        read_store(tmp_path / "absent.tsv")


# -- ranking serialization --------------------------------------------------

def test_write_rankings_serializes_infinity(tmp_path):
    loc = Localization("t1", "rt", "zscore", [
        RankedNode(NodeIdentity.function("a"), 1.5, math.inf),
        RankedNode(NodeIdentity.platform("pod", "a"), 1.0, -0.25),
    ])
    path = tmp_path / "ranks.jsonl"
    write_rankings([loc], path)
    text = path.read_text()
    assert "Infinity" in text
    [parsed] = [json.loads(line) for line in text.splitlines()]
    assert parsed["ranking"][0]["z"] == math.inf
    assert parsed["ranking"][1]["node"] == "platform/pod/a"


def test_localization_to_dict_omits_z_for_direct():
    loc = Localization("t1", "rt", "direct", [
        RankedNode(NodeIdentity.function("a"), 2.0, None),
    ])
    entry = localization_to_dict(loc)
    assert "z" not in entry["ranking"][0]
    assert entry["method"] == "direct"

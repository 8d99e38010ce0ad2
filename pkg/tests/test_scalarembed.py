"""Scalar projection, standardization, and attribute row fusion."""

import numpy as np
import pytest

from oracles import two_pass_mean_std
from srca.errors import DataError
from srca.scalarembed import (
    AttributeLayout,
    LATENCY_CHANNEL,
    ScalarProjector,
    embed_latency,
    fit_standardizer,
    fuse_attributes,
    init_projector,
    project_scalar,
    softmax,
)


# -- projector initialization -----------------------------------------------

def test_init_projector_deterministic_per_channel_and_seed():
    a = init_projector("cpu", 16, 32, 7)
    b = init_projector("cpu", 16, 32, 7)
    np.testing.assert_array_equal(a.weight, b.weight)
    np.testing.assert_array_equal(a.embed_rows, b.embed_rows)
    c = init_projector("memory", 16, 32, 7)
    d = init_projector("cpu", 16, 32, 8)
    assert not np.array_equal(a.weight, c.weight)
    assert not np.array_equal(a.weight, d.weight)


def test_init_projector_rejects_tiny_dims():
    with pytest.raises(ValueError):
        init_projector("cpu", 1, 32, 0)
    with pytest.raises(ValueError):
        init_projector("cpu", 16, 4, 0)


# -- projection math --------------------------------------------------------

def test_project_scalar_matches_manual_computation():
    proj = init_projector("cpu", 8, 16, 3).with_standardizer(2.0, 4.0)
    x = 10.0
    x_std = (x - 2.0) / 4.0
    logits = proj.weight * x_std + proj.bias
    e = np.exp(logits - logits.max())
    s = e / e.sum()
    expected = s @ proj.embed_rows
    np.testing.assert_allclose(project_scalar(x, proj), expected, atol=1e-12)


def test_project_scalar_rejects_non_finite():
    proj = init_projector("cpu", 8, 16, 3)
    for bad in (float("nan"), float("inf")):
        with pytest.raises(DataError, match="non-finite"):
            project_scalar(bad, proj)


def test_standardizer_shifts_output():
    proj = init_projector("cpu", 8, 16, 3)
    raw = project_scalar(1.0, proj)
    shifted = project_scalar(1.0, proj.with_standardizer(1.0, 1.0))
    centered = project_scalar(0.0, proj)
    np.testing.assert_allclose(shifted, centered, atol=1e-12)
    assert not np.allclose(raw, shifted)


def test_softmax_sums_to_one():
    rng = np.random.default_rng(0)
    for _ in range(100):
        s = softmax(rng.normal(size=8) * 10)
        assert s.sum() == pytest.approx(1.0, abs=1e-12)
        assert (s >= 0).all()


def test_embed_latency_converts_microseconds():
    proj = init_projector(LATENCY_CHANNEL, 8, 16, 3).with_standardizer(50.0, 10.0)
    np.testing.assert_array_equal(embed_latency(75_000, proj),
                                  project_scalar(75.0, proj))


def test_fit_standardizer_matches_two_pass_oracle():
    values = [1.5, 2.5, 100.0, -3.0, 0.0, 42.5]
    mean, std = fit_standardizer(values)
    omean, ostd = two_pass_mean_std(values)
    assert mean == pytest.approx(omean, abs=1e-12)
    assert std == pytest.approx(ostd, abs=1e-12)
    assert fit_standardizer([]) == (0.0, 1.0)


def test_constant_channel_stays_finite():
    proj = init_projector("cpu", 8, 16, 3).with_standardizer(
        *fit_standardizer([5.0, 5.0, 5.0]))
    assert np.isfinite(project_scalar(5.0, proj)).all()


# -- attribute layout -------------------------------------------------------

def test_layout_total_dim_and_segment_order():
    lay = AttributeLayout(d_log=32, d_scalar=32)
    assert lay.total_dim == 192
    names = [name for name, _ in lay.segments()]
    assert names == ["audit", "event", "app", "cpu", "memory", LATENCY_CHANNEL]


def test_segment_slices_tile_the_row_exactly():
    lay = AttributeLayout(d_log=16, d_scalar=24, metric_channels=("cpu",))
    offset = 0
    for name, width in lay.segments():
        sl = lay.segment_slice(name)
        assert sl == slice(offset, offset + width)
        offset += width
    assert offset == lay.total_dim
    with pytest.raises(KeyError):
        lay.segment_slice("disk")


def test_layout_roundtrip():
    lay = AttributeLayout(d_log=16, d_scalar=24, metric_channels=("cpu",))
    assert AttributeLayout.from_dict(lay.to_dict()) == lay


# -- fusion -----------------------------------------------------------------

def test_fuse_attributes_places_segments_and_zero_fills():
    lay = AttributeLayout(d_log=8, d_scalar=8)
    audit = np.full(8, 1.0)
    cpu = np.full(8, 2.0)
    lat = np.full(8, 3.0)
    row = fuse_attributes(lay, {"audit": audit, "event": None, "app": None},
                          {"cpu": cpu, "memory": None}, lat)
    assert row.shape == (lay.total_dim,)
    np.testing.assert_array_equal(row[lay.segment_slice("audit")], audit)
    np.testing.assert_array_equal(row[lay.segment_slice("cpu")], cpu)
    np.testing.assert_array_equal(row[lay.segment_slice(LATENCY_CHANNEL)], lat)
    for empty in ("event", "app", "memory"):
        assert not row[lay.segment_slice(empty)].any()


def test_fuse_attributes_rejects_wrong_width():
    lay = AttributeLayout(d_log=8, d_scalar=8)
    with pytest.raises(DataError, match="dimension"):
        fuse_attributes(lay, {"audit": np.zeros(9), "event": None, "app": None},
                        {"cpu": None, "memory": None}, None)


def test_projector_dims_exposed():
    proj = ScalarProjector("x", np.zeros(4), np.zeros(4), np.zeros((4, 16)))
    assert proj.p == 4 and proj.d == 16

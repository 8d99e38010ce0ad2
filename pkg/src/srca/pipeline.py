"""End-to-end model fitting from raw healthy traces.

Fitting order matters: scalar standardizers come from the raw training
values first (embedding standardizes before projecting), then graphs
are built while the log template stores mine, and finally the
auto-encoder trains on the attributed graphs.  The result is a
self-contained :class:`~srca.modelio.ModelBundle`.
"""

from __future__ import annotations

from .autoencoder import TrainConfig, train
from .errors import DataError
from .graph import DEFAULT_CLASSIFICATION_KEYS, build_graph, node_latency_us
from .logembed import TemplateStore
from .modelio import ModelBundle
from .records import LOG_STREAMS, METRIC_CHANNELS
from .scalarembed import (
    AttributeLayout,
    LATENCY_CHANNEL,
    fit_standardizer,
    init_projector,
)

DEFAULT_D_LOG = 32
DEFAULT_D_SCALAR = 32
PROJECTOR_P = 16


def default_layout() -> AttributeLayout:
    return AttributeLayout(d_log=DEFAULT_D_LOG, d_scalar=DEFAULT_D_SCALAR)


def fit_projectors(bundles, layout: AttributeLayout, master_seed: int) -> dict:
    """Frozen projectors for every scalar channel, standardized on the
    training traces' raw values."""
    channel_values: dict[str, list[float]] = {c: [] for c in METRIC_CHANNELS}
    channel_values[LATENCY_CHANNEL] = []
    for bundle in bundles:
        for sample in bundle.metrics:
            channel_values[sample.channel].append(sample.value)
        for total_us in node_latency_us(bundle).values():
            channel_values[LATENCY_CHANNEL].append(total_us / 1000.0)

    projectors = {}
    for channel, values in channel_values.items():
        proj = init_projector(channel, PROJECTOR_P, layout.d_scalar, master_seed)
        projectors[channel] = proj.with_standardizer(*fit_standardizer(values))
    return projectors


def fit_model(bundles, cfg: TrainConfig,
              layout: AttributeLayout | None = None,
              keys=DEFAULT_CLASSIFICATION_KEYS,
              log_fn=None) -> tuple[ModelBundle, list[float]]:
    """Fit preprocessing state and train the auto-encoder on healthy traces.

    ``cfg.seed`` seeds everything: the frozen projectors, the parameter
    init, and the epoch shuffle.  Returns the bundle and the training
    loss history.
    """
    bundles = list(bundles)
    if not bundles:
        raise DataError("no training traces")
    layout = layout if layout is not None else default_layout()
    projectors = fit_projectors(bundles, layout, cfg.seed)
    stores = {stream: TemplateStore() for stream in LOG_STREAMS}
    graphs = [build_graph(b, stores, projectors, layout, keys=keys, mine=True)
              for b in bundles]
    model, history = train(graphs, cfg, log_fn=log_fn)
    bundle_model = ModelBundle(
        model=model,
        layout=layout,
        stores=stores,
        projectors=projectors,
        classification_keys=tuple(keys),
        extra={"seed": cfg.seed, "n_training_traces": len(bundles),
               "epochs": cfg.epochs, "final_loss": history[-1]},
    )
    return bundle_model, history

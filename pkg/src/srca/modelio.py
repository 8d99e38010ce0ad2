"""Model bundle serialization.

A trained model is useless without the preprocessing state that built
its inputs, so one file carries all of it: the layer weights, the
attribute layout, the mined log template stores, and the scalar
projectors with their standardizers.

Layout: magic ``SRCA``, little-endian u32 format version, u64 metadata
length, a JSON metadata block, then the raw little-endian float64 array
data in the order the metadata lists.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autoencoder import GatAutoEncoder
from .errors import DataError
from .fileio import atomic_write_bytes
from .gat import GatLayerParams
from .logembed import TemplateStore
from .scalarembed import AttributeLayout, ScalarProjector

MAGIC = b"SRCA"
FORMAT_VERSION = 1


@dataclass
class ModelBundle:
    """Everything needed to score a fresh trace."""

    model: GatAutoEncoder
    layout: AttributeLayout
    stores: dict[str, TemplateStore]
    projectors: dict[str, ScalarProjector]
    classification_keys: tuple[str, ...]
    extra: dict = field(default_factory=dict)


def save_model(path, bundle: ModelBundle) -> None:
    arrays: list[dict] = []
    blobs: list[bytes] = []

    def add(name: str, arr: np.ndarray) -> None:
        arr = np.ascontiguousarray(arr, dtype="<f8")
        arrays.append({"name": name, "shape": list(arr.shape)})
        blobs.append(arr.tobytes())

    for i, layer in enumerate(bundle.model.layers):
        add(f"layer{i}.w", layer.w)
        add(f"layer{i}.a", layer.a)
    for channel in sorted(bundle.projectors):
        proj = bundle.projectors[channel]
        add(f"proj.{channel}.weight", proj.weight)
        add(f"proj.{channel}.bias", proj.bias)
        add(f"proj.{channel}.embed_rows", proj.embed_rows)

    meta = {
        "kind": "model-bundle",
        "n_layers": len(bundle.model.layers),
        "d_in": bundle.model.d_in,
        "d_hidden": bundle.model.d_hidden,
        "layout": bundle.layout.to_dict(),
        "stores": {k: v.to_dict() for k, v in sorted(bundle.stores.items())},
        "projectors": {
            k: {"mean": p.mean, "std": p.std}
            for k, p in sorted(bundle.projectors.items())
        },
        "classification_keys": list(bundle.classification_keys),
        "extra": bundle.extra,
        "arrays": arrays,
    }
    meta_bytes = json.dumps(meta, sort_keys=True,
                            separators=(",", ":")).encode("utf-8")
    payload = b"".join([MAGIC, struct.pack("<I", FORMAT_VERSION),
                        struct.pack("<Q", len(meta_bytes)), meta_bytes, *blobs])
    atomic_write_bytes(path, payload)


def load_model(path) -> ModelBundle:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read model file: {exc}", path=str(path)) from exc

    if len(raw) < 16 or raw[:4] != MAGIC:
        raise DataError("not a model file (bad magic)", path=str(path))
    version = struct.unpack_from("<I", raw, 4)[0]
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {version} "
                        f"(expected {FORMAT_VERSION})", path=str(path))
    meta_len = struct.unpack_from("<Q", raw, 8)[0]
    meta_end = 16 + meta_len
    if meta_end > len(raw):
        raise DataError("truncated model file (metadata)", path=str(path))
    try:
        meta = json.loads(raw[16:meta_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"corrupt model metadata: {exc}", path=str(path)) from exc

    offset = meta_end
    data: dict[str, np.ndarray] = {}
    for entry in meta["arrays"]:
        shape = tuple(entry["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * 8
        if offset + nbytes > len(raw):
            raise DataError(f"truncated model file (array {entry['name']})",
                            path=str(path))
        arr = np.frombuffer(raw, dtype="<f8", count=nbytes // 8, offset=offset)
        data[entry["name"]] = arr.reshape(shape).copy()
        offset += nbytes
    if offset != len(raw):
        raise DataError("trailing bytes after model arrays", path=str(path))

    layers = []
    for i in range(meta["n_layers"]):
        try:
            layers.append(GatLayerParams(data[f"layer{i}.w"], data[f"layer{i}.a"]))
        except KeyError as exc:
            raise DataError(f"model missing array for layer {i}",
                            path=str(path)) from exc
    model = GatAutoEncoder(layers, meta["d_in"], meta["d_hidden"])
    layout = AttributeLayout.from_dict(meta["layout"])
    stores = {k: TemplateStore.from_dict(v) for k, v in meta["stores"].items()}
    projectors = {}
    for channel, stats in meta["projectors"].items():
        projectors[channel] = ScalarProjector(
            channel_id=channel,
            weight=data[f"proj.{channel}.weight"],
            bias=data[f"proj.{channel}.bias"],
            embed_rows=data[f"proj.{channel}.embed_rows"],
            mean=stats["mean"],
            std=stats["std"],
        )
    return ModelBundle(model, layout, stores, projectors,
                       tuple(meta["classification_keys"]), meta.get("extra", {}))

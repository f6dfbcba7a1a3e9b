"""Self-describing model checkpoint files.

Byte layout (all integers little-endian):

    offset 0   magic b"BOCRNET1" (8 bytes)
    offset 8   uint32 header length H
    offset 12  UTF-8 JSON header (H bytes)
    offset 12+H  parameter payload: float64 little-endian arrays,
                 concatenated in the order listed under header["params"]

The header carries: format_version, architecture, pooling, input_shape,
num_classes, labels (ordered class names), layers (LayerSpec fields),
params (layer index, name, shape per array, in payload order), meta
(free-form dict), and model_id = sha256 hex digest of the payload bytes.
The layout is stable: readers must reject unknown format_versions.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import LayerSpec, ModelGraph

MAGIC = b"BOCRNET1"
FORMAT_VERSION = 1
_MAX_HEADER = 1 << 24


class BadCheckpoint(ValueError):
    """File is not a readable checkpoint of this format."""


@dataclass(frozen=True)
class CheckpointBundle:
    model: ModelGraph
    labels: tuple[str, ...]
    architecture: str | None
    pooling: str | None
    meta: dict
    model_id: str


def _spec_to_dict(spec: LayerSpec) -> dict:
    d = {"kind": spec.kind}
    for name in ("out_channels", "kernel", "units", "activation"):
        if getattr(spec, name) is not None:
            d[name] = getattr(spec, name)
    if spec.stride != 1:
        d["stride"] = spec.stride
    if spec.padding != 0:
        d["padding"] = spec.padding
    return d


def save_checkpoint(path, model: ModelGraph, labels, architecture: str | None = None,
                    pooling: str | None = None, meta: dict | None = None) -> str:
    """Write the model; returns its model_id (sha256 of the payload)."""
    labels = tuple(labels)
    if len(labels) != model.num_classes:
        raise BadCheckpoint(
            f"{len(labels)} labels for a {model.num_classes}-class model"
        )
    chunks = []
    param_index = []
    for i, layer in enumerate(model.parameters):
        for name in sorted(layer):
            arr = np.ascontiguousarray(layer[name], dtype="<f8")
            chunks.append(arr.tobytes())
            param_index.append({"layer": i, "name": name, "shape": list(arr.shape)})
    payload = b"".join(chunks)
    header = {
        "format_version": FORMAT_VERSION,
        "architecture": architecture,
        "pooling": pooling,
        "input_shape": list(model.input_shape),
        "num_classes": model.num_classes,
        "labels": list(labels),
        "layers": [_spec_to_dict(s) for s in model.layers],
        "params": param_index,
        "meta": meta or {},
        "model_id": hashlib.sha256(payload).hexdigest(),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(len(blob).to_bytes(4, "little"))
        f.write(blob)
        f.write(payload)
    return header["model_id"]


def load_checkpoint(path) -> CheckpointBundle:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 4 or not data.startswith(MAGIC):
        raise BadCheckpoint("missing checkpoint magic")
    hlen = int.from_bytes(data[8:12], "little")
    if hlen <= 0 or hlen > _MAX_HEADER or len(data) < 12 + hlen:
        raise BadCheckpoint("header length out of bounds")
    try:
        header = json.loads(data[12 : 12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise BadCheckpoint(f"undecodable header: {e}") from e
    if header.get("format_version") != FORMAT_VERSION:
        raise BadCheckpoint(f"unsupported format_version {header.get('format_version')!r}")

    payload = data[12 + hlen :]
    if hashlib.sha256(payload).hexdigest() != header.get("model_id"):
        raise BadCheckpoint("payload does not match model_id digest")

    try:
        layers = tuple(LayerSpec(**d) for d in header["layers"])
        params: list[dict[str, np.ndarray]] = [{} for _ in layers]
        offset = 0
        for entry in header["params"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            end = offset + 8 * count
            if end > len(payload):
                raise BadCheckpoint("payload truncated")
            arr = np.frombuffer(payload[offset:end], dtype="<f8").reshape(shape)
            params[entry["layer"]][entry["name"]] = arr.astype(np.float64).copy()
            offset = end
        if offset != len(payload):
            raise BadCheckpoint("trailing bytes after parameter payload")
        model = ModelGraph(
            layers=layers,
            parameters=params,
            input_shape=tuple(header["input_shape"]),
            num_classes=int(header["num_classes"]),
        )
    except BadCheckpoint:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise BadCheckpoint(f"malformed checkpoint contents: {e}") from e

    labels = tuple(header["labels"])
    if len(labels) != model.num_classes:
        raise BadCheckpoint("label count does not match num_classes")
    return CheckpointBundle(
        model=model,
        labels=labels,
        architecture=header.get("architecture"),
        pooling=header.get("pooling"),
        meta=header.get("meta") or {},
        model_id=header["model_id"],
    )

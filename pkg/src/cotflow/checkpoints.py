"""Checkpoint persistence: JSON documents with base64 weight blocks.

Weights are stored as little-endian IEEE-754 float64 bytes, row-major, so
a save/load round trip is bitwise exact while the metadata stays readable.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass

import numpy as np

from .bridge import TimeGrid
from .encoder import CotEncoder
from .errors import DataError, VersionError
from .neural_ot import NeuralOTModel
from .nn import MlpParams

FORMAT_VERSION = 1
KINDS = ("neural_ot", "cot_encoder")


@dataclass(frozen=True)
class Checkpoint:
    kind: str
    metadata: dict
    blocks: dict  # name -> float64 array

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown checkpoint kind {self.kind!r}")


def _encode_block(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return {"shape": list(arr.shape), "data": base64.b64encode(data).decode("ascii")}


def _decode_block(name: str, entry: dict) -> np.ndarray:
    if not isinstance(entry, dict) or "shape" not in entry or "data" not in entry:
        raise DataError(f"checkpoint block {name!r} is missing shape or data")
    shape = tuple(int(s) for s in entry["shape"])
    try:
        raw = base64.b64decode(entry["data"], validate=True)
    except Exception as exc:
        raise DataError(f"checkpoint block {name!r} has a corrupt payload: {exc}") from exc
    expected = int(np.prod(shape)) * 8
    if len(raw) != expected:
        raise DataError(
            f"checkpoint block {name!r} has {len(raw)} bytes, expected {expected}"
        )
    return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)


def _mlp_blocks(prefix: str, params: MlpParams, blocks: dict) -> None:
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        blocks[f"{prefix}.w{i}"] = w
        blocks[f"{prefix}.b{i}"] = b


def _mlp_from_blocks(prefix: str, layer_dims, activation: str, blocks: dict) -> MlpParams:
    dims = tuple(int(d) for d in layer_dims)
    ws, bs = [], []
    for i in range(len(dims) - 1):
        for key, dest in ((f"{prefix}.w{i}", ws), (f"{prefix}.b{i}", bs)):
            if key not in blocks:
                raise DataError(f"checkpoint is missing weight block {key!r}")
            dest.append(blocks[key])
    return MlpParams(dims, tuple(ws), tuple(bs), activation)


def checkpoint_from_model(model: NeuralOTModel) -> Checkpoint:
    blocks: dict = {}
    _mlp_blocks("map", model.map_params, blocks)
    _mlp_blocks("psi", model.potential_params, blocks)
    meta = {
        "dim": model.dim,
        "cost": model.cost,
        "map_layer_dims": list(model.map_params.layer_dims),
        "psi_layer_dims": list(model.potential_params.layer_dims),
        "map_activation": model.map_params.activation,
        "psi_activation": model.potential_params.activation,
    }
    return Checkpoint("neural_ot", meta, blocks)


def model_from_checkpoint(ckpt: Checkpoint) -> NeuralOTModel:
    if ckpt.kind != "neural_ot":
        raise DataError(f"expected a neural_ot checkpoint, got kind {ckpt.kind!r}")
    meta = ckpt.metadata
    for key in ("dim", "cost", "map_layer_dims", "psi_layer_dims",
                "map_activation", "psi_activation"):
        if key not in meta:
            raise DataError(f"checkpoint metadata is missing {key!r}")
    map_params = _mlp_from_blocks("map", meta["map_layer_dims"], meta["map_activation"], ckpt.blocks)
    psi_params = _mlp_from_blocks("psi", meta["psi_layer_dims"], meta["psi_activation"], ckpt.blocks)
    return NeuralOTModel(map_params, psi_params, int(meta["dim"]), meta["cost"])


def checkpoint_from_encoder(enc: CotEncoder) -> Checkpoint:
    blocks: dict = {}
    _mlp_blocks("body", enc.body, blocks)
    meta = {
        "dim": enc.dim,
        "body_layer_dims": list(enc.body.layer_dims),
        "body_activation": enc.body.activation,
        "n_freq": enc.n_freq,
        "sigma": enc.sigma,
        "n_times": enc.grid.n_times,
        "schedule": enc.grid.schedule,
        "mode_s": enc.grid.mode_s,
        "orientation": enc.orientation,
    }
    return Checkpoint("cot_encoder", meta, blocks)


def encoder_from_checkpoint(ckpt: Checkpoint) -> CotEncoder:
    if ckpt.kind != "cot_encoder":
        raise DataError(f"expected a cot_encoder checkpoint, got kind {ckpt.kind!r}")
    meta = ckpt.metadata
    for key in ("dim", "body_layer_dims", "body_activation", "n_freq", "sigma",
                "n_times", "schedule", "mode_s", "orientation"):
        if key not in meta:
            raise DataError(f"checkpoint metadata is missing {key!r}")
    body = _mlp_from_blocks("body", meta["body_layer_dims"], meta["body_activation"], ckpt.blocks)
    grid = TimeGrid(int(meta["n_times"]), meta["schedule"], float(meta["mode_s"]))
    return CotEncoder(body, int(meta["n_freq"]), grid, float(meta["sigma"]), meta["orientation"])


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": ckpt.kind,
        "metadata": ckpt.metadata,
        "blocks": {name: _encode_block(arr) for name, arr in ckpt.blocks.items()},
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, "r", encoding="ascii") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"checkpoint {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataError(f"checkpoint {path} has no top-level object")
    version = doc.get("format_version")
    if version is None:
        raise DataError("checkpoint is missing format_version")
    if version != FORMAT_VERSION:
        raise VersionError(
            f"checkpoint format_version {version} is not supported (expected {FORMAT_VERSION})"
        )
    for key in ("kind", "metadata", "blocks"):
        if key not in doc:
            raise DataError(f"checkpoint is missing {key!r}")
    blocks = {name: _decode_block(name, entry) for name, entry in doc["blocks"].items()}
    return Checkpoint(doc["kind"], doc["metadata"], blocks)

"""Model persistence and content checksums.

Checkpoints are JSON files with every float rendered as decimal text at
17 significant digits (lossless for 64-bit floats), so artifacts are
portable, diff-able and byte-stable: saving the same model twice yields
identical bytes.  The content checksum covers kind + meta + parameters
and is what pipeline stages compare to detect provenance mismatches.
"""

import hashlib
import json

import numpy as np

from . import foundation as fnd
from . import refurbish as rfb
from .autodiff import Tensor
from .errors import DataError, FormatError, ProvenanceError
from .layers import ConvLayerParams, MlpParams

FORMAT_VERSION = 1


def fmt17(x):
    return format(float(x), ".17g")


def array_to_text(arr):
    return " ".join(fmt17(v) for v in np.asarray(arr, dtype=np.float64).ravel())


def text_to_array(text, shape):
    flat = np.array([float(tok) for tok in text.split()], dtype=np.float64)
    if flat.size != int(np.prod(shape)):
        raise FormatError(
            f"array text has {flat.size} values, shape {shape} needs "
            f"{int(np.prod(shape))}"
        )
    if not np.isfinite(flat).all():
        raise DataError("checkpoint contains non-finite values")
    return flat.reshape(shape)


def _canonical_payload(kind, meta, named_arrays):
    params = {
        name: {"shape": list(arr.shape), "values": array_to_text(arr)}
        for name, arr in sorted(named_arrays.items())
    }
    return {"kind": kind, "meta": meta, "params": params}


def content_checksum(kind, meta, named_arrays):
    payload = _canonical_payload(kind, meta, named_arrays)
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def model_checksum(model):
    """Checksum of a foundation or refurbish model's current parameters."""
    kind, meta = _model_kind_meta(model)
    return content_checksum(kind, meta, model.named_parameters())


def save_checkpoint(path, kind, meta, named_arrays, config_snapshot):
    doc = _canonical_payload(kind, meta, named_arrays)
    doc["format_version"] = FORMAT_VERSION
    doc["checksum"] = content_checksum(kind, meta, named_arrays)
    doc["config"] = config_snapshot
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON ({exc})") from None
    for key in ("format_version", "kind", "meta", "params", "checksum"):
        if key not in doc:
            raise FormatError(f"{path}: missing checkpoint key '{key}'")
    if doc["format_version"] != FORMAT_VERSION:
        raise FormatError(
            f"{path}: unsupported format_version {doc['format_version']}"
        )
    arrays = {
        name: text_to_array(entry["values"], tuple(entry["shape"]))
        for name, entry in doc["params"].items()
    }
    actual = content_checksum(doc["kind"], doc["meta"], arrays)
    if actual != doc["checksum"]:
        raise ProvenanceError(
            f"{path}: stored checksum {doc['checksum'][:12]}... does not match "
            f"content {actual[:12]}..."
        )
    return doc["kind"], doc["meta"], arrays, doc.get("config", {})


def _model_kind_meta(model):
    if isinstance(model, fnd.FoundationModel):
        meta = {
            "in_channels": model.in_channels,
            "window_len": model.window_len,
            "out_dim": model.out_dim,
            "dilations": [layer.dilation for layer in model.shared],
            "tasks": sorted(model.heads),
            "frozen": bool(model.frozen),
        }
        return "foundation", meta
    if isinstance(model, rfb.RefurbishModel):
        meta = {
            "in_channels": model.in_channels,
            "window_len": model.window_len,
            "dilations": [layer.dilation for layer in model.conv_layers],
        }
        return "refurbish", meta
    raise FormatError(f"cannot checkpoint object of type {type(model).__name__}")


def save_model(path, model, config_snapshot):
    kind, meta = _model_kind_meta(model)
    save_checkpoint(path, kind, meta, model.named_parameters(), config_snapshot)


def load_model(path):
    """Rebuild a model from its checkpoint; returns (model, config_snapshot)."""
    kind, meta, arrays, config = load_checkpoint(path)
    if kind == "foundation":
        model = _foundation_from_arrays(meta, arrays)
    elif kind == "refurbish":
        model = _refurbish_from_arrays(meta, arrays)
    else:
        raise FormatError(f"{path}: unknown model kind '{kind}'")
    return model, config


def _conv_layers_from_arrays(prefix, dilations, arrays):
    layers_out = []
    for i, dilation in enumerate(dilations):
        layers_out.append(
            ConvLayerParams(
                kernel=Tensor(arrays[f"{prefix}.{i}.kernel"]),
                bias=Tensor(arrays[f"{prefix}.{i}.bias"]),
                dilation=int(dilation),
            )
        )
    return layers_out


def _foundation_from_arrays(meta, arrays):
    heads = {}
    for task in meta["tasks"]:
        heads[int(task)] = MlpParams(
            w1=Tensor(arrays[f"head.{task}.w1"]),
            b1=Tensor(arrays[f"head.{task}.b1"]),
            w2=Tensor(arrays[f"head.{task}.w2"]),
            b2=Tensor(arrays[f"head.{task}.b2"]),
        )
    model = fnd.FoundationModel(
        shared=_conv_layers_from_arrays("shared", meta["dilations"], arrays),
        heads=heads,
        in_channels=int(meta["in_channels"]),
        window_len=int(meta["window_len"]),
        out_dim=int(meta["out_dim"]),
    )
    if meta.get("frozen"):
        fnd.freeze(model)
    return model


def _refurbish_from_arrays(meta, arrays):
    model = rfb.RefurbishModel(
        conv_layers=_conv_layers_from_arrays("conv", meta["dilations"], arrays),
        out_w=Tensor(arrays["out.w"]),
        out_b=Tensor(arrays["out.b"]),
        in_channels=int(meta["in_channels"]),
        window_len=int(meta["window_len"]),
    )
    return model


def save_foundation_bundle(path, model, stats, config_snapshot):
    """Foundation checkpoint + the normalization stats the pipeline needs."""
    kind, meta = _model_kind_meta(model)
    arrays = dict(model.named_parameters())
    arrays["norm.mean"] = stats.mean
    arrays["norm.std"] = stats.std
    save_checkpoint(path, kind, meta, arrays, config_snapshot)


def load_foundation_bundle(path):
    """Returns (frozen-or-not model, NormalizationStats, config snapshot)."""
    from .datagen import NormalizationStats  # local: avoids an import cycle

    kind, meta, arrays, config = load_checkpoint(path)
    if kind != "foundation":
        raise FormatError(f"{path}: expected a foundation checkpoint, got '{kind}'")
    stats = NormalizationStats(mean=arrays.pop("norm.mean"),
                               std=arrays.pop("norm.std"))
    return _foundation_from_arrays(meta, arrays), stats, config

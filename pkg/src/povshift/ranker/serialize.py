"""Deterministic binary container for trained models.

Layout: 8-byte magic, little-endian uint32 header length, a UTF-8 JSON
header (sorted keys) and the raw little-endian array payloads in header
order.  No timestamps or archive metadata, so equal models give equal bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np
import torch

from .model import ModelConfig, ModelError, RankerNet, TrainedRanker
from .provider import EmbeddingProvider, get_provider

MAGIC = b"POVSHFT1"
FORMAT_VERSION = 1


def pack(kind: str, header: dict[str, Any], arrays: dict[str, np.ndarray], blobs: dict[str, bytes] | None = None) -> bytes:
    entries, payload, offset = [], [], 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        dt = a.dtype.newbyteorder("<") if a.dtype.byteorder not in ("|", "<") else a.dtype
        raw = a.astype(dt, copy=False).tobytes()
        entries.append({"name": name, "dtype": dt.str, "shape": list(a.shape), "offset": offset, "size": len(raw)})
        payload.append(raw)
        offset += len(raw)
    blob_entries = []
    for name in sorted(blobs or {}):
        raw = blobs[name]
        blob_entries.append({"name": name, "offset": offset, "size": len(raw)})
        payload.append(raw)
        offset += len(raw)
    head = dict(header, kind=kind, format_version=FORMAT_VERSION, arrays=entries, blobs=blob_entries)
    hb = json.dumps(head, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<I", len(hb)) + hb + b"".join(payload)


def unpack(data: bytes) -> tuple[dict, dict[str, np.ndarray], dict[str, bytes]]:
    if data[:8] != MAGIC:
        raise ModelError("not a povshift model file")
    (hlen,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + hlen].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise ModelError(f"unsupported model format version {header.get('format_version')}")
    base = 12 + hlen
    arrays = {}
    for e in header["arrays"]:
        raw = data[base + e["offset"]: base + e["offset"] + e["size"]]
        arrays[e["name"]] = np.frombuffer(raw, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    blobs = {e["name"]: data[base + e["offset"]: base + e["offset"] + e["size"]] for e in header["blobs"]}
    return header, arrays, blobs


def model_bytes(model: TrainedRanker) -> bytes:
    header = {
        "config": model.config.to_dict(),
        "provider": {"name": model.provider.name, "version": model.provider.version, "dim": model.provider.dim},
        "metadata": model.metadata,
    }
    return pack("ranker", header, model.state_arrays())


def save_model(model: TrainedRanker, path: str | Path) -> None:
    Path(path).write_bytes(model_bytes(model))


def load_model(path: str | Path, provider: EmbeddingProvider | None = None, force: bool = False) -> TrainedRanker:
    """Load a ranker; a provider whose version differs from the one the
    model was trained with is refused unless ``force``."""
    header, arrays, _ = unpack(Path(path).read_bytes())
    if header.get("kind") != "ranker":
        raise ModelError(f"model file holds a {header.get('kind')!r}, not a ranker")
    info = header["provider"]
    if provider is None:
        provider = get_provider(f"{info['name']}:{info['dim']}" if info["name"] == "hash" else info["name"])
    if provider.version != info["version"] and not force:
        raise ModelError(f"model was trained with provider {info['version']!r}, got {provider.version!r}")
    if provider.dim != info["dim"]:
        raise ModelError(f"provider dimension {provider.dim} differs from the model's {info['dim']}")
    config = ModelConfig.from_dict(header["config"])
    net = RankerNet(config, provider.dim)
    state = {k: torch.from_numpy(v) for k, v in arrays.items()}
    try:
        net.load_state_dict(state)
    except RuntimeError as exc:
        raise ModelError(f"parameter shapes do not match the configuration: {exc}") from exc
    net.eval()
    return TrainedRanker(config, provider, net, header.get("metadata"))

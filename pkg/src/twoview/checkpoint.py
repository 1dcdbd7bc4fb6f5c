"""Checkpoint files: a canonical JSON header followed by raw little-endian
32-bit float blocks.

Layout: 8 magic bytes, a little-endian uint64 header length, the UTF-8 JSON
header (sorted keys, no whitespace), then the payload.  The header lists
every block with its byte offset into the payload, so the format is readable
from any language without a serialization framework.  Vocabulary content
hashes (FNV-1a over the sorted names) bind a checkpoint to the dataset it
was trained on.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .kb import Vocab
from .model import CrossKind, ModelConfig, ModelParams
from .tensor_ops import AffineMap

MAGIC = b"TVKB0001"
FORMAT_VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def vocab_hash(vocab: Vocab) -> str:
    """Hex digest of FNV-1a over the NUL-joined sorted vocabulary names."""
    payload = b"\x00".join(name.encode("utf-8") for name in sorted(vocab.names))
    return f"{fnv1a_64(payload):016x}"


def _blocks_of(params: ModelParams) -> list[tuple[str, np.ndarray]]:
    blocks = [
        ("entities", params.entities),
        ("relations", params.relations),
        ("concepts", params.concepts),
        ("meta_relations", params.meta_relations),
    ]
    if params.ct_map is not None:
        blocks += [("ct_W", params.ct_map.W), ("ct_b", params.ct_map.b)]
    if params.ha_map is not None:
        blocks += [("ha_W", params.ha_map.W), ("ha_b", params.ha_map.b)]
    return blocks


def save_checkpoint(path, params: ModelParams, config: ModelConfig,
                    vocab_hashes: dict[str, str], seed: int, epoch: int) -> None:
    """Write parameters and header to ``path`` (atomic rename not needed:
    one writer per run)."""
    blocks = _blocks_of(params)
    block_meta = []
    offset = 0
    payloads = []
    for name, arr in blocks:
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        block_meta.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": "<f4",
            "offset": offset,
            "nbytes": len(data),
        })
        payloads.append(data)
        offset += len(data)
    header = {
        "format_version": FORMAT_VERSION,
        "variant": config.variant,
        "d_e": config.d_e,
        "d_c": config.d_c,
        "vocab_sizes": {
            "entities": params.entities.shape[0],
            "relations": params.relations.shape[0],
            "concepts": params.concepts.shape[0],
            "meta_relations": params.meta_relations.shape[0],
        },
        "vocab_hashes": vocab_hashes,
        "seed": seed,
        "epoch": epoch,
        "blocks": block_meta,
        "payload_nbytes": offset,
    }
    header_bytes = json.dumps(header, sort_keys=True,
                              separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for data in payloads:
            fh.write(data)


def load_checkpoint(path) -> tuple[ModelParams, ModelConfig, dict]:
    """Read a checkpoint, validating magic, sizes and payload length."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    (header_len,) = struct.unpack("<Q", raw[8:16])
    try:
        header = json.loads(raw[16:16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header ({exc})") from None
    payload = raw[16 + header_len:]
    if len(payload) != header["payload_nbytes"]:
        raise CheckpointError(
            f"{path}: payload is {len(payload)} bytes, header declares "
            f"{header['payload_nbytes']}")
    arrays = {}
    for meta in header["blocks"]:
        start, n = meta["offset"], meta["nbytes"]
        arr = np.frombuffer(payload[start:start + n], dtype=meta["dtype"])
        expected = int(np.prod(meta["shape"])) if meta["shape"] else 1
        if arr.size != expected:
            raise CheckpointError(
                f"{path}: block {meta['name']!r} has {arr.size} values, "
                f"shape {meta['shape']} needs {expected}")
        arrays[meta["name"]] = arr.reshape(meta["shape"]).copy()
    config = ModelConfig.from_variant(header["variant"], header["d_e"],
                                      header["d_c"])
    ct_map = None
    if config.cross == CrossKind.TRANSFORMATION:
        ct_map = AffineMap(arrays["ct_W"], arrays["ct_b"])
    ha_map = None
    if config.hierarchy_aware:
        ha_map = AffineMap(arrays["ha_W"], arrays["ha_b"])
    params = ModelParams(
        entities=arrays["entities"],
        relations=arrays["relations"],
        concepts=arrays["concepts"],
        meta_relations=arrays["meta_relations"],
        ct_map=ct_map,
        ha_map=ha_map,
    )
    return params, config, header


def check_vocab_hashes(header: dict, vocabs: dict[str, Vocab]) -> None:
    """Refuse to pair a checkpoint with a dataset it was not trained on."""
    for name, vocab in vocabs.items():
        expected = header["vocab_hashes"].get(name)
        actual = vocab_hash(vocab)
        if expected != actual:
            raise CheckpointError(
                f"vocabulary hash mismatch for {name!r}: checkpoint has "
                f"{expected}, dataset has {actual}")
        if header["vocab_sizes"].get(name) != len(vocab):
            raise CheckpointError(
                f"vocabulary size mismatch for {name!r}: checkpoint has "
                f"{header['vocab_sizes'].get(name)}, dataset has {len(vocab)}")

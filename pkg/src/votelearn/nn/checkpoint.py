"""Binary checkpoint format.

Byte layout (all integers little-endian)::

    magic        8 bytes   b"VLCKPT\\x00\\x01"
    config_len   uint32
    config       config_len bytes of UTF-8 JSON (the config block)
    n_tensors    uint32
    n_tensors times:
        name_len uint16
        name     name_len bytes UTF-8
        ndim     uint8
        dims     ndim x uint64
        values   prod(dims) x float64 (little-endian, C order)

Parameters are stored under ``param/<name>`` and optimizer slots under
``opt/<key>``. float32 models round-trip exactly because every float32 is
representable as a float64.
"""
from __future__ import annotations

import json
import os
import struct

import numpy as np

from ..errors import ParseError
from .models import Model, ModelConfig, build_model

MAGIC = b"VLCKPT\x00\x01"


def write_tensors(path, config: dict, tensors: dict):
    chunks = [MAGIC]
    blob = json.dumps(config, sort_keys=True).encode("utf-8")
    chunks.append(struct.pack("<I", len(blob)))
    chunks.append(blob)
    chunks.append(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(chunks))
    os.replace(tmp, path)


def read_tensors(path) -> tuple[dict, dict]:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:8] != MAGIC:
        raise ParseError(f"{path}: not a votelearn checkpoint (bad magic)")
    try:
        pos = 8
        (clen,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        config = json.loads(buf[pos:pos + clen].decode("utf-8"))
        pos += clen
        (count,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        tensors = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", buf, pos)
            pos += 2
            name = buf[pos:pos + nlen].decode("utf-8")
            pos += nlen
            (ndim,) = struct.unpack_from("<B", buf, pos)
            pos += 1
            dims = struct.unpack_from(f"<{ndim}Q", buf, pos)
            pos += 8 * ndim
            size = int(np.prod(dims, dtype=np.int64))
            arr = np.frombuffer(buf, dtype="<f8", count=size, offset=pos).reshape(dims)
            pos += 8 * size
            tensors[name] = arr.astype(np.float64)
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: truncated or corrupt checkpoint ({exc})") from None
    if pos != len(buf):
        raise ParseError(f"{path}: {len(buf) - pos} trailing bytes after the last tensor")
    return config, tensors


def save_checkpoint(path, model: Model, optimizer=None, meta: dict | None = None):
    config = {"format": 1, "model": model.config.to_dict(), "meta": meta or {}}
    tensors = {f"param/{k}": p.data for k, p in model.params.items()}
    if optimizer is not None:
        tensors.update({f"opt/{k}": v for k, v in optimizer.state().items()})
    write_tensors(path, config, tensors)


def load_checkpoint(path):
    """Return ``(model, optimizer_state, meta)``; ``optimizer_state`` may be empty."""
    config, tensors = read_tensors(path)
    mcfg = ModelConfig.from_dict(config["model"])
    model = build_model(mcfg)
    for name, p in model.params.items():
        key = f"param/{name}"
        if key not in tensors:
            raise ParseError(f"{path}: missing tensor {key}")
        if tensors[key].shape != p.data.shape:
            raise ParseError(f"{path}: tensor {key} has shape {tensors[key].shape}, expected {p.data.shape}")
        p.data = tensors[key].astype(mcfg.dtype)
    opt_state = {k[len("opt/"):]: v for k, v in tensors.items() if k.startswith("opt/")}
    return model, opt_state, config.get("meta", {})

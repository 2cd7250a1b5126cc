"""Checkpoint archive: named float64 arrays + optimizer state, version pspot-ckpt-v1.

Layout: magic line, a little-endian u32 JSON header length, the JSON header
(array directory, optimizer scalars, caller metadata), then raw array
payloads concatenated in directory order as little-endian 8-byte reals.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from .optim import OptimizerState

MAGIC = b"pspot-ckpt-v1\n"


class BadCheckpoint(ValueError):
    """File is not a readable pspot-ckpt-v1 archive."""


def _directory(arrays: dict[str, np.ndarray]):
    return [{"name": k, "shape": list(v.shape)} for k, v in arrays.items()]


def save_checkpoint(path, params: dict[str, np.ndarray],
                    optimizer: OptimizerState | None = None,
                    meta: dict | None = None):
    arrays = {f"param.{k}": np.asarray(v, dtype=np.float64) for k, v in params.items()}
    opt_header = None
    if optimizer is not None:
        opt_header = {
            "algo": optimizer.algo,
            "lr": optimizer.lr,
            "beta1": optimizer.beta1,
            "beta2": optimizer.beta2,
            "eps": optimizer.eps,
            "step_count": optimizer.step_count,
        }
        for k, v in optimizer.m.items():
            arrays[f"opt.m.{k}"] = np.asarray(v, dtype=np.float64)
        for k, v in optimizer.v.items():
            arrays[f"opt.v.{k}"] = np.asarray(v, dtype=np.float64)
    header = {
        "arrays": _directory(arrays),
        "optimizer": opt_header,
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for v in arrays.values():
            f.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Return (params, optimizer_state_or_None, meta)."""
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise BadCheckpoint(f"{path}: bad magic {magic!r}")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        arrays = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = f.read(8 * count)
            if len(buf) != 8 * count:
                raise BadCheckpoint(f"{path}: truncated payload for {entry['name']}")
            arrays[entry["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64)
    params = {k[len("param."):]: v for k, v in arrays.items() if k.startswith("param.")}
    opt = None
    if header.get("optimizer"):
        oh = header["optimizer"]
        opt = OptimizerState(oh["algo"], oh["lr"], oh["beta1"], oh["beta2"], oh["eps"],
                             oh["step_count"])
        opt.m = {k[len("opt.m."):]: v for k, v in arrays.items() if k.startswith("opt.m.")}
        opt.v = {k[len("opt.v."):]: v for k, v in arrays.items() if k.startswith("opt.v.")}
    return params, opt, header.get("meta", {})

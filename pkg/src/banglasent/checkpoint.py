"""Binary tensor archives: model checkpoints and optimizer-state sidecars.

File layout: 4-byte magic ``BSNN`` | uint32 LE manifest length | canonical
JSON manifest | concatenated float64 LE tensor payloads in manifest order.
The manifest records every tensor's shape plus a SHA-256 of the payload, so
truncation and corruption are detected on load and save -> load -> save
round-trips are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .recurrent import LstmParams, ModelParams

__all__ = [
    "write_archive",
    "read_archive",
    "save_checkpoint",
    "load_checkpoint",
    "save_optimizer_state",
    "load_optimizer_state",
    "params_checksum",
]

_MAGIC = b"BSNN"


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_archive(path, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    """Write named float64 tensors with a JSON manifest and payload checksum."""
    payload = b"".join(
        np.ascontiguousarray(t, dtype="<f8").tobytes() for t in tensors.values()
    )
    manifest = {
        "meta": meta,
        "tensors": [
            {"name": name, "shape": list(t.shape)} for name, t in tensors.items()
        ],
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    manifest_bytes = _canonical_json(manifest)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(manifest_bytes)))
        fh.write(manifest_bytes)
        fh.write(payload)


def read_archive(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read an archive back; raises ValueError on corruption or truncation."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise ValueError(f"{path}: not a tensor archive")
    (manifest_len,) = struct.unpack("<I", blob[4:8])
    manifest = json.loads(blob[8 : 8 + manifest_len].decode("utf-8"))
    payload = blob[8 + manifest_len :]
    digest = hashlib.sha256(payload).hexdigest()
    if digest != manifest["payload_sha256"]:
        raise ValueError(f"{path}: payload checksum mismatch (corrupt or truncated)")
    tensors: dict[str, np.ndarray] = {}
    offset = 0
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        chunk = payload[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise ValueError(f"{path}: payload too short for tensor {entry['name']!r}")
        tensors[entry["name"]] = (
            np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        )
        offset += nbytes
    if offset != len(payload):
        raise ValueError(f"{path}: {len(payload) - offset} trailing payload bytes")
    return manifest["meta"], tensors


def save_checkpoint(params: ModelParams, path) -> None:
    """Persist a model; shapes and flags travel in the manifest."""
    write_archive(path, {"kind": "model", "hyper": params.hyper()}, params.tensors())


def load_checkpoint(path, like: ModelParams | None = None) -> ModelParams:
    """Rebuild a model from an archive.

    With ``like`` given, every tensor shape is validated against that
    configuration first and a mismatch error names the offending tensor.
    """
    meta, tensors = read_archive(path)
    if meta.get("kind") != "model":
        raise ValueError(f"{path}: archive holds {meta.get('kind')!r}, not a model")
    hyper = meta["hyper"]
    if like is not None:
        expected = like.tensors()
        if set(expected) != set(tensors):
            missing = sorted(set(expected).symmetric_difference(tensors))
            raise ValueError(f"{path}: tensor set mismatch: {missing}")
        for name, ref in expected.items():
            if tensors[name].shape != ref.shape:
                raise ValueError(
                    f"{path}: tensor {name!r} has shape "
                    f"{tensors[name].shape}, expected {ref.shape}"
                )
    bias_names = ("b_i", "b_f", "b_c", "b_o")
    use_bias = bool(hyper.get("use_bias", False))
    lstm = LstmParams(
        w_xi=tensors["w_xi"], w_hi=tensors["w_hi"], w_ci=tensors["w_ci"],
        w_xf=tensors["w_xf"], w_hf=tensors["w_hf"], w_cf=tensors["w_cf"],
        w_xc=tensors["w_xc"], w_hc=tensors["w_hc"],
        w_xo=tensors["w_xo"], w_ho=tensors["w_ho"], w_co=tensors["w_co"],
        **{n: (tensors[n] if use_bias else None) for n in bias_names},
        peephole_cell=hyper.get("peephole_cell", "new"),
    )
    return ModelParams(
        embedding=tensors["embedding"],
        lstm=lstm,
        head_w=tensors["head_w"],
        head_b=tensors["head_b"],
        n_out=int(hyper["n_out"]),
        dropout_rate=float(hyper["dropout_rate"]),
    )


def save_optimizer_state(path, state: dict[str, np.ndarray], meta: dict) -> None:
    """Sidecar for optimizer moment buffers, same archive scheme."""
    write_archive(path, {"kind": "optimizer", **meta}, state)


def load_optimizer_state(path) -> tuple[dict, dict[str, np.ndarray]]:
    meta, tensors = read_archive(path)
    if meta.get("kind") != "optimizer":
        raise ValueError(f"{path}: archive holds {meta.get('kind')!r}, not optimizer state")
    return meta, tensors


def params_checksum(params: ModelParams, only: tuple[str, ...] | None = None) -> str:
    """SHA-256 over model tensor bytes in checkpoint order.

    Optimizer buffers never enter the digest. ``only`` restricts the digest
    to a subset of tensor names (e.g. everything except the head).
    """
    digest = hashlib.sha256()
    for name, tensor in params.tensors().items():
        if only is not None and name not in only:
            continue
        digest.update(name.encode("utf-8"))
        digest.update(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    return digest.hexdigest()

"""Self-describing binary checkpoints: version byte, JSON header, raw float64 payloads."""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Corrupt or incompatible checkpoint file."""


def save_checkpoint(path: str, params: dict[str, np.ndarray], config: dict) -> None:
    """Write parameters and a config echo atomically.

    Layout: 1 version byte, 8-byte little-endian header length, UTF-8 JSON
    header (parameter names + shapes in payload order, config echo), then the
    concatenated little-endian float64 payloads.
    """
    header = {
        "params": [{"name": name, "shape": list(arr.shape)} for name, arr in params.items()],
        "config": config,
    }
    header_bytes = json.dumps(header, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(bytes([FORMAT_VERSION]))
            fh.write(struct.pack("<Q", len(header_bytes)))
            fh.write(header_bytes)
            for arr in params.values():
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 9:
        raise CheckpointError("checkpoint truncated before header")
    if blob[0] != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {blob[0]} (expected {FORMAT_VERSION})")
    (header_len,) = struct.unpack("<Q", blob[1:9])
    header_end = 9 + header_len
    if len(blob) < header_end:
        raise CheckpointError("checkpoint truncated inside header")
    try:
        header = json.loads(blob[9:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc

    params: dict[str, np.ndarray] = {}
    offset = header_end
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if len(blob) < offset + nbytes:
            raise CheckpointError(f"checkpoint truncated inside payload of {entry['name']!r}")
        params[entry["name"]] = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError(f"{len(blob) - offset} trailing bytes after last payload")
    return params, header["config"]

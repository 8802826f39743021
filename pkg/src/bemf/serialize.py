"""Deterministic binary container for trained models.

Layout: an 8-byte magic, an 8-byte little-endian header length, a compact
JSON header (sorted keys), then each array's raw bytes in the header's
listed order (C order, little endian). Writing the same model twice gives
byte-identical files, which makes reproducibility checkable with a plain
file hash; zip-based formats stamp timestamps and lose that property.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"BEMFBIN1"

_DTYPES = {"float64": "<f8", "int64": "<i8"}


def save_container(path, kind: str, metadata: dict, arrays: dict) -> None:
    """Write a model container.

    Args:
        path: output file path.
        kind: model family tag, e.g. "bemf" or "knn-user".
        metadata: JSON-serializable model description.
        arrays: name -> float64/int64 ndarray; stored in sorted name order.
    """
    entries = []
    blobs = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype == np.float64:
            dtype = "float64"
        elif arr.dtype == np.int64:
            dtype = "int64"
        else:
            raise ValueError(f"array {name!r} has unsupported dtype {arr.dtype}")
        entries.append({"name": name, "dtype": dtype, "shape": list(arr.shape)})
        blobs.append(arr.astype(_DTYPES[dtype], copy=False).tobytes(order="C"))
    header = json.dumps(
        {"kind": kind, "metadata": metadata, "arrays": entries},
        sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_container(path) -> tuple:
    """Read a container back as (kind, metadata, arrays)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a bemf model file")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        arrays = {}
        for entry in header["arrays"]:
            dtype = np.dtype(_DTYPES[entry["dtype"]])
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * dtype.itemsize)
            if len(raw) != count * dtype.itemsize:
                raise ValueError(f"{path}: truncated array {entry['name']!r}")
            arr = np.frombuffer(raw, dtype=dtype).reshape(shape)
            arrays[entry["name"]] = arr.astype(entry["dtype"])  # writable copy
    return header["kind"], header["metadata"], arrays

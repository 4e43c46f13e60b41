"""Deterministic single-file container for named arrays plus JSON metadata.

Zip-based formats embed wall-clock timestamps, which breaks byte-identical
re-runs; this format is a sorted JSON header line followed by raw
little-endian C-order array bytes, so identical content always produces
identical files.
"""

from __future__ import annotations

import json

import numpy as np

MAGIC = "measpike-bundle"
VERSION = 1


def save_bundle(path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    entries = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        entries.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)})
        blobs.append(arr.tobytes(order="C"))
    header = {"format": MAGIC, "version": VERSION, "meta": meta, "arrays": entries}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for blob in blobs:
            fh.write(blob)


def load_bundle(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != MAGIC or header.get("version") != VERSION:
            raise ValueError(f"{path}: not a supported bundle file")
        arrays = {}
        for entry in header["arrays"]:
            dtype = np.dtype(entry["dtype"])
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = fh.read(count * dtype.itemsize)
            arrays[entry["name"]] = np.frombuffer(data, dtype=dtype).reshape(shape).copy()
    return header["meta"], arrays

"""Binary container for named numpy arrays plus a JSON header.

Layout: a little-endian u32 header length, the UTF-8 JSON header, then the
raw array bytes concatenated in the order listed by the header's manifest.
All arrays are stored little-endian; the header carries a mandatory version.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1

_DTYPES = {
    "float32": "<f4",
    "float64": "<f8",
    "int64": "<i8",
}


def save_arrays(path: str | Path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    """Write named arrays and a JSON-able metadata dict to one file."""
    path = Path(path)
    manifest = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        kind = arr.dtype.name
        if kind not in _DTYPES:
            raise TypeError(f"array {name!r}: unsupported dtype {arr.dtype}")
        blob = np.ascontiguousarray(arr.astype(_DTYPES[kind], copy=False)).tobytes()
        manifest.append({"name": name, "dtype": kind, "shape": list(arr.shape)})
        blobs.append(blob)
    header = {"version": FORMAT_VERSION, "arrays": manifest, "meta": meta}
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)


def load_arrays(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    """Read back arrays and metadata written by save_arrays."""
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read(4)
        if len(raw) < 4:
            raise ValueError(f"{path}: truncated header length")
        (hlen,) = struct.unpack("<I", raw)
        header_bytes = fh.read(hlen)
        if len(header_bytes) < hlen:
            raise ValueError(f"{path}: truncated header")
        header = json.loads(header_bytes.decode("utf-8"))
        version = header.get("version")
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported container version {version!r}")
        arrays = {}
        for entry in header["arrays"]:
            dtype = np.dtype(_DTYPES[entry["dtype"]])
            count = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
            blob = fh.read(count * dtype.itemsize)
            if len(blob) != count * dtype.itemsize:
                raise ValueError(f"{path}: truncated array {entry['name']!r}")
            arr = np.frombuffer(blob, dtype=dtype).reshape(entry["shape"])
            arrays[entry["name"]] = arr.astype(entry["dtype"], copy=True)
    return arrays, header.get("meta", {})

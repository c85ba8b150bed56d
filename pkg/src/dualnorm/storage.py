"""On-disk formats: length-prefixed float64 arrays and the snapshot store."""
from __future__ import annotations

import hashlib
import json
import struct
import threading
from pathlib import Path

import numpy as np


def write_array(path, arr) -> None:
    """8-byte little-endian length header, then little-endian float64 data."""
    arr = np.ascontiguousarray(arr, dtype="<f8").ravel()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", arr.size))
        fh.write(arr.tobytes())


def read_array(path) -> np.ndarray:
    with open(path, "rb") as fh:
        (n,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(8 * n), dtype="<f8")
    if data.size != n:
        raise OSError(f"{path}: truncated array ({data.size} of {n} values)")
    return data.astype(float)


def write_matrix_bundle(directory, arrays: dict, meta: dict) -> None:
    """Persist named arrays (shape kept in the metadata) plus a JSON header."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    shapes = {}
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=float)
        shapes[name] = list(arr.shape)
        write_array(d / f"{name}.bin", arr)
    header = dict(meta)
    header["shapes"] = shapes
    (d / "meta.json").write_text(json.dumps(header, indent=1, sort_keys=True))


def read_matrix_bundle(directory):
    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    arrays = {name: read_array(d / f"{name}.bin").reshape(shape) for name, shape in meta["shapes"].items()}
    return arrays, meta


def mu_key(mu) -> str:
    return ",".join(f"{float(v):.17g}" for v in np.asarray(mu).ravel())


class SnapshotStore:
    """One binary file per snapshot, indexed by the 17-digit printout of mu.

    Reads are lock-free; writes (file + index line) are serialized.
    """

    def __init__(self, root, namespace: str):
        self.root = Path(root) / namespace
        self.root.mkdir(parents=True, exist_ok=True)
        self.index_path = self.root / "index.txt"
        self._lock = threading.Lock()
        self._index = {}
        if self.index_path.exists():
            for line in self.index_path.read_text().splitlines():
                if line.strip():
                    key, fname = line.split("\t")
                    self._index[key] = fname
        self.writes = 0

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, mu) -> bool:
        return mu_key(mu) in self._index

    def get(self, mu):
        fname = self._index.get(mu_key(mu))
        if fname is None:
            return None
        return read_array(self.root / fname)

    def put(self, mu, values) -> None:
        key = mu_key(mu)
        fname = hashlib.sha1(key.encode()).hexdigest()[:20] + ".bin"
        with self._lock:
            if key in self._index:
                return
            try:
                write_array(self.root / fname, values)
                with open(self.index_path, "a") as fh:
                    fh.write(f"{key}\t{fname}\n")
            except OSError as exc:
                raise OSError(f"failed writing snapshot to {self.root / fname}: {exc}") from exc
            self._index[key] = fname
            self.writes += 1

    def digest(self) -> str:
        h = hashlib.sha256()
        for key in sorted(self._index):
            h.update(key.encode())
            h.update((self.root / self._index[key]).read_bytes())
        return h.hexdigest()[:16]

"""On-disk store of synthesized log-price paths.

Binary layout (all little-endian)::

    offset 0   8 bytes   magic  b"SHDWPATH"
    offset 8   uint32    format version (1)
    offset 12  uint64    count  (number of paths)
    offset 20  uint64    N      (samples per path)
    offset 28  float64   count x N path values, row-major
    then       count records of 17 bytes: uint64 seed, float64 final_loss,
               uint8 converged

The path block is memory-mapped on load, so a dataset larger than RAM can be
scanned shard by shard.
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["DatasetWriter", "MAGIC", "PathDataset", "WindowSpec", "load_dataset", "save_dataset"]

MAGIC = b"SHDWPATH"
VERSION = 1
_HEADER = struct.Struct("<8sIQQ")
META_DTYPE = np.dtype([("seed", "<u8"), ("final_loss", "<f8"), ("converged", "u1")], align=False)


@dataclass(frozen=True)
class WindowSpec:
    """How paths are cut into (past, future) windows.

    A window anchored at present index ``t`` spans ``x[t - P] .. x[t + F]``:
    ``P + 1`` past samples (``P`` increments, enough for a lag-``P`` embedding)
    and ``F`` future increments. Anchors run over every admissible ``t`` with
    the given stride. The layout is a scan-time choice and is not stored on disk.
    """

    past_length: int = 126
    future_length: int = 150
    stride: int = 1

    def __post_init__(self):
        if self.past_length < 1 or self.future_length < 1 or self.stride < 1:
            raise ValueError("past_length, future_length and stride must be positive")

    @property
    def span(self) -> int:
        return self.past_length + self.future_length + 1

    def anchors(self, N: int) -> np.ndarray:
        """Present indices t of all windows in a path of length N."""
        if N < self.span:
            raise ValueError(f"paths of length {N} are shorter than a window ({self.span} samples)")
        return np.arange(self.past_length, N - self.future_length, self.stride)


@dataclass(eq=False)
class PathDataset:
    paths: np.ndarray
    seeds: np.ndarray
    final_loss: np.ndarray
    converged: np.ndarray
    window: WindowSpec = WindowSpec()

    def __post_init__(self):
        if not isinstance(self.paths, np.memmap):
            self.paths = np.asarray(self.paths, dtype=float)
        if self.paths.ndim != 2:
            raise ValueError("paths must be a (count, N) array")
        n = len(self.paths)
        self.seeds = np.asarray(self.seeds, dtype=np.uint64).reshape(n)
        self.final_loss = np.asarray(self.final_loss, dtype=float).reshape(n)
        self.converged = np.asarray(self.converged, dtype=bool).reshape(n)

    @classmethod
    def from_paths(cls, paths, window: WindowSpec = WindowSpec()) -> "PathDataset":
        """Wrap raw paths (e.g. simulated, not synthesized) with empty metadata."""
        paths = np.atleast_2d(np.asarray(paths, dtype=float))
        n = len(paths)
        return cls(paths, np.arange(n), np.zeros(n), np.ones(n, dtype=bool), window)

    @property
    def count(self) -> int:
        return self.paths.shape[0]

    @property
    def N(self) -> int:
        return self.paths.shape[1]

    @property
    def num_windows(self) -> int:
        return self.count * len(self.window.anchors(self.N))

    def with_window(self, window: WindowSpec) -> "PathDataset":
        return PathDataset(self.paths, self.seeds, self.final_loss, self.converged, window)

    def subset(self, rows) -> "PathDataset":
        rows = np.asarray(rows)
        return PathDataset(self.paths[rows], self.seeds[rows], self.final_loss[rows], self.converged[rows], self.window)

    def scaled(self, factor: float) -> "PathDataset":
        return PathDataset(self.paths * factor, self.seeds, self.final_loss, self.converged, self.window)


def save_dataset(dataset: PathDataset, path) -> None:
    with DatasetWriter(path, dataset.N) as w:
        for row, s, l, c in zip(dataset.paths, dataset.seeds, dataset.final_loss, dataset.converged):
            w.append(row, int(s), float(l), bool(c))


def load_dataset(path, mmap: bool = True, window: WindowSpec = WindowSpec()) -> PathDataset:
    path = Path(path)
    with path.open("rb") as f:
        raw = f.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, count, n = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a path dataset (bad magic {magic!r})")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + count * n * 8 + count * META_DTYPE.itemsize
    if path.stat().st_size != expected:
        raise ValueError(f"{path}: size {path.stat().st_size} does not match header ({expected})")
    if mmap and count:
        paths = np.memmap(path, dtype="<f8", mode="r", offset=_HEADER.size, shape=(count, n))
    else:
        paths = np.fromfile(path, dtype="<f8", count=count * n, offset=_HEADER.size).reshape(count, n)
    meta = np.fromfile(path, dtype=META_DTYPE, count=count, offset=_HEADER.size + count * n * 8)
    return PathDataset(paths, meta["seed"], meta["final_loss"], meta["converged"].astype(bool), window)


class DatasetWriter:
    """Append paths one at a time; metadata and the final count are written on close.

    ``append`` is serialized with a lock so that worker threads can share one writer.
    """

    def __init__(self, path, N: int):
        self.path = Path(path)
        self.N = int(N)
        self._meta: list[tuple[int, float, int]] = []
        self._lock = threading.Lock()
        self._f = self.path.open("wb")
        self._f.write(_HEADER.pack(MAGIC, VERSION, 0, self.N))

    def append(self, path_values, seed: int, final_loss: float, converged: bool) -> None:
        row = np.ascontiguousarray(path_values, dtype="<f8")
        if row.shape != (self.N,):
            raise ValueError(f"expected a path of length {self.N}, got {row.shape}")
        with self._lock:
            self._f.write(row.tobytes())
            self._meta.append((seed, final_loss, int(converged)))

    def close(self) -> None:
        if self._f.closed:
            return
        meta = np.array(self._meta, dtype=META_DTYPE)
        self._f.write(meta.tobytes())
        self._f.seek(0)
        self._f.write(_HEADER.pack(MAGIC, VERSION, len(self._meta), self.N))
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
